//! Command implementations behind the `lcs` binary.
//!
//! Every command returns `anyhow::Result`; [`exit_code`] maps a failure to
//! the process exit status (3 for I/O failures, 2 for everything else).

pub mod commands;
mod engine;
mod files;

pub use engine::Engine;
pub use files::{list_pngs, output_name};

use lcs_core::LcsError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FORMAT: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Exit status for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<LcsError>() {
            return match e {
                LcsError::Io(_) => EXIT_IO,
                _ => EXIT_FORMAT,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_FORMAT
}

/// Caps the global worker pool at `LCS_THREADS` when the variable is set.
pub fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("LCS_THREADS") else {
        return Ok(());
    };
    let cap: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        LcsError::Config(format!(
            "LCS_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    let threads = cap.min(std::thread::available_parallelism().map_or(cap, |n| n.get()));
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| LcsError::Config(format!("cannot configure worker pool: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn exit_codes_follow_the_error_class() {
        let io = anyhow::Error::from(LcsError::Io(std::io::Error::other("disk")));
        assert_eq!(exit_code(&io), EXIT_IO);
        let fmt = anyhow::Error::from(LcsError::Format("bad".into())).context("reading x");
        assert_eq!(exit_code(&fmt), EXIT_FORMAT);
        let raw: anyhow::Result<()> = Err(std::io::Error::other("raw")).context("opening");
        assert_eq!(exit_code(&raw.unwrap_err()), EXIT_IO);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), EXIT_FORMAT);
    }
}
