use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lcs_core::io::{read_png, write_png};

use crate::{exit_code, list_pngs, output_name, Engine};

/// Files written and per-file failures (with their exit status).
#[derive(Debug, Default)]
pub struct UpscaleOutcome {
    pub written: Vec<PathBuf>,
    pub failures: Vec<(PathBuf, i32, String)>,
}

impl UpscaleOutcome {
    /// Status of the first failure, or 0.
    pub fn exit_code(&self) -> i32 {
        self.failures.first().map_or(crate::EXIT_OK, |f| f.1)
    }
}

/// Upscales one PNG or every PNG in a directory into `out_dir` as
/// `<name>_x{scale}.png`. A failing file is recorded and the rest are
/// still processed.
pub fn run(weights: &Path, input: &Path, out_dir: &Path) -> Result<UpscaleOutcome> {
    let engine = Engine::load(weights)?;
    let inputs = if input.is_dir() {
        list_pngs(input)?
    } else if input.is_file() {
        vec![input.to_path_buf()]
    } else {
        return Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "no such file or directory",
        ))
        .with_context(|| format!("input {}", input.display()));
    };
    if inputs.is_empty() {
        log::warn!("no PNG files in {}", input.display());
        return Ok(UpscaleOutcome::default());
    }
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut outcome = UpscaleOutcome::default();
    for path in inputs {
        let target = out_dir.join(output_name(&path, engine.config.scale));
        let result = (|| -> Result<()> {
            let lr = read_png(&path).with_context(|| format!("reading {}", path.display()))?;
            let sr = engine
                .upscale(&lr)
                .with_context(|| format!("upscaling {}", path.display()))?;
            write_png(&target, &sr).with_context(|| format!("writing {}", target.display()))?;
            Ok(())
        })();
        match result {
            Ok(()) => {
                log::info!("{} -> {}", path.display(), target.display());
                outcome.written.push(target);
            }
            Err(e) => {
                log::error!("{e:#}");
                outcome
                    .failures
                    .push((path, exit_code(&e), format!("{e:#}")));
            }
        }
    }
    Ok(outcome)
}
