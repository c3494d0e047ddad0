//! One module per subcommand. Each `run` performs the work and returns a
//! summary; printing is left to the binary.

pub mod bench;
pub mod convert;
pub mod eval;
pub mod fit_niqe;
pub mod init;
pub mod upscale;
