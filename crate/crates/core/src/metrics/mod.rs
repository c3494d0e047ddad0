//! Full-reference (PSNR, SSIM) and no-reference (NIQE) image quality
//! metrics, plus percentile confidence intervals over per-image scores.

mod aggd;
mod ci;
mod niqe;
mod psnr;
mod ssim;

pub use aggd::{fit_aggd, AggdFit};
pub use ci::{aggregate_ci, CiSummary, MetricReport};
pub use niqe::{
    fit_niqe_model, niqe, niqe_distance, patch_features, NiqeModel, DEFAULT_PATCH_SIZE,
    NIQE_FEATURES,
};
pub use psnr::{psnr, PSNR_CAP_DB};
pub use ssim::{luminance, ssim};
