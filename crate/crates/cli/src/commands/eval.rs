use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use lcs_core::io::{read_niqe_model, read_png};
use lcs_core::metrics::{niqe, psnr, ssim, MetricReport, NiqeModel};
use lcs_core::LcsError;
use serde::Serialize;

use crate::files::file_name;
use crate::{list_pngs, Engine};

/// One JSON line per (image, metric).
#[derive(Debug, Serialize)]
struct ImageRecord<'a> {
    image: &'a str,
    metric: &'a str,
    score: f64,
}

/// One JSON line per metric.
#[derive(Debug, Serialize)]
struct AggregateRecord<'a> {
    metric: &'a str,
    mean: f64,
    lo: f64,
    hi: f64,
    level: f64,
    n: usize,
}

/// Upscales every LR image that has an equally named HR partner of the
/// right size, scores it and writes a JSON-lines report. Returns one
/// [`MetricReport`] per metric (psnr, ssim, then niqe when a model is given).
pub fn run(
    weights: &Path,
    lr_dir: &Path,
    hr_dir: &Path,
    niqe_model: Option<&Path>,
    report: &Path,
    level: f64,
) -> Result<Vec<MetricReport>> {
    let engine = Engine::load(weights)?;
    let model: Option<NiqeModel> = niqe_model
        .map(|p| -> Result<NiqeModel> {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            read_niqe_model(&bytes).with_context(|| format!("loading {}", p.display()))
        })
        .transpose()?;

    let lr_files = list_pngs(lr_dir)?;
    let hr_names: Vec<String> = list_pngs(hr_dir)?.iter().map(|p| file_name(p)).collect();
    for name in &hr_names {
        if !lr_files.iter().any(|p| &file_name(p) == name) {
            log::warn!("{name}: no LR image, skipped");
        }
    }

    let mut scores: BTreeMap<&str, Vec<(String, f64)>> = BTreeMap::new();
    let mut matched = 0;
    for lr_path in &lr_files {
        let name = file_name(lr_path);
        if !hr_names.contains(&name) {
            log::warn!("{name}: no HR image, skipped");
            continue;
        }
        let pair = (|| -> Result<_> {
            let lr = read_png(lr_path).with_context(|| format!("reading {}", lr_path.display()))?;
            let hr_path = hr_dir.join(&name);
            let hr =
                read_png(&hr_path).with_context(|| format!("reading {}", hr_path.display()))?;
            let s = engine.config.scale;
            if hr.dims() != [1, 3, lr.h() * s, lr.w() * s] {
                return Err(LcsError::Shape(format!(
                    "HR is {}x{}, expected {}x{}",
                    hr.w(),
                    hr.h(),
                    lr.w() * s,
                    lr.h() * s
                ))
                .into());
            }
            Ok((lr, hr))
        })();
        let (lr, hr) = match pair {
            Ok(p) => p,
            Err(e) => {
                log::warn!("{name}: {e:#}; skipped");
                continue;
            }
        };
        matched += 1;
        let sr = engine
            .upscale(&lr)
            .with_context(|| format!("upscaling {name}"))?;
        scores
            .entry("psnr")
            .or_default()
            .push((name.clone(), psnr(&sr, &hr, 1.0)?));
        scores
            .entry("ssim")
            .or_default()
            .push((name.clone(), ssim(&sr, &hr)?));
        if let Some(m) = &model {
            match niqe(&sr, m) {
                Ok(v) => scores.entry("niqe").or_default().push((name.clone(), v)),
                Err(e) => log::warn!("{name}: NIQE not computed: {e}"),
            }
        }
    }
    if matched == 0 {
        return Err(LcsError::Data(format!(
            "no matching LR/HR pairs between {} and {}",
            lr_dir.display(),
            hr_dir.display()
        ))
        .into());
    }

    let mut reports = Vec::new();
    for metric in ["psnr", "ssim", "niqe"] {
        if let Some(per_image) = scores.remove(metric) {
            reports.push(MetricReport::new(metric, per_image, level)?);
        }
    }
    write_report(report, &reports).with_context(|| format!("writing {}", report.display()))?;
    Ok(reports)
}

fn write_report(path: &Path, reports: &[MetricReport]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in reports {
        for (image, score) in &r.per_image {
            let rec = ImageRecord {
                image,
                metric: &r.metric,
                score: *score,
            };
            writeln!(out, "{}", serde_json::to_string(&rec)?)?;
        }
    }
    for r in reports {
        let rec = AggregateRecord {
            metric: &r.metric,
            mean: r.mean,
            lo: r.lo,
            hi: r.hi,
            level: r.level,
            n: r.per_image.len(),
        };
        writeln!(out, "{}", serde_json::to_string(&rec)?)?;
    }
    out.flush()?;
    Ok(())
}
