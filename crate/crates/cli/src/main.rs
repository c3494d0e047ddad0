use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use lcs_cli::commands::{bench, convert, eval, fit_niqe, init, upscale};
use lcs_cli::{configure_threads, exit_code, EXIT_OK};
use lcs_core::io::Dtype;
use lcs_core::metrics::DEFAULT_PATCH_SIZE;

/// LCS super-resolution engine.
#[derive(Parser)]
#[command(name = "lcs", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Upscale a PNG or a directory of PNGs into <output-dir>/<name>_x<scale>.png.
    Upscale {
        weights: PathBuf,
        input: PathBuf,
        output_dir: PathBuf,
    },
    /// Merge a full FP32 container into its reparameterized form.
    Convert {
        input: PathBuf,
        output: PathBuf,
        /// Also quantize the merged weights to INT8.
        #[arg(long)]
        quantize: bool,
    },
    /// Same as `convert --quantize`.
    Quantize { input: PathBuf, output: PathBuf },
    /// Score upscaled LR images against equally named HR images.
    Eval {
        weights: PathBuf,
        lr_dir: PathBuf,
        hr_dir: PathBuf,
        /// JSON-lines report path.
        #[arg(long)]
        report: PathBuf,
        /// Pristine NIQE model; enables NIQE scoring.
        #[arg(long)]
        niqe_model: Option<PathBuf>,
        /// Confidence level of the reported interval.
        #[arg(long, default_value_t = 0.68)]
        level: f64,
    },
    /// Report parameters, MACs and forward latency.
    Bench {
        weights: PathBuf,
        #[arg(long, default_value_t = 720)]
        height: usize,
        #[arg(long, default_value_t = 960)]
        width: usize,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long, default_value_t = 3)]
        warmup: usize,
    },
    /// Fit a pristine NIQE model on a directory of PNGs.
    FitNiqe {
        corpus_dir: PathBuf,
        model_out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
        patch_size: usize,
    },
    /// Write a default-configuration FP32 container with seeded random weights.
    Init {
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// All-zero weights instead of random ones.
        #[arg(long)]
        zeros: bool,
    },
}

fn dtype_name(d: Dtype) -> &'static str {
    match d {
        Dtype::Fp32 => "fp32",
        Dtype::Int8 => "int8",
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Upscale {
            weights,
            input,
            output_dir,
        } => {
            let outcome = upscale::run(&weights, &input, &output_dir)?;
            for path in &outcome.written {
                println!("{}", path.display());
            }
            Ok(outcome.exit_code())
        }
        Command::Convert {
            input,
            output,
            quantize,
        } => run_convert(&input, &output, quantize),
        Command::Quantize { input, output } => run_convert(&input, &output, true),
        Command::Eval {
            weights,
            lr_dir,
            hr_dir,
            report,
            niqe_model,
            level,
        } => {
            let reports = eval::run(
                &weights,
                &lr_dir,
                &hr_dir,
                niqe_model.as_deref(),
                &report,
                level,
            )?;
            println!(
                "{:<6} {:>10} {:>10} {:>10} {:>5}",
                "metric", "mean", "lo", "hi", "n"
            );
            for r in &reports {
                println!(
                    "{:<6} {:>10.4} {:>10.4} {:>10.4} {:>5}",
                    r.metric,
                    r.mean,
                    r.lo,
                    r.hi,
                    r.per_image.len()
                );
            }
            Ok(EXIT_OK)
        }
        Command::Bench {
            weights,
            height,
            width,
            iters,
            warmup,
        } => {
            let b = bench::run(&weights, height, width, iters, warmup)?;
            println!("params     {} ({:.2}M)", b.params, b.params as f64 / 1e6);
            println!("gmacs      {:.2} at {width}x{height}", b.macs as f64 / 1e9);
            println!(
                "runtime_ms {:.1} ± {:.1} over {iters} runs ({warmup} warmup)",
                b.mean_ms(),
                b.std_ms()
            );
            Ok(EXIT_OK)
        }
        Command::FitNiqe {
            corpus_dir,
            model_out,
            patch_size,
        } => {
            let (model, images) = fit_niqe::run(&corpus_dir, &model_out, patch_size)?;
            println!("fitted on {} blocks from {images} images", model.fitted_on);
            Ok(EXIT_OK)
        }
        Command::Init {
            output,
            seed,
            zeros,
        } => {
            let params = init::run(&output, seed, zeros)?;
            println!("wrote {} ({params} params)", output.display());
            Ok(EXIT_OK)
        }
    }
}

fn run_convert(input: &std::path::Path, output: &std::path::Path, quantize: bool) -> Result<i32> {
    let c = convert::run(input, output, quantize)?;
    println!(
        "wrote {} ({}, {} params = {:.2}M, {} bytes)",
        output.display(),
        dtype_name(c.dtype),
        c.params,
        c.params as f64 / 1e6,
        c.bytes
    );
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = configure_threads()
        .and_then(|()| run(cli))
        .unwrap_or_else(|e| {
            log::error!("{e:#}");
            eprintln!("error: {e:#}");
            exit_code(&e)
        });
    ExitCode::from(code as u8)
}
