use std::path::PathBuf;

use clap::{Parser, Subcommand};

use circpat_core::gridfile::read_grid;
use circpat_core::metrics::compute_metrics;
use circpat_core::pipeline::{cmd_benchmark, cmd_reconstruct, cmd_simulate, ExperimentConfig};
use circpat_core::Error;

/// Two-stage reconstruction pipeline for scans made with stacks of circular
/// integrating detectors.
#[derive(Parser)]
#[command(name = "circpat", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct CommonOpts {
    /// Flat key=value experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stage-1 method: sine, hankel, naive, or point.
    #[arg(long)]
    method: Option<String>,
    /// Gaussian noise level as a fraction of the data maximum.
    #[arg(long)]
    noise: Option<f64>,
    /// RNG seed for noise injection.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Phantom description file (one absorber per line).
    #[arg(long)]
    phantom: Option<PathBuf>,
}

impl CommonOpts {
    fn build(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(m) = &self.method {
            cfg.stage1.method = m.parse()?;
        }
        if let Some(n) = self.noise {
            cfg.noise_level = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(p) = &self.phantom {
            cfg.phantom_path = p.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate detector data and exact circular means for a phantom.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Reconstruct circular means and the volume from a sinogram file.
    Reconstruct {
        #[command(flatten)]
        common: CommonOpts,
        /// Sinogram file to reconstruct from; defaults to the noisy file
        /// when noise > 0 and it exists, otherwise the clean one.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Feed the exact means directly into stage 2.
        #[arg(long)]
        skip_stage1: bool,
    },
    /// Time the full pipeline over a ladder of grid sizes and fit the
    /// log-log runtime slope.
    Benchmark {
        #[arg(long, default_value_t = 24)]
        base_n: usize,
        #[arg(long, default_value_t = 3)]
        steps: usize,
    },
    /// Compare two binary grids and print error metrics.
    Metrics { reconstructed: PathBuf, reference: PathBuf },
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { common } => {
            let cfg = common.build()?;
            let summary = cmd_simulate(&cfg)?;
            println!("geometry: {}", summary.verdict);
            println!("sinogram: {}", summary.sinogram_path.display());
            if let Some(p) = &summary.noisy_path {
                println!("noisy sinogram: {}", p.display());
            }
            println!("exact means: {}", summary.means_path.display());
            if summary.tail_ratio > 1e-9 {
                println!(
                    "warning: data not fully decayed at t = T (tail ratio {:.2e}); \
                     consider a larger T",
                    summary.tail_ratio
                );
            }
            println!("wall time: {:.2}s", summary.wall_seconds);
        }
        Command::Reconstruct { common, input, skip_stage1 } => {
            let mut cfg = common.build()?;
            cfg.skip_stage1 = skip_stage1;
            let sinogram_path = input.unwrap_or_else(|| {
                let noisy = cfg.out_dir.join("sinogram_noisy.bin");
                if cfg.noise_level > 0.0 && noisy.exists() {
                    noisy
                } else {
                    cfg.out_dir.join("sinogram.bin")
                }
            });
            let summary = cmd_reconstruct(&cfg, &sinogram_path)?;
            println!("means: {}", summary.means_path.display());
            println!("volume: {}", summary.volume_path.display());
            println!("metrics written to {}:", summary.metrics_path.display());
            print!("{}", summary.metrics.to_text());
        }
        Command::Benchmark { base_n, steps } => {
            let report = cmd_benchmark(base_n, steps)?;
            for ((n, s), e) in
                report.sizes.iter().zip(&report.seconds).zip(&report.stage1_relative_l2)
            {
                println!("N={n}: {s:.3}s  stage1 relative_l2={e:.4}");
            }
            match report.slope {
                Some(_) => print!("{}", report.to_metrics().to_text()),
                None => println!("flop_scaling_exponent=not-applicable"),
            }
        }
        Command::Metrics { reconstructed, reference } => {
            let (_, a) = read_grid(&reconstructed)?;
            let (_, b) = read_grid(&reference)?;
            let m = compute_metrics(
                a.as_slice().ok_or_else(|| Error::ShapeMismatch("non-contiguous".into()))?,
                b.as_slice().ok_or_else(|| Error::ShapeMismatch("non-contiguous".into()))?,
            )?;
            print!("{}", m.to_text());
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
