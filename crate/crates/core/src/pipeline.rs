//! Experiment orchestration: configuration files, the simulate /
//! reconstruct / benchmark entry points used by the CLI, and file layout.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{
    add_noise, means_exact_stack, simulate_sinogram, CircularMeansStack, SinogramStack,
};
use crate::gridfile::{read_grid, write_grid, write_pgm, Header};
use crate::metrics::{compute_metrics, MetricsReport};
use crate::phantom::{geometry_check, Phantom, ScanGeometry};
use crate::stage1::{Stage1Config, Stage1Method, Stage1Operator};
use crate::stage2::{reconstruct_volume, VolumeGrid, VolumeSpec};

/// Everything one experiment needs; parsed from a flat `key=value` file,
/// then optionally overridden by CLI flags.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub geometry: ScanGeometry,
    pub phantom_path: PathBuf,
    pub stage1: Stage1Config,
    pub noise_level: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub volume: VolumeSpec,
    pub skip_stage1: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            geometry: ScanGeometry {
                r_scan: 0.4,
                r_det: 0.8,
                height: 3.75,
                duration: 4.0,
                n_sigma: 200,
                n_z: 300,
                n_t: 320,
                n_r: 130,
                n_alpha: 512,
            },
            phantom_path: PathBuf::from("phantom.txt"),
            stage1: Stage1Config::default(),
            noise_level: 0.0,
            seed: 0,
            out_dir: PathBuf::from("out"),
            volume: VolumeSpec::default(),
            skip_stage1: false,
        }
    }
}

impl ExperimentConfig {
    /// Parse a flat config file; unknown keys are rejected so typos fail
    /// loudly.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed config line '{line}'")))?;
            let (k, v) = (k.trim(), v.trim());
            let f = || v.parse::<f64>().map_err(|e| Error::Config(format!("{k}: {e}")));
            let u = || v.parse::<usize>().map_err(|e| Error::Config(format!("{k}: {e}")));
            match k {
                "R" => cfg.geometry.r_scan = f()?,
                "r_det" => cfg.geometry.r_det = f()?,
                "H" => cfg.geometry.height = f()?,
                "T" => cfg.geometry.duration = f()?,
                "N_sigma" => cfg.geometry.n_sigma = u()?,
                "N_z" => cfg.geometry.n_z = u()?,
                "N_t" => cfg.geometry.n_t = u()?,
                "N_r" => cfg.geometry.n_r = u()?,
                "n_alpha" => cfg.geometry.n_alpha = u()?,
                "phantom" => cfg.phantom_path = PathBuf::from(v),
                "method" => cfg.stage1.method = v.parse()?,
                "series_n_r" => cfg.stage1.n_r = u()?,
                "guard_eps" => cfg.stage1.guard_eps = f()?,
                "r1_multiplier" => {
                    cfg.stage1.r1_multiplier =
                        v.parse().map_err(|e| Error::Config(format!("{k}: {e}")))?
                }
                "r1" => cfg.stage1.point_r1 = Some(f()?),
                "noise" => cfg.noise_level = f()?,
                "seed" => cfg.seed = v.parse().map_err(|e| Error::Config(format!("{k}: {e}")))?,
                "out" => cfg.out_dir = PathBuf::from(v),
                "nx" => cfg.volume.nx = u()?,
                "ny" => cfg.volume.ny = u()?,
                "skip_stage1" => {
                    cfg.skip_stage1 =
                        v.parse().map_err(|e| Error::Config(format!("{k}: {e}")))?
                }
                other => return Err(Error::Config(format!("unknown config key '{other}'"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Radial extent of the means grid for this configuration.
    pub fn means_r_max(&self) -> f64 {
        if self.geometry.r_det > 0.0 && self.stage1.method != Stage1Method::PointDetector {
            self.geometry.r_det
        } else if self.geometry.r_det > 0.0 {
            self.stage1.r1_multiplier as f64 * self.geometry.r_det
        } else {
            self.stage1.point_r1.unwrap_or(2.0 * self.geometry.r_scan)
        }
    }
}

/// Run a closure under the thread cap requested via `CIRCPAT_THREADS`.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match std::env::var("CIRCPAT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n >= 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub verdict: String,
    pub sinogram_path: PathBuf,
    pub noisy_path: Option<PathBuf>,
    pub means_path: PathBuf,
    /// Largest final-time magnitude relative to the data peak; nonzero
    /// values mean T was chosen too small.
    pub tail_ratio: f64,
    pub wall_seconds: f64,
}

/// Simulate detector data and the exact means for a phantom, writing
/// `sinogram.bin`, optionally `sinogram_noisy.bin`, and `means_exact.bin`
/// into the output directory.
pub fn cmd_simulate(config: &ExperimentConfig) -> Result<SimulateSummary> {
    let start = Instant::now();
    let phantom = Phantom::load(&config.phantom_path)?;
    let geometry = &config.geometry;
    let report = geometry_check(&phantom, geometry);
    report.require_valid()?;
    std::fs::create_dir_all(&config.out_dir)?;

    let stack = with_thread_cap(|| simulate_sinogram(&phantom, geometry))?;
    let tail_ratio = stack.tail_ratio();

    let mut header = Header::new();
    header.set_geometry(geometry);
    header.set("kind", "sinogram");
    header.set("verdict", format!("{:?}", report.class));
    let sinogram_path = config.out_dir.join("sinogram.bin");
    write_grid(&sinogram_path, &header, &stack.data)?;

    let noisy_path = if config.noise_level > 0.0 {
        let noisy = add_noise(&stack, config.noise_level, config.seed);
        let mut h = header.clone();
        h.set("noise", config.noise_level);
        h.set("seed", config.seed);
        let p = config.out_dir.join("sinogram_noisy.bin");
        write_grid(&p, &h, &noisy.data)?;
        Some(p)
    } else {
        None
    };

    let r_max = config.means_r_max();
    let means = with_thread_cap(|| means_exact_stack(&phantom, geometry, r_max));
    let mut h = Header::new();
    h.set_geometry(geometry);
    h.set("kind", "means");
    h.set("method", "exact");
    h.set("r_max", r_max);
    let means_path = config.out_dir.join("means_exact.bin");
    write_grid(&means_path, &h, &means.data)?;

    Ok(SimulateSummary {
        verdict: format!("{:?}", report.class),
        sinogram_path,
        noisy_path,
        means_path,
        tail_ratio,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn read_sinogram(path: &Path) -> Result<SinogramStack> {
    let (header, data) = read_grid(path)?;
    let geometry = header.geometry()?;
    if data.dim() != (geometry.n_sigma, geometry.n_z, geometry.n_t) {
        return Err(Error::Header("sinogram shape disagrees with its header".into()));
    }
    Ok(SinogramStack { geometry, data })
}

fn read_means(path: &Path) -> Result<CircularMeansStack> {
    let (header, data) = read_grid(path)?;
    let geometry = header.geometry()?;
    let r_max = header.f64("r_max")?;
    if data.dim() != (geometry.n_sigma, geometry.n_z, geometry.n_r) {
        return Err(Error::Header("means shape disagrees with its header".into()));
    }
    Ok(CircularMeansStack { geometry, r_max, data })
}

/// Reconstruct the means stack from a sinogram with the configured stage-1
/// method (all detector positions in parallel).
pub fn reconstruct_means_stack(
    sinogram: &SinogramStack,
    config: &Stage1Config,
) -> Result<(CircularMeansStack, MetricsReport)> {
    let geometry = &sinogram.geometry;
    let op = Stage1Operator::new(geometry, config)?;
    let slices: Vec<(ndarray::Array2<f64>, crate::stage1::Stage1Diagnostics)> =
        with_thread_cap(|| {
            (0..geometry.n_sigma)
                .into_par_iter()
                .map(|l| op.reconstruct_slice(sinogram.data.slice(ndarray::s![l, .., ..])))
                .collect::<Result<_>>()
        })?;
    let mut data = Array3::zeros((geometry.n_sigma, geometry.n_z, geometry.n_r));
    let mut report = MetricsReport::default();
    let mut max_amp = 0.0f64;
    let mut guarded = 0usize;
    for (l, (slice, diag)) in slices.iter().enumerate() {
        data.slice_mut(ndarray::s![l, .., ..]).assign(slice);
        max_amp = max_amp.max(diag.max_amplification);
        guarded = guarded.max(diag.guarded_nodes);
    }
    if config.method == Stage1Method::NaiveQuotient {
        report.guarded_nodes = Some(guarded);
        report.max_amplification = Some(max_amp);
    }
    Ok((CircularMeansStack { geometry: geometry.clone(), r_max: op.r_max(), data }, report))
}

/// Rasterize the phantom on the volume pixel grid (ground truth for
/// volume-stage metrics).
pub fn rasterize_phantom(
    phantom: &Phantom,
    geometry: &ScanGeometry,
    spec: VolumeSpec,
) -> VolumeGrid {
    let extent = geometry.r_scan;
    let coord = |i: usize, n: usize| {
        if n == 1 {
            0.0
        } else {
            -extent + 2.0 * extent * i as f64 / (n - 1) as f64
        }
    };
    let mut values = Array3::zeros((geometry.n_z, spec.ny, spec.nx));
    for m in 0..geometry.n_z {
        let z = geometry.z(m);
        for iy in 0..spec.ny {
            for ix in 0..spec.nx {
                values[[m, iy, ix]] = phantom.value_at([coord(ix, spec.nx), coord(iy, spec.ny), z]);
            }
        }
    }
    VolumeGrid {
        nx: spec.nx,
        ny: spec.ny,
        extent,
        z_slices: (0..geometry.n_z).map(|m| geometry.z(m)).collect(),
        values,
    }
}

/// Metric samples restricted to pixels inside the reconstruction disc.
fn disc_samples(vol: &VolumeGrid) -> Vec<f64> {
    let mut out = Vec::new();
    for m in 0..vol.z_slices.len() {
        for iy in 0..vol.ny {
            for ix in 0..vol.nx {
                if vol.inside_disc(ix, iy) {
                    out.push(vol.values[[m, iy, ix]]);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ReconstructSummary {
    pub means_path: PathBuf,
    pub volume_path: PathBuf,
    pub metrics_path: PathBuf,
    pub metrics: MetricsReport,
}

/// Full reconstruction: stage 1 on the given sinogram file (or the exact
/// means directly when `skip_stage1` is set), then stage 2, then metrics
/// against the exact references when they are available in `out_dir`.
pub fn cmd_reconstruct(config: &ExperimentConfig, sinogram_path: &Path) -> Result<ReconstructSummary> {
    std::fs::create_dir_all(&config.out_dir)?;
    let mut metrics = MetricsReport::default();

    let means_exact_path = config.out_dir.join("means_exact.bin");
    let means_exact =
        if means_exact_path.exists() { Some(read_means(&means_exact_path)?) } else { None };

    let t0 = Instant::now();
    let means = if config.skip_stage1 {
        means_exact
            .clone()
            .ok_or_else(|| Error::Config("skip_stage1 requires means_exact.bin".into()))?
    } else {
        let sinogram = read_sinogram(sinogram_path)?;
        if let Some(me) = &means_exact {
            if me.geometry != sinogram.geometry {
                return Err(Error::Header(
                    "sinogram and means_exact headers disagree on the geometry".into(),
                ));
            }
        }
        let (means, stage1_metrics) = reconstruct_means_stack(&sinogram, &config.stage1)?;
        metrics.guarded_nodes = stage1_metrics.guarded_nodes;
        metrics.max_amplification = stage1_metrics.max_amplification;
        means
    };
    metrics.wall_times.insert("stage1".into(), t0.elapsed().as_secs_f64());

    let mut h = Header::new();
    h.set_geometry(&means.geometry);
    h.set("kind", "means");
    h.set("method", config.stage1.method);
    h.set("r_max", means.r_max);
    let means_path = config.out_dir.join("means_recon.bin");
    write_grid(&means_path, &h, &means.data)?;

    // stage-1 quality against the exact means, when present
    if let (Some(exact), false) = (&means_exact, config.skip_stage1) {
        let m = compute_metrics(
            means.data.as_slice().unwrap(),
            exact.data.as_slice().unwrap(),
        )?;
        metrics.relative_l2 = m.relative_l2;
        metrics.rmse = m.rmse;
        metrics.psnr_db = m.psnr_db;
    }

    let t1 = Instant::now();
    let volume = with_thread_cap(|| reconstruct_volume(&means, &means.geometry, config.volume))?;
    metrics.wall_times.insert("stage2".into(), t1.elapsed().as_secs_f64());

    let mut vh = Header::new();
    vh.set_geometry(&means.geometry);
    vh.set("kind", "volume");
    vh.set("nx", volume.nx);
    vh.set("ny", volume.ny);
    vh.set("extent", volume.extent);
    let volume_path = config.out_dir.join("volume.bin");
    write_grid(&volume_path, &vh, &volume.values)?;

    // volume metrics against the rasterized phantom, when available
    if config.phantom_path.exists() {
        let phantom = Phantom::load(&config.phantom_path)?;
        let reference = rasterize_phantom(&phantom, &means.geometry, config.volume);
        let m = compute_metrics(&disc_samples(&volume), &disc_samples(&reference))?;
        metrics.volume_relative_l2 = m.relative_l2;
        metrics.volume_rmse = Some(m.rmse);
        metrics.volume_psnr_db = m.psnr_db;
    }

    let slices_dir = config.out_dir.join("slices");
    std::fs::create_dir_all(&slices_dir)?;
    for m in 0..volume.z_slices.len() {
        let path = slices_dir.join(format!("slice_{m:04}.pgm"));
        write_pgm(&path, volume.values.slice(ndarray::s![m, .., ..]))?;
    }

    let metrics_path = config.out_dir.join("metrics.txt");
    std::fs::write(&metrics_path, metrics.to_text())?;
    Ok(ReconstructSummary { means_path, volume_path, metrics_path, metrics })
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub sizes: Vec<usize>,
    pub seconds: Vec<f64>,
    pub stage1_relative_l2: Vec<f64>,
    /// Log-log slope of runtime vs N; `None` for a single step.
    pub slope: Option<f64>,
}

impl BenchmarkReport {
    /// Flatten into the common metrics report.
    pub fn to_metrics(&self) -> MetricsReport {
        let mut m = MetricsReport {
            flop_scaling_exponent: self.slope,
            ..Default::default()
        };
        for (n, s) in self.sizes.iter().zip(&self.seconds) {
            m.wall_times.insert(format!("N{n}"), *s);
        }
        m
    }
}

/// Time the full pipeline at `N, 2N, 4N, ...` with all grid sizes tied to
/// `N` and fit the log-log runtime slope.
pub fn cmd_benchmark(base_n: usize, steps: usize) -> Result<BenchmarkReport> {
    if base_n < 16 {
        return Err(Error::Config("benchmark requires base_N >= 16".into()));
    }
    if steps == 0 {
        return Err(Error::Config("benchmark requires steps >= 1".into()));
    }
    let phantom = Phantom::parse("0.0 0.0 1.875 0.12 1.0 smooth")?;
    let mut sizes = Vec::new();
    let mut seconds = Vec::new();
    let mut errors = Vec::new();
    for step in 0..steps {
        let n = base_n << step;
        let geometry = ScanGeometry {
            r_scan: 0.4,
            r_det: 0.8,
            height: 3.75,
            duration: 4.0,
            n_sigma: n,
            n_z: n + n % 2,
            n_t: n,
            n_r: n,
            n_alpha: n,
        };
        let start = Instant::now();
        let stack = with_thread_cap(|| simulate_sinogram(&phantom, &geometry))?;
        let (means, _) =
            reconstruct_means_stack(&stack, &Stage1Config::with_method(Stage1Method::SineSeries))?;
        let spec = VolumeSpec { nx: n, ny: n };
        let _volume = with_thread_cap(|| reconstruct_volume(&means, &geometry, spec))?;
        seconds.push(start.elapsed().as_secs_f64());
        sizes.push(n);
        let exact = with_thread_cap(|| means_exact_stack(&phantom, &geometry, means.r_max));
        let m = compute_metrics(means.data.as_slice().unwrap(), exact.data.as_slice().unwrap())?;
        errors.push(m.relative_l2.unwrap_or(f64::NAN));
    }
    let slope = if steps >= 2 {
        // least-squares fit of ln(time) against ln(N)
        let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = seconds.iter().map(|&s| s.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    Ok(BenchmarkReport { sizes, seconds, stage1_relative_l2: errors, slope })
}
