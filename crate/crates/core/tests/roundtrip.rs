//! Pipeline-level integration tests: file round trips, determinism,
//! header consistency, and the skip-stage1 shortcut.

use circpat_core::pipeline::{cmd_reconstruct, cmd_simulate, ExperimentConfig};
use circpat_core::Error;

fn tiny_config(dir: &std::path::Path) -> ExperimentConfig {
    let phantom_path = dir.join("phantom.txt");
    std::fs::write(&phantom_path, "0.1 0.0 1.4 0.1 1.0 smooth\n-0.05 0.08 1.8 0.12 0.8 smooth\n")
        .unwrap();
    let mut cfg = ExperimentConfig::parse(
        "R=0.4\nr_det=0.8\nH=3.0\nT=3.2\nN_sigma=6\nN_z=32\nN_t=64\nN_r=12\nn_alpha=48\n\
         method=hankel\nnx=16\nny=16\n",
    )
    .unwrap();
    cfg.phantom_path = phantom_path;
    cfg.out_dir = dir.join("out");
    cfg
}

#[test]
fn simulate_is_deterministic_to_the_byte() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path());
    cfg.noise_level = 0.1;
    cfg.seed = 7;

    cfg.out_dir = dir.path().join("a");
    cmd_simulate(&cfg).unwrap();
    cfg.out_dir = dir.path().join("b");
    cmd_simulate(&cfg).unwrap();

    for name in ["sinogram.bin", "sinogram_noisy.bin", "means_exact.bin", "sinogram.hdr"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    // different seed changes the noisy bytes only
    cfg.out_dir = dir.path().join("c");
    cfg.seed = 8;
    cmd_simulate(&cfg).unwrap();
    let a = std::fs::read(dir.path().join("a").join("sinogram_noisy.bin")).unwrap();
    let c = std::fs::read(dir.path().join("c").join("sinogram_noisy.bin")).unwrap();
    assert_ne!(a, c);
    let a = std::fs::read(dir.path().join("a").join("sinogram.bin")).unwrap();
    let c = std::fs::read(dir.path().join("c").join("sinogram.bin")).unwrap();
    assert_eq!(a, c);
}

#[test]
fn reconstruct_end_to_end_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    cmd_simulate(&cfg).unwrap();
    let sin = cfg.out_dir.join("sinogram.bin");
    let s1 = cmd_reconstruct(&cfg, &sin).unwrap();
    let first = std::fs::read(cfg.out_dir.join("means_recon.bin")).unwrap();
    let vol_first = std::fs::read(cfg.out_dir.join("volume.bin")).unwrap();
    let s2 = cmd_reconstruct(&cfg, &sin).unwrap();
    let second = std::fs::read(cfg.out_dir.join("means_recon.bin")).unwrap();
    let vol_second = std::fs::read(cfg.out_dir.join("volume.bin")).unwrap();
    assert_eq!(first, second, "stage-1 output not deterministic");
    assert_eq!(vol_first, vol_second, "stage-2 output not deterministic");
    assert!(s1.metrics.relative_l2.is_some());
    assert_eq!(
        s1.metrics.relative_l2.unwrap(),
        s2.metrics.relative_l2.unwrap(),
        "metrics not reproducible"
    );
    // per-slice images exist
    assert!(cfg.out_dir.join("slices/slice_0000.pgm").exists());
    assert!(cfg.out_dir.join("slices/slice_0031.pgm").exists());
}

#[test]
fn empty_phantom_gives_zero_sinogram() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    std::fs::write(&cfg.phantom_path, "# nothing here\n").unwrap();
    let summary = cmd_simulate(&cfg).unwrap();
    let (_, data) = circpat_core::gridfile::read_grid(&summary.sinogram_path).unwrap();
    assert!(data.iter().all(|&v| v == 0.0));
}

#[test]
fn header_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    cmd_simulate(&cfg).unwrap();
    // re-simulate with a different geometry into the same directory, then
    // mix the files: means_exact from the old run, sinogram from the new
    let mut other = cfg.clone();
    other.geometry.n_t = 32;
    other.out_dir = dir.path().join("other");
    cmd_simulate(&other).unwrap();
    std::fs::copy(other.out_dir.join("sinogram.bin"), cfg.out_dir.join("sinogram.bin")).unwrap();
    std::fs::copy(other.out_dir.join("sinogram.hdr"), cfg.out_dir.join("sinogram.hdr")).unwrap();
    let err = cmd_reconstruct(&cfg, &cfg.out_dir.join("sinogram.bin"));
    assert!(matches!(err, Err(Error::Header(_))), "expected header mismatch, got {err:?}");
}

#[test]
fn skip_stage1_beats_full_pipeline() {
    // feeding the exact means into stage 2 must give a strictly better
    // volume than the full two-stage run on the same data
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    cmd_simulate(&cfg).unwrap();
    let sin = cfg.out_dir.join("sinogram.bin");
    let full = cmd_reconstruct(&cfg, &sin).unwrap();
    let mut shortcut_cfg = cfg.clone();
    shortcut_cfg.skip_stage1 = true;
    let shortcut = cmd_reconstruct(&shortcut_cfg, &sin).unwrap();
    let full_err = full.metrics.volume_relative_l2.unwrap();
    let shortcut_err = shortcut.metrics.volume_relative_l2.unwrap();
    assert!(
        shortcut_err < full_err,
        "exact means should reconstruct better: {shortcut_err} vs {full_err}"
    );
}

#[test]
fn quotient_method_reports_guard_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path());
    cfg.stage1.method = "naive".parse().unwrap();
    cmd_simulate(&cfg).unwrap();
    let summary = cmd_reconstruct(&cfg, &cfg.out_dir.join("sinogram.bin")).unwrap();
    assert!(summary.metrics.guarded_nodes.is_some());
    assert!(summary.metrics.max_amplification.unwrap() >= 1e4);
    let text = std::fs::read_to_string(&summary.metrics_path).unwrap();
    assert!(text.contains("guarded_nodes="));
    assert!(text.contains("max_amplification="));
}

#[test]
fn reference_scale_data_decays_before_recording_ends() {
    // the five-ball phantom at the reference scan parameters: data header
    // carries T=4 and the final time sample is empty (two positions only,
    // each position behaves identically)
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path());
    std::fs::copy("../../phantoms/five_balls.txt", &cfg.phantom_path).unwrap();
    cfg.geometry.height = 3.75;
    cfg.geometry.duration = 4.0;
    cfg.geometry.n_sigma = 2;
    cfg.geometry.n_z = 150;
    cfg.geometry.n_t = 160;
    cfg.geometry.n_alpha = 128;
    let summary = cmd_simulate(&cfg).unwrap();
    assert!(summary.tail_ratio < 1e-9, "tail ratio {}", summary.tail_ratio);
    let header = std::fs::read_to_string(cfg.out_dir.join("sinogram.hdr")).unwrap();
    assert!(header.contains("T=4"));
}

#[test]
fn geometry_invalid_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path());
    cfg.geometry.r_det = 0.5; // neither layout
    let err = cmd_simulate(&cfg);
    assert!(matches!(err, Err(Error::InvalidGeometry(_))));
}
