//! Error metrics and the per-run report written next to reconstruction
//! outputs.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Quality and timing summary of a reconstruction run.
#[derive(Debug, Clone, Default)]
pub struct MetricsReport {
    /// `||a - b||_2 / ||b||_2`; `None` when the reference is zero.
    pub relative_l2: Option<f64>,
    pub rmse: f64,
    /// `20 log10(max|b| / rmse)` in dB; `None` when undefined,
    /// `+inf` for an exact match.
    pub psnr_db: Option<f64>,
    pub guarded_nodes: Option<usize>,
    pub max_amplification: Option<f64>,
    /// Volume-stage quality against the rasterized phantom, when available.
    pub volume_relative_l2: Option<f64>,
    pub volume_rmse: Option<f64>,
    pub volume_psnr_db: Option<f64>,
    /// Wall-clock seconds per stage, keyed by stage name.
    pub wall_times: BTreeMap<String, f64>,
    /// Fitted log-log slope of runtime vs N (benchmark mode).
    pub flop_scaling_exponent: Option<f64>,
}

impl MetricsReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self.relative_l2 {
            Some(v) => out.push_str(&format!("relative_l2={v}\n")),
            None => out.push_str("relative_l2=undefined\n"),
        }
        out.push_str(&format!("rmse={}\n", self.rmse));
        match self.psnr_db {
            Some(v) if v.is_infinite() => out.push_str("psnr_db=inf\n"),
            Some(v) => out.push_str(&format!("psnr_db={v}\n")),
            None => out.push_str("psnr_db=undefined\n"),
        }
        if let Some(g) = self.guarded_nodes {
            out.push_str(&format!("guarded_nodes={g}\n"));
        }
        if let Some(a) = self.max_amplification {
            out.push_str(&format!("max_amplification={a}\n"));
        }
        if let Some(v) = self.volume_relative_l2 {
            out.push_str(&format!("volume_relative_l2={v}\n"));
        }
        if let Some(v) = self.volume_rmse {
            out.push_str(&format!("volume_rmse={v}\n"));
        }
        match self.volume_psnr_db {
            Some(v) if v.is_infinite() => out.push_str("volume_psnr_db=inf\n"),
            Some(v) => out.push_str(&format!("volume_psnr_db={v}\n")),
            None => {}
        }
        for (k, v) in &self.wall_times {
            out.push_str(&format!("wall_time_{k}={v}\n"));
        }
        if let Some(s) = self.flop_scaling_exponent {
            out.push_str(&format!("flop_scaling_exponent={s}\n"));
        }
        out
    }
}

/// Relative L2, RMSE, and PSNR of `a` against reference `b`.
pub fn compute_metrics(a: &[f64], b: &[f64]) -> Result<MetricsReport> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::ShapeMismatch("empty grids".into()));
    }
    let n = a.len() as f64;
    let mut diff2 = 0.0;
    let mut ref2 = 0.0;
    let mut ref_max = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        diff2 += (x - y) * (x - y);
        ref2 += y * y;
        ref_max = ref_max.max(y.abs());
    }
    let rmse = (diff2 / n).sqrt();
    let relative_l2 = if ref2 > 0.0 { Some((diff2 / ref2).sqrt()) } else { None };
    let psnr_db = if ref_max == 0.0 {
        None
    } else if rmse == 0.0 {
        Some(f64::INFINITY)
    } else {
        Some(20.0 * (ref_max / rmse).log10())
    };
    Ok(MetricsReport { relative_l2, rmse, psnr_db, ..Default::default() })
}
