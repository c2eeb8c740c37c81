//! Analytic forward model: exact pressure traces of radially symmetric
//! absorbers, detector-circle averages, sinogram synthesis, exact circular
//! means, and noise injection.

use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phantom::{geometry_check, Phantom, Profile, ScanGeometry};

/// Detector data `G[l][m][n]` on the (position, height, time) grid.
#[derive(Debug, Clone)]
pub struct SinogramStack {
    pub geometry: ScanGeometry,
    pub data: Array3<f64>,
}

impl SinogramStack {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Largest magnitude in the final time sample relative to the global
    /// maximum; should be ~0 when `T` is long enough.
    pub fn tail_ratio(&self) -> f64 {
        let last = self.geometry.n_t - 1;
        let tail = self
            .data
            .slice(ndarray::s![.., .., last])
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs()));
        let peak = self.max_abs();
        if peak == 0.0 {
            0.0
        } else {
            tail / peak
        }
    }
}

/// Reconstructed or exact circular means `F[l][m][n]` on the
/// (position, height, radius) grid; the radial grid covers `[0, r_max)`.
#[derive(Debug, Clone)]
pub struct CircularMeansStack {
    pub geometry: ScanGeometry,
    pub r_max: f64,
    pub data: Array3<f64>,
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Acoustic pressure at point `x` and time `t >= 0`.
///
/// Each absorber contributes the full radial d'Alembert solution
/// `((d-t) f(|d-t|) + (d+t) f(d+t)) / (2d)`; outside the support the second
/// term vanishes and this reduces to the usual one-term retarded formula.
pub fn pressure_point(phantom: &Phantom, x: [f64; 3], t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("pressure_point requires t >= 0, got {t}")));
    }
    let mut total = 0.0;
    for (i, a) in phantom.absorbers.iter().enumerate() {
        let d = dist3(x, a.center);
        if d == 0.0 {
            match a.profile {
                Profile::SmoothBump => {
                    total += a.value(t) + t * a.value_derivative(t);
                }
                Profile::UniformBall => {
                    return Err(Error::Singular(format!(
                        "pressure at the center of discontinuous absorber {i}"
                    )));
                }
            }
        } else {
            total += ((d - t) * a.value((d - t).abs()) + (d + t) * a.value(d + t)) / (2.0 * d);
        }
    }
    Ok(total)
}

fn circle_point(geometry: &ScanGeometry, sigma: f64, r: f64, z: f64, cos_a: f64, sin_a: f64) -> [f64; 3] {
    [
        geometry.r_scan * sigma.cos() + r * cos_a,
        geometry.r_scan * sigma.sin() + r * sin_a,
        z,
    ]
}

/// Average of the pressure over the detector circle at `(sigma, z)`,
/// by the periodic trapezoid rule with `n_alpha` nodes.
pub fn circular_detector_signal(
    phantom: &Phantom,
    sigma: f64,
    z: f64,
    t: f64,
    geometry: &ScanGeometry,
) -> Result<f64> {
    let n = geometry.n_alpha;
    let mut acc = 0.0;
    for j in 0..n {
        let alpha = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        let p = circle_point(geometry, sigma, geometry.r_det, z, alpha.cos(), alpha.sin());
        acc += pressure_point(phantom, p, t)?;
    }
    Ok(acc / n as f64)
}

/// Detector data for a single stack position, `G[m][n]`.
///
/// Time samples are filled only inside the causal window of each absorber
/// (`|d - t| < radius` plus the interior term); elsewhere the contribution
/// is identically zero.
pub fn simulate_sinogram_slice(
    phantom: &Phantom,
    geometry: &ScanGeometry,
    l: usize,
) -> Result<Array2<f64>> {
    let (n_z, n_t, n_alpha) = (geometry.n_z, geometry.n_t, geometry.n_alpha);
    let dt = geometry.dt();
    let sigma = geometry.sigma(l);
    let mut g = Array2::<f64>::zeros((n_z, n_t));
    let trig: Vec<(f64, f64)> = (0..n_alpha)
        .map(|j| {
            let alpha = 2.0 * std::f64::consts::PI * j as f64 / n_alpha as f64;
            (alpha.cos(), alpha.sin())
        })
        .collect();
    let inv_n = 1.0 / n_alpha as f64;
    for m in 0..n_z {
        let z = geometry.z(m);
        let mut row = g.row_mut(m);
        for &(ca, sa) in &trig {
            let p = circle_point(geometry, sigma, geometry.r_det, z, ca, sa);
            for (i, a) in phantom.absorbers.iter().enumerate() {
                let d = dist3(p, a.center);
                if d == 0.0 {
                    match a.profile {
                        Profile::SmoothBump => {
                            let hi = ((a.radius / dt).ceil() as usize + 1).min(n_t);
                            for n in 0..hi {
                                let t = geometry.t(n);
                                row[n] += inv_n * (a.value(t) + t * a.value_derivative(t));
                            }
                        }
                        Profile::UniformBall => {
                            return Err(Error::Singular(format!(
                                "detector point coincides with center of absorber {i}"
                            )));
                        }
                    }
                    continue;
                }
                // outgoing/passing term: |d - t| < radius
                let lo = (((d - a.radius) / dt).floor().max(0.0)) as usize;
                let hi = (((d + a.radius) / dt).ceil() as usize + 1).min(n_t);
                for n in lo..hi {
                    let t = geometry.t(n);
                    row[n] += inv_n * (d - t) * a.value((d - t).abs()) / (2.0 * d);
                }
                // interior term: d + t < radius
                if d < a.radius {
                    let hi = (((a.radius - d) / dt).ceil() as usize + 1).min(n_t);
                    for n in 0..hi {
                        let t = geometry.t(n);
                        row[n] += inv_n * (d + t) * a.value(d + t) / (2.0 * d);
                    }
                }
            }
        }
    }
    Ok(g)
}

/// Simulate the full sinogram stack; positions are filled independently in
/// parallel, each writing a disjoint slab.
pub fn simulate_sinogram(phantom: &Phantom, geometry: &ScanGeometry) -> Result<SinogramStack> {
    geometry_check(phantom, geometry).require_valid()?;
    let slices: Vec<Array2<f64>> = (0..geometry.n_sigma)
        .into_par_iter()
        .map(|l| simulate_sinogram_slice(phantom, geometry, l))
        .collect::<Result<_>>()?;
    let mut data = Array3::zeros((geometry.n_sigma, geometry.n_z, geometry.n_t));
    for (l, s) in slices.into_iter().enumerate() {
        data.slice_mut(ndarray::s![l, .., ..]).assign(&s);
    }
    Ok(SinogramStack { geometry: geometry.clone(), data })
}

/// Ground-truth circular mean of the initial pressure over the circle of
/// radius `r` centered at `(R sigma, z)`, by the periodic trapezoid rule.
pub fn circular_means_exact(
    phantom: &Phantom,
    sigma: f64,
    z: f64,
    r: f64,
    n_alpha: usize,
    r_scan: f64,
) -> f64 {
    let mut acc = 0.0;
    let (cs, ss) = (sigma.cos(), sigma.sin());
    for j in 0..n_alpha {
        let alpha = 2.0 * std::f64::consts::PI * j as f64 / n_alpha as f64;
        let x = [r_scan * cs + r * alpha.cos(), r_scan * ss + r * alpha.sin(), z];
        acc += phantom.value_at(x);
    }
    acc / n_alpha as f64
}

/// Exact circular means for one stack position, `F[m][n]` on the radial grid
/// covering `[0, r_max)`. Cells whose circle cannot meet any absorber are
/// skipped.
pub fn means_exact_slice(
    phantom: &Phantom,
    geometry: &ScanGeometry,
    l: usize,
    r_max: f64,
) -> Array2<f64> {
    let sigma = geometry.sigma(l);
    let center = geometry.detector_center(l);
    let mut f = Array2::<f64>::zeros((geometry.n_z, geometry.n_r));
    for m in 0..geometry.n_z {
        let z = geometry.z(m);
        for n in 0..geometry.n_r {
            let r = geometry.r(r_max, n);
            let active = phantom.absorbers.iter().any(|a| {
                let rho_xy =
                    ((a.center[0] - center[0]).powi(2) + (a.center[1] - center[1]).powi(2)).sqrt();
                let dz = z - a.center[2];
                (rho_xy - r).powi(2) + dz * dz < a.radius * a.radius
            });
            if active {
                f[[m, n]] = circular_means_exact(phantom, sigma, z, r, geometry.n_alpha, geometry.r_scan);
            }
        }
    }
    f
}

/// Exact circular means for the whole stack.
pub fn means_exact_stack(phantom: &Phantom, geometry: &ScanGeometry, r_max: f64) -> CircularMeansStack {
    let slices: Vec<Array2<f64>> = (0..geometry.n_sigma)
        .into_par_iter()
        .map(|l| means_exact_slice(phantom, geometry, l, r_max))
        .collect();
    let mut data = Array3::zeros((geometry.n_sigma, geometry.n_z, geometry.n_r));
    for (l, s) in slices.into_iter().enumerate() {
        data.slice_mut(ndarray::s![l, .., ..]).assign(&s);
    }
    CircularMeansStack { geometry: geometry.clone(), r_max, data }
}

/// Add i.i.d. zero-mean Gaussian noise with standard deviation
/// `level * max|data|`; deterministic for a given seed, sequential in
/// storage order.
pub fn add_noise(stack: &SinogramStack, level: f64, seed: u64) -> SinogramStack {
    let mut out = stack.clone();
    if level == 0.0 {
        return out;
    }
    let sd = level * stack.max_abs();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for v in out.data.iter_mut() {
        let g: f64 = StandardNormal.sample(&mut rng);
        *v += sd * g;
    }
    out
}
