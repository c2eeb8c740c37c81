//! Discrete transforms for stage 1: DFT along the detector-stack axis,
//! trapezoidal trig transforms evaluated at nonuniform frequencies, and
//! Fourier-Bessel synthesis on the detector disc.
//!
//! Frequency convention: DFT bin `m` of an `N_z`-point transform over a
//! window of height `H` represents `k = 2 pi m / H` with the signed bin in
//! `{-N_z/2, ..., N_z/2 - 1}`; the forward kernel is `e^{-i 2 pi m m'/N_z}`
//! and the inverse uses the conjugated kernel with a `1/N_z` factor.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::special::{self, BesselZerosTable};

/// DFT of a (height x other) grid along the height axis.
#[derive(Debug, Clone)]
pub struct SpectralSlice {
    /// Angular frequency `k = 2 pi m~ / H` per bin, signed-bin convention.
    pub k_frequencies: Vec<f64>,
    /// Transformed values, `[bin][n]`.
    pub values: Array2<Complex64>,
}

/// Signed frequency index of FFT bin `i` for an `n`-point transform.
fn signed_bin(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn fft_axis0(values: &mut Array2<Complex64>, inverse: bool) {
    let (n_z, n_cols) = values.dim();
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n_z) } else { planner.plan_fft_forward(n_z) };
    let mut buf = vec![Complex64::default(); n_z];
    for c in 0..n_cols {
        for m in 0..n_z {
            buf[m] = values[[m, c]];
        }
        fft.process(&mut buf);
        for m in 0..n_z {
            values[[m, c]] = buf[m];
        }
    }
}

/// Forward DFT along the height axis of a complex grid.
pub fn dft_z_complex(slice: ArrayView2<'_, Complex64>, height: f64) -> Result<SpectralSlice> {
    let n_z = slice.dim().0;
    if n_z % 2 != 0 {
        return Err(Error::ShapeMismatch(format!("dft_z requires an even number of height samples, got {n_z}")));
    }
    let mut values = slice.to_owned();
    fft_axis0(&mut values, false);
    let k_frequencies = (0..n_z)
        .map(|i| 2.0 * std::f64::consts::PI * signed_bin(i, n_z) as f64 / height)
        .collect();
    Ok(SpectralSlice { k_frequencies, values })
}

/// Forward DFT along the height axis of a real grid.
pub fn dft_z(slice: ArrayView2<'_, f64>, height: f64) -> Result<SpectralSlice> {
    let complex = slice.mapv(|v| Complex64::new(v, 0.0));
    dft_z_complex(complex.view(), height)
}

/// Inverse DFT along the height axis: conjugated kernel with `1/N_z`.
pub fn idft_z(values: ArrayView2<'_, Complex64>) -> Array2<Complex64> {
    let mut out = values.to_owned();
    fft_axis0(&mut out, true);
    let scale = 1.0 / values.dim().0 as f64;
    out.mapv_inplace(|v| v * scale);
    out
}

/// Integration kernel for [`trig_transform_at`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrigKernel {
    /// `t sin(omega t)` — the time-weighted sine transform.
    SineT,
    /// `cos(omega t)`.
    Cosine,
    /// `e^{-i omega t}` with the signal extended by zero for `t < 0`;
    /// identically `Cosine - i Sine`.
    FourierCausal,
}

fn weighted_sum(
    samples: &[Complex64],
    dt: f64,
    mut f: impl FnMut(f64) -> f64,
) -> Complex64 {
    let n = samples.len();
    let mut acc = Complex64::default();
    for (i, &s) in samples.iter().enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 * dt } else { dt };
        acc += s * (w * f(i as f64 * dt));
    }
    acc
}

/// Trapezoidal quadrature of `integral phi(t) kernel(omega, t) dt` over the
/// sample grid `t_n = n dt`, evaluated at one (possibly nonuniform)
/// frequency.
pub fn trig_transform_at(
    samples: &[Complex64],
    kernel: TrigKernel,
    omega: f64,
    dt: f64,
) -> Result<Complex64> {
    if samples.len() < 2 {
        return Err(Error::ShapeMismatch("trig_transform_at needs at least 2 samples".into()));
    }
    if !(omega >= 0.0) || !(dt > 0.0) {
        return Err(Error::Domain(format!("trig_transform_at requires omega >= 0 and dt > 0, got omega={omega}, dt={dt}")));
    }
    Ok(match kernel {
        TrigKernel::SineT => weighted_sum(samples, dt, |t| t * (omega * t).sin()),
        TrigKernel::Cosine => weighted_sum(samples, dt, |t| (omega * t).cos()),
        TrigKernel::FourierCausal => {
            let cos = weighted_sum(samples, dt, |t| (omega * t).cos());
            let sin = weighted_sum(samples, dt, |t| (omega * t).sin());
            cos - Complex64::i() * sin
        }
    })
}

/// Convenience wrapper for real sample values.
pub fn trig_transform_at_real(
    samples: &[f64],
    kernel: TrigKernel,
    omega: f64,
    dt: f64,
) -> Result<Complex64> {
    let complex: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    trig_transform_at(&complex, kernel, omega, dt)
}

/// Coefficients of a truncated Fourier-Bessel series on `[0, r_det]`,
/// one list per fixed axial frequency.
#[derive(Debug, Clone)]
pub struct FourierBesselCoefficients<'a> {
    pub table: &'a BesselZerosTable,
    pub coeffs: Vec<Complex64>,
}

impl<'a> FourierBesselCoefficients<'a> {
    pub fn new(table: &'a BesselZerosTable, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != table.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients vs {} zeros",
                coeffs.len(),
                table.len()
            )));
        }
        Ok(FourierBesselCoefficients { table, coeffs })
    }
}

/// Evaluate the truncated series
/// `(2/r_det^2) sum_n c_n J0(r v_n) / J1(r_det v_n)^2` on a radial grid.
/// Valid strictly inside the disc: `r < r_det`.
pub fn fourier_bessel_synthesis(
    coeffs: &FourierBesselCoefficients<'_>,
    r_grid: &[f64],
) -> Result<Vec<Complex64>> {
    let r_det = coeffs.table.r_det();
    for &r in r_grid {
        if !(r >= 0.0) || r >= r_det {
            return Err(Error::Domain(format!("synthesis point r={r} outside [0, r_det={r_det})")));
        }
    }
    let norm = 2.0 / (r_det * r_det);
    let zeros = coeffs.table.zeros();
    let j1v = coeffs.table.j1_at_zeros();
    Ok(r_grid
        .iter()
        .map(|&r| {
            let mut acc = Complex64::default();
            for (n, &v) in zeros.iter().enumerate() {
                acc += coeffs.coeffs[n] * (special::j0(r * v) / (j1v[n] * j1v[n]));
            }
            acc * norm
        })
        .collect())
}
