//! Scalar Bessel-function kernel: J0, J1, Y0 for real arguments, the
//! order-zero second-kind Hankel function, and tables of scaled J0 zeros.
//!
//! Evaluation delegates to the fdlibm-derived routines in `libm`, which are
//! accurate to a few ulp across the whole range; an ascending power series
//! plus a raw Hankel asymptotic expansion (which tops out near 1e-10
//! relative accuracy close to the functions' zeros) lives in the test module
//! as an independent oracle.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) fn j0(x: f64) -> f64 {
    debug_assert!(x >= 0.0 && x.is_finite());
    libm::j0(x)
}

pub(crate) fn j1(x: f64) -> f64 {
    debug_assert!(x >= 0.0 && x.is_finite());
    libm::j1(x)
}

pub(crate) fn y0(x: f64) -> f64 {
    debug_assert!(x > 0.0 && x.is_finite());
    libm::y0(x)
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("bessel_j0 requires finite x >= 0, got {x}")));
    }
    Ok(j0(x))
}

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("bessel_j1 requires finite x >= 0, got {x}")));
    }
    Ok(j1(x))
}

/// Bessel function of the second kind, order zero. Logarithmically singular
/// at the origin, hence `x > 0`.
pub fn bessel_y0(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("bessel_y0 requires finite x > 0, got {x}")));
    }
    Ok(y0(x))
}

/// Second-kind Hankel function of order zero, `H0^(2)(x) = J0(x) - i Y0(x)`.
/// Its modulus is strictly positive for every finite positive argument,
/// which is what makes it usable as a denominator.
pub fn hankel2_0(x: f64) -> Result<Complex64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("hankel2_0 requires finite x > 0, got {x}")));
    }
    Ok(Complex64::new(j0(x), -y0(x)))
}

pub(crate) fn hankel2_0_unchecked(x: f64) -> Complex64 {
    Complex64::new(j0(x), -y0(x))
}

/// Scaled zeros of `v -> J0(r_det v)` together with `J1` evaluated at each
/// zero, shared by all series reconstruction formulas.
#[derive(Debug, Clone)]
pub struct BesselZerosTable {
    r_det: f64,
    zeros: Vec<f64>,
    j1_at_zeros: Vec<f64>,
}

impl BesselZerosTable {
    /// Scaling radius the zeros refer to.
    pub fn r_det(&self) -> f64 {
        self.r_det
    }

    /// `v_n = j_{0,n} / r_det`, strictly increasing, 1-based zero index
    /// stored 0-based.
    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    /// `J1(r_det v_n)`, nonzero because the zeros of J0 are simple.
    pub fn j1_at_zeros(&self) -> &[f64] {
        &self.j1_at_zeros
    }

    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }
}

/// First `count` zeros of `v -> J0(r_det v)`, bracketed by the ~pi spacing
/// of J0's roots and refined by bisection.
pub fn j0_zeros(r_det: f64, count: usize) -> Result<BesselZerosTable> {
    if !(r_det > 0.0) || !r_det.is_finite() {
        return Err(Error::Domain(format!("j0_zeros requires r_det > 0, got {r_det}")));
    }
    if count == 0 {
        return Err(Error::Domain("j0_zeros requires count >= 1".into()));
    }
    let mut zeros = Vec::with_capacity(count);
    let mut j1_at_zeros = Vec::with_capacity(count);
    for n in 1..=count {
        let mut a = (n - 1) as f64 * std::f64::consts::PI;
        let mut b = n as f64 * std::f64::consts::PI;
        let mut fa = j0(a);
        for _ in 0..200 {
            if b - a <= f64::EPSILON * b {
                break;
            }
            let mid = 0.5 * (a + b);
            let fm = j0(mid);
            if fa * fm <= 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        let root = 0.5 * (a + b);
        zeros.push(root / r_det);
        j1_at_zeros.push(j1(root));
    }
    Ok(BesselZerosTable { r_det, zeros, j1_at_zeros })
}
