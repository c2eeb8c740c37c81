//! Stage 2: invert the circular mean transform slice by slice with a
//! filtered backprojection against a logarithmic kernel.

use ndarray::{Array2, Array3, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::CircularMeansStack;
use crate::phantom::ScanGeometry;

/// Pixel layout of the reconstructed volume.
#[derive(Debug, Clone, Copy)]
pub struct VolumeSpec {
    pub nx: usize,
    pub ny: usize,
}

impl Default for VolumeSpec {
    fn default() -> Self {
        VolumeSpec { nx: 256, ny: 256 }
    }
}

/// Reconstructed initial pressure on a Cartesian grid. Each slice covers
/// `[-R, R]^2`; pixels outside the disc of radius `R` are computed but
/// excluded from error metrics.
#[derive(Debug, Clone)]
pub struct VolumeGrid {
    pub nx: usize,
    pub ny: usize,
    /// Half-extent of the slice square (the scanning radius R).
    pub extent: f64,
    /// Heights of the slices, one per z sample.
    pub z_slices: Vec<f64>,
    /// Values indexed `[z][y][x]`.
    pub values: Array3<f64>,
}

impl VolumeGrid {
    pub fn x(&self, ix: usize) -> f64 {
        pixel_coord(ix, self.nx, self.extent)
    }

    pub fn y(&self, iy: usize) -> f64 {
        pixel_coord(iy, self.ny, self.extent)
    }

    /// True when the pixel lies inside the reconstruction disc.
    pub fn inside_disc(&self, ix: usize, iy: usize) -> bool {
        self.x(ix).hypot(self.y(iy)) <= self.extent
    }
}

fn pixel_coord(i: usize, n: usize, extent: f64) -> f64 {
    if n == 1 {
        0.0
    } else {
        -extent + 2.0 * extent * i as f64 / (n - 1) as f64
    }
}

/// Radial filter `D = d/dr ( r dF/dr )` on a uniform grid `r_j = j dr`,
/// centered second-order differences inside, one-sided second-order at the
/// ends, and the even-extension limit at `r = 0`.
pub fn radial_filter(f: &[f64], dr: f64) -> Result<Vec<f64>> {
    let n = f.len();
    if n < 3 {
        return Err(Error::ShapeMismatch(format!("radial_filter needs >= 3 samples, got {n}")));
    }
    if !(dr > 0.0) {
        return Err(Error::Domain("radial_filter needs dr > 0".into()));
    }
    let mut d = vec![0.0; n];
    // conservative flux form at interior nodes
    for j in 1..n - 1 {
        let r = j as f64 * dr;
        d[j] = ((r + 0.5 * dr) * (f[j + 1] - f[j]) - (r - 0.5 * dr) * (f[j] - f[j - 1]))
            / (dr * dr);
    }
    // r = 0: limit of the operator for even-in-r data, D(0) = 2 F''(0)
    d[0] = 4.0 * (f[1] - f[0]) / (dr * dr);
    // right end: one-sided second-order derivative of g = r F'
    if n >= 4 {
        let fp = |j: usize| (f[j + 1] - f[j - 1]) / (2.0 * dr);
        let fp_end = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dr);
        let g_end = (n - 1) as f64 * dr * fp_end;
        let g_m1 = (n - 2) as f64 * dr * fp(n - 2);
        let g_m2 = (n - 3) as f64 * dr * fp(n - 3);
        d[n - 1] = (3.0 * g_end - 4.0 * g_m1 + g_m2) / (2.0 * dr);
    } else {
        d[n - 1] = d[n - 2];
    }
    Ok(d)
}

/// `integral_a^b log|r^2 - d^2| dr`, analytic; the antiderivative extends
/// continuously across `r = d` with limit `2d ln(2d) - 2d`.
fn log_cell_integral(a: f64, b: f64, d: f64) -> f64 {
    let anti = |r: f64| {
        if d > 0.0 && r == d {
            return 2.0 * d * (2.0 * d).ln() - 2.0 * d;
        }
        let mut out = if (r * r - d * d).abs() > 0.0 {
            r * (r * r - d * d).abs().ln() - 2.0 * r
        } else {
            -2.0 * r
        };
        if d > 0.0 && r != d {
            out += d * ((r + d) / (r - d)).abs().ln();
        }
        out
    };
    anti(b) - anti(a)
}

/// Filtered backprojection of one height slice.
///
/// `means` is `[position][radius]` on a uniform radial grid starting at 0
/// with step `dr`, covering at least `[0, 2R]` (larger grids are truncated:
/// circles of radius beyond `2R` centered on the scanning circle cannot
/// meet the object). The output covers `[-R, R]^2`.
///
/// The inner integral against the log kernel depends on a pixel only through
/// its distance to the detector position, so it is tabulated per position on
/// a dense distance grid and interpolated per pixel. That keeps a slice at
/// O(N_sigma N_d N_r + nx ny N_sigma) instead of the quartic per-pixel cost.
pub fn circular_fbp(
    means: ArrayView2<'_, f64>,
    r_scan: f64,
    dr: f64,
    spec: VolumeSpec,
) -> Result<Array2<f64>> {
    let (n_sigma, n_r_full) = means.dim();
    if n_r_full < 3 {
        return Err(Error::ShapeMismatch("need at least 3 radial samples".into()));
    }
    // filter on the full grid, then truncate the integral to [0, 2R]
    let n_r = n_r_full.min((2.0 * r_scan / dr).floor() as usize + 1);
    let mut filtered = Array2::<f64>::zeros((n_sigma, n_r));
    for l in 0..n_sigma {
        let row: Vec<f64> = means.row(l).iter().copied().collect();
        let d = radial_filter(&row, dr)?;
        for j in 0..n_r {
            filtered[[l, j]] = d[j];
        }
    }
    let r_top = (n_r - 1) as f64 * dr;

    // pixel distances to a scanning-circle point reach (1 + sqrt(2)) R at
    // the corners of the square
    let d_max = (1.0 + std::f64::consts::SQRT_2) * r_scan + dr;
    let n_d = 4 * n_r;
    let dd = d_max / (n_d - 1) as f64;

    // inner integral per (position, distance node); the trapezoid node where
    // the kernel is logarithmically singular is replaced by the analytic
    // integral of the kernel over that cell against the local filtered value
    let inner_tab: Vec<Vec<f64>> = (0..n_sigma)
        .into_par_iter()
        .map(|l| {
            (0..n_d)
                .map(|i| {
                    let dist = i as f64 * dd;
                    let d2 = dist * dist;
                    let mut inner = 0.0;
                    for j in 0..n_r {
                        let r = j as f64 * dr;
                        let w = if j == 0 || j == n_r - 1 { 0.5 * dr } else { dr };
                        let arg = (r * r - d2).abs();
                        if arg < 0.5 * dr * dr {
                            let a = (r - 0.5 * dr).max(0.0);
                            let b = (r + 0.5 * dr).min(r_top);
                            inner += filtered[[l, j]] * log_cell_integral(a, b, dist);
                        } else {
                            inner += w * filtered[[l, j]] * arg.ln();
                        }
                    }
                    inner
                })
                .collect()
        })
        .collect();

    let centers: Vec<[f64; 2]> = (0..n_sigma)
        .map(|l| {
            let s = 2.0 * std::f64::consts::PI * l as f64 / n_sigma as f64;
            [r_scan * s.cos(), r_scan * s.sin()]
        })
        .collect();

    let mut img = Array2::<f64>::zeros((spec.ny, spec.nx));
    let rows: Vec<Vec<f64>> = (0..spec.ny)
        .into_par_iter()
        .map(|iy| {
            let y = pixel_coord(iy, spec.ny, r_scan);
            let mut row = vec![0.0; spec.nx];
            for (ix, out) in row.iter_mut().enumerate() {
                let x = pixel_coord(ix, spec.nx, r_scan);
                let mut total = 0.0;
                for (l, c) in centers.iter().enumerate() {
                    let dist = (x - c[0]).hypot(y - c[1]);
                    let t = (dist / dd).min((n_d - 2) as f64);
                    let i0 = t as usize;
                    let frac = t - i0 as f64;
                    total += (1.0 - frac) * inner_tab[l][i0] + frac * inner_tab[l][i0 + 1];
                }
                // (1/2pi) * (2pi/N_sigma) * sum
                *out = total / n_sigma as f64;
            }
            row
        })
        .collect();
    for (iy, row) in rows.into_iter().enumerate() {
        for (ix, v) in row.into_iter().enumerate() {
            img[[iy, ix]] = v;
        }
    }
    Ok(img)
}

/// Apply the backprojection independently to every height slice of a
/// reconstructed (or exact) means stack.
pub fn reconstruct_volume(
    means: &CircularMeansStack,
    geometry: &ScanGeometry,
    spec: VolumeSpec,
) -> Result<VolumeGrid> {
    let (n_sigma, n_z, n_r) = means.data.dim();
    if n_sigma != geometry.n_sigma || n_z != geometry.n_z || n_r != geometry.n_r {
        return Err(Error::ShapeMismatch("means stack does not match geometry".into()));
    }
    let dr = means.r_max / geometry.n_r as f64;
    let slices: Vec<Array2<f64>> = (0..n_z)
        .into_par_iter()
        .map(|m| {
            let slab = means.data.slice(ndarray::s![.., m, ..]);
            circular_fbp(slab, geometry.r_scan, dr, spec)
        })
        .collect::<Result<_>>()?;
    let mut values = Array3::zeros((n_z, spec.ny, spec.nx));
    for (m, s) in slices.into_iter().enumerate() {
        values.slice_mut(ndarray::s![m, .., ..]).assign(&s);
    }
    Ok(VolumeGrid {
        nx: spec.nx,
        ny: spec.ny,
        extent: geometry.r_scan,
        z_slices: (0..n_z).map(|m| geometry.z(m)).collect(),
        values,
    })
}
