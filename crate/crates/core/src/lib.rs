//! Two-stage image reconstruction for photoacoustic scans made with stacks
//! of circular integrating detectors.
//!
//! Stage 1 inverts an axially symmetric wave equation per detector position,
//! turning time traces into circular means of the source. Stage 2 inverts
//! the circular mean transform slice by slice with a filtered backprojection
//! whose kernel is logarithmic. The crate also contains the analytic forward
//! model used to synthesize detector data from ball phantoms, the spectral
//! building blocks (DFT in z, trapezoidal trig transforms at nonuniform
//! frequencies, Fourier-Bessel synthesis), binary grid file I/O, and the
//! experiment orchestration used by the `circpat` CLI.

pub mod error;
pub mod forward;
pub mod gridfile;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod special;
pub mod spectral;
pub mod stage1;
pub mod stage2;

pub use error::{Error, Result};
