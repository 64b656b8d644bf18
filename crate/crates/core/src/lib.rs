//! Numerical toolkit for area distortion under quasiconformal maps with a
//! simple pole at a real point `p` in the unit disk.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: exact Möbius algebra and the pseudo-hyperbolic disks.
//! * [`extremal`]: the explicit piecewise extremal maps and their jets.
//! * [`measure`]: regions, Monte Carlo / tensor quadrature, reference areas.
//! * [`transforms`]: grid fields, the Beurling (Hilbert) and Cauchy transforms.
//! * [`beltrami`]: the Neumann-series Beltrami solver.
//! * [`verifier`]: left/right-hand sides of every inequality, sweeps, reports.
//!
//! Data-parallel inner loops (Monte Carlo batches, FFT rows, sweeps) go
//! through [`exec`]; with the `parallel` feature disabled every path runs
//! sequentially and produces bit-identical results.

pub mod beltrami;
pub mod error;
pub mod exec;
pub mod extremal;
pub mod geometry;
pub mod measure;
pub mod transforms;
pub mod verifier;

pub use error::{Error, Result};
pub use exec::Exec;
pub use num_complex::Complex64;

/// Shorthand used throughout the crate.
pub type C64 = Complex64;
