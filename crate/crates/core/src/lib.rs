//! Parallel-beam tomography toolkit.
//!
//! Two fast backprojection engines live here: a slice-theorem engine that
//! works per projection in the Fourier domain ([`bst`]) and a log-polar
//! convolution engine ([`logpolar`]). Both are checked against slow reference
//! backprojectors ([`reference`]) and closed-form oracles ([`oracles`]).
//! Filtered and Tikhonov-regularized reconstruction is layered on top in
//! [`recon`], and [`harness`] runs the timing and accuracy studies.
//!
//! Coordinates: images cover `[-1, 1]²` sampled at nodes `-1 + i·dx`,
//! sinograms cover `t ∈ [-1, 1)` and `θ ∈ [0, π)`. Fourier transforms use the
//! angular kernel `e^{-iσt}`; reconstruction filters take their argument in
//! cycles per unit length.

// `!(x > 0.0)` style checks are meant to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bst;
pub mod dft;
pub mod error;
pub mod grids;
pub mod harness;
pub mod io;
pub mod logpolar;
pub mod metrics;
pub mod oracles;
pub mod phantoms;
pub mod radon;
pub mod recon;
pub mod reference;
pub mod special;

pub use bst::{bst_backproject, bst_spectrum, BstOptions, DcMode};
pub use error::{Result, TomoError};
pub use grids::{
    CartesianImage, FrequencyGrid, FrequencyImage, LogPolarImage, PolarSinogram, PolarSpectrum,
    Sinogram,
};
pub use logpolar::{
    logpolar_backproject, partial_backproject, LogPolarBackprojection, LogPolarOptions, Rho0Mode, Sector,
};
pub use phantoms::{Ellipse, EllipseSet, PointSourceSet};
pub use recon::{fbp, Engine, FilterKind, FilterSpec};
pub use reference::{backproject_circles, backproject_naive};

pub use num_complex::Complex64;
