//! Multitaper estimation of spectral density matrices, coherence and group
//! delay for multivariate spatial data mixing (marked) point patterns and
//! grid-sampled random fields observed on irregular regions.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: observation regions, sampling schemes, wavenumber grids and
//!   the aliasing lattices induced by grid sampling.
//! * [`tapers`]: concentrated orthonormal taper families on arbitrary regions,
//!   their interpolation, subsampling and transfer functions.
//! * [`fourier`]: mean-corrected tapered Fourier transforms.
//! * [`estimator`]: periodograms, the multitaper spectral matrix, coherence and
//!   group delay, and the expectation oracles used for validation.
//! * [`models`]: simulators and analytic spectra for the reference models.
//!
//! Spatial dimension is restricted to one or two. One-dimensional quantities
//! use the first coordinate of [`Point`] and ignore the second.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dft;
pub mod error;
pub mod estimator;
pub mod fft;
pub mod fourier;
pub mod geometry;
pub mod linalg;
pub mod models;
pub mod special;
pub mod tapers;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// A location or wavenumber in one or two dimensions.
pub type Point = [f64; 2];
