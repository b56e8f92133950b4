//! Numerical laboratory for Schrödinger evolutions with bounded complex,
//! time-dependent potentials.
//!
//! The crate is organised around a periodic spectral [`grid`], a split-step
//! [`propagator`], the pseudoconformal [`appell`] transformation, the Carleman
//! weight machinery in [`carleman`], the moving-annulus [`observability`]
//! functional and the mass-flux [`diagnostics`].

// `!(x > 0.0)` rejects NaN together with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appell;
pub mod carleman;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod interp;
pub mod observability;
pub mod propagator;
pub mod sum;

pub use error::{Error, Result};
pub use grid::{Grid, Trajectory, WaveField};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
