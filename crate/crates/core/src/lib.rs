//! Pseudospectral evolution and analytic-mode decomposition for the radial
//! wave equation and the linearized focusing wave equation in similarity
//! coordinates on the backward lightcone.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod decompose;
pub mod error;
pub mod evolve;
pub mod linalg;
pub mod modes;
pub mod scalar;
pub mod operators;
mod parity;
pub mod spectral;

pub use scalar::{Real, Value};

pub use analysis::{DecayReport, VerificationReport, Verdict};
pub use decompose::{Decomposition, Split};
pub use error::{Error, Result};
pub use evolve::{EvolveOptions, Evolver, Trajectory};
pub use modes::{ModeLabel, ModePair};
pub use operators::{Field, Problem, ProblemParams};
pub use spectral::{ChebBasis, GridFn};

/// Double-precision instantiations.
pub type Basis = ChebBasis<f64>;
pub type RealField = Field<f64>;
pub type ComplexField = Field<num_complex::Complex64>;
pub type Params = ProblemParams<f64>;
pub type Generator = Problem<f64>;
pub type Mode = ModePair<f64>;
pub type Decomp = Decomposition<f64>;
pub type Integrator = Evolver<f64>;
pub type Run = Trajectory<f64>;
