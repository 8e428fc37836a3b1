//! Single-bit-upset error analysis for binary64 arithmetic.
//!
//! The crate models how one flipped bit in an IEEE-754 double perturbs a
//! value ([`float_anatomy`], [`scalar_fault`]), a dot product
//! ([`dot_fault`]), a Monte Carlo campaign over random vectors
//! ([`monte_carlo`]), and the orthogonalization kernel of restarted GMRES
//! ([`gmres`]) on sparse matrices ([`sparse`]).

pub mod dot_fault;
pub mod error;
pub mod float_anatomy;
pub mod gmres;
pub mod io;
pub mod monte_carlo;
pub mod scalar_fault;
pub mod sparse;
pub mod wide;

pub use dot_fault::{
    classify_errors, dot_product, enumerate_dot_errors, extract_interval, predict_bit_failure, ClassifiedTable,
    ErrorClass, ErrorClassTally, ErrorLookupTable, ExponentInterval, PowerOfTwo, Site,
};
pub use error::{Error, Result};
pub use float_anatomy::{decompose, flip_bit, order_of_magnitude_bound, reconstruct, BitIndex, BitRegion, FloatAnatomy, ValueKind};
pub use gmres::{analyze, gmres_solve, Analysis, GmresConfig, GmresReport, RhsMode, StopReason};
pub use monte_carlo::{run_cell, run_surface, McConfig, McSurface};
pub use scalar_fault::{enumerate_perturbations, perturb, scalar_abs_error, AbsError, PerturbationRecord};
pub use sparse::{equilibrate, gen_poisson, norms, CsrMatrix, EquilibrationScaling, Norms};
pub use wide::Wide;
