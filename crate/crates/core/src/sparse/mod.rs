//! Compressed sparse row matrices, Matrix Market I/O, the 2-D Poisson model
//! problem, norms, and row/column equilibration.

mod csr;
mod equilibrate;
mod market;
mod norms;
mod poisson;

pub use csr::CsrMatrix;
pub use equilibrate::{apply_scaling_to_rhs, equilibrate, unscale_solution, EquilibrationScaling};
pub use market::{read_matrix_market, read_matrix_market_from, read_matrix_market_header, write_matrix_market, write_matrix_market_to, MatrixMarketHeader};
pub use norms::{norms, norms_with, two_norm_estimate, Norms, TwoNormOptions};
pub use poisson::gen_poisson;
