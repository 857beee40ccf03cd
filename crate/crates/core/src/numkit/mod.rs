//! Small dense, banded and sparse linear algebra kernels.

mod banded;
mod block;
mod cg;
mod dense;
mod eig;
mod sparse;
mod sum;

pub use banded::{banded_solve, BandedLu, BandedMatrix};
pub use block::BlockSolver;
pub use cg::{cg_solve, CgOutcome};
pub use dense::{lu_solve, DenseMatrix, LuFactors, Scalar, PIVOT_THRESHOLD};
pub use eig::{det, eig4, eigenvalues};
pub use sparse::CsrMatrix;
pub use sum::CompensatedSum;
