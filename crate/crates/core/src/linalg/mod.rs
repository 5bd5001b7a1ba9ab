//! Numeric kernels: sparse products, dense ops with adjoints, Cholesky, and
//! the Gram-matrix terms of the regularizer.
//!
//! All reductions are sequential, so results do not depend on thread count.

pub mod cholesky;
pub mod dense;
pub mod gram;
pub mod sparse;

pub use cholesky::{cholesky, Cholesky};
pub use dense::*;
pub use gram::{logdet_gram, trace_quadratic, trace_quadratic_grad, LogdetGram};
pub use sparse::CsrMatrix;
