//! Direct solvers for the periodic banded systems produced by the discretization.

mod banded;
mod dense;

pub use banded::{CyclicBanded, CyclicLu};
pub use dense::DenseLu;
pub(crate) use banded::normalize_sup;

/// Pivot ratio below which a factorization is declared numerically singular.
pub const SINGULAR_PIVOT: f64 = 1e-13;
