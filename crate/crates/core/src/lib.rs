//! Numerical laboratory for the vacuum conformal constraint equations on
//! periodic, symmetry-reduced geometries.

pub mod coupled;
pub mod elliptic;
pub mod error;
pub mod exec;
pub mod field;
pub mod fixtures;
pub mod grid;
pub mod halfcont;
pub mod geometry;
pub mod lichnerowicz;
pub mod linalg;

pub use error::{Error, Result};
pub use field::{ReducedVector, ScalarField};
pub use grid::{Grid, Order};
pub use geometry::{Fibre, ReducedGeometry};
