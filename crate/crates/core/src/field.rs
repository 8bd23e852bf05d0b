use crate::error::{Error, Result};

/// Grid samples of a scalar quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

/// The single component W(x) of W = W(x)∂_x.
///
/// Also used for covector sources, where `values` holds the x-component.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedVector {
    pub values: Vec<f64>,
}

macro_rules! field_common {
    ($t:ident) => {
        impl $t {
            pub fn new(values: Vec<f64>) -> Result<$t> {
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(Error::InvalidState(format!("non-finite sample {v}")));
                }
                Ok($t { values })
            }

            pub fn constant(len: usize, c: f64) -> $t {
                $t { values: vec![c; len] }
            }

            pub fn zeros(len: usize) -> $t {
                $t::constant(len, 0.0)
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            pub fn sup(&self) -> f64 {
                sup_abs(&self.values)
            }

            pub fn min(&self) -> f64 {
                self.values.iter().cloned().fold(f64::INFINITY, f64::min)
            }

            pub fn max(&self) -> f64 {
                self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }

            pub fn map(&self, f: impl Fn(f64) -> f64) -> $t {
                $t { values: self.values.iter().map(|&v| f(v)).collect() }
            }

            pub fn zip_map(&self, other: &$t, f: impl Fn(f64, f64) -> f64) -> $t {
                $t { values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() }
            }
        }

        impl From<Vec<f64>> for $t {
            fn from(values: Vec<f64>) -> $t {
                $t { values }
            }
        }

        impl std::ops::Index<usize> for $t {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.values[i]
            }
        }
    };
}

field_common!(ScalarField);
field_common!(ReducedVector);

pub fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
