use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Centered finite-difference order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Two,
    Four,
}

impl Order {
    pub fn from_int(k: usize) -> Option<Order> {
        match k {
            2 => Some(Order::Two),
            4 => Some(Order::Four),
            _ => None,
        }
    }

    pub fn as_int(self) -> usize {
        match self {
            Order::Two => 2,
            Order::Four => 4,
        }
    }
}

/// Uniform periodic grid x_j = j·h, j = 0..num_points.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    num_points: usize,
    period: f64,
    order: Order,
}

impl Grid {
    pub fn new(num_points: usize, period: f64, order: Order) -> Result<Grid> {
        if num_points < 16 {
            return Err(Error::InvalidMetric(format!("grid needs at least 16 points, got {num_points}")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidMetric(format!("bad period {period}")));
        }
        Ok(Grid { num_points, period, order })
    }

    /// 2π-periodic grid.
    pub fn periodic(num_points: usize, order: Order) -> Result<Grid> {
        Grid::new(num_points, 2.0 * PI, order)
    }

    pub fn len(&self) -> usize {
        self.num_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.num_points as f64
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.num_points).map(|j| self.x(j)).collect()
    }

    /// Cyclic index j + offset.
    #[inline]
    pub fn wrap(&self, j: usize, offset: isize) -> usize {
        let n = self.num_points as isize;
        (((j as isize + offset) % n + n) % n) as usize
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.num_points).map(|j| f(self.x(j))).collect()
    }

    /// Centered first derivative: (offset, weight·h) pairs.
    pub fn centered_stencil(&self) -> &'static [(isize, f64)] {
        match self.order {
            Order::Two => &[(-1, -0.5), (1, 0.5)],
            Order::Four => &[(-2, 1.0 / 12.0), (-1, -2.0 / 3.0), (1, 2.0 / 3.0), (2, -1.0 / 12.0)],
        }
    }

    /// Grid to half-point j+1/2 derivative.
    pub fn staggered_diff_stencil(&self) -> &'static [(isize, f64)] {
        match self.order {
            Order::Two => &[(0, -1.0), (1, 1.0)],
            Order::Four => &[(-1, 1.0 / 24.0), (0, -27.0 / 24.0), (1, 27.0 / 24.0), (2, -1.0 / 24.0)],
        }
    }

    /// Grid to half-point j+1/2 interpolation.
    pub fn staggered_interp_stencil(&self) -> &'static [(isize, f64)] {
        match self.order {
            Order::Two => &[(0, 0.5), (1, 0.5)],
            Order::Four => &[(-1, -1.0 / 16.0), (0, 9.0 / 16.0), (1, 9.0 / 16.0), (2, -1.0 / 16.0)],
        }
    }

    fn apply(&self, f: &[f64], stencil: &[(isize, f64)], scale: f64) -> Vec<f64> {
        (0..self.num_points)
            .map(|j| stencil.iter().map(|&(o, c)| c * f[self.wrap(j, o)]).sum::<f64>() * scale)
            .collect()
    }

    pub fn diff(&self, f: &[f64]) -> Vec<f64> {
        self.apply(f, self.centered_stencil(), 1.0 / self.spacing())
    }

    pub fn diff_half(&self, f: &[f64]) -> Vec<f64> {
        self.apply(f, self.staggered_diff_stencil(), 1.0 / self.spacing())
    }

    pub fn interp_half(&self, f: &[f64]) -> Vec<f64> {
        self.apply(f, self.staggered_interp_stencil(), 1.0)
    }

    /// Interpolation of a positive field through its logarithm.
    pub fn interp_half_positive(&self, f: &[f64]) -> Vec<f64> {
        let l: Vec<f64> = f.iter().map(|v| v.ln()).collect();
        self.interp_half(&l).into_iter().map(f64::exp).collect()
    }

    /// Adjoint (transpose) of `diff_half`: maps half-point data to grid points.
    pub fn diff_half_transpose(&self, g: &[f64]) -> Vec<f64> {
        let st = self.staggered_diff_stencil();
        let h = self.spacing();
        let mut out = vec![0.0; self.num_points];
        for (j, gj) in g.iter().enumerate() {
            for &(o, c) in st {
                out[self.wrap(j, o)] += c * gj / h;
            }
        }
        out
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.num_points {
            return Err(Error::ShapeMismatch { expected: self.num_points, got: len });
        }
        Ok(())
    }
}
