use crate::error::{Error, Result};

/// LU factorization with partial pivoting of a small dense row-major matrix.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    min_pivot_ratio: f64,
}

impl DenseLu {
    /// Factor, failing with `SingularOperator` when a pivot ratio drops below `tol`.
    pub fn factor(n: usize, a: &[f64], tol: f64) -> Result<DenseLu> {
        let lu = DenseLu::factor_unchecked(n, a);
        if lu.min_pivot_ratio < tol {
            return Err(Error::SingularOperator { pivot_ratio: lu.min_pivot_ratio, kernel: vec![] });
        }
        Ok(lu)
    }

    pub fn factor_unchecked(n: usize, a: &[f64]) -> DenseLu {
        assert_eq!(a.len(), n * n);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_ratio = f64::INFINITY;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            min_ratio = min_ratio.min(best / scale);
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let piv = lu[k * n + k];
            if piv == 0.0 {
                continue;
            }
            for i in k + 1..n {
                let l = lu[i * n + k] / piv;
                lu[i * n + k] = l;
                if l != 0.0 {
                    for c in k + 1..n {
                        lu[i * n + c] -= l * lu[k * n + c];
                    }
                }
            }
        }
        DenseLu { n, lu, perm, min_pivot_ratio: min_ratio }
    }

    pub fn min_pivot_ratio(&self) -> f64 {
        self.min_pivot_ratio
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for c in 0..i {
                s -= self.lu[i * n + c] * x[c];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for c in i + 1..n {
                s -= self.lu[i * n + c] * x[c];
            }
            let d = self.lu[i * n + i];
            x[i] = if d == 0.0 { 0.0 } else { s / d };
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let lu = DenseLu::factor(3, &a, 1e-13).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        for (xi, ei) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((xi - ei).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_detected() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(matches!(DenseLu::factor(2, &a, 1e-13), Err(Error::SingularOperator { .. })));
    }
}
