use super::dense::DenseLu;
use super::SINGULAR_PIVOT;
use crate::error::{Error, Result};

/// Square matrix whose nonzeros lie on cyclic diagonals -kl..=ku.
///
/// Entry (i, (i+d) mod n) is stored at `data[i*(kl+ku+1) + d + kl]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicBanded {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl CyclicBanded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> CyclicBanded {
        assert!(kl + ku < n, "band wider than matrix");
        CyclicBanded { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.kl
    }

    pub fn upper(&self) -> usize {
        self.ku
    }

    pub fn bandwidth(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn offset(&self, i: usize, j: usize) -> Option<usize> {
        let n = self.n as isize;
        let mut d = j as isize - i as isize;
        if d > self.ku as isize {
            d -= n;
        }
        if d < -(self.kl as isize) {
            d += n;
        }
        if d < -(self.kl as isize) || d > self.ku as isize {
            return None;
        }
        Some(i * (self.kl + self.ku + 1) + (d + self.kl as isize) as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.offset(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Adds `v` at (i, j). Panics if (i, j) is outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.offset(i, j).unwrap_or_else(|| panic!("({i},{j}) outside band"));
        self.data[k] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.offset(i, j).unwrap_or_else(|| panic!("({i},{j}) outside band"));
        self.data[k] = v;
    }

    /// Iterates the stored entries of row i as (column, value).
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let w = self.kl + self.ku + 1;
        let n = self.n as isize;
        (0..w).map(move |k| {
            let d = k as isize - self.kl as isize;
            let j = ((i as isize + d) % n + n) % n;
            (j as usize, self.data[i * w + k])
        })
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| self.row(i).map(|(j, a)| a * x[j]).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// max |A_ij − A_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                m = m.max((a - self.get(j, i)).abs());
            }
        }
        m
    }

    pub fn add_diagonal(&mut self, d: &[f64]) {
        for (i, v) in d.iter().enumerate() {
            self.add(i, i, *v);
        }
    }

    /// Rows scaled by `s`: diag(s)·A.
    pub fn scale_rows(&mut self, s: &[f64]) {
        let w = self.kl + self.ku + 1;
        for i in 0..self.n {
            for k in 0..w {
                self.data[i * w + k] *= s[i];
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for (j, v) in self.row(i) {
                a[i * n + j] += v;
            }
        }
        a
    }

    /// Factor for repeated solves; numerically singular matrices yield
    /// `SingularOperator` carrying an inverse-iteration kernel estimate.
    pub fn factor(&self) -> Result<CyclicLu> {
        match self.factor_raw() {
            Ok(lu) => Ok(lu),
            Err(ratio) => Err(Error::SingularOperator { pivot_ratio: ratio, kernel: self.estimate_kernel() }),
        }
    }

    fn factor_raw(&self) -> std::result::Result<CyclicLu, f64> {
        let n = self.n;
        let r = self.kl + self.ku;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        if n < 2 * r + 2 {
            let lu = DenseLu::factor_unchecked(n, &self.to_dense());
            return if lu.min_pivot_ratio() < SINGULAR_PIVOT {
                Err(lu.min_pivot_ratio())
            } else {
                Ok(CyclicLu { n, kind: Kind::Dense(lu) })
            };
        }
        let mut band = BandLu::new(n, self.kl, self.ku);
        let mut corners: Vec<(usize, Vec<(usize, f64)>)> = Vec::with_capacity(r);
        for i in 0..n {
            let mut corner = Vec::new();
            for k in 0..=r {
                let d = k as isize - self.kl as isize;
                let j = i as isize + d;
                let v = self.data[i * (r + 1) + k];
                if j >= 0 && j < n as isize {
                    band.set(i, j as usize, v);
                } else if v != 0.0 {
                    corner.push((((j + n as isize) % n as isize) as usize, v));
                } else {
                    continue;
                }
            }
            if !corner.is_empty() {
                corners.push((i, corner));
            }
        }
        band.factor();
        if band.min_pivot(scale) < SINGULAR_PIVOT {
            let lu = DenseLu::factor_unchecked(n, &self.to_dense());
            return if lu.min_pivot_ratio() < SINGULAR_PIVOT {
                Err(lu.min_pivot_ratio())
            } else {
                Ok(CyclicLu { n, kind: Kind::Dense(lu) })
            };
        }
        let m = corners.len();
        let mut z = Vec::with_capacity(m);
        for (row, _) in &corners {
            let mut e = vec![0.0; n];
            e[*row] = 1.0;
            band.solve_in_place(&mut e);
            z.push(e);
        }
        let mut cap = vec![0.0; m * m];
        for (a, (_, entries)) in corners.iter().enumerate() {
            for (b, zb) in z.iter().enumerate() {
                let dot: f64 = entries.iter().map(|&(j, v)| v * zb[j]).sum();
                cap[a * m + b] = dot + if a == b { 1.0 } else { 0.0 };
            }
        }
        let cap_lu = DenseLu::factor_unchecked(m, &cap);
        if cap_lu.min_pivot_ratio() < SINGULAR_PIVOT {
            return Err(cap_lu.min_pivot_ratio() * band.min_pivot(scale));
        }
        let lu = CyclicLu { n, kind: Kind::Woodbury { band, corners, z, cap: cap_lu } };
        // The opened band can be far worse conditioned than the cyclic matrix;
        // probe backward stability and fall back to dense elimination.
        let probe: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 37 % 23) as f64) / 23.0).collect();
        let x = lu.solve(&probe);
        let ax = self.matvec(&x);
        let xs = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let res = ax.iter().zip(&probe).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if !(res <= 1e-12 * (scale * xs + 2.0)) {
            let dense = DenseLu::factor_unchecked(n, &self.to_dense());
            return if dense.min_pivot_ratio() < SINGULAR_PIVOT {
                Err(dense.min_pivot_ratio())
            } else {
                Ok(CyclicLu { n, kind: Kind::Dense(dense) })
            };
        }
        Ok(lu)
    }

    /// Approximate null vector by shifted inverse iteration, normalized to
    /// unit sup norm with a positive largest entry.
    pub fn estimate_kernel(&self) -> Vec<f64> {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut shifted = self.clone();
        shifted.add_diagonal(&vec![1e-9 * scale; self.n]);
        let lu = match shifted.factor_raw() {
            Ok(lu) => lu,
            Err(_) => return vec![0.0; self.n],
        };
        let mut v: Vec<f64> = (0..self.n).map(|i| 1.0 + 0.1 * ((i * 7919 % 101) as f64 / 101.0)).collect();
        for _ in 0..6 {
            v = lu.solve(&v);
            normalize_sup(&mut v);
        }
        v
    }
}

pub(crate) fn normalize_sup(v: &mut [f64]) {
    let (mut big, mut sign) = (0.0f64, 1.0);
    for x in v.iter() {
        if x.abs() > big {
            big = x.abs();
            sign = x.signum();
        }
    }
    if big > 0.0 {
        for x in v.iter_mut() {
            *x *= sign / big;
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Dense(DenseLu),
    Woodbury { band: BandLu, corners: Vec<(usize, Vec<(usize, f64)>)>, z: Vec<Vec<f64>>, cap: DenseLu },
}

/// Reusable factorization of a `CyclicBanded` matrix.
#[derive(Debug, Clone)]
pub struct CyclicLu {
    n: usize,
    kind: Kind,
}

impl CyclicLu {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        match &self.kind {
            Kind::Dense(lu) => lu.solve(b),
            Kind::Woodbury { band, corners, z, cap } => {
                let mut y = b.to_vec();
                band.solve_in_place(&mut y);
                let rhs: Vec<f64> = corners.iter().map(|(_, e)| e.iter().map(|&(j, v)| v * y[j]).sum()).collect();
                let c = cap.solve(&rhs);
                for (zc, cc) in z.iter().zip(&c) {
                    for (yi, zi) in y.iter_mut().zip(zc) {
                        *yi -= cc * zi;
                    }
                }
                y
            }
        }
    }

    /// Solve with one step of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &CyclicBanded, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve(b);
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = self.solve(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        x
    }
}

/// LAPACK-style column-major band LU with partial pivoting (no wrap).
#[derive(Debug, Clone)]
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    fn new(n: usize, kl: usize, ku: usize) -> BandLu {
        let ldab = 2 * kl + ku + 1;
        BandLu { n, kl, ku, ldab, ab: vec![0.0; ldab * n], ipiv: vec![0; n] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) + j * self.ldab
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    fn factor(&mut self) {
        let n = self.n;
        let mut ju = 0usize;
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            let mut jp = 0usize;
            let mut best = self.ab[self.idx(j, j)].abs();
            for p in 1..=km {
                let v = self.ab[self.idx(j + p, j)].abs();
                if v > best {
                    best = v;
                    jp = p;
                }
            }
            self.ipiv[j] = j + jp;
            if best == 0.0 {
                continue;
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let (a, b) = (self.idx(j, c), self.idx(j + jp, c));
                    self.ab.swap(a, b);
                }
            }
            let piv = self.ab[self.idx(j, j)];
            for p in 1..=km {
                let k = self.idx(j + p, j);
                self.ab[k] /= piv;
            }
            for c in j + 1..=ju {
                let u = self.ab[self.idx(j, c)];
                if u == 0.0 {
                    continue;
                }
                for p in 1..=km {
                    let l = self.ab[self.idx(j + p, j)];
                    let k = self.idx(j + p, c);
                    self.ab[k] -= l * u;
                }
            }
        }
    }

    fn min_pivot(&self, scale: f64) -> f64 {
        (0..self.n).map(|j| self.ab[self.idx(j, j)].abs()).fold(f64::INFINITY, f64::min) / scale
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let kv = self.kl + self.ku;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = self.kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for q in 1..=km {
                    b[j + q] -= self.ab[self.idx(j + q, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let d = self.ab[self.idx(j, j)];
            b[j] = if d == 0.0 { 0.0 } else { b[j] / d };
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= self.ab[self.idx(i, j)] * bj;
                }
            }
        }
    }
}
