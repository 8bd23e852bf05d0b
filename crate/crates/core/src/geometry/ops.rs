use super::ReducedGeometry;
use crate::error::Result;
use crate::field::{ReducedVector, ScalarField};
use crate::linalg::CyclicBanded;

/// Symmetric 2-tensor in reduced form, covariant components:
/// σ_xx, the isotropic coefficient σ_{yy} of each fibre group, and σ_{xy}
/// for circle fibres.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTensor {
    pub xx: Vec<f64>,
    pub fibre: Vec<Vec<f64>>,
    pub off: Vec<Option<Vec<f64>>>,
}

impl ReducedTensor {
    pub fn zeros(geom: &ReducedGeometry) -> ReducedTensor {
        let n = geom.len();
        ReducedTensor {
            xx: vec![0.0; n],
            fibre: geom.fibres().iter().map(|_| vec![0.0; n]).collect(),
            off: geom.fibres().iter().map(|f| if f.is_circle() { Some(vec![0.0; n]) } else { None }).collect(),
        }
    }

    /// Components in the orthonormal frame (A⁻¹∂_x, B_j⁻¹∂_y).
    pub fn frame(&self, geom: &ReducedGeometry) -> FrameTensor {
        let a = &geom.profile_a().values;
        let u = self.xx.iter().zip(a).map(|(s, a)| s / (a * a)).collect();
        let v = self
            .fibre
            .iter()
            .zip(geom.fibres())
            .map(|(s, f)| s.iter().zip(&f.warp.values).map(|(s, b)| s / (b * b)).collect())
            .collect();
        let off = self
            .off
            .iter()
            .zip(geom.fibres())
            .map(|(o, f)| {
                o.as_ref()
                    .map(|o| o.iter().zip(a).zip(&f.warp.values).map(|((s, a), b)| s / (a * b)).collect())
            })
            .collect();
        FrameTensor { u, v, off }
    }

    pub fn from_frame(geom: &ReducedGeometry, t: &FrameTensor) -> ReducedTensor {
        let a = &geom.profile_a().values;
        ReducedTensor {
            xx: t.u.iter().zip(a).map(|(s, a)| s * a * a).collect(),
            fibre: t
                .v
                .iter()
                .zip(geom.fibres())
                .map(|(s, f)| s.iter().zip(&f.warp.values).map(|(s, b)| s * b * b).collect())
                .collect(),
            off: t
                .off
                .iter()
                .zip(geom.fibres())
                .map(|(o, f)| {
                    o.as_ref()
                        .map(|o| o.iter().zip(a).zip(&f.warp.values).map(|((s, a), b)| s * a * b).collect())
                })
                .collect(),
        }
    }

    /// Pointwise g^{ij}σ_ij.
    pub fn trace(&self, geom: &ReducedGeometry) -> Vec<f64> {
        self.frame(geom).trace(geom)
    }

    /// Pointwise |σ|²_g.
    pub fn norm_sq(&self, geom: &ReducedGeometry) -> Vec<f64> {
        self.frame(geom).norm_sq(geom)
    }

    pub fn scaled(&self, s: &[f64]) -> ReducedTensor {
        let m = |v: &Vec<f64>| v.iter().zip(s).map(|(a, b)| a * b).collect::<Vec<f64>>();
        ReducedTensor {
            xx: m(&self.xx),
            fibre: self.fibre.iter().map(m).collect(),
            off: self.off.iter().map(|o| o.as_ref().map(m)).collect(),
        }
    }
}

/// Orthonormal-frame components of a `ReducedTensor`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTensor {
    pub u: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub off: Vec<Option<Vec<f64>>>,
}

impl FrameTensor {
    pub fn trace(&self, geom: &ReducedGeometry) -> Vec<f64> {
        (0..self.u.len())
            .map(|i| self.u[i] + geom.fibres().iter().zip(&self.v).map(|(f, v)| f.dim as f64 * v[i]).sum::<f64>())
            .collect()
    }

    pub fn norm_sq(&self, geom: &ReducedGeometry) -> Vec<f64> {
        (0..self.u.len())
            .map(|i| {
                let mut s = self.u[i] * self.u[i];
                for (f, v) in geom.fibres().iter().zip(&self.v) {
                    s += f.dim as f64 * v[i] * v[i];
                }
                for o in self.off.iter().flatten() {
                    s += 2.0 * o[i] * o[i];
                }
                s
            })
            .collect()
    }
}

/// Frame coefficients of L: λ_a = α_a·W' + β_a·W.
pub(crate) fn l_coefficients(geom: &ReducedGeometry, dln_a: &[f64], dln_b: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = geom.dim() as f64;
    let fib = geom.fibres();
    let mut alpha = vec![2.0 * (n - 1.0) / n];
    alpha.extend(fib.iter().map(|_| -2.0 / n));
    let m = dln_a.len();
    let divc: Vec<f64> =
        (0..m).map(|i| dln_a[i] + fib.iter().zip(dln_b).map(|(f, b)| f.dim as f64 * b[i]).sum::<f64>()).collect();
    let mut beta = vec![(0..m).map(|i| 2.0 * dln_a[i] - 2.0 / n * divc[i]).collect::<Vec<f64>>()];
    for b in dln_b {
        beta.push((0..m).map(|i| 2.0 * b[i] - 2.0 / n * divc[i]).collect());
    }
    (alpha, beta)
}

/// Multiplicity of each frame component of L (1 for x, d_j per fibre).
pub(crate) fn multiplicities(geom: &ReducedGeometry) -> Vec<f64> {
    let mut m = vec![1.0];
    m.extend(geom.fibres().iter().map(|f| f.dim as f64));
    m
}

/// Collocated frame components λ_a of LW at grid points.
pub(crate) fn l_frame(geom: &ReducedGeometry, w: &[f64]) -> Vec<Vec<f64>> {
    let d = geom.derived();
    let (alpha, beta) = l_coefficients(geom, &d.dln_a, &d.dln_b);
    let dw = geom.grid().diff(w);
    alpha
        .iter()
        .zip(&beta)
        .map(|(al, be)| (0..w.len()).map(|i| al * dw[i] + be[i] * w[i]).collect())
        .collect()
}

/// Conformal Killing operator on W = W(x)∂_x (collocated centered differences).
pub fn apply_l(geom: &ReducedGeometry, w: &ReducedVector) -> Result<ReducedTensor> {
    geom.grid().check_len(w.len())?;
    let lam = l_frame(geom, &w.values);
    let frame = FrameTensor {
        u: lam[0].clone(),
        v: lam[1..].to_vec(),
        off: geom.fibres().iter().map(|f| if f.is_circle() { Some(vec![0.0; w.len()]) } else { None }).collect(),
    };
    Ok(ReducedTensor::from_frame(geom, &frame))
}

/// Half-point discretization of L used to assemble ½L*L.
#[derive(Debug, Clone)]
pub struct StaggeredL {
    pub alpha: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub mult: Vec<f64>,
    /// vol at x_{j+1/2}.
    pub weight: Vec<f64>,
}

impl StaggeredL {
    pub fn new(geom: &ReducedGeometry) -> StaggeredL {
        let d = geom.derived();
        let (alpha, beta) = l_coefficients(geom, &d.dln_a_half, &d.dln_b_half);
        StaggeredL { alpha, beta, mult: multiplicities(geom), weight: d.vol_half.clone() }
    }

    /// Frame components at half points.
    pub fn apply(&self, geom: &ReducedGeometry, w: &[f64]) -> Vec<Vec<f64>> {
        let g = geom.grid();
        let dw = g.diff_half(w);
        let iw = g.interp_half(w);
        self.alpha.iter().zip(&self.beta).map(|(al, be)| (0..w.len()).map(|i| al * dw[i] + be[i] * iw[i]).collect()).collect()
    }

    /// Σ_a mult_a ∫ λ_a(W) λ_a(V) over the staggered quadrature.
    pub fn inner(&self, geom: &ReducedGeometry, lw: &[Vec<f64>], lv: &[Vec<f64>]) -> f64 {
        let h = geom.grid().spacing();
        let mut s = 0.0;
        for ((a, b), m) in lw.iter().zip(lv).zip(&self.mult) {
            for i in 0..a.len() {
                s += m * a[i] * b[i] * self.weight[i] * h;
            }
        }
        s
    }
}

/// Staggered frame components of LW (for adjointness checks).
pub fn staggered_l(geom: &ReducedGeometry, w: &ReducedVector) -> Result<Vec<Vec<f64>>> {
    geom.grid().check_len(w.len())?;
    Ok(StaggeredL::new(geom).apply(geom, &w.values))
}

/// ½L*LW as an x-covector component, matrix-free.
pub fn half_vector_laplacian(geom: &ReducedGeometry, w: &ReducedVector) -> Result<ReducedVector> {
    let g = geom.grid();
    g.check_len(w.len())?;
    let sl = StaggeredL::new(geom);
    let lam = sl.apply(geom, &w.values);
    let n = w.len();
    let mut out = vec![0.0; n];
    let interp = g.staggered_interp_stencil();
    for (a, la) in lam.iter().enumerate() {
        let y: Vec<f64> = (0..n).map(|i| 0.5 * sl.mult[a] * sl.weight[i] * la[i]).collect();
        let dt = g.diff_half_transpose(&y);
        for i in 0..n {
            out[i] += sl.alpha[a] * dt[i];
        }
        for (i, yi) in y.iter().enumerate() {
            for &(o, c) in interp {
                out[g.wrap(i, o)] += c * sl.beta[a][i] * yi;
            }
        }
    }
    let vol = &geom.vol().values;
    Ok(ReducedVector::from(out.iter().zip(vol).map(|(o, v)| o / v).collect::<Vec<f64>>()))
}

/// Negative Laplacian Δf = −(1/vol)(vol A⁻² f')', matrix-free flux form.
pub fn laplacian_apply(geom: &ReducedGeometry, f: &ScalarField) -> Result<ScalarField> {
    let g = geom.grid();
    g.check_len(f.len())?;
    let c = &geom.derived().cond_half;
    let flux: Vec<f64> = g.diff_half(&f.values).iter().zip(c).map(|(d, c)| d * c).collect();
    let div = g.diff_half_transpose(&flux);
    Ok(ScalarField::from(div.iter().zip(&geom.vol().values).map(|(d, v)| d / v).collect::<Vec<f64>>()))
}

fn half_band(geom: &ReducedGeometry) -> usize {
    match geom.grid().order() {
        crate::grid::Order::Two => 1,
        crate::grid::Order::Four => 3,
    }
}

/// Rows of the staggered operator W ↦ α D_s W + β I_s W at half point i.
fn staggered_row(geom: &ReducedGeometry, i: usize, alpha: f64, beta: f64) -> Vec<(usize, f64)> {
    let g = geom.grid();
    let h = g.spacing();
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(4);
    for &(o, c) in g.staggered_diff_stencil() {
        row.push((g.wrap(i, o), alpha * c / h));
    }
    for (k, &(o, c)) in g.staggered_interp_stencil().iter().enumerate() {
        let j = g.wrap(i, o);
        debug_assert_eq!(row[k].0, j);
        row[k].1 += beta * c;
    }
    row
}

pub(crate) fn assemble_laplacian(geom: &ReducedGeometry) -> CyclicBanded {
    let n = geom.len();
    let hb = half_band(geom);
    let mut k = CyclicBanded::zeros(n, hb, hb);
    let c = &geom.derived().cond_half;
    for i in 0..n {
        let row = staggered_row(geom, i, 1.0, 0.0);
        for &(p, a) in &row {
            for &(q, b) in &row {
                k.add(p, q, a * c[i] * b);
            }
        }
    }
    k
}

pub(crate) fn assemble_vector_laplacian(geom: &ReducedGeometry) -> CyclicBanded {
    let n = geom.len();
    let hb = half_band(geom);
    let sl = StaggeredL::new(geom);
    let mut s = CyclicBanded::zeros(n, hb, hb);
    for a in 0..sl.alpha.len() {
        for i in 0..n {
            let row = staggered_row(geom, i, sl.alpha[a], sl.beta[a][i]);
            let w = 0.5 * sl.mult[a] * sl.weight[i];
            for &(p, x) in &row {
                for &(q, y) in &row {
                    s.add(p, q, x * w * y);
                }
            }
        }
    }
    s
}
