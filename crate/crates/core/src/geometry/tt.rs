use super::ops::{FrameTensor, ReducedTensor};
use super::ReducedGeometry;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Order;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Free data of a reduced TT tensor.
///
/// The x-x frame component is fixed by the divergence equation up to the
/// constant `s0`; the last fibre group absorbs the trace. Each earlier group
/// takes a free frame profile, and every circle fibre i an off-diagonal
/// constant c_i with σ_{xy_i} = c_i A²/vol.
#[derive(Debug, Clone, Default)]
pub struct TTSpec {
    pub s0: f64,
    pub free: Vec<Option<ScalarField>>,
    pub off: Vec<f64>,
    /// Shift the first free profile so the divergence equation has a
    /// periodic solution instead of failing.
    pub balance: bool,
}

/// Trace-free, divergence-free reduced tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTT {
    tensor: ReducedTensor,
}

impl ReducedTT {
    pub fn zero(geom: &ReducedGeometry) -> ReducedTT {
        ReducedTT { tensor: ReducedTensor::zeros(geom) }
    }

    /// Accepts covariant components if they pass `tt_residual` at `tol` relative.
    pub fn from_tensor(geom: &ReducedGeometry, tensor: ReducedTensor, tol: f64) -> Result<ReducedTT> {
        let r = tt_residual(geom, &tensor)?;
        if r.max() > tol * r.scale.max(1.0) {
            return Err(Error::InvalidTT(format!(
                "trace residual {:.3e}, divergence residual {:.3e}",
                r.trace,
                r.divergence.max(r.off_divergence)
            )));
        }
        Ok(ReducedTT { tensor })
    }

    pub fn tensor(&self) -> &ReducedTensor {
        &self.tensor
    }

    pub fn frame(&self, geom: &ReducedGeometry) -> FrameTensor {
        self.tensor.frame(geom)
    }

    pub fn is_zero(&self) -> bool {
        let z = |v: &Vec<f64>| v.iter().all(|x| *x == 0.0);
        z(&self.tensor.xx) && self.tensor.fibre.iter().all(z) && self.tensor.off.iter().flatten().all(z)
    }

    /// θ^{-2}σ, TT for θ^{N−2}g.
    pub fn conformal(&self, theta: &[f64]) -> ReducedTT {
        let s: Vec<f64> = theta.iter().map(|t| t.powi(-2)).collect();
        ReducedTT { tensor: self.tensor.scaled(&s) }
    }

    pub(crate) fn from_tensor_unchecked(tensor: ReducedTensor) -> ReducedTT {
        ReducedTT { tensor }
    }
}

/// Sup-norm TT defects of a reduced tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTResidual {
    pub trace: f64,
    /// x-component of the divergence in integrating-factor form.
    pub divergence: f64,
    /// Fibre components of the divergence (off-diagonal part).
    pub off_divergence: f64,
    /// sup |σ|_g.
    pub scale: f64,
}

impl TTResidual {
    pub fn max(&self) -> f64 {
        self.trace.max(self.divergence).max(self.off_divergence)
    }
}

/// μ = B_last·Π_j B_j^{d_j}.
fn integrating_factor(geom: &ReducedGeometry) -> Vec<f64> {
    let fib = geom.fibres();
    let last = fib.last().expect("at least one fibre");
    (0..geom.len())
        .map(|i| last.warp[i] * fib.iter().map(|f| f.warp[i].powi(f.dim as i32)).product::<f64>())
        .collect()
}

pub fn tt_residual(geom: &ReducedGeometry, t: &ReducedTensor) -> Result<TTResidual> {
    let g = geom.grid();
    g.check_len(t.xx.len())?;
    let fib = geom.fibres();
    if t.fibre.len() != fib.len() || t.off.len() != fib.len() {
        return Err(Error::InvalidTT("component count does not match fibres".into()));
    }
    let fr = t.frame(geom);
    let trace = fr.trace(geom).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = fr.norm_sq(geom).iter().fold(0.0f64, |m, v| m.max(v.sqrt()));
    let d = geom.derived();
    let mu = integrating_factor(geom);
    let mu_u: Vec<f64> = mu.iter().zip(&fr.u).map(|(m, u)| m * u).collect();
    let dmu = g.diff(&mu_u);
    let last = fib.len() - 1;
    let mut div = 0.0f64;
    for i in 0..geom.len() {
        let p: f64 = d.dln_b[last][i] + fib.iter().zip(&d.dln_b).map(|(f, b)| f.dim as f64 * b[i]).sum::<f64>();
        let coupling: f64 =
            fib.iter().zip(&d.dln_b).zip(&fr.v).map(|((f, b), v)| f.dim as f64 * b[i] * (fr.u[i] - v[i])).sum();
        div = div.max((dmu[i] / mu[i] - p * fr.u[i] + coupling).abs());
    }
    let mut off_div = 0.0f64;
    let a = &geom.profile_a().values;
    let vol = &geom.vol().values;
    for (k, o) in t.off.iter().enumerate() {
        if let Some(o) = o {
            if !fib[k].is_circle() {
                return Err(Error::InvalidTT(format!("fibre {} cannot carry an off-diagonal component", k + 1)));
            }
            let flux: Vec<f64> = (0..o.len()).map(|i| vol[i] * o[i] / (a[i] * a[i])).collect();
            let df = g.diff(&flux);
            off_div = off_div.max(df.iter().zip(vol).fold(0.0f64, |m, (x, v)| m.max((x / v).abs())));
        }
    }
    Ok(TTResidual { trace, divergence: div, off_divergence: off_div, scale })
}

/// Divergence of the diagonal part using plain centered derivatives,
/// u' + Σ_j d_j b_j (u − v_j). Agrees with `tt_residual` to O(h^order).
pub fn natural_divergence(geom: &ReducedGeometry, t: &ReducedTensor) -> Vec<f64> {
    let fr = t.frame(geom);
    let du = geom.grid().diff(&fr.u);
    let d = geom.derived();
    (0..geom.len())
        .map(|i| {
            du[i]
                + geom
                    .fibres()
                    .iter()
                    .zip(&d.dln_b)
                    .zip(&fr.v)
                    .map(|((f, b), v)| f.dim as f64 * b[i] * (fr.u[i] - v[i]))
                    .sum::<f64>()
        })
        .collect()
}

/// Solves D U = F for periodic U with mean `mean`, D the centered difference.
fn solve_centered(order: Order, h: f64, f: &[f64], mean: f64) -> Vec<f64> {
    let n = f.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let th = 2.0 * std::f64::consts::PI * kk / n as f64;
        let s = match order {
            Order::Two => th.sin(),
            Order::Four => (8.0 * th.sin() - (2.0 * th).sin()) / 6.0,
        };
        if k == 0 {
            *c = Complex::new(mean * n as f64, 0.0);
        } else if s.abs() < 1e-14 {
            *c = Complex::new(0.0, 0.0);
        } else {
            *c /= Complex::new(0.0, s / h);
        }
    }
    inv.process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Builds a TT tensor from free data by eliminating the trace with the last
/// fibre group and integrating the divergence equation (μu)' = μQ.
pub fn make_tt_tensor(geom: &ReducedGeometry, spec: &TTSpec) -> Result<ReducedTT> {
    let g = geom.grid();
    let fib = geom.fibres();
    let nf = fib.len();
    let len = geom.len();
    if spec.free.len() > nf.saturating_sub(1) {
        return Err(Error::InvalidTT(format!(
            "{} free profiles given but only {} fibre groups precede the trace-fixing one",
            spec.free.len(),
            nf - 1
        )));
    }
    let circles: Vec<usize> = (0..nf).filter(|&k| fib[k].is_circle()).collect();
    if spec.off.len() > circles.len() {
        return Err(Error::InvalidTT(format!(
            "{} off-diagonal constants given for {} circle fibres",
            spec.off.len(),
            circles.len()
        )));
    }
    let mut v: Vec<Vec<f64>> = (0..nf.saturating_sub(1))
        .map(|k| match spec.free.get(k).and_then(|f| f.as_ref()) {
            Some(f) => {
                g.check_len(f.len())?;
                Ok(f.values.clone())
            }
            None => Ok(vec![0.0; len]),
        })
        .collect::<Result<_>>()?;
    let d = geom.derived();
    let mu = integrating_factor(geom);
    let last = nf - 1;
    let q_of = |v: &[Vec<f64>]| -> Vec<f64> {
        (0..len)
            .map(|i| {
                mu[i]
                    * (0..last)
                        .map(|k| fib[k].dim as f64 * (d.dln_b[k][i] - d.dln_b[last][i]) * v[k][i])
                        .sum::<f64>()
            })
            .collect()
    };
    let mut f = q_of(&v);
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let fscale = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if mean(&f).abs() > 1e-12 * fscale.max(1.0) {
        if !spec.balance || v.is_empty() {
            return Err(Error::InvalidTT(format!(
                "divergence equation has no periodic solution (mean source {:.3e})",
                mean(&f)
            )));
        }
        let w: Vec<f64> =
            (0..len).map(|i| mu[i] * fib[0].dim as f64 * (d.dln_b[0][i] - d.dln_b[last][i])).collect();
        let denom = mean(&w);
        if denom.abs() < 1e-12 {
            return Err(Error::InvalidTT("cannot balance: first free profile does not couple".into()));
        }
        let c = -mean(&f) / denom;
        for x in v[0].iter_mut() {
            *x += c;
        }
        f = q_of(&v);
    }
    let mu_u = solve_centered(g.order(), g.spacing(), &f, spec.s0);
    let u: Vec<f64> = mu_u.iter().zip(&mu).map(|(a, b)| a / b).collect();
    let dl = fib[last].dim as f64;
    let vl: Vec<f64> = (0..len)
        .map(|i| -(u[i] + (0..last).map(|k| fib[k].dim as f64 * v[k][i]).sum::<f64>()) / dl)
        .collect();
    v.push(vl);
    let a = &geom.profile_a().values;
    let vol = &geom.vol().values;
    let off: Vec<Option<Vec<f64>>> = (0..nf)
        .map(|k| {
            circles.iter().position(|&c| c == k).map(|pos| {
                let c = spec.off.get(pos).copied().unwrap_or(0.0);
                (0..len).map(|i| c * a[i] * a[i] / vol[i]).collect()
            })
        })
        .collect();
    // Off-diagonal constants are given in covariant form; convert to frame.
    let off_frame: Vec<Option<Vec<f64>>> = off
        .iter()
        .zip(fib)
        .map(|(o, f)| o.as_ref().map(|o| (0..len).map(|i| o[i] / (a[i] * f.warp[i])).collect()))
        .collect();
    let frame = FrameTensor { u, v, off: off_frame };
    let tensor = ReducedTensor::from_frame(geom, &frame);
    let res = tt_residual(geom, &tensor)?;
    if res.max() > 1e-10 * res.scale.max(1.0) {
        return Err(Error::InvalidTT(format!("constructed tensor fails TT check ({:.3e})", res.max())));
    }
    Ok(ReducedTT::from_tensor_unchecked(tensor))
}

#[cfg(test)]
mod tests {
    use super::super::Fibre;
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn flat_closed_form() {
        let grid = Grid::periodic(64, Order::Four).unwrap();
        let g = ReducedGeometry::flat_torus(grid.clone(), 3).unwrap();
        let q = ScalarField::from(grid.sample(|x| 0.3 * (2.0 * x).sin()));
        let tt = make_tt_tensor(&g, &TTSpec { s0: 0.7, free: vec![Some(q.clone())], off: vec![0.2, -0.1], balance: false })
            .unwrap();
        let t = tt.tensor();
        for i in 0..64 {
            assert!((t.xx[i] - 0.7).abs() < 1e-13);
            assert!((t.fibre[0][i] - q[i]).abs() < 1e-15);
            assert!((t.fibre[1][i] + 0.7 + q[i]).abs() < 1e-13);
            assert!((t.off[0].as_ref().unwrap()[i] - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_spec_is_zero() {
        let g = ReducedGeometry::flat_torus(Grid::periodic(32, Order::Two).unwrap(), 4).unwrap();
        let tt = make_tt_tensor(&g, &TTSpec::default()).unwrap();
        assert!(tt.is_zero());
    }

    #[test]
    fn non_periodic_rejected_unless_balanced() {
        let grid = Grid::periodic(64, Order::Four).unwrap();
        let b1 = ScalarField::from(grid.sample(|x| (0.3 * x.sin()).exp()));
        let b2 = ScalarField::from(grid.sample(|x| 0.7 * (0.1 * x.cos()).exp()));
        let g = ReducedGeometry::new(grid.clone(), ScalarField::constant(64, 1.0), vec![Fibre::circle(b1), Fibre::sphere(2, b2)])
            .unwrap();
        let v = ScalarField::from(grid.sample(|x| x.cos()));
        let spec = TTSpec { s0: 1.0, free: vec![Some(v)], off: vec![], balance: false };
        assert!(matches!(make_tt_tensor(&g, &spec), Err(Error::InvalidTT(_))));
        let tt = make_tt_tensor(&g, &TTSpec { balance: true, ..spec }).unwrap();
        assert!(tt_residual(&g, tt.tensor()).unwrap().max() < 1e-10);
    }
}
