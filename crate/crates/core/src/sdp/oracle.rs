//! Multistart local search for the un-relaxed problem on small instances.
//! The target constraints are eliminated as `w = w0 + N z`; the quadratic
//! equalities are handled by an augmented Lagrangian with damped Newton
//! steps, followed by a Gauss-Newton feasibility projection.

use nalgebra::{Cholesky, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::problem::{build_problem, LiftedProblem, Variant};
use super::solve::quadratic_residual;
use crate::beamform::{bmvdr, jblcmv, ConstraintSet, RefMics};
use crate::error::{Error, Result};
use crate::linalg::{
    c, complement_basis, hermitian_norm2, min_norm_solution, real_form, stack_real, unstack_real, CMat, CVec, RMat,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub starts: usize,
    pub seed: u64,
    pub residual_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            starts: 64,
            seed: 0x5eed,
            residual_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Best point found; feasible when `feasible` is set.
    pub w: CVec,
    /// `w^H P~ w`, an upper bound on the un-relaxed optimum when feasible.
    pub objective: f64,
    /// Largest normalized quadratic residual at `w`.
    pub residual: f64,
    pub feasible: bool,
    pub starts: usize,
}

/// Quadratic `x^T Q x + 2 g^T x + k` in the real null-space coordinates.
struct Quad {
    q: RMat,
    g: DVector<f64>,
    k: f64,
}

impl Quad {
    fn new(h: &CMat, basis: &CMat, w0: &CVec) -> Self {
        let q = real_form(&(basis.adjoint() * h * basis));
        let g = stack_real(&(basis.adjoint() * h * w0));
        let k = (w0.adjoint() * h * w0)[(0, 0)].re;
        Self {
            q: (&q + q.transpose()) * 0.5,
            g,
            k,
        }
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.q * x)) + 2.0 * self.g.dot(x) + self.k
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.q * x + &self.g) * 2.0
    }
}

struct Model {
    f: Quad,
    h: Vec<Quad>,
}

impl Model {
    fn lagrangian(&self, x: &DVector<f64>, lam: &[f64], rho: f64) -> f64 {
        let mut v = self.f.value(x);
        for (hi, &li) in self.h.iter().zip(lam) {
            let hv = hi.value(x);
            v += li * hv + 0.5 * rho * hv * hv;
        }
        v
    }

    fn minimize_al(&self, mut x: DVector<f64>, lam: &[f64], rho: f64) -> DVector<f64> {
        let n = x.len();
        for _ in 0..60 {
            let mut grad = self.f.grad(&x);
            let mut hess = &self.f.q * 2.0;
            for (hi, &li) in self.h.iter().zip(lam) {
                let hv = hi.value(&x);
                let gh = hi.grad(&x);
                let mult = li + rho * hv;
                grad += &gh * mult;
                hess += &hi.q * (2.0 * mult) + &gh * gh.transpose() * rho;
            }
            let gnorm = grad.norm();
            if gnorm < 1e-13 * (1.0 + x.norm()) {
                break;
            }
            let mut tau = 0.0;
            let dir = loop {
                let shifted = &hess + RMat::identity(n, n) * tau;
                if let Some(ch) = Cholesky::new(shifted) {
                    break ch.solve(&(-&grad));
                }
                tau = if tau == 0.0 {
                    1e-8 * (1.0 + hess.norm())
                } else {
                    tau * 10.0
                };
            };
            let base = self.lagrangian(&x, lam, rho);
            let slope = grad.dot(&dir);
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..40 {
                let cand = &x + &dir * step;
                if self.lagrangian(&cand, lam, rho) <= base + 1e-4 * step * slope {
                    x = cand;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        x
    }

    fn project(&self, mut x: DVector<f64>) -> DVector<f64> {
        let r = self.h.len();
        for _ in 0..30 {
            let h = DVector::from_iterator(r, self.h.iter().map(|q| q.value(&x)));
            if h.amax() < 1e-15 {
                break;
            }
            let mut jac = RMat::zeros(r, x.len());
            for (i, q) in self.h.iter().enumerate() {
                jac.set_row(i, &q.grad(&x).transpose());
            }
            let Some(sol) = (&jac * jac.transpose()).lu().solve(&h) else {
                break;
            };
            x -= jac.transpose() * sol;
        }
        x
    }

    fn local(&self, x0: DVector<f64>) -> DVector<f64> {
        if self.h.is_empty() {
            return self.minimize_al(x0, &[], 0.0);
        }
        let mut x = x0;
        let mut lam = vec![0.0; self.h.len()];
        let mut rho = 10.0;
        let mut prev = f64::INFINITY;
        for _ in 0..40 {
            x = self.minimize_al(x, &lam, rho);
            let hv: Vec<f64> = self.h.iter().map(|q| q.value(&x)).collect();
            let infeas = hv.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for (l, h) in lam.iter_mut().zip(&hv) {
                *l += rho * h;
            }
            if infeas < 1e-13 {
                break;
            }
            if infeas > 0.25 * prev {
                rho = (rho * 10.0).min(1e10);
            }
            prev = infeas;
        }
        self.project(x)
    }
}

/// Best feasible point found for the original (un-relaxed) problem.
pub fn qcqp_oracle(
    p_n: &CMat,
    a: &CVec,
    interferers: &[CVec],
    c_factors: &[f64],
    refs: RefMics,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    let m = a.len();
    if m > 3 || interferers.len() > 2 {
        return Err(Error::Input(format!(
            "oracle is limited to M <= 3 and r <= 2, got M = {m}, r = {}",
            interferers.len()
        )));
    }
    let problem = build_problem(p_n, a, interferers, c_factors, refs, Variant::Problem2)?;
    oracle_for(&problem, p_n, a, interferers, refs, opts)
}

fn oracle_for(
    problem: &LiftedProblem,
    p_n: &CMat,
    a: &CVec,
    interferers: &[CVec],
    refs: RefMics,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    let w0 = min_norm_solution(&problem.lambda_a, &problem.f_a)?;
    let basis = complement_basis(&problem.lambda_a);

    let w_b = bmvdr(p_n, a, refs)?;
    let scale = w_b.norm().max(f64::MIN_POSITIVE);
    let p_scale = problem.p_tilde.trace().re.abs().max(f64::MIN_POSITIVE);
    let w0s = &w0 / c(scale, 0.0);
    let model = Model {
        f: Quad::new(&(&problem.p_tilde / c(p_scale, 0.0)), &basis, &w0s),
        h: problem
            .m
            .iter()
            .map(|mi| Quad::new(&(mi / c(hermitian_norm2(mi), 0.0)), &basis, &w0s))
            .collect(),
    };
    let to_x = |w: &CVec| stack_real(&(basis.adjoint() * (w - &w0) / c(scale, 0.0)));
    let to_w = |x: &DVector<f64>| &w0 + &basis * unstack_real(x) * c(scale, 0.0);

    let mut seeds = vec![DVector::zeros(2 * basis.ncols()), to_x(&w_b)];
    if let Ok((w_j, _)) = jblcmv(p_n, &ConstraintSet::new(a, interferers, refs)) {
        seeds.push(to_x(&w_j));
    }
    let spread = seeds[1].norm().max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    for i in 0..opts.starts {
        let radius = spread * [0.1, 1.0, 3.0, 10.0][i % 4];
        seeds.push(DVector::from_fn(2 * basis.ncols(), |_, _| {
            radius * normal.sample(&mut rng)
        }));
    }

    let evaluate = |x: &DVector<f64>| {
        let w = to_w(x);
        let residual = problem
            .m
            .iter()
            .map(|mi| quadratic_residual(&w, mi))
            .fold(0.0, f64::max);
        (problem.objective_at(&w), residual, w)
    };
    let mut best: Option<(f64, f64, CVec)> = None;
    let mut closest: Option<(f64, f64, CVec)> = None;
    let starts = seeds.len();
    for seed in seeds {
        for x in [model.project(seed.clone()), model.local(seed)] {
            let (obj, res, w) = evaluate(&x);
            if !obj.is_finite() {
                continue;
            }
            if res < opts.residual_tol && best.as_ref().is_none_or(|b| obj < b.0) {
                best = Some((obj, res, w.clone()));
            }
            if closest.as_ref().is_none_or(|b| res < b.1) {
                closest = Some((obj, res, w));
            }
        }
    }
    let feasible = best.is_some();
    let (objective, residual, w) = best
        .or(closest)
        .ok_or_else(|| Error::Numeric("oracle produced no finite candidate".into()))?;
    Ok(OracleResult {
        w,
        objective,
        residual,
        feasible,
        starts,
    })
}
