//! Dense primal-dual interior-point method (HKM direction, Mehrotra
//! predictor-corrector) for small real semidefinite programs.

use nalgebra::{Cholesky, DVector, SymmetricEigen};

use super::problem::RealSdp;
use crate::linalg::RMat;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    /// Target for relative primal/dual infeasibility and gap.
    pub tol: f64,
    /// Accepted when progress stalls.
    pub accept_tol: f64,
    pub max_iter: usize,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            accept_tol: 1e-7,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Optimal,
    Infeasible,
    Failed,
}

#[derive(Debug, Clone)]
pub struct IpmResult {
    pub x: RMat,
    pub y: DVector<f64>,
    pub s: RMat,
    pub status: IpmStatus,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub gap: f64,
}

struct Residuals {
    rp: DVector<f64>,
    rd: RMat,
    pinf: f64,
    dinf: f64,
    gap: f64,
}

fn sym(m: RMat) -> RMat {
    (&m + m.transpose()) * 0.5
}

fn apply_a(a: &[RMat], x: &RMat) -> DVector<f64> {
    DVector::from_iterator(a.len(), a.iter().map(|ai| ai.dot(x)))
}

fn residuals(p: &RealSdp, b: &DVector<f64>, x: &RMat, y: &DVector<f64>, s: &RMat) -> Residuals {
    let rp = b - apply_a(&p.a, x);
    let mut rd = &p.c - s;
    for (ai, yi) in p.a.iter().zip(y.iter()) {
        rd -= ai * *yi;
    }
    let pobj = p.c.dot(x);
    let dobj = b.dot(y);
    let denom = 1.0 + pobj.abs() + dobj.abs();
    Residuals {
        pinf: rp.norm() / (1.0 + b.norm()),
        dinf: rd.norm() / (1.0 + p.c.norm()),
        // complementarity; |pobj - dobj| also carries y^T r_p, which is
        // inflated by the large multipliers of nearly dependent rows
        gap: x.dot(s).abs() / denom,
        rp,
        rd,
    }
}

/// Largest step keeping `x + alpha dx` positive semidefinite.
fn max_step(x: &RMat, dx: &RMat) -> Option<f64> {
    let l = Cholesky::new(x.clone())?.l();
    let linv = l.solve_lower_triangular(&RMat::identity(x.nrows(), x.nrows()))?;
    let m = sym(&linv * dx * linv.transpose());
    let min = SymmetricEigen::new(m).eigenvalues.min();
    Some(if min >= 0.0 { f64::INFINITY } else { -1.0 / min })
}

fn inverse_spd(s: &RMat) -> Option<RMat> {
    let chol = Cholesky::new(s.clone())?;
    Some(sym(chol.inverse()))
}

pub fn solve_real(p: &RealSdp, opts: &IpmOptions) -> IpmResult {
    let n = p.c.nrows();
    let m = p.a.len();
    let b = DVector::from_column_slice(&p.b);
    let nf = n as f64;

    let max_a = p.a.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let xi = (0..m)
        .map(|i| nf * (1.0 + b[i].abs()) / (1.0 + p.a[i].norm()))
        .fold(10.0_f64.max(nf.sqrt()), f64::max);
    let eta = 10.0_f64.max(nf.sqrt()).max(max_a).max(p.c.norm());
    let mut x = RMat::identity(n, n) * xi;
    let mut s = RMat::identity(n, n) * eta;
    let mut y = DVector::zeros(m);

    let mut best: Option<(f64, RMat, DVector<f64>, RMat, f64, f64, f64)> = None;
    let mut status = IpmStatus::Failed;
    let mut iterations = 0;
    let mut stall = 0;

    for it in 0..=opts.max_iter {
        iterations = it;
        let r = residuals(p, &b, &x, &y, &s);
        let merit = r.pinf.max(r.dinf).max(r.gap);
        if best.as_ref().is_none_or(|bst| merit < bst.0) {
            best = Some((merit, x.clone(), y.clone(), s.clone(), r.pinf, r.dinf, r.gap));
        }
        if merit < opts.tol {
            status = IpmStatus::Optimal;
            break;
        }
        // unbounded dual with a stuck primal residual: no feasible X
        if r.pinf > opts.accept_tol && y.norm() > 1e10 * (1.0 + b.norm()) && b.dot(&y) > 0.0 {
            status = IpmStatus::Infeasible;
            break;
        }
        if it == opts.max_iter || stall >= 4 {
            break;
        }

        let Some(sinv) = inverse_spd(&s) else { break };
        let g: Vec<RMat> = p.a.iter().map(|ai| &x * ai * &sinv).collect();
        let mut h = RMat::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = p.a[i].dot(&g[j].transpose());
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let chol = match Cholesky::new(h.clone()) {
            Some(c) => c,
            None => {
                let reg = 1e-14 * h.trace().abs().max(1e-300);
                match Cholesky::new(h.clone() + RMat::identity(m, m) * reg) {
                    Some(c) => c,
                    None => break,
                }
            }
        };
        let mu = x.dot(&s) / nf;
        let x_rd_sinv = &x * &r.rd * &sinv;

        let direction = |t: RMat| -> (DVector<f64>, RMat, RMat) {
            let rhs = &r.rp - apply_a(&p.a, &t);
            let mut dy = chol.solve(&rhs);
            let resid = &rhs - &h * &dy;
            dy += chol.solve(&resid);
            let mut ds = r.rd.clone();
            let mut dx = t;
            for j in 0..m {
                ds -= &p.a[j] * dy[j];
                dx += &g[j] * dy[j];
            }
            (dy, sym(ds), sym(dx))
        };

        let base = -&x - &x_rd_sinv;
        let (_, ds_aff, dx_aff) = direction(base.clone());
        let ap = max_step(&x, &dx_aff).unwrap_or(0.0).min(1.0);
        let ad = max_step(&s, &ds_aff).unwrap_or(0.0).min(1.0);
        let mu_aff = (&x + &dx_aff * ap).dot(&(&s + &ds_aff * ad)) / nf;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let t = &sinv * (sigma * mu) + base - &dx_aff * &ds_aff * &sinv;
        let (dy, ds, dx) = direction(t);
        let gamma = 0.98;
        let ap = (gamma * max_step(&x, &dx).unwrap_or(0.0)).min(1.0);
        let ad = (gamma * max_step(&s, &ds).unwrap_or(0.0)).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stall += 1;
        } else {
            stall = 0;
        }
        x = sym(&x + &dx * ap);
        s = sym(&s + &ds * ad);
        y += &dy * ad;
    }

    let (merit, bx, by, bs, pinf, dinf, gap) = best.expect("at least one iterate");
    if status == IpmStatus::Failed && merit < opts.accept_tol {
        status = IpmStatus::Optimal;
    }
    let (x, y, s, pinf, dinf, gap) = if status == IpmStatus::Infeasible {
        let r = residuals(p, &b, &x, &y, &s);
        (x, y, s, r.pinf, r.dinf, r.gap)
    } else {
        (bx, by, bs, pinf, dinf, gap)
    };
    IpmResult {
        x,
        y,
        s,
        status,
        iterations,
        primal_infeasibility: pinf,
        dual_infeasibility: dinf,
        gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> RMat {
        RMat::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn trace_constrained_minimum_eigenvalue() {
        // min <C, X> s.t. tr X = 1 has optimum lambda_min(C)
        let c = RMat::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.3, 0.0, 0.3, 3.0]);
        let lmin = SymmetricEigen::new(c.clone()).eigenvalues.min();
        let p = RealSdp {
            c,
            a: vec![RMat::identity(3, 3)],
            b: vec![1.0],
        };
        let r = solve_real(&p, &IpmOptions::default());
        assert_eq!(r.status, IpmStatus::Optimal);
        assert!((p.c.dot(&r.x) - lmin).abs() < 1e-8);
    }

    #[test]
    fn detects_infeasibility() {
        // X11 = -1 has no PSD solution
        let p = RealSdp {
            c: RMat::identity(2, 2),
            a: vec![diag(&[1.0, 0.0])],
            b: vec![-1.0],
        };
        let r = solve_real(&p, &IpmOptions::default());
        assert_ne!(r.status, IpmStatus::Optimal);
    }

    #[test]
    fn linear_program_on_diagonal() {
        // min x1 + 2 x2 s.t. x1 + x2 = 1 on the diagonal
        let p = RealSdp {
            c: diag(&[1.0, 2.0]),
            a: vec![diag(&[1.0, 1.0]), RMat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])],
            b: vec![1.0, 0.0],
        };
        let r = solve_real(&p, &IpmOptions::default());
        assert_eq!(r.status, IpmStatus::Optimal);
        assert!((r.x[(0, 0)] - 1.0).abs() < 1e-8);
        assert!(r.x[(1, 1)].abs() < 1e-8);
    }
}
