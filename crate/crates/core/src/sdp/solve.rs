use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ipm::{solve_real, IpmOptions, IpmStatus};
use super::problem::{complexify, embed_program, LiftedConstraint, LiftedProblem};
use crate::linalg::{
    c, complement_basis, hermitian_eigen, hermitian_norm2, hermitian_part, max_modulus, real_inner, solve_hpd, CMat,
    CVec,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub accept_tol: f64,
    pub max_iter: usize,
    /// Eigenvalue ratio below which `W` counts as rank one.
    pub rank1_threshold: f64,
    /// Bound on `|W - w w^H|_F / |W|_F` for certification.
    pub rank1_residual: f64,
    /// Refine certified filters onto the quadratic constraints.
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            accept_tol: 1e-7,
            max_iter: 100,
            rank1_threshold: 1e-6,
            rank1_residual: 1e-5,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Solved,
    Infeasible,
    NumericFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Solved => "solved",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NumericFailure => "numeric-failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LiftedSolution {
    pub w: CVec,
    pub big_w: CMat,
    /// `Tr(W P~)`.
    pub objective: f64,
    pub rank1_gap: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Rank one within the configured thresholds.
    pub certified: bool,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub gap: f64,
}

/// `lambda_2 / lambda_1` of `W`; 1 when `W` has no positive eigenvalue.
pub fn rank1_gap(big_w: &CMat) -> f64 {
    let ev = hermitian_eigen(big_w).0;
    if ev.is_empty() || ev[0] <= 0.0 {
        return 1.0;
    }
    if ev.len() == 1 {
        return 0.0;
    }
    (ev[1] / ev[0]).max(0.0)
}

/// `|W - w w^H|_F / |W|_F`.
pub fn rank1_residual(w: &CVec, big_w: &CMat) -> f64 {
    let nw = big_w.norm();
    if nw == 0.0 {
        return f64::INFINITY;
    }
    (big_w - w * w.adjoint()).norm() / nw
}

enum Reduced {
    Program {
        basis: CMat,
        objective: CMat,
        constraints: Vec<LiftedConstraint>,
    },
    Infeasible,
}

/// Restricts the cone to the face cut out by constraints `Tr(A Z) = 0`
/// with semidefinite `A`, then drops constraints that became trivial or
/// linearly dependent.
fn reduce(objective: &CMat, constraints: &[LiftedConstraint]) -> Reduced {
    let n = objective.nrows();
    let mut basis = CMat::identity(n, n);
    loop {
        let mut changed = false;
        for k in constraints.iter().filter(|k| k.b == 0.0) {
            let proj = hermitian_part(&(basis.adjoint() * &k.a * &basis));
            let (ev, vecs) = hermitian_eigen(&proj);
            let top = ev.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            // vanished on the current face
            if top <= 1e-9 * k.a.norm() {
                continue;
            }
            let tol = 1e-9 * top;
            let semidefinite = ev.iter().all(|&v| v >= -tol) || ev.iter().all(|&v| v <= tol);
            let keep: Vec<usize> = (0..ev.len()).filter(|&i| ev[i].abs() <= tol).collect();
            if semidefinite && keep.len() < ev.len() {
                if keep.is_empty() {
                    return Reduced::Infeasible;
                }
                let sub = CMat::from_fn(vecs.nrows(), keep.len(), |i, j| vecs[(i, keep[j])]);
                basis = &basis * sub;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let project = |a: &CMat| hermitian_part(&(basis.adjoint() * a * &basis));
    let mut kept: Vec<LiftedConstraint> = Vec::new();
    // orthonormalized copies of kept rows, with their right-hand sides
    let mut ortho: Vec<(CMat, f64)> = Vec::new();
    for k in constraints {
        let full = k.a.norm();
        let a = project(&k.a);
        let norm = a.norm();
        if norm <= 1e-9 * full.max(f64::MIN_POSITIVE) {
            if k.b.abs() > 1e-10 {
                return Reduced::Infeasible;
            }
            continue;
        }
        let (mut a, b) = (a / c(norm, 0.0), k.b / norm);
        let mut v = a.clone();
        let mut rhs = b;
        for _ in 0..2 {
            for (q, qb) in &ortho {
                let proj = real_inner(q, &v);
                v -= q * c(proj, 0.0);
                rhs -= proj * qb;
            }
        }
        let rest = v.norm();
        if rest <= 1e-9 {
            if rhs.abs() > 1e-8 * (1.0 + b.abs()) {
                return Reduced::Infeasible;
            }
            continue;
        }
        ortho.push((v / c(rest, 0.0), rhs / rest));
        a = hermitian_part(&a);
        kept.push(LiftedConstraint { a, b });
    }
    Reduced::Program {
        objective: project(objective),
        basis,
        constraints: kept,
    }
}

/// Hermitian `T` for the change of variables `Z = T Z' T`. With
/// `T = blockdiag(alpha P~^-1/2, 1)` the objective becomes `Tr(W')` and the
/// optimum is of order one; `alpha^2` is the objective at the target-only
/// filter. Falls back to a scalar balance of `W` against `w` when `P~` is not
/// positive definite; the second value then normalizes the objective.
fn congruence(problem: &LiftedProblem) -> (CMat, f64) {
    let n = problem.dim();
    let reference = reference_filter(problem).filter(|w| w.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
    let ref_obj = reference
        .as_ref()
        .map(|w| problem.objective_at(w))
        .filter(|v| v.is_finite() && *v > 0.0);
    let mut t = CMat::zeros(n + 1, n + 1);
    t[(n, n)] = c(1.0, 0.0);
    let (ev, vecs) = hermitian_eigen(&problem.p_tilde);
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    match ref_obj {
        Some(obj) if min > 0.0 => {
            let inv_sqrt = CVec::from_iterator(n, ev.iter().map(|&v| c((obj / v).sqrt(), 0.0)));
            let w = &vecs * CMat::from_diagonal(&inv_sqrt) * vecs.adjoint();
            t.view_mut((0, 0), (n, n)).copy_from(&hermitian_part(&w));
            (t, obj)
        }
        _ => {
            let s = reference.map(|w| w.norm()).filter(|v| *v > 0.0).unwrap_or(1.0);
            for i in 0..n {
                t[(i, i)] = c(s, 0.0);
            }
            let scale = (problem.p_tilde.norm() * s * s).max(f64::MIN_POSITIVE);
            (t, scale)
        }
    }
}

/// Target-only reference filter used to set the internal scale.
fn reference_filter(problem: &LiftedProblem) -> Option<CVec> {
    let x = solve_hpd(&problem.p_tilde, &problem.lambda_a).ok()?;
    let gram = problem.lambda_a.adjoint() * &x;
    let coef = solve_hpd(&gram, &CMat::from_column_slice(2, 1, problem.f_a.as_slice())).ok()?;
    Some((x * coef).column(0).into_owned())
}

fn failed(problem: &LiftedProblem, status: SolveStatus, iterations: usize) -> LiftedSolution {
    let n = problem.dim();
    LiftedSolution {
        w: CVec::zeros(n),
        big_w: CMat::zeros(n, n),
        objective: f64::NAN,
        rank1_gap: 1.0,
        status,
        iterations,
        certified: false,
        primal_infeasibility: f64::NAN,
        dual_infeasibility: f64::NAN,
        gap: f64::NAN,
    }
}

pub fn solve(problem: &LiftedProblem, opts: &SolverOptions) -> LiftedSolution {
    let n = problem.dim();
    let (d, obj_scale) = congruence(problem);
    let objective = &d * problem.objective_matrix() * &d / c(obj_scale, 0.0);
    let constraints: Vec<LiftedConstraint> = problem
        .lifted_constraints()
        .into_iter()
        .map(|k| LiftedConstraint {
            a: &d * k.a * &d,
            b: k.b,
        })
        .collect();

    let (basis, objective, constraints) = match reduce(&objective, &constraints) {
        Reduced::Program {
            basis,
            objective,
            constraints,
        } => (basis, objective, constraints),
        Reduced::Infeasible => return failed(problem, SolveStatus::Infeasible, 0),
    };

    let real = embed_program(&objective, &constraints);
    let ipm = solve_real(
        &real,
        &IpmOptions {
            tol: opts.tol,
            accept_tol: opts.accept_tol,
            max_iter: opts.max_iter,
        },
    );
    let status = match ipm.status {
        IpmStatus::Optimal => SolveStatus::Solved,
        IpmStatus::Infeasible => SolveStatus::Infeasible,
        IpmStatus::Failed => SolveStatus::NumericFailure,
    };
    let z_reduced = complexify(&ipm.x);
    let z = hermitian_part(&(&d * (&basis * z_reduced * basis.adjoint()) * &d));
    let big_w = z.view((0, 0), (n, n)).into_owned();
    let w = z.view((0, n), (n, 1)).column(0).into_owned();
    let gap = rank1_gap(&big_w);
    let certified = status == SolveStatus::Solved
        && gap <= opts.rank1_threshold
        && rank1_residual(&w, &big_w) <= opts.rank1_residual;
    let w = if certified && opts.polish {
        polish(problem, &w).unwrap_or(w)
    } else {
        w
    };
    LiftedSolution {
        objective: real_inner(&problem.p_tilde, &big_w),
        w,
        big_w,
        rank1_gap: gap,
        status,
        iterations: ipm.iterations,
        certified,
        primal_infeasibility: ipm.primal_infeasibility,
        dual_infeasibility: ipm.dual_infeasibility,
        gap: ipm.gap,
    }
}

/// Normalized quadratic residual `|w^H M w| / (|w|^2 |M|_2)`.
pub fn quadratic_residual(w: &CVec, m: &CMat) -> f64 {
    let v = (w.adjoint() * m * w)[(0, 0)].re.abs();
    let scale = w.norm_squared() * hermitian_norm2(m);
    if scale == 0.0 {
        0.0
    } else {
        v / scale
    }
}

/// Gauss-Newton projection of `w` onto the quadratic constraints inside the
/// affine set of the target constraints. Returns `None` if the correction
/// is not small relative to `w`.
pub fn polish(problem: &LiftedProblem, w: &CVec) -> Option<CVec> {
    let lambda = &problem.lambda_a;
    let gram = lambda.adjoint() * lambda;
    let fix = |w: &CVec| -> Option<CVec> {
        let r = &problem.f_a - lambda.adjoint() * w;
        let coef = solve_hpd(&gram, &CMat::from_column_slice(2, 1, r.as_slice())).ok()?;
        Some(w + (lambda * coef).column(0))
    };
    let mut x = fix(w)?;
    if !problem.m.is_empty() {
        let basis = complement_basis(lambda);
        let d = basis.ncols();
        for _ in 0..8 {
            let h: Vec<f64> = problem.m.iter().map(|m| (x.adjoint() * m * &x)[(0, 0)].re).collect();
            let worst = problem.m.iter().map(|m| quadratic_residual(&x, m)).fold(0.0, f64::max);
            if worst < 1e-14 {
                break;
            }
            // rows: d/dz of w^H M w along w + N z, in real coordinates
            let r = problem.m.len();
            let mut jac = crate::linalg::RMat::zeros(r, 2 * d);
            for (i, m) in problem.m.iter().enumerate() {
                let g = basis.adjoint() * (m * &x);
                for j in 0..d {
                    jac[(i, j)] = 2.0 * g[j].re;
                    jac[(i, j + d)] = 2.0 * g[j].im;
                }
            }
            let jjt = &jac * jac.transpose();
            let sol = jjt.lu().solve(&DVector::from_vec(h))?;
            let step = jac.transpose() * sol;
            let z = CVec::from_fn(d, |j, _| c(-step[j], -step[j + d]));
            x += &basis * z;
        }
        x = fix(&x)?;
    }
    if (&x - w).norm() > 1e-4 * w.norm() {
        return None;
    }
    Some(x)
}

/// Constraint and certification summary of a filter against a problem.
pub fn feasibility(problem: &LiftedProblem, w: &CVec) -> (f64, f64) {
    let lin = max_modulus(&(problem.lambda_a.adjoint() * w - &problem.f_a))
        / max_modulus(&problem.f_a).max(f64::MIN_POSITIVE);
    let quad = problem.m.iter().map(|m| quadratic_residual(w, m)).fold(0.0, f64::max);
    (lin, quad)
}
