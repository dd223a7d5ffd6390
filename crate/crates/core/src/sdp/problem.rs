use serde::{Deserialize, Serialize};

use crate::beamform::RefMics;
use crate::error::{Error, Result};
use crate::linalg::{block_diag2, c, outer, real_form, CMat, CVec, RMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Lifted relaxation with the linear and lifted ILD constraints.
    Problem2,
    /// Adds the multiplied target constraints and their trace form.
    Problem3,
}

/// ILD constraint matrix: `w^H M w = |w_L^H b|^2 |b_R|^2 - c |w_R^H b|^2 |b_L|^2`.
pub fn build_mi(b: &CVec, c_i: f64, refs: RefMics) -> Result<CMat> {
    if !(c_i > 0.0) || !c_i.is_finite() {
        return Err(Error::Domain(format!("ILD scaling factor must be positive, got {c_i}")));
    }
    let bl = b[refs.left].norm_sqr();
    let br = b[refs.right].norm_sqr();
    if bl == 0.0 && br == 0.0 {
        return Err(Error::DegenerateInterferer { index: 0 });
    }
    let bb = outer(b, b);
    Ok(block_diag2(&(&bb * c(br, 0.0)), &(&bb * c(-c_i * bl, 0.0))))
}

/// Hermitian linear constraint `Tr(A Z) = b` on the lifted variable
/// `Z = [[W, w], [w^H, 1]]`.
#[derive(Debug, Clone)]
pub struct LiftedConstraint {
    pub a: CMat,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintCount {
    pub complex: usize,
    pub real: usize,
}

#[derive(Debug, Clone)]
pub struct LiftedProblem {
    pub p_tilde: CMat,
    pub lambda_a: CMat,
    pub f_a: CVec,
    pub m: Vec<CMat>,
    pub rlt: bool,
}

/// Splits the complex equality `Tr(E Z) = beta` into two Hermitian ones.
fn split_complex(e: &CMat, beta: C64, out: &mut Vec<LiftedConstraint>) {
    let eh = e.adjoint();
    out.push(LiftedConstraint {
        a: (e + &eh) * c(0.5, 0.0),
        b: beta.re,
    });
    out.push(LiftedConstraint {
        a: (e - &eh) * c(0.0, -0.5),
        b: beta.im,
    });
}

pub fn build_problem(
    p_n: &CMat,
    a: &CVec,
    interferers: &[CVec],
    c_factors: &[f64],
    refs: RefMics,
    variant: Variant,
) -> Result<LiftedProblem> {
    let m = a.len();
    if p_n.shape() != (m, m) || interferers.iter().any(|b| b.len() != m) {
        return Err(Error::Input("covariance and steering vectors disagree in size".into()));
    }
    if interferers.len() != c_factors.len() {
        return Err(Error::Input("one scaling factor per interferer is required".into()));
    }
    if refs.left >= m || refs.right >= m {
        return Err(Error::Input("reference microphone index out of range".into()));
    }
    let mut lambda_a = CMat::zeros(2 * m, 2);
    lambda_a.view_mut((0, 0), (m, 1)).copy_from(a);
    lambda_a.view_mut((m, 1), (m, 1)).copy_from(a);
    let f_a = CVec::from_vec(vec![a[refs.left].conj(), a[refs.right].conj()]);
    let mats = interferers
        .iter()
        .zip(c_factors)
        .enumerate()
        .map(|(i, (b, &ci))| {
            build_mi(b, ci, refs).map_err(|e| match e {
                Error::DegenerateInterferer { .. } => Error::DegenerateInterferer { index: i },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LiftedProblem {
        p_tilde: block_diag2(p_n, p_n),
        lambda_a,
        f_a,
        m: mats,
        rlt: variant == Variant::Problem3,
    })
}

impl LiftedProblem {
    /// Length of the stacked filter, `2M`.
    pub fn dim(&self) -> usize {
        self.p_tilde.nrows()
    }

    pub fn variant(&self) -> Variant {
        if self.rlt {
            Variant::Problem3
        } else {
            Variant::Problem2
        }
    }

    pub fn constraint_count(&self) -> ConstraintCount {
        let n = self.dim();
        let r = self.m.len();
        if self.rlt {
            ConstraintCount {
                complex: 2 + 2 * n,
                real: r + 1,
            }
        } else {
            ConstraintCount { complex: 2, real: r }
        }
    }

    /// `blockdiag(P~, 0)` on the lifted variable.
    pub fn objective_matrix(&self) -> CMat {
        let n = self.dim();
        let mut cm = CMat::zeros(n + 1, n + 1);
        cm.view_mut((0, 0), (n, n)).copy_from(&self.p_tilde);
        cm
    }

    fn lift(&self, a: &CMat) -> CMat {
        let n = self.dim();
        let mut out = CMat::zeros(n + 1, n + 1);
        out.view_mut((0, 0), (n, n)).copy_from(a);
        out
    }

    /// `[lambda_j; -conj(f_j)]` for each target column.
    fn rlt_vectors(&self) -> Vec<CVec> {
        let n = self.dim();
        (0..2)
            .map(|j| {
                let mut v = CVec::zeros(n + 1);
                v.rows_mut(0, n).copy_from(&self.lambda_a.column(j));
                v[n] = -self.f_a[j].conj();
                v
            })
            .collect()
    }

    /// Every constraint as a real Hermitian equality on `Z`, the
    /// normalization `Z[n, n] = 1` first.
    pub fn lifted_constraints(&self) -> Vec<LiftedConstraint> {
        let n = self.dim();
        let mut out = Vec::new();
        let mut corner = CMat::zeros(n + 1, n + 1);
        corner[(n, n)] = c(1.0, 0.0);
        out.push(LiftedConstraint { a: corner, b: 1.0 });

        // w^H lambda_j = conj(f_j): the last row of Z holds w^H
        for j in 0..2 {
            let mut e = CMat::zeros(n + 1, n + 1);
            for i in 0..n {
                e[(i, n)] = self.lambda_a[(i, j)];
            }
            split_complex(&e, self.f_a[j].conj(), &mut out);
        }
        for mi in &self.m {
            out.push(LiftedConstraint {
                a: self.lift(mi),
                b: 0.0,
            });
        }
        if self.rlt {
            let vs = self.rlt_vectors();
            // (W lambda_j - w conj(f_j))_i = 0
            for v in &vs {
                for i in 0..n {
                    let mut e = CMat::zeros(n + 1, n + 1);
                    e.set_column(i, v);
                    split_complex(&e, c(0.0, 0.0), &mut out);
                }
            }
            let mut t = CMat::zeros(n + 1, n + 1);
            for v in &vs {
                t += outer(v, v);
            }
            out.push(LiftedConstraint { a: t, b: 0.0 });
        }
        out
    }

    /// `[[W, w], [w^H, 1]]`.
    pub fn lifted_point(w: &CVec, big_w: &CMat) -> CMat {
        let n = w.len();
        let mut z = CMat::zeros(n + 1, n + 1);
        z.view_mut((0, 0), (n, n)).copy_from(big_w);
        for i in 0..n {
            z[(i, n)] = w[i];
            z[(n, i)] = w[i].conj();
        }
        z[(n, n)] = c(1.0, 0.0);
        z
    }

    /// Largest absolute constraint residual at `(w, W)`.
    pub fn max_residual(&self, w: &CVec, big_w: &CMat) -> f64 {
        let z = Self::lifted_point(w, big_w);
        self.lifted_constraints()
            .iter()
            .map(|k| (crate::linalg::trace_product(&k.a, &z).re - k.b).abs())
            .fold(0.0, f64::max)
    }

    /// `w^H P~ w`.
    pub fn objective_at(&self, w: &CVec) -> f64 {
        (w.adjoint() * &self.p_tilde * w)[(0, 0)].re
    }
}

/// Real symmetric conic program `min <C, X>` subject to `<A_i, X> = b_i`,
/// `X >= 0`.
#[derive(Debug, Clone)]
pub struct RealSdp {
    pub c: RMat,
    pub a: Vec<RMat>,
    pub b: Vec<f64>,
}

/// Embeds `H` as `[[Re H, -Im H], [Im H, Re H]] / 2`. With this factor,
/// `<embed(A), embed(Z)> = Tr(A Z)`, so objective and constraint values are
/// preserved; a real solution `X` maps back through [`complexify`].
pub fn embed(h: &CMat) -> RMat {
    real_form(h) * 0.5
}

/// Hermitian matrix represented by a real symmetric `X` of size `2n`:
/// `((X11 + X22) + i (X21 - X12)) / 2`.
pub fn complexify(x: &RMat) -> CMat {
    let n = x.nrows() / 2;
    CMat::from_fn(n, n, |i, j| {
        c(
            0.5 * (x[(i, j)] + x[(i + n, j + n)]),
            0.5 * (x[(i + n, j)] - x[(i, j + n)]),
        )
    })
}

/// Real form of the Hermitian program given by `objective` and
/// `constraints`.
pub fn embed_program(objective: &CMat, constraints: &[LiftedConstraint]) -> RealSdp {
    RealSdp {
        c: embed(objective),
        a: constraints.iter().map(|k| embed(&k.a)).collect(),
        b: constraints.iter().map(|k| k.b).collect(),
    }
}

/// Real embedding of a lifted problem, without any reduction.
pub fn complex_to_real_embedding(problem: &LiftedProblem) -> RealSdp {
    embed_program(&problem.objective_matrix(), &problem.lifted_constraints())
}
