//! Binaural beamformers: BMVDR, JBLCMV and the band-split ILD-enhancing
//! composite.

mod band;
mod filter;

pub use band::{
    band_split, design, ild_enhancing, scaling_factors, BandSplitOptions, BinDiagnostics, Design, IldOutcome, Method,
};
pub use filter::{apply, BinStatus, StackedFilter};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    block_diag2, c, complement_basis, dependent_columns, max_modulus, min_norm_solution, solve_hpd_vec, CMat, CVec,
};

/// Reference microphone indices (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefMics {
    pub left: usize,
    pub right: usize,
}

impl RefMics {
    /// Left reference is the last microphone, right reference the first.
    pub fn for_count(m: usize) -> Self {
        Self { left: m - 1, right: 0 }
    }
}

/// `Lambda` and `f` of the joint constraint `w^H Lambda = f^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub lambda: CMat,
    pub f: CVec,
}

impl ConstraintSet {
    /// Two target columns followed by one ITF-preservation column per
    /// interferer.
    pub fn new(a: &CVec, interferers: &[CVec], refs: RefMics) -> Self {
        let m = a.len();
        let r = interferers.len();
        let mut lambda = CMat::zeros(2 * m, 2 + r);
        lambda.view_mut((0, 0), (m, 1)).copy_from(a);
        lambda.view_mut((m, 1), (m, 1)).copy_from(a);
        let mut f = CVec::zeros(2 + r);
        f[0] = a[refs.left].conj();
        f[1] = a[refs.right].conj();
        for (i, b) in interferers.iter().enumerate() {
            lambda.view_mut((0, 2 + i), (m, 1)).copy_from(&(b * b[refs.right]));
            lambda.view_mut((m, 2 + i), (m, 1)).copy_from(&(b * -b[refs.left]));
        }
        Self { lambda, f }
    }

    pub fn target_only(a: &CVec, refs: RefMics) -> Self {
        Self::new(a, &[], refs)
    }

    pub fn interferer_count(&self) -> usize {
        self.lambda.ncols() - 2
    }

    /// Largest `|lambda_j^H w - f_j| / max(|f|, |lambda_j| |w|)` over columns.
    pub fn residual(&self, w: &CVec) -> f64 {
        let fmax = max_modulus(&self.f);
        (0..self.lambda.ncols())
            .map(|j| {
                let col = self.lambda.column(j);
                let scale = fmax.max(col.norm() * w.norm()).max(f64::MIN_POSITIVE);
                (col.dotc(w) - self.f[j]).norm() / scale
            })
            .fold(0.0, f64::max)
    }
}

/// Adds `1e-8 trace(P) / M` to the diagonal.
pub fn regularize(p_n: &CMat) -> CMat {
    let m = p_n.nrows();
    let load = 1e-8 * p_n.trace().re / m as f64;
    p_n + CMat::identity(m, m) * c(load, 0.0)
}

/// `w_L^H P w_L + w_R^H P w_R`.
pub fn objective(p_n: &CMat, w: &CVec) -> f64 {
    let m = p_n.nrows();
    let wl = w.rows(0, m);
    let wr = w.rows(m, m);
    (wl.adjoint() * p_n * wl)[(0, 0)].re + (wr.adjoint() * p_n * wr)[(0, 0)].re
}

/// Stacked covariance `blockdiag(P, P)`.
pub fn stacked(p_n: &CMat) -> CMat {
    block_diag2(p_n, p_n)
}

/// Per-side closed form `P^-1 a conj(a_ref) / (a^H P^-1 a)`.
pub fn bmvdr(p_n: &CMat, a: &CVec, refs: RefMics) -> Result<CVec> {
    let m = a.len();
    if a.iter().all(|v| v.norm() == 0.0) {
        return Err(Error::Input("target steering vector is zero".into()));
    }
    let x = solve_hpd_vec(p_n, a).map_err(|e| Error::Numeric(format!("noise covariance: {e}")))?;
    let denom = a.dotc(&x);
    let mut w = CVec::zeros(2 * m);
    w.rows_mut(0, m).copy_from(&(&x * (a[refs.left].conj() / denom)));
    w.rows_mut(m, m).copy_from(&(&x * (a[refs.right].conj() / denom)));
    Ok(w)
}

/// How the constraint set was used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LcmvStatus {
    Full,
    /// Consistent, linearly dependent columns were dropped.
    Reduced {
        dropped: Vec<usize>,
    },
}

/// `P~^-1 Lambda (Lambda^H P~^-1 Lambda)^-1 f`, computed in generalized
/// sidelobe canceller form for robustness when the constraints are nearly
/// dependent.
pub fn lcmv(p_tilde: &CMat, constraints: &ConstraintSet) -> Result<(CVec, LcmvStatus)> {
    let lambda = &constraints.lambda;
    let f = &constraints.f;
    if lambda.ncols() > lambda.nrows() {
        return Err(Error::Input(format!(
            "{} constraints exceed the {} filter coefficients",
            lambda.ncols(),
            lambda.nrows()
        )));
    }
    let dependent = dependent_columns(lambda, 1e-10);
    let (lambda, f, status) = if dependent.is_empty() {
        (lambda.clone(), f.clone(), LcmvStatus::Full)
    } else {
        let keep: Vec<usize> = (0..lambda.ncols()).filter(|j| !dependent.contains(j)).collect();
        let k = CMat::from_fn(lambda.nrows(), keep.len(), |i, j| lambda[(i, keep[j])]);
        let fk = CVec::from_fn(keep.len(), |j, _| f[keep[j]]);
        let gram = k.adjoint() * &k;
        let fscale = max_modulus(f).max(f64::MIN_POSITIVE);
        let inconsistent: Vec<usize> = dependent
            .iter()
            .copied()
            .filter(|&j| {
                let col = lambda.column(j).into_owned();
                match solve_hpd_vec(&gram, &(k.adjoint() * &col)) {
                    Ok(coef) => (coef.dotc(&fk) - f[j]).norm() > 1e-8 * fscale,
                    Err(_) => true,
                }
            })
            .collect();
        if !inconsistent.is_empty() {
            return Err(Error::ConstraintDegeneracy { columns: inconsistent });
        }
        (k, fk, LcmvStatus::Reduced { dropped: dependent })
    };
    let wq = min_norm_solution(&lambda, &f)?;
    let w = if lambda.ncols() == lambda.nrows() {
        wq
    } else {
        let blocking = complement_basis(&lambda);
        let pb = p_tilde * &blocking;
        let v = solve_hpd_vec(&(blocking.adjoint() * &pb), &(pb.adjoint() * &wq))
            .map_err(|e| Error::Numeric(format!("blocked covariance: {e}")))?;
        let mut w = &wq - &blocking * v;
        // pull back onto the constraints
        let gram = lambda.adjoint() * &lambda;
        let corr = solve_hpd_vec(&gram, &(&f - lambda.adjoint() * &w))?;
        w += &lambda * corr;
        w
    };
    Ok((w, status))
}

/// JBLCMV beamformer for the given constraint set.
pub fn jblcmv(p_n: &CMat, constraints: &ConstraintSet) -> Result<(CVec, LcmvStatus)> {
    lcmv(&stacked(p_n), constraints)
}
