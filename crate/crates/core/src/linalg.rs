//! Small dense complex linear-algebra helpers shared by the beamformers and
//! the relaxation solver.

pub use nalgebra::Complex;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, QR};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted in
/// descending order with matching eigenvector columns.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    hermitian_eigen(a).0
}

pub fn symmetric_eigen_sorted(a: &RMat) -> (Vec<f64>, RMat) {
    let sym = (a + a.transpose()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = RMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn solve_hpd(a: &CMat, b: &CMat) -> Result<CMat> {
    let chol = Cholesky::new(hermitian_part(a))
        .ok_or_else(|| Error::Singular("matrix is not Hermitian positive definite".into()))?;
    Ok(chol.solve(b))
}

/// Largest modulus of the entries.
pub fn max_modulus(v: &CVec) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn solve_hpd_vec(a: &CMat, b: &CVec) -> Result<CVec> {
    let chol = Cholesky::new(hermitian_part(a))
        .ok_or_else(|| Error::Singular("matrix is not Hermitian positive definite".into()))?;
    Ok(chol.solve(b))
}

/// Indices of columns that lie (numerically) in the span of the preceding
/// ones, found by modified Gram-Schmidt with relative tolerance `tol`.
pub fn dependent_columns(a: &CMat, tol: f64) -> Vec<usize> {
    let mut basis: Vec<CVec> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..a.ncols() {
        let col: CVec = a.column(j).into_owned();
        let norm0 = col.norm();
        let mut v = col;
        for q in &basis {
            let proj = q.dotc(&v);
            v -= q * proj;
        }
        // second pass for stability
        for q in &basis {
            let proj = q.dotc(&v);
            v -= q * proj;
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= tol * norm0 {
            dependent.push(j);
        } else {
            basis.push(v.unscale(norm));
        }
    }
    dependent
}

/// Orthonormal basis of the orthogonal complement of the column span of
/// `a` (i.e. the null space of `a^H`). `a` must have full column rank.
pub fn complement_basis(a: &CMat) -> CMat {
    let n = a.nrows();
    let p = a.ncols();
    let mut aug = CMat::zeros(n, p + n);
    aug.view_mut((0, 0), (n, p)).copy_from(a);
    aug.view_mut((0, p), (n, n)).fill_with_identity();
    let q = QR::new(aug).q();
    q.columns(p, n - p).into_owned()
}

/// Minimum-norm solution of the consistent system `a^H x = f` for full
/// column rank `a`, with one step of iterative refinement.
pub fn min_norm_solution(a: &CMat, f: &CVec) -> Result<CVec> {
    let gram = a.adjoint() * a;
    let mut x = a * solve_hpd_vec(&gram, f)?;
    let resid = f - a.adjoint() * &x;
    x += a * solve_hpd_vec(&gram, &resid)?;
    Ok(x)
}

/// Inner product `Re Tr(A^H B)` on complex matrices.
pub fn real_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Spectral norm of a Hermitian matrix.
pub fn hermitian_norm2(a: &CMat) -> f64 {
    hermitian_eigenvalues(a)
        .into_iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Block-diagonal `diag(a, a)`.
pub fn block_diag2(a: &CMat, b: &CMat) -> CMat {
    let (n1, m1) = a.shape();
    let (n2, m2) = b.shape();
    let mut out = CMat::zeros(n1 + n2, m1 + m2);
    out.view_mut((0, 0), (n1, m1)).copy_from(a);
    out.view_mut((n1, m1), (n2, m2)).copy_from(b);
    out
}

pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

/// Real vector of a complex vector, stacked `[Re; Im]`.
pub fn stack_real(v: &CVec) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

pub fn unstack_real(x: &DVector<f64>) -> CVec {
    let n = x.len() / 2;
    CVec::from_fn(n, |i, _| c(x[i], x[i + n]))
}

/// Real symmetric matrix `[[Re A, -Im A], [Im A, Re A]]` representing the
/// Hermitian form `z^H A z = x^T R x` with `x = [Re z; Im z]`.
pub fn real_form(a: &CMat) -> RMat {
    let n = a.nrows();
    let m = a.ncols();
    let mut out = RMat::zeros(2 * n, 2 * m);
    for i in 0..n {
        for j in 0..m {
            let v = a[(i, j)];
            out[(i, j)] = v.re;
            out[(i, j + m)] = -v.im;
            out[(i + n, j)] = v.im;
            out[(i + n, j + m)] = v.re;
        }
    }
    out
}
