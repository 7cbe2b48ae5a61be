//! Small dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `a^H b`.
#[inline]
pub fn inner(a: &CVec, b: &CVec) -> Complex64 {
    a.dotc(b)
}

/// `v^H M v`, real part only (exact for Hermitian `M`).
pub fn quad_form(m: &CMat, v: &CVec) -> f64 {
    v.dotc(&(m * v)).re
}

/// Largest entrywise modulus of `M - M^H`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Replaces `M` by `(M + M^H) / 2` and returns the defect it removed.
pub fn symmetrize(m: &mut CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            let upper = m[(i, j)];
            let lower = m[(j, i)];
            worst = worst.max((upper - lower.conj()).norm());
            let avg = (upper + lower.conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        m[(i, i)].im = 0.0;
    }
    worst
}

/// `x - v (v^H x) / (v^H v)`: projection onto the orthogonal complement of `v`.
pub fn project_out(v: &CVec, x: &CVec) -> CVec {
    let vv = v.norm_squared();
    if vv == 0.0 {
        return x.clone();
    }
    let coef = inner(v, x) / vv;
    x - v * coef
}

/// Dense `I - v v^H / (v^H v)`.
pub fn complement_projector(v: &CVec) -> CMat {
    let n = v.len();
    let vv = v.norm_squared();
    let mut p = identity(n);
    if vv > 0.0 {
        p -= (v * v.adjoint()) / real(vv);
    }
    p
}

/// Eigendecomposition `M = Φ Λ Φ^H` of a Hermitian matrix, eigenvalues sorted
/// in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let lam = self.values[j];
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= lam);
        }
        scaled * self.vectors.adjoint()
    }
}

const EIG_MAX_ITER: usize = 10_000;

pub fn eigh(m: &CMat) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::shape("eigh", "square matrix", format!("{}x{}", m.nrows(), m.ncols())));
    }
    let mut h = m.clone();
    symmetrize(&mut h);
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::Breakdown {
            what: "hermitian eigendecomposition",
            value: f64::NAN,
        })?;
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

/// Spectral condition number of a Hermitian matrix (`inf` if not positive definite).
pub fn condition_hermitian(m: &CMat) -> f64 {
    match eigh(m) {
        Ok(e) => {
            let hi = e.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = e.values.iter().cloned().fold(f64::INFINITY, f64::min);
            if lo <= 0.0 {
                f64::INFINITY
            } else {
                hi / lo
            }
        }
        Err(_) => f64::NAN,
    }
}

const SINGULAR_CONDITION: f64 = 1e14;

/// Inverse of a Hermitian positive definite matrix via Cholesky.
pub fn inverse_hpd(m: &CMat, what: &'static str) -> Result<CMat> {
    let cond = condition_hermitian(m);
    if cond.is_nan() || cond >= SINGULAR_CONDITION {
        return Err(Error::Singular { what, condition: cond });
    }
    let mut h = m.clone();
    symmetrize(&mut h);
    let chol = h.cholesky().ok_or(Error::Singular { what, condition: cond })?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Solves `M x = b` for Hermitian positive definite `M`.
pub fn solve_hpd(m: &CMat, b: &CVec, what: &'static str) -> Result<CVec> {
    let cond = condition_hermitian(m);
    if cond.is_nan() || cond >= SINGULAR_CONDITION {
        return Err(Error::Singular { what, condition: cond });
    }
    let mut h = m.clone();
    symmetrize(&mut h);
    let chol = h.cholesky().ok_or(Error::Singular { what, condition: cond })?;
    Ok(chol.solve(b))
}

/// Trace of a product `tr(A B)` without forming it.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

#[inline]
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[inline]
pub fn from_db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}
