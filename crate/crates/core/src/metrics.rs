//! Output SINR and squared error.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{quad_form, to_db, CMat, CVec};

/// `w^H R_s w / w^H R_I w` for full-rank weights.
pub fn sinr_linear(w: &CVec, rs: &CMat, ri: &CMat) -> Result<f64> {
    if w.len() != rs.nrows() || w.len() != ri.nrows() {
        return Err(Error::shape("sinr", rs.nrows(), w.len()));
    }
    let den = quad_form(ri, w);
    if !den.is_finite() || den <= 0.0 {
        return Err(Error::UndefinedSinr(den));
    }
    Ok(quad_form(rs, w) / den)
}

pub fn sinr_full_rank(w: &CVec, rs: &CMat, ri: &CMat) -> Result<f64> {
    sinr_linear(w, rs, ri).map(to_db)
}

/// SINR in dB of the reduced-rank pair, evaluated through `w = S_D w̄`.
pub fn sinr(w_bar: &CVec, s: &CMat, rs: &CMat, ri: &CMat) -> Result<f64> {
    if s.ncols() != w_bar.len() {
        return Err(Error::shape("sinr", s.ncols(), w_bar.len()));
    }
    sinr_full_rank(&(s * w_bar), rs, ri)
}

/// `|d - x̄|²`.
pub fn mse_metric(d: Complex64, x_bar: Complex64) -> f64 {
    (d - x_bar).norm_sqr()
}
