//! Full-rank LCMV: the closed-form optimum and the constrained SG (Frost) and
//! RLS baselines.

use num_complex::Complex64;

use crate::beamformer::Beamformer;
use crate::error::{Error, Result};
use crate::linalg::{inner, project_out, real, solve_hpd, symmetrize, CMat, CVec};

#[derive(Debug, Clone)]
pub struct OptimalBeamformer {
    pub weights: CVec,
    /// `1 / (a^H R^{-1} a)`.
    pub min_variance: f64,
}

/// `w_opt = R^{-1} a / (a^H R^{-1} a)`.
pub fn optimal_full_rank(r: &CMat, a: &CVec) -> Result<OptimalBeamformer> {
    if r.nrows() != a.len() || !r.is_square() {
        return Err(Error::shape("optimal_full_rank", format!("{0}x{0}", a.len()), format!("{}x{}", r.nrows(), r.ncols())));
    }
    let rinv_a = solve_hpd(r, a, "covariance matrix")?;
    let denom = inner(a, &rinv_a).re;
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::Breakdown { what: "a^H R^-1 a", value: denom });
    }
    Ok(OptimalBeamformer {
        weights: rinv_a / real(denom),
        min_variance: 1.0 / denom,
    })
}

/// Fixed optimal beamformer, wrapped so the experiment runner can treat it as
/// any other algorithm. Weights are recomputed when the covariance changes.
#[derive(Debug, Clone)]
pub struct FixedBeamformer {
    w: CVec,
}

impl FixedBeamformer {
    pub fn new(w: CVec) -> Self {
        FixedBeamformer { w }
    }

    pub fn set_weights(&mut self, w: CVec) {
        self.w = w;
    }
}

impl Beamformer for FixedBeamformer {
    fn process(&mut self, r: &CVec) -> Result<Complex64> {
        Ok(inner(&self.w, r))
    }

    fn weights(&self) -> CVec {
        self.w.clone()
    }

    fn rank(&self) -> usize {
        self.w.len()
    }
}

/// Frost constrained SG: `w ← Π (w - μ x* r) + a / (a^H a)`.
#[derive(Debug, Clone)]
pub struct FullRankSg {
    w: CVec,
    a: CVec,
    quiescent: CVec,
    pub mu: f64,
}

impl FullRankSg {
    /// Starts from the quiescent beamformer `a / (a^H a)`.
    pub fn new(a: CVec, mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("SG step size {mu}")));
        }
        let aa = a.norm_squared();
        if aa == 0.0 {
            return Err(Error::InvalidParameter("zero steering vector".into()));
        }
        let quiescent = &a / real(aa);
        Ok(FullRankSg { w: quiescent.clone(), a, quiescent, mu })
    }

    pub fn with_weights(a: CVec, mu: f64, w: CVec) -> Result<Self> {
        let mut s = Self::new(a, mu)?;
        if w.len() != s.a.len() {
            return Err(Error::shape("FullRankSg::with_weights", s.a.len(), w.len()));
        }
        s.w = w;
        Ok(s)
    }

    /// Starts from `w(0) = [1, 0, …, 0]^T / a_0*`, the full-rank counterpart of
    /// the JIO initialization.
    pub fn first_element(a: CVec, mu: f64) -> Result<Self> {
        let a0 = a.get(0).copied().unwrap_or_default();
        if a0.norm() == 0.0 {
            return Err(Error::InvalidParameter("first steering entry is zero".into()));
        }
        let mut w = CVec::zeros(a.len());
        w[0] = (a0.conj()).inv();
        Self::with_weights(a, mu, w)
    }

    pub fn constraint_error(&self) -> f64 {
        (inner(&self.w, &self.a) - 1.0).norm()
    }
}

impl Beamformer for FullRankSg {
    fn process(&mut self, r: &CVec) -> Result<Complex64> {
        let x = inner(&self.w, r);
        if self.mu != 0.0 {
            let stepped = &self.w - r * (x.conj() * self.mu);
            self.w = project_out(&self.a, &stepped) + &self.quiescent;
        }
        Ok(x)
    }

    fn weights(&self) -> CVec {
        self.w.clone()
    }

    fn rank(&self) -> usize {
        self.w.len()
    }
}

/// Exponentially weighted inverse covariance `P(i) ≈ R^{-1}(i)` maintained
/// through the matrix inversion lemma.
#[derive(Debug, Clone)]
pub struct InverseCovariance {
    p: CMat,
    alpha: f64,
    last_defect: f64,
}

impl InverseCovariance {
    pub fn new(dim: usize, delta: f64, alpha: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("RLS initialization delta {delta}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("forgetting factor {alpha} outside (0, 1]")));
        }
        Ok(InverseCovariance {
            p: CMat::identity(dim, dim) * real(delta),
            alpha,
            last_defect: 0.0,
        })
    }

    /// `k = α⁻¹ P r / (1 + α⁻¹ r^H P r)`, `P ← α⁻¹ P - α⁻¹ k r^H P`, then
    /// Hermitian symmetrization.
    pub fn update(&mut self, r: &CVec) -> Result<()> {
        let inv_alpha = 1.0 / self.alpha;
        let pr = &self.p * r;
        let denom = 1.0 + inv_alpha * inner(r, &pr).re;
        if !denom.is_finite() || denom <= 0.0 {
            return Err(Error::Breakdown { what: "RLS gain denominator", value: denom });
        }
        let k = &pr * real(inv_alpha / denom);
        // r^H P = (P^H r)^H; P is Hermitian up to the defect removed below.
        let rh_p = r.adjoint() * &self.p;
        self.p -= &k * rh_p;
        self.p *= real(inv_alpha);
        self.last_defect = symmetrize(&mut self.p);
        Ok(())
    }

    pub fn matrix(&self) -> &CMat {
        &self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `max |P - P^H|` observed just before the last symmetrization.
    pub fn last_defect(&self) -> f64 {
        self.last_defect
    }

    /// `P a / (a^H P a)`.
    pub fn constrained_filter(&self, a: &CVec) -> Result<CVec> {
        let pa = &self.p * a;
        let denom = inner(a, &pa).re;
        if !denom.is_finite() || denom <= 0.0 {
            return Err(Error::Breakdown { what: "a^H P a", value: denom });
        }
        Ok(pa / real(denom))
    }
}

#[derive(Debug, Clone)]
pub struct FullRankRls {
    w: CVec,
    a: CVec,
    inv: InverseCovariance,
}

impl FullRankRls {
    pub fn new(a: CVec, alpha: f64, delta: f64) -> Result<Self> {
        let inv = InverseCovariance::new(a.len(), delta, alpha)?;
        let w = inv.constrained_filter(&a)?;
        Ok(FullRankRls { w, a, inv })
    }

    pub fn inverse_covariance(&self) -> &InverseCovariance {
        &self.inv
    }

    pub fn constraint_error(&self) -> f64 {
        (inner(&self.w, &self.a) - 1.0).norm()
    }
}

impl Beamformer for FullRankRls {
    fn process(&mut self, r: &CVec) -> Result<Complex64> {
        self.inv.update(r)?;
        self.w = self.inv.constrained_filter(&self.a)?;
        Ok(inner(&self.w, r))
    }

    fn weights(&self) -> CVec {
        self.w.clone()
    }

    fn rank(&self) -> usize {
        self.w.len()
    }
}
