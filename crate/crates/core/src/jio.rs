//! Reduced-rank LCMV by joint iterative optimization of a projection matrix
//! `S_D` (a bank of `D` full-rank filters) and a reduced-rank filter `w̄`.
//!
//! The output is `x̄(i) = w̄^H(i) S_D^H(i) r(i)` and the pair is adapted
//! under the constraint `w̄^H S_D^H a(θ_k) = 1`.

use num_complex::Complex64;

use crate::beamformer::Beamformer;
use crate::error::{Error, Result};
use crate::fullrank::InverseCovariance;
use crate::linalg::{inner, project_out, real, solve_hpd, CMat, CVec, ONE};

/// `r̄ = S_D^H r`.
pub fn reduce(s: &CMat, r: &CVec) -> Result<CVec> {
    if s.nrows() != r.len() {
        return Err(Error::shape("reduce", format!("{} rows", r.len()), format!("{} rows", s.nrows())));
    }
    Ok(s.ad_mul(r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct JioState {
    s: CMat,
    w_bar: CVec,
    a_bar: CVec,
    a: CVec,
}

impl JioState {
    /// `w̄(0) = [1, 0, …, 0]^T`, `S_D(0) = [I_D; 0]`.
    pub fn initial(a: CVec, rank: usize) -> Result<Self> {
        let m = a.len();
        if rank == 0 || rank > m {
            return Err(Error::InvalidParameter(format!("rank {rank} outside 1..={m}")));
        }
        let s = CMat::identity(m, rank);
        let mut w_bar = CVec::zeros(rank);
        w_bar[0] = ONE;
        Self::with_filters(a, s, w_bar)
    }

    pub fn with_filters(a: CVec, s: CMat, w_bar: CVec) -> Result<Self> {
        let m = a.len();
        let d = w_bar.len();
        if s.nrows() != m || s.ncols() != d {
            return Err(Error::shape("JioState", format!("{m}x{d}"), format!("{}x{}", s.nrows(), s.ncols())));
        }
        if d == 0 || d > m {
            return Err(Error::InvalidParameter(format!("rank {d} outside 1..={m}")));
        }
        if s.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return Err(Error::InvalidParameter(
                "S_D = 0 annihilates the signal and cannot start the recursion".into(),
            ));
        }
        if s.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidParameter("non-finite projection matrix".into()));
        }
        let a_bar = s.ad_mul(&a);
        Ok(JioState { s, w_bar, a_bar, a })
    }

    pub fn rank(&self) -> usize {
        self.w_bar.len()
    }

    pub fn elements(&self) -> usize {
        self.a.len()
    }

    pub fn projection(&self) -> &CMat {
        &self.s
    }

    pub fn filter(&self) -> &CVec {
        &self.w_bar
    }

    /// `ā = S_D^H a`.
    pub fn reduced_steering(&self) -> &CVec {
        &self.a_bar
    }

    pub fn steering(&self) -> &CVec {
        &self.a
    }

    /// `x̄ = w̄^H S_D^H r`.
    pub fn output(&self, r: &CVec) -> Complex64 {
        inner(&self.w_bar, &self.s.ad_mul(r))
    }

    /// `|w̄^H ā - 1|`.
    pub fn constraint_error(&self) -> f64 {
        (inner(&self.w_bar, &self.a_bar) - 1.0).norm()
    }

    /// `w = S_D w̄`.
    pub fn effective_weights(&self) -> CVec {
        &self.s * &self.w_bar
    }

    fn refresh_reduced_steering(&mut self) {
        self.a_bar = self.s.ad_mul(&self.a);
    }
}

pub fn jio_output(state: &JioState, r: &CVec) -> Complex64 {
    state.output(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgSteps {
    pub mu_s: f64,
    pub mu_w: f64,
}

/// Joint SG recursion.
#[derive(Debug, Clone)]
pub struct JioSg {
    state: JioState,
    steps: SgSteps,
}

impl JioSg {
    pub fn new(a: CVec, rank: usize, steps: SgSteps) -> Result<Self> {
        Self::from_state(JioState::initial(a, rank)?, steps)
    }

    pub fn from_state(state: JioState, steps: SgSteps) -> Result<Self> {
        for (name, v) in [("mu_s", steps.mu_s), ("mu_w", steps.mu_w)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        Ok(JioSg { state, steps })
    }

    pub fn state(&self) -> &JioState {
        &self.state
    }

    pub fn steps(&self) -> SgSteps {
        self.steps
    }

    /// One joint update; both corrections use the pre-update `S_D`, `w̄`
    /// and `ā`. Returns the a priori output `x̄(i)`.
    ///
    /// `S_D ← S_D - μ_s x̄* Π_a r w̄^H` and `w̄ ← w̄ - μ_w x̄* Π_ā r̄`, where
    /// `Π_v = I - v v^H / (v^H v)`.
    pub fn step(&mut self, r: &CVec) -> Result<Complex64> {
        let st = &mut self.state;
        if r.len() != st.a.len() {
            return Err(Error::shape("JioSg::step", st.a.len(), r.len()));
        }
        let r_bar = st.s.ad_mul(r);
        let x = inner(&st.w_bar, &r_bar);
        let xc = x.conj();
        if self.steps.mu_s != 0.0 {
            let pr = project_out(&st.a, r);
            st.s.gerc(-xc * self.steps.mu_s, &pr, &st.w_bar, ONE);
        }
        if self.steps.mu_w != 0.0 {
            let prb = project_out(&st.a_bar, &r_bar);
            st.w_bar.axpy(-xc * self.steps.mu_w, &prb, ONE);
        }
        st.refresh_reduced_steering();
        Ok(x)
    }
}

impl Beamformer for JioSg {
    fn process(&mut self, r: &CVec) -> Result<Complex64> {
        self.step(r)
    }

    fn weights(&self) -> CVec {
        self.state.effective_weights()
    }

    fn rank(&self) -> usize {
        self.state.rank()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsParams {
    pub alpha: f64,
    /// `P(0) = δ I_M`.
    pub delta: f64,
    /// `P̄(0) = δ̄ I_D`.
    pub delta_bar: f64,
}

impl RlsParams {
    /// `α` with `δ = δ̄ = 100 / σ²`.
    pub fn with_noise(alpha: f64, noise_variance: f64) -> Self {
        let delta = 100.0 / noise_variance;
        RlsParams { alpha, delta, delta_bar: delta }
    }
}

/// Joint RLS recursion with the simplified projection update
/// `S_D = P a ā^H / (a^H P a)`.
#[derive(Debug, Clone)]
pub struct JioRls {
    state: JioState,
    p: InverseCovariance,
    p_bar: InverseCovariance,
}

impl JioRls {
    pub fn new(a: CVec, rank: usize, params: RlsParams) -> Result<Self> {
        Self::from_state(JioState::initial(a, rank)?, params)
    }

    pub fn from_state(state: JioState, params: RlsParams) -> Result<Self> {
        let p = InverseCovariance::new(state.elements(), params.delta, params.alpha)?;
        let p_bar = InverseCovariance::new(state.rank(), params.delta_bar, params.alpha)?;
        Ok(JioRls { state, p, p_bar })
    }

    pub fn state(&self) -> &JioState {
        &self.state
    }

    pub fn inverse_covariance(&self) -> &InverseCovariance {
        &self.p
    }

    pub fn reduced_inverse_covariance(&self) -> &InverseCovariance {
        &self.p_bar
    }

    /// Order: `P → S_D → r̄ → P̄ → ā → w̄`. Returns `x̄(i)` from the updated filters.
    pub fn step(&mut self, r: &CVec) -> Result<Complex64> {
        if r.len() != self.state.a.len() {
            return Err(Error::shape("JioRls::step", self.state.a.len(), r.len()));
        }
        self.p.update(r)?;

        let st = &mut self.state;
        let pa = self.p.matrix() * &st.a;
        let apa = inner(&st.a, &pa).re;
        if !apa.is_finite() || apa <= 0.0 {
            return Err(Error::Breakdown { what: "a^H P a", value: apa });
        }
        st.s = (&pa / real(apa)) * st.a_bar.adjoint();

        let r_bar = st.s.ad_mul(r);
        self.p_bar.update(&r_bar)?;
        st.refresh_reduced_steering();
        st.w_bar = self.p_bar.constrained_filter(&st.a_bar)?;
        Ok(inner(&st.w_bar, &r_bar))
    }
}

impl Beamformer for JioRls {
    fn process(&mut self, r: &CVec) -> Result<Complex64> {
        self.step(r)
    }

    fn weights(&self) -> CVec {
        self.state.effective_weights()
    }

    fn rank(&self) -> usize {
        self.state.rank()
    }
}

/// `MV = 1 / (a^H S_D (S_D^H R S_D)^{-1} S_D^H a)`.
pub fn reduced_mv(s: &CMat, r: &CMat, a: &CVec) -> Result<f64> {
    if s.nrows() != a.len() || r.nrows() != a.len() || !r.is_square() {
        return Err(Error::shape("reduced_mv", a.len(), s.nrows()));
    }
    let gram = s.ad_mul(s);
    let cond = crate::linalg::condition_hermitian(&gram);
    if cond.is_nan() || cond >= 1e12 {
        return Err(Error::Singular { what: "S_D^H S_D (rank-deficient projection)", condition: cond });
    }
    let r_bar = s.ad_mul(&(r * s));
    let a_bar = s.ad_mul(a);
    let x = solve_hpd(&r_bar, &a_bar, "reduced covariance S_D^H R S_D")?;
    let denom = inner(&a_bar, &x).re;
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::Breakdown { what: "reduced MV denominator", value: denom });
    }
    Ok(1.0 / denom)
}
