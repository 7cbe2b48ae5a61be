//! Step-size stability, semi-analytical MSE prediction, and checks of the
//! minimum-variance and bilinear-embedding identities.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fullrank::optimal_full_rank;
use crate::jio::{reduced_mv, JioSg, JioState, SgSteps};
use crate::linalg::{complement_projector, eigh, inner, project_out, real, CMat, CVec, HermitianEigen, ZERO};
use crate::signal::{Scenario, SnapshotStream};

/// Spectral radii within this distance of one are classified as marginal.
pub const STABILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    /// `λ_max(P^H P)` of the joint `(M + D)`-dimensional error-propagation matrix.
    pub spectral_radius: f64,
    /// Largest `|λ|` of the composite weight-error recursion once the
    /// constraint direction, which every admissible step leaves fixed, is
    /// removed. Drives [`Stability`].
    pub effective_radius: f64,
    pub stable: Stability,
    pub mu_s: f64,
    pub mu_w: f64,
}

fn classify(radius: f64) -> Stability {
    if radius < 1.0 - STABILITY_TOL {
        Stability::Stable
    } else if radius <= 1.0 + STABILITY_TOL {
        Stability::Marginal
    } else {
        Stability::Unstable
    }
}

/// Builds the expectation-linearized joint error recursion at `state`.
///
/// With `Π = I - a a^H / (a^H a)`, `Π̄` the same for `ā`, and `R` the true
/// covariance:
///
/// ```text
/// P = [ I - μ_s |w̄|² Π R      -μ_s |w̄|² Π R S_D   ]
///     [ -μ_w Π̄ S_D^H R        I - μ_w Π̄ S_D^H R S_D ]
/// ```
pub fn error_propagation_matrix(r: &CMat, state: &JioState, steps: SgSteps) -> CMat {
    let m = state.elements();
    let d = state.rank();
    let s = state.projection();
    let ww = state.filter().norm_squared();
    let pi = complement_projector(state.steering());
    let pib = complement_projector(state.reduced_steering());
    let pir = &pi * r;
    let shr = s.adjoint() * r;

    let mut p = CMat::identity(m + d, m + d);
    let cs = real(steps.mu_s * ww);
    let cw = real(steps.mu_w);
    p.view_mut((0, 0), (m, m)).zip_apply(&pir, |x, y| *x -= cs * y);
    p.view_mut((0, m), (m, d)).zip_apply(&(&pir * s), |x, y| *x -= cs * y);
    p.view_mut((m, 0), (d, m)).zip_apply(&(&pib * &shr), |x, y| *x -= cw * y);
    p.view_mut((m, m), (d, d)).zip_apply(&(&pib * (&shr * s)), |x, y| *x -= cw * y);
    p
}

/// Composite recursion `e_w ← (I - G R) e_w` with
/// `G = μ_s |w̄|² Π + μ_w S_D Π̄ S_D^H`, symmetrized as
/// `I - R^{1/2} G R^{1/2}` and restricted to the complement of `R^{-1/2} a`.
fn effective_radius(r: &CMat, state: &JioState, steps: SgSteps) -> Result<f64> {
    let m = state.elements();
    let s = state.projection();
    let g = complement_projector(state.steering()) * real(steps.mu_s * state.filter().norm_squared())
        + s * complement_projector(state.reduced_steering()) * s.adjoint() * real(steps.mu_w);

    let er = eigh(r)?;
    if er.values[m - 1] <= 0.0 {
        return Err(Error::Singular { what: "covariance matrix", condition: f64::INFINITY });
    }
    let sqrt_r = scaled_reconstruct(&er, |l| l.sqrt());
    let inv_sqrt_r = scaled_reconstruct(&er, |l| 1.0 / l.sqrt());
    let b = CMat::identity(m, m) - &sqrt_r * g * &sqrt_r;

    let c = &inv_sqrt_r * state.steering();
    let q = complement_projector(&c);
    let basis = eigh(&q)?.vectors.columns(0, m - 1).into_owned();
    let restricted = basis.adjoint() * b * &basis;
    let e = eigh(&restricted)?;
    Ok(e.values.iter().fold(0.0_f64, |acc, l| acc.max(l.abs())))
}

fn scaled_reconstruct(e: &HermitianEigen, f: impl Fn(f64) -> f64) -> CMat {
    let scaled = HermitianEigen { values: e.values.map(f), vectors: e.vectors.clone() };
    scaled.reconstruct()
}

pub fn check_stability(scenario: &Scenario, steps: SgSteps, state: &JioState) -> Result<StabilityReport> {
    if state.elements() != scenario.elements {
        return Err(Error::shape("check_stability", scenario.elements, state.elements()));
    }
    let r = scenario.true_covariance();
    let p = error_propagation_matrix(&r, state, steps);
    let php = p.adjoint() * &p;
    let spectral_radius = eigh(&php)?.values[0].abs();
    let effective = if state.elements() > 1 { effective_radius(&r, state, steps)? } else { 1.0 };
    Ok(StabilityReport {
        spectral_radius,
        effective_radius: effective,
        stable: classify(effective),
        mu_s: steps.mu_s,
        mu_w: steps.mu_w,
    })
}

/// `ξ_min = 1 / (a^H R^{-1} a)`, `ε_min = E|d - w_opt^H r|²` and `w_opt` for
/// the nominal covariance.
pub fn minimum_errors(scenario: &Scenario) -> Result<(f64, f64, CVec)> {
    minimum_errors_for(&scenario.true_covariance(), scenario)
}

fn minimum_errors_for(r: &CMat, scenario: &Scenario) -> Result<(f64, f64, CVec)> {
    let a = scenario.soi_steering();
    let opt = optimal_full_rank(r, &a)?;
    let sigma_d2 = scenario.soi_power();
    let eps = sigma_d2 - 2.0 * (inner(&opt.weights, &a) * sigma_d2).re + opt.min_variance;
    Ok((opt.min_variance, eps, opt.weights))
}

#[derive(Debug, Clone)]
pub struct MsePrediction {
    pub eps_min: f64,
    pub xi_min: f64,
    /// Predicted MSE for snapshots `0..steps`.
    pub trajectory: Vec<f64>,
    /// Second moment of `e_w = S_D w̄ - w_opt` after the last step.
    pub r_ew: CMat,
    /// Mean of `e_w` after the last step.
    pub mean_error: CVec,
    /// Eigendecomposition `R = Φ Λ Φ^H`.
    pub eigen: HermitianEigen,
}

impl MsePrediction {
    /// Mean of the last `fraction` of the trajectory.
    pub fn steady_state(&self, fraction: f64) -> f64 {
        tail_mean(&self.trajectory, fraction)
    }
}

pub fn tail_mean(v: &[f64], fraction: f64) -> f64 {
    let n = v.len();
    let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
    v[n - k..].iter().sum::<f64>() / k as f64
}

#[derive(Debug, Clone)]
pub struct PredictOptions {
    pub steps: usize,
    pub ensemble_size: usize,
    /// Seed of the auxiliary ensemble; distinct from the scenario seed by default.
    pub seed: Option<u64>,
    /// Starting `(S_D, w̄)`; defaults to the standard rank-`rank` initialization.
    pub init: Option<(CMat, CVec)>,
    pub rank: usize,
}

impl PredictOptions {
    pub fn new(steps: usize, rank: usize) -> Self {
        PredictOptions { steps, ensemble_size: 200, seed: None, init: None, rank }
    }
}

const ENSEMBLE_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Propagates the mean `m` and second moment `R_ew` of the composite weight
/// error through one JIO-SG step,
///
/// ```text
/// e_w(i+1) = (I - u r^H) e_w(i) + b + q
/// u = μ_w S_D Π̄ r̄ + μ_s |w̄|² Π r,   b = -u r^H w_opt,
/// q = μ_s μ_w (x̄*)² Π r (w̄^H Π̄ r̄),
/// ```
///
/// treating `e_w(i)` as independent of `r(i)` and estimating every other
/// expectation over an ensemble of JIO-SG runs. The MSE follows as
/// `ε_min + tr[Λ Φ^H R_ew Φ]`, where `R = Φ Λ Φ^H` is the nominal data
/// covariance. The ensemble runs without interferer power jitter.
pub fn predict_mse(scenario: &Scenario, steps: SgSteps, opts: &PredictOptions) -> Result<MsePrediction> {
    if opts.ensemble_size == 0 {
        return Err(Error::InvalidParameter("ensemble size must be positive".into()));
    }
    if scenario.change_events.iter().any(|e| e.at_snapshot < opts.steps) {
        return Err(Error::InvalidParameter("MSE prediction needs a stationary scenario".into()));
    }
    let r = scenario.true_covariance();
    let eigen = eigh(&r)?;
    if eigen.values.iter().any(|l| *l <= 0.0) {
        return Err(Error::Singular { what: "covariance matrix", condition: f64::INFINITY });
    }
    let (xi_min, eps_min, w_opt) = minimum_errors_for(&r, scenario)?;
    let a = scenario.soi_steering();
    let m = scenario.elements;

    let start = match &opts.init {
        Some((s, w)) => JioState::with_filters(a.clone(), s.clone(), w.clone())?,
        None => JioState::initial(a.clone(), opts.rank)?,
    };
    let e0 = start.effective_weights() - &w_opt;
    let mut mean = e0.clone();
    let mut cov = CMat::zeros(m, m);

    let mut aux = scenario.clone();
    aux.seed = opts.seed.unwrap_or(scenario.seed.wrapping_add(ENSEMBLE_SEED_OFFSET));
    aux.power_jitter_db = 0.0;
    let mut ensemble: Vec<(JioSg, SnapshotStream)> = (0..opts.ensemble_size)
        .map(|t| Ok((JioSg::from_state(start.clone(), steps)?, SnapshotStream::new(&aux, t as u64))))
        .collect::<Result<_>>()?;

    let n = opts.ensemble_size as f64;
    let mut trajectory = Vec::with_capacity(opts.steps);
    for _ in 0..opts.steps {
        let r_ew = &cov + &mean * mean.adjoint();
        trajectory.push(eps_min + rotated_excess(&eigen, &r_ew));

        let parts: Vec<(CMat, CVec)> = ensemble
            .par_iter_mut()
            .map(|(filter, stream)| {
                let snap = stream.generate();
                let part = step_moments(filter.state(), steps, &snap.r, &w_opt, &cov, &mean);
                filter.step(&snap.r).map(|_| part)
            })
            .collect::<Result<_>>()?;

        let mut second = CMat::zeros(m, m);
        let mut first = CVec::zeros(m);
        for (s2, s1) in &parts {
            second += s2;
            first += s1;
        }
        second /= real(n);
        first /= real(n);
        cov = second - &first * first.adjoint();
        mean = first;
    }
    let r_ew = &cov + &mean * mean.adjoint();
    Ok(MsePrediction { eps_min, xi_min, trajectory, r_ew, mean_error: mean, eigen })
}

/// `tr[Λ Φ^H R_ew Φ]`.
fn rotated_excess(eigen: &HermitianEigen, r_ew: &CMat) -> f64 {
    let mut acc = 0.0;
    for (k, lam) in eigen.values.iter().enumerate() {
        let phi = eigen.vectors.column(k);
        acc += lam * phi.dotc(&(r_ew * phi)).re;
    }
    acc
}

/// One trial's contribution `(A C A^H + v v^H, v)` with `A = I - u r^H` and
/// `v = A m + b + q`.
fn step_moments(state: &JioState, steps: SgSteps, r: &CVec, w_opt: &CVec, cov: &CMat, mean: &CVec) -> (CMat, CVec) {
    let s = state.projection();
    let w_bar = state.filter();
    let r_bar = s.ad_mul(r);
    let x = inner(w_bar, &r_bar);
    let pr = project_out(state.steering(), r);
    let prb = project_out(state.reduced_steering(), &r_bar);

    let u = s * &prb * real(steps.mu_w) + &pr * real(steps.mu_s * w_bar.norm_squared());
    let b = &u * -inner(r, w_opt);
    let q = &pr * (x.conj() * x.conj() * inner(w_bar, &prb) * (steps.mu_s * steps.mu_w));

    // A C A^H = C - u (C r)^H - (C r) u^H + (r^H C r) u u^H for Hermitian C.
    let cr = cov * r;
    let rcr = inner(r, &cr).re;
    let mut acc = cov.clone();
    acc.gerc(-Complex64::new(1.0, 0.0), &u, &cr, Complex64::new(1.0, 0.0));
    acc.gerc(-Complex64::new(1.0, 0.0), &cr, &u, Complex64::new(1.0, 0.0));
    acc.gerc(real(rcr), &u, &u, Complex64::new(1.0, 0.0));

    let v = mean - &u * inner(r, mean) + b + q;
    acc.gerc(Complex64::new(1.0, 0.0), &v, &v, Complex64::new(1.0, 0.0));
    (acc, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmbeddingCheck {
    pub x_match: bool,
    pub c_match: bool,
    /// `f^H G f` and `w̄^H S_D^H r`.
    pub x_embedded: Complex64,
    pub x_direct: Complex64,
    /// `f^H A f` and `w̄^H S_D^H a`.
    pub c_embedded: Complex64,
    pub c_direct: Complex64,
    pub dimension: usize,
}

pub const EMBEDDING_TOL: f64 = 1e-12;

/// `f = [w̄; s_1*; …; s_D*]` and the `D(M+1)`-square bilinear form whose only
/// nonzero block is `I_D ⊗ v^T` in the upper right.
pub fn embedding_vector(state: &JioState) -> CVec {
    let d = state.rank();
    let m = state.elements();
    let mut f = CVec::zeros(d * (m + 1));
    f.rows_mut(0, d).copy_from(state.filter());
    for (k, col) in state.projection().column_iter().enumerate() {
        for (i, z) in col.iter().enumerate() {
            f[d + k * m + i] = z.conj();
        }
    }
    f
}

pub fn embedding_matrix(v: &CVec, rank: usize) -> CMat {
    let m = v.len();
    let n = rank * (m + 1);
    let mut g = CMat::from_element(n, n, ZERO);
    for k in 0..rank {
        for (i, z) in v.iter().enumerate() {
            g[(k, rank + k * m + i)] = *z;
        }
    }
    g
}

pub fn verify_lagrangian_embedding(state: &JioState, r: &CVec, a: &CVec) -> Result<EmbeddingCheck> {
    if r.len() != state.elements() || a.len() != state.elements() {
        return Err(Error::shape("verify_lagrangian_embedding", state.elements(), r.len()));
    }
    let d = state.rank();
    let f = embedding_vector(state);
    let bilinear = |v: &CVec| {
        let g = embedding_matrix(v, d);
        inner(&f, &(g * &f))
    };
    let x_embedded = bilinear(r);
    let c_embedded = bilinear(a);
    let x_direct = state.output(r);
    let c_direct = inner(state.filter(), &state.projection().ad_mul(a));
    let scale = state.filter().norm() * state.projection().norm();
    let tol = |v: &CVec| EMBEDDING_TOL * (scale * v.norm()).max(1.0);
    Ok(EmbeddingCheck {
        x_match: (x_embedded - x_direct).norm() <= tol(r),
        c_match: (c_embedded - c_direct).norm() <= tol(a),
        x_embedded,
        x_direct,
        c_embedded,
        c_direct,
        dimension: d * (state.elements() + 1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MvPreservation {
    pub preserved: bool,
    /// `MV(S_D) - MV_full`.
    pub gap: f64,
    pub reduced_mv: f64,
    pub full_mv: f64,
}

pub const MV_PRESERVATION_RTOL: f64 = 1e-8;

pub fn verify_mv_preservation(s: &CMat, r: &CMat, a: &CVec) -> Result<MvPreservation> {
    let reduced = reduced_mv(s, r, a)?;
    let full = optimal_full_rank(r, a)?.min_variance;
    let gap = reduced - full;
    Ok(MvPreservation { preserved: gap <= MV_PRESERVATION_RTOL * full, gap, reduced_mv: reduced, full_mv: full })
}
