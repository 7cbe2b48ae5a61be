//! Random cases and property checks shared by the property suite and the
//! acceptance target.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use rrbeam::analysis::{verify_lagrangian_embedding, verify_mv_preservation};
use rrbeam::fullrank::{optimal_full_rank, FullRankRls, FullRankSg, InverseCovariance};
use rrbeam::jio::{reduced_mv, JioRls, JioSg, JioState, RlsParams, SgSteps};
use rrbeam::linalg::{eigh, identity, inner, inverse_hpd, real, CMat, CVec};
use rrbeam::signal::{draw_noise, trial_rng, Scenario, Source, SnapshotStream};
use rrbeam::Beamformer;

pub const CONSTRAINT_TOL: f64 = 1e-9;
pub const MIL_TOL: f64 = 1e-8;
pub const EIGEN_TOL: f64 = 1e-10;

/// A small random array scenario plus a working rank.
#[derive(Debug, Clone)]
pub struct Case {
    pub elements: usize,
    pub rank: usize,
    pub soi_theta: f64,
    pub interferers: Vec<(f64, f64)>,
    pub snr_db: f64,
    pub seed: u64,
}

impl Case {
    pub fn scenario(&self) -> Scenario {
        let mut sources = vec![Source::soi(self.soi_theta, 1.0)];
        sources.extend(self.interferers.iter().map(|&(t, p)| Source::interferer(t, 10f64.powf(p / 10.0))));
        let mut s = Scenario::new(self.elements, sources, self.snr_db).expect("generated scenario is valid");
        s.seed = self.seed;
        s
    }

    pub fn stream(&self) -> SnapshotStream {
        SnapshotStream::new(&self.scenario(), 0)
    }

    /// SG step sizes scaled to the total received power so runs stay bounded.
    pub fn sg_steps(&self) -> SgSteps {
        let power = self.scenario().true_covariance().trace().re;
        SgSteps { mu_s: 0.05 / power, mu_w: 0.05 / power }
    }

    pub fn fr_mu(&self) -> f64 {
        0.05 / self.scenario().true_covariance().trace().re
    }
}

pub fn case_strategy() -> impl Strategy<Value = Case> {
    (2usize..=10)
        .prop_flat_map(|m| {
            (
                Just(m),
                1..=m,
                10.0f64..170.0,
                prop::collection::vec((10.0f64..170.0, -5.0f64..10.0), 0..(m - 1).min(4)),
                0.0f64..20.0,
                any::<u64>(),
            )
        })
        .prop_map(|(elements, rank, soi_theta, interferers, snr_db, seed)| Case {
            elements,
            rank,
            soi_theta,
            interferers,
            snr_db,
            seed,
        })
}

pub fn random_vector(seed: u64, stream: u64, n: usize) -> CVec {
    draw_noise(&mut trial_rng(seed, stream), n, 1.0)
}

pub fn random_matrix(seed: u64, rows: usize, cols: usize) -> CMat {
    let mut rng = trial_rng(seed, 1_000);
    let mut m = CMat::zeros(rows, cols);
    for c in 0..cols {
        m.set_column(c, &draw_noise(&mut rng, rows, 1.0));
    }
    m
}

/// `B B^H + I` for a random square `B`: Hermitian positive definite.
pub fn random_hpd(seed: u64, n: usize) -> CMat {
    let b = random_matrix(seed, n, n);
    &b * b.adjoint() + identity(n)
}

/// Random Hermitian matrix with eigenvalues of both signs.
pub fn random_hermitian(seed: u64, n: usize) -> CMat {
    let b = random_matrix(seed, n, n);
    (&b + b.adjoint()) * real(0.5)
}

const STEPS: usize = 25;

/// `|w^H a - 1| ≤ 1e-9` after every step of the four adaptive algorithms.
pub fn check_constraint_preservation(case: &Case) -> Result<(), TestCaseError> {
    let sc = case.scenario();
    let a = sc.soi_steering();
    let noise = sc.noise_variance();
    let mut fr_sg = FullRankSg::first_element(a.clone(), case.fr_mu()).unwrap();
    let mut fr_rls = FullRankRls::new(a.clone(), 0.99, 1.0 / noise).unwrap();
    let mut jio_sg = JioSg::new(a.clone(), case.rank, case.sg_steps()).unwrap();
    let mut jio_rls = JioRls::new(a, case.rank, RlsParams::with_noise(0.99, noise)).unwrap();
    for snap in case.stream().take(STEPS) {
        fr_sg.process(&snap.r).unwrap();
        fr_rls.process(&snap.r).unwrap();
        jio_sg.process(&snap.r).unwrap();
        jio_rls.process(&snap.r).unwrap();
        prop_assert!(fr_sg.constraint_error() <= CONSTRAINT_TOL, "full-rank SG {}", fr_sg.constraint_error());
        prop_assert!(fr_rls.constraint_error() <= CONSTRAINT_TOL, "full-rank RLS {}", fr_rls.constraint_error());
        let e = jio_sg.state().constraint_error();
        prop_assert!(e <= CONSTRAINT_TOL, "JIO-SG {e}");
        let e = jio_rls.state().constraint_error();
        prop_assert!(e <= CONSTRAINT_TOL, "JIO-RLS {e}");
    }
    Ok(())
}

/// `a^H S_D` is unchanged by every SG projection-matrix update.
pub fn check_sg_projection_invariance(case: &Case) -> Result<(), TestCaseError> {
    let sc = case.scenario();
    let a = sc.soi_steering();
    let mut sg = JioSg::new(a.clone(), case.rank, case.sg_steps()).unwrap();
    for snap in case.stream().take(STEPS) {
        let before = a.adjoint() * sg.state().projection();
        let s_before = sg.state().projection().clone();
        sg.step(&snap.r).unwrap();
        let after = a.adjoint() * sg.state().projection();
        let moved = (sg.state().projection() - &s_before).norm();
        let scale = 1.0 + a.norm() * (s_before.norm() + moved);
        let drift = (after - before).norm();
        prop_assert!(drift <= 64.0 * f64::EPSILON * scale, "a^H S drifted by {drift} (scale {scale})");
    }
    Ok(())
}

/// After each RLS step `S_D^H a = ā` and `w̄^H ā = 1`.
pub fn check_rls_reduced_identities(case: &Case) -> Result<(), TestCaseError> {
    let sc = case.scenario();
    let a = sc.soi_steering();
    let mut rls = JioRls::new(a.clone(), case.rank, RlsParams::with_noise(0.99, sc.noise_variance())).unwrap();
    for snap in case.stream().take(STEPS) {
        rls.step(&snap.r).unwrap();
        let st = rls.state();
        let a_bar = st.projection().ad_mul(&a);
        let gap = (&a_bar - st.reduced_steering()).norm();
        prop_assert!(gap <= CONSTRAINT_TOL * (1.0 + a_bar.norm()), "S^H a vs ā gap {gap}");
        let c = (inner(st.filter(), st.reduced_steering()) - 1.0).norm();
        prop_assert!(c <= CONSTRAINT_TOL, "w̄^H ā - 1 = {c}");
    }
    Ok(())
}

/// `reduced_mv(S) ≥ 1/(a^H R^{-1} a)` for any full-rank `S`, with equality
/// once `w_opt` is one of the columns.
pub fn check_reduced_mv(case: &Case) -> Result<(), TestCaseError> {
    let sc = case.scenario();
    let a = sc.soi_steering();
    let r = sc.true_covariance();
    let full = optimal_full_rank(&r, &a).unwrap();
    let s = random_matrix(case.seed, case.elements, case.rank);
    let Ok(mv) = reduced_mv(&s, &r, &a) else {
        return Err(TestCaseError::reject("ill-conditioned random projection"));
    };
    prop_assert!(mv >= full.min_variance * (1.0 - 1e-10), "reduced {mv} < full {}", full.min_variance);
    let mut with_opt = s.clone();
    with_opt.set_column(0, &full.weights);
    let Ok(check) = verify_mv_preservation(&with_opt, &r, &a) else {
        return Err(TestCaseError::reject("ill-conditioned projection with w_opt"));
    };
    prop_assert!(check.preserved, "gap {} with w_opt in the span", check.gap);
    Ok(())
}

/// `f^H G f = x̄` and `f^H A f = w̄^H ā` to 1e-12 for a random state.
pub fn check_embedding(case: &Case) -> Result<(), TestCaseError> {
    let a = case.scenario().soi_steering();
    let s = random_matrix(case.seed, case.elements, case.rank);
    let w = random_vector(case.seed, 2, case.rank);
    let r = random_vector(case.seed, 3, case.elements);
    let state = JioState::with_filters(a.clone(), s, w).unwrap();
    let check = verify_lagrangian_embedding(&state, &r, &a).unwrap();
    prop_assert!(check.x_match, "x̄: {} vs {}", check.x_embedded, check.x_direct);
    prop_assert!(check.c_match, "constraint: {} vs {}", check.c_embedded, check.c_direct);
    prop_assert_eq!(check.dimension, case.rank * (case.elements + 1));
    Ok(())
}

/// Inputs for the inverse-covariance recursion check.
#[derive(Debug, Clone)]
pub struct InversionCase {
    pub dim: usize,
    pub steps: usize,
    pub delta: f64,
    pub alpha: f64,
    pub seed: u64,
}

pub fn inversion_strategy() -> impl Strategy<Value = InversionCase> {
    (1usize..=8, 1usize..=6, 0.1f64..10.0, 0.9f64..=1.0, any::<u64>())
        .prop_map(|(dim, steps, delta, alpha, seed)| InversionCase { dim, steps, delta, alpha, seed })
}

/// The rank-one inverse update equals `(α^i δ^{-1} I + Σ α^{i-l} r r^H)^{-1}`.
pub fn check_inversion_lemma(c: &InversionCase) -> Result<(), TestCaseError> {
    let mut inv = InverseCovariance::new(c.dim, c.delta, c.alpha).unwrap();
    let mut direct = identity(c.dim) * real(1.0 / c.delta);
    let mut rng = trial_rng(c.seed, 7);
    for _ in 0..c.steps {
        let r = draw_noise(&mut rng, c.dim, 1.0);
        inv.update(&r).unwrap();
        direct = direct * real(c.alpha) + &r * r.adjoint();
        let expect = inverse_hpd(&direct, "direct covariance").unwrap();
        let err = (inv.matrix() - &expect).norm();
        prop_assert!(err <= MIL_TOL * expect.norm().max(1.0), "inverse mismatch {err}");
    }
    Ok(())
}

/// `‖Φ Λ Φ^H − A‖_F ≤ 1e-10 ‖A‖_F` and `Φ^H Φ = I` within 1e-10.
pub fn check_eigendecomposition(n: usize, seed: u64) -> Result<(), TestCaseError> {
    let m = random_hermitian(seed, n);
    let e = eigh(&m).unwrap();
    let err = (e.reconstruct() - &m).norm();
    prop_assert!(err <= EIGEN_TOL * m.norm().max(f64::MIN_POSITIVE), "reconstruction error {err}");
    let unit = (e.vectors.adjoint() * &e.vectors - identity(n)).norm();
    prop_assert!(unit <= EIGEN_TOL, "unitarity error {unit}");
    Ok(())
}
