//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line; the
//! process exits non-zero when any criterion fails.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use proptest::prelude::*;

use rrbeam::analysis::{check_stability, minimum_errors, predict_mse, tail_mean, PredictOptions, Stability};
use rrbeam::complexity::{complexity_counts, CostedAlgorithm};
use rrbeam::config::{AlgorithmKind, ExperimentConfig};
use rrbeam::experiment::{build_beamformer, convergence_time, run_experiment, sweep_rank, Curve};
use rrbeam::jio::{JioState, SgSteps};
use rrbeam::linalg::to_db;
use rrbeam::signal::SnapshotStream;

/// Fraction of a curve averaged for its steady-state value.
const STEADY_FRACTION: f64 = 0.2;

/// Smallest SINR lead that counts as outperforming rather than rounding noise.
const OUTPERFORM_MARGIN_DB: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

type Check = fn() -> Result<Outcome, String>;

fn config(name: &str) -> Result<ExperimentConfig, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).map_err(|e| format!("{}: {e}", path.display()))
}

fn keep(cfg: &mut ExperimentConfig, labels: &[&str]) {
    cfg.algorithms.retain(|a| labels.contains(&a.label()));
}

fn curve<'a>(curves: &'a [Curve], label: &str) -> Result<&'a Curve, String> {
    curves.iter().find(|c| c.label == label).ok_or_else(|| format!("no curve '{label}'"))
}

fn steady(v: &[f64]) -> f64 {
    tail_mean(v, STEADY_FRACTION)
}

fn within_budget(start: Instant, budget: Duration) -> (bool, f64) {
    let secs = start.elapsed().as_secs_f64();
    (secs <= budget.as_secs_f64(), secs)
}

fn rank_sweep() -> Result<Outcome, String> {
    let start = Instant::now();
    let mut cfg = config("fig5_rank_sweep.json")?;
    keep(&mut cfg, &["opt", "jio-rls"]);
    let sweep = sweep_rank(&cfg, &[1, 4, 16]).map_err(|e| e.to_string())?;
    let at = |alg: &str, d| sweep.get(alg, d).map(|r| r.sinr_db).ok_or_else(|| format!("missing {alg} at D={d}"));
    let opt = at("opt", 4)?;
    let (d1, d4, d16) = (at("jio-rls", 1)?, at("jio-rls", 4)?, at("jio-rls", 16)?);
    let near_opt = (opt - d4).abs() <= 1.0;
    let peak = d4 > d1 && d4 > d16;
    let (fast, secs) = within_budget(start, Duration::from_secs(90));
    Ok(Outcome::new(
        near_opt && peak && fast,
        format!(
            "optimum {opt:.2} dB; JIO-RLS D=1 {d1:.2}, D=4 {d4:.2}, D=16 {d16:.2} dB; \
             gap {:.2} dB (<= 1), D=4 above D=1 and D=16: {peak}; {secs:.1} s (<= 90)",
            opt - d4
        ),
    ))
}

fn convergence_ordering() -> Result<Outcome, String> {
    let start = Instant::now();
    let cfg = config("fig6_convergence.json")?;
    let res = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let (rls, sg, fr) = (curve(&res.curves, "jio-rls")?, curve(&res.curves, "jio-sg")?, curve(&res.curves, "fr-sg")?);
    let i = 49;
    let ordered = rls.sinr_db[i] > sg.sinr_db[i] && sg.sinr_db[i] > fr.sinr_db[i];
    let t = |c: &Curve| convergence_time(&c.sinr_db, steady(&c.sinr_db), 1.0);
    let (t_sg, t_fr) = (t(sg), t(fr));
    let faster = matches!((t_sg, t_fr), (Some(a), Some(b)) if 2 * a <= b);
    let (fast, secs) = within_budget(start, Duration::from_secs(60));
    Ok(Outcome::new(
        ordered && faster && fast,
        format!(
            "snapshot 50: JIO-RLS {:.2} > JIO-SG {:.2} > FR-SG {:.2} dB: {ordered}; \
             time to 1 dB of steady state JIO-SG {t_sg:?} vs FR-SG {t_fr:?} (needs 2x); {secs:.1} s (<= 60)",
            rls.sinr_db[i], sg.sinr_db[i], fr.sinr_db[i]
        ),
    ))
}

fn mse_agreement() -> Result<Outcome, String> {
    let cfg = config("fig4_mse_prediction.json")?;
    let scenario = cfg.to_scenario().map_err(|e| e.to_string())?;
    let res = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut sim_levels = Vec::new();
    for label in ["large-steps", "small-steps"] {
        let alg = cfg.algorithms.iter().find(|a| a.label() == label).ok_or(format!("no {label}"))?;
        let AlgorithmKind::JioSg { rank, mu_s, mu_w } = alg.kind else {
            return Err(format!("{label} is not jio-sg"));
        };
        let mut opts = PredictOptions::new(cfg.n_snapshots, rank);
        if let Some(a) = &cfg.analysis {
            opts.ensemble_size = a.ensemble_size;
            opts.seed = a.seed;
        }
        let pred = predict_mse(&scenario, SgSteps { mu_s, mu_w }, &opts).map_err(|e| e.to_string())?;
        let sim = steady(&curve(&res.curves, label)?.mse);
        let predicted = pred.steady_state(STEADY_FRACTION);
        let gap = to_db(predicted) - to_db(sim);
        pass &= gap.abs() <= 0.5;
        sim_levels.push(sim);
        parts.push(format!("{label}: predicted {predicted:.4e}, simulated {sim:.4e}, {gap:+.2} dB"));
    }
    let ordered = sim_levels[1] < sim_levels[0];
    parts.push(format!("smaller steps lower: {ordered}"));
    Ok(Outcome::new(pass && ordered, format!("{} (each within 0.5 dB)", parts.join("; "))))
}

fn auto_rank() -> Result<Outcome, String> {
    let mut cfg = config("fig7_auto_rank.json")?;
    keep(&mut cfg, &["jio-rls-auto", "jio-rls-d8"]);
    let res = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let (auto, fixed) = (curve(&res.curves, "jio-rls-auto")?, curve(&res.curves, "jio-rls-d8")?);
    let (f_auto, f_fixed) = (steady(&auto.sinr_db), steady(&fixed.sinr_db));
    let t_auto = convergence_time(&auto.sinr_db, f_auto, 1.0);
    let t_fixed = convergence_time(&fixed.sinr_db, f_fixed, 1.0);
    let no_slower = matches!((t_auto, t_fixed), (Some(a), Some(b)) if a <= b);
    let same_level = (f_auto - f_fixed).abs() <= 0.25;

    let scenario = cfg.to_scenario().map_err(|e| e.to_string())?;
    let kind = &cfg.algorithms.iter().find(|a| a.label() == "jio-rls-auto").ok_or("no auto entry")?.kind;
    let (mut lo, mut hi) = (usize::MAX, 0);
    for trial in 0..cfg.n_trials as u64 {
        let mut bf = build_beamformer(kind, &scenario).map_err(|e| e.to_string())?;
        for snap in SnapshotStream::new(&scenario, trial).take(cfg.n_snapshots) {
            bf.process(&snap.r).map_err(|e| e.to_string())?;
            lo = lo.min(bf.rank());
            hi = hi.max(bf.rank());
        }
    }
    let in_range = lo >= 3 && hi <= 8;
    Ok(Outcome::new(
        no_slower && same_level && in_range,
        format!(
            "time to 1 dB auto {t_auto:?} vs D=8 {t_fixed:?}; final auto {f_auto:.2} vs D=8 {f_fixed:.2} dB \
             (<= 0.25 apart); selected ranks {lo}..={hi} (within 3..=8)"
        ),
    ))
}

fn nonstationary() -> Result<Outcome, String> {
    let mut cfg = config("fig8_nonstationary.json")?;
    keep(&mut cfg, &["jio-rls-auto", "fr-rls"]);
    let change = cfg.scenario.change_events.first().ok_or("no change event")?.at_snapshot;
    if cfg.n_snapshots < change + 400 {
        return Err("horizon shorter than the recovery window".into());
    }
    let res = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let (auto, fr) = (curve(&res.curves, "jio-rls-auto")?, curve(&res.curves, "fr-rls")?);
    let before = &auto.sinr_db[change - 100..change];
    let pre = before.iter().sum::<f64>() / before.len() as f64;
    let recovery = (change..cfg.n_snapshots).find(|&i| auto.sinr_db[i..].iter().all(|&v| v >= pre - 1.0)).map(|i| i - change);
    let recovered = recovery.is_some_and(|n| n <= 400);
    let at = 1000;
    let margin = auto.sinr_db[at] - fr.sinr_db[at];
    let better = margin >= OUTPERFORM_MARGIN_DB;
    Ok(Outcome::new(
        recovered && better,
        format!(
            "pre-change {pre:.2} dB, back within 1 dB after {recovery:?} snapshots (<= 400); \
             at i={at} auto {:.3} vs full-rank RLS {:.3} dB, margin {margin:.2e} dB (>= {OUTPERFORM_MARGIN_DB})",
            auto.sinr_db[at], fr.sinr_db[at]
        ),
    ))
}

fn complexity() -> Result<Outcome, String> {
    use CostedAlgorithm::*;
    type Row = (CostedAlgorithm, u64, u64);
    let expected: [((usize, usize), [Row; 7]); 3] = [
        (
            (16, 4),
            [
                (FullSg, 49, 50),
                (FullRls, 739, 1570),
                (PropSg, 230, 230),
                (PropRls, 758, 1972),
                (MswfSg, 778, 913),
                (MswfRls, 1346, 1422),
                (Avf, 4059, 4422),
            ],
        ),
        (
            (32, 4),
            [
                (FullSg, 97, 98),
                (FullRls, 3011, 6210),
                (PropSg, 454, 438),
                (PropRls, 3030, 7380),
                (MswfSg, 3082, 3345),
                (MswfRls, 5186, 5390),
                (Avf, 16315, 17030),
            ],
        ),
        (
            (64, 8),
            [
                (FullSg, 193, 194),
                (FullRls, 12163, 24706),
                (PropSg, 1678, 1642),
                (PropRls, 12294, 29320),
                (MswfSg, 28694, 29729),
                (MswfRls, 37186, 37914),
                (Avf, 130679, 133386),
            ],
        ),
    ];
    let mut mismatches = Vec::new();
    let mut n = 0;
    for ((m, d), rows) in expected {
        let got = complexity_counts(m, d).map_err(|e| e.to_string())?;
        for (alg, adds, mults) in rows {
            n += 2;
            match got.iter().find(|c| c.algorithm == alg) {
                Some(c) if c.additions == adds && c.multiplications == mults => {}
                Some(c) => mismatches.push(format!(
                    "{alg} at ({m},{d}): {}/{} vs {adds}/{mults}",
                    c.additions, c.multiplications
                )),
                None => mismatches.push(format!("{alg} missing at ({m},{d})")),
            }
        }
    }
    let detail = if mismatches.is_empty() {
        format!("{n} hand-evaluated counts match")
    } else {
        mismatches.join("; ")
    };
    Ok(Outcome::new(mismatches.is_empty(), detail))
}

const PROPERTY_CASES: u32 = 1000;

fn property<S: Strategy>(strategy: S, check: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let mut runner = TestRunner::new(RunnerConfig { cases: PROPERTY_CASES, failure_persistence: None, ..RunnerConfig::default() });
    runner.run(&strategy, check).map_err(|e| e.to_string())
}

fn invariants() -> Result<Outcome, String> {
    use common::*;
    let suites: Vec<(&str, Result<(), String>)> = vec![
        ("constraint preservation", property(case_strategy(), |c| check_constraint_preservation(&c))),
        ("a^H S_D under SG update", property(case_strategy(), |c| check_sg_projection_invariance(&c))),
        ("RLS reduced identities", property(case_strategy(), |c| check_rls_reduced_identities(&c))),
        ("reduced MV bound", property(case_strategy(), |c| check_reduced_mv(&c))),
        ("embedding identities", property(case_strategy(), |c| check_embedding(&c))),
        ("inversion lemma", property(inversion_strategy(), |c| check_inversion_lemma(&c))),
        (
            "eigendecomposition",
            property((1usize..=12, any::<u64>()), |(n, seed)| check_eigendecomposition(n, seed)),
        ),
    ];
    let failed: Vec<String> = suites
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    let detail = if failed.is_empty() {
        format!("{} properties x {PROPERTY_CASES} cases hold", suites.len())
    } else {
        failed.join("; ")
    };
    Ok(Outcome::new(failed.is_empty(), detail))
}

fn stability() -> Result<Outcome, String> {
    let cfg = config("stability_m8.json")?;
    let scenario = cfg.to_scenario().map_err(|e| e.to_string())?;
    let (_, eps_min, _) = minimum_errors(&scenario).map_err(|e| e.to_string())?;
    let steps_of = |label: &str| -> Result<(usize, SgSteps), String> {
        match cfg.algorithms.iter().find(|a| a.label() == label).map(|a| &a.kind) {
            Some(AlgorithmKind::JioSg { rank, mu_s, mu_w }) => Ok((*rank, SgSteps { mu_s: *mu_s, mu_w: *mu_w })),
            _ => Err(format!("no jio-sg entry '{label}'")),
        }
    };
    let (rank, stable_steps) = steps_of("stable")?;
    let (_, unstable_steps) = steps_of("unstable")?;
    let state = JioState::initial(scenario.soi_steering(), rank).map_err(|e| e.to_string())?;
    let report = |s| check_stability(&scenario, s, &state).map_err(|e| e.to_string());
    let zero = report(SgSteps { mu_s: 0.0, mu_w: 0.0 })?;
    let zero_ok = zero.stable == Stability::Marginal && zero.spectral_radius == 1.0;
    let stable = report(stable_steps)?;
    let unstable = report(unstable_steps)?;

    let res = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let horizon = cfg.n_snapshots.min(2000);
    let diverged = curve(&res.curves, "unstable")?.mse[..horizon].iter().any(|&v| v > 1e3 * eps_min);
    let stable_mse = &curve(&res.curves, "stable")?.mse;
    let tail = steady(stable_mse);
    let converged = tail.is_finite() && tail <= 10.0 * eps_min && tail < stable_mse[0];

    let pass = zero_ok
        && stable.stable == Stability::Stable
        && converged
        && unstable.stable == Stability::Unstable
        && diverged;
    Ok(Outcome::new(
        pass,
        format!(
            "(0,0): {:?}, radius {}; ({}, {}): {:?}, simulated tail MSE {tail:.3e} vs eps_min {eps_min:.3e} \
             (converges below 10 eps_min: {converged}); ({}, {}): {:?}, MSE > 1e3 eps_min within {horizon}: {diverged}",
            zero.stable,
            zero.spectral_radius,
            stable_steps.mu_s,
            stable_steps.mu_w,
            stable.stable,
            unstable_steps.mu_s,
            unstable_steps.mu_w,
            unstable.stable
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 8] = [
        ("1 rank sweep", rank_sweep),
        ("2 convergence ordering", convergence_ordering),
        ("3 semi-analytic MSE", mse_agreement),
        ("4 automatic rank", auto_rank),
        ("5 non-stationary recovery", nonstationary),
        ("6 complexity table", complexity),
        ("7 invariant suite", invariants),
        ("8 stability check", stability),
    ];
    let total = Instant::now();
    let mut failures = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        failures += usize::from(!outcome.pass);
        println!("{} criterion {name}: {} [{secs:.1} s]", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
    }
    let secs = total.elapsed().as_secs_f64();
    let on_time = secs <= 300.0;
    failures += usize::from(!on_time);
    println!("{} total runtime {secs:.1} s (<= 300)", if on_time { "PASS" } else { "FAIL" });
    println!("{failures} failing");
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
