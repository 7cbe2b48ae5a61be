//! Monte Carlo runner. Trials run in parallel on independent RNG streams; all
//! algorithms in a trial see the same snapshots, and trial results are summed
//! in trial order so output does not depend on thread scheduling.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamformer::Beamformer;
use crate::config::{AlgorithmConfig, AlgorithmKind, ExperimentConfig, SgInit};
use crate::error::{Error, Result};
use crate::fullrank::{optimal_full_rank, FixedBeamformer, FullRankRls, FullRankSg};
use crate::jio::{JioRls, JioSg, SgSteps};
use crate::linalg::{to_db, CMat, CVec};
use crate::metrics::{mse_metric, sinr_linear};
use crate::rank::{RankAdaptConfig, RankAdaptive};
use crate::signal::{Scenario, SnapshotStream};

/// Optimal beamformer for whichever segment is in effect.
struct ScheduledOptimal {
    starts: Vec<usize>,
    weights: Vec<CVec>,
    inner: FixedBeamformer,
    next: usize,
}

impl ScheduledOptimal {
    fn new(scenario: &Scenario) -> Result<Self> {
        let a = scenario.soi_steering();
        let starts = scenario.segment_starts();
        let weights = starts
            .iter()
            .map(|&i| optimal_full_rank(&scenario.true_covariance_at(i), &a).map(|o| o.weights))
            .collect::<Result<Vec<_>>>()?;
        let inner = FixedBeamformer::new(weights[0].clone());
        Ok(ScheduledOptimal { starts, weights, inner, next: 0 })
    }
}

impl Beamformer for ScheduledOptimal {
    fn process(&mut self, r: &CVec) -> Result<num_complex::Complex64> {
        if let Some(k) = self.starts.iter().rposition(|&s| s == self.next) {
            self.inner.set_weights(self.weights[k].clone());
        }
        self.next += 1;
        self.inner.process(r)
    }

    fn weights(&self) -> CVec {
        self.inner.weights()
    }

    fn rank(&self) -> usize {
        self.inner.rank()
    }
}

/// Instantiates an algorithm for `scenario` with its standard initialization.
pub fn build_beamformer(kind: &AlgorithmKind, scenario: &Scenario) -> Result<Box<dyn Beamformer>> {
    let a = scenario.soi_steering();
    let noise = scenario.noise_variance();
    let default_delta = |d: Option<f64>| d.unwrap_or(100.0 / noise);
    Ok(match kind {
        AlgorithmKind::Opt => Box::new(ScheduledOptimal::new(scenario)?),
        AlgorithmKind::FrSg { mu, init } => Box::new(match init {
            SgInit::FirstElement => FullRankSg::first_element(a, *mu)?,
            SgInit::Quiescent => FullRankSg::new(a, *mu)?,
        }),
        AlgorithmKind::FrRls { alpha, delta } => Box::new(FullRankRls::new(a, *alpha, default_delta(*delta))?),
        AlgorithmKind::JioSg { rank, mu_s, mu_w } => {
            Box::new(JioSg::new(a, *rank, SgSteps { mu_s: *mu_s, mu_w: *mu_w })?)
        }
        AlgorithmKind::JioRls { rank, alpha, delta, delta_bar } => {
            Box::new(JioRls::new(a, *rank, AlgorithmKind::rls_params(*alpha, *delta, *delta_bar, noise))?)
        }
        AlgorithmKind::JioSgAuto { mu_s, mu_w, auto } => {
            let inner = JioSg::new(a, auto.d_max, SgSteps { mu_s: *mu_s, mu_w: *mu_w })?;
            Box::new(RankAdaptive::new(inner, auto.resolve(RankAdaptConfig::default().alpha))?)
        }
        AlgorithmKind::JioRlsAuto { alpha, delta, delta_bar, auto } => {
            let inner = JioRls::new(a, auto.d_max, AlgorithmKind::rls_params(*alpha, *delta, *delta_bar, noise))?;
            Box::new(RankAdaptive::new(inner, auto.resolve(*alpha))?)
        }
    })
}

/// Ensemble-averaged curves of one algorithm. `sinr_db[i]` is the dB value of
/// the trial-mean linear SINR at snapshot `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub kind: &'static str,
    pub sinr_db: Vec<f64>,
    pub mse: Vec<f64>,
    pub rank: Vec<f64>,
}

impl Curve {
    pub fn final_sinr_db(&self) -> f64 {
        *self.sinr_db.last().expect("non-empty curve")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub curves: Vec<Curve>,
    pub n_trials: usize,
    pub n_snapshots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub algorithm: String,
    pub snapshot: usize,
    pub sinr_db: f64,
    pub mse: f64,
    pub rank: f64,
}

impl ExperimentResult {
    pub fn curve(&self, label: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.label == label)
    }

    pub fn records(&self) -> impl Iterator<Item = MetricsRecord> + '_ {
        self.curves.iter().flat_map(|c| {
            (0..self.n_snapshots).map(move |i| MetricsRecord {
                algorithm: c.label.clone(),
                snapshot: i,
                sinr_db: c.sinr_db[i],
                mse: c.mse[i],
                rank: c.rank[i],
            })
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for rec in self.records() {
            w.serialize(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Per-trial sums, laid out `[algorithm][snapshot]`.
struct TrialSums {
    sinr: Vec<Vec<f64>>,
    mse: Vec<Vec<f64>>,
    rank: Vec<Vec<f64>>,
}

impl TrialSums {
    fn zeros(n_alg: usize, n_snap: usize) -> Self {
        TrialSums {
            sinr: vec![vec![0.0; n_snap]; n_alg],
            mse: vec![vec![0.0; n_snap]; n_alg],
            rank: vec![vec![0.0; n_snap]; n_alg],
        }
    }

    fn add(&mut self, other: &TrialSums) {
        let pairs = [(&mut self.sinr, &other.sinr), (&mut self.mse, &other.mse), (&mut self.rank, &other.rank)];
        for (dst, src) in pairs {
            for (d, s) in dst.iter_mut().zip(src) {
                for (x, y) in d.iter_mut().zip(s) {
                    *x += y;
                }
            }
        }
    }
}

struct SegmentMatrices {
    start: usize,
    ri: CMat,
}

fn run_trial(
    scenario: &Scenario,
    algorithms: &[AlgorithmConfig],
    n_snapshots: usize,
    trial: u64,
    rs: &CMat,
    segments: &[SegmentMatrices],
) -> Result<TrialSums> {
    let mut filters = algorithms
        .iter()
        .map(|alg| build_beamformer(&alg.kind, scenario))
        .collect::<Result<Vec<_>>>()?;
    let mut out = TrialSums::zeros(algorithms.len(), n_snapshots);
    let mut seg = 0;
    for snap in SnapshotStream::new(scenario, trial).take(n_snapshots) {
        let i = snap.index;
        while seg + 1 < segments.len() && segments[seg + 1].start <= i {
            seg += 1;
        }
        let ri = &segments[seg].ri;
        for (k, f) in filters.iter_mut().enumerate() {
            let x = f.process(&snap.r)?;
            let w = f.weights();
            out.sinr[k][i] = sinr_linear(&w, rs, ri).unwrap_or(f64::NAN);
            out.mse[k][i] = mse_metric(snap.d, x);
            out.rank[k][i] = f.rank() as f64;
        }
    }
    Ok(out)
}

/// Runs `algorithms` over `n_trials` independent trials of `n_snapshots`.
pub fn run_algorithms(
    scenario: &Scenario,
    algorithms: &[AlgorithmConfig],
    n_trials: usize,
    n_snapshots: usize,
) -> Result<ExperimentResult> {
    if algorithms.is_empty() || n_trials == 0 || n_snapshots == 0 {
        return Err(Error::InvalidParameter("need at least one algorithm, trial and snapshot".into()));
    }
    scenario.validate()?;
    let rs = scenario.signal_covariance();
    let segments: Vec<SegmentMatrices> = scenario
        .segment_starts()
        .into_iter()
        .map(|start| SegmentMatrices { start, ri: scenario.interference_covariance_at(start) })
        .collect();

    let per_trial: Vec<TrialSums> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| run_trial(scenario, algorithms, n_snapshots, t, &rs, &segments))
        .collect::<Result<_>>()?;

    let mut total = TrialSums::zeros(algorithms.len(), n_snapshots);
    for t in &per_trial {
        total.add(t);
    }
    let n = n_trials as f64;
    let curves = algorithms
        .iter()
        .enumerate()
        .map(|(k, alg)| Curve {
            label: alg.label().to_owned(),
            kind: alg.kind.name(),
            sinr_db: total.sinr[k].iter().map(|s| to_db(s / n)).collect(),
            mse: total.mse[k].iter().map(|s| s / n).collect(),
            rank: total.rank[k].iter().map(|s| s / n).collect(),
        })
        .collect();
    Ok(ExperimentResult { curves, n_trials, n_snapshots })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    run_algorithms(&cfg.to_scenario()?, &cfg.algorithms, cfg.n_trials, cfg.n_snapshots)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: String,
    pub rank: usize,
    pub sinr_db: f64,
    pub mse: f64,
}

/// SINR and MSE at the last snapshot as a function of rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSweep {
    pub rows: Vec<SweepRow>,
}

impl RankSweep {
    pub fn get(&self, algorithm: &str, rank: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm && r.rank == rank)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Reruns every fixed-rank algorithm of `cfg` at each rank in `ranks`.
/// Algorithms without a rank are run once and repeated on every row.
pub fn sweep_rank(cfg: &ExperimentConfig, ranks: &[usize]) -> Result<RankSweep> {
    cfg.validate()?;
    if ranks.is_empty() {
        return Err(Error::InvalidParameter("empty rank list".into()));
    }
    let scenario = cfg.to_scenario()?;
    if let Some(&bad) = ranks.iter().find(|&&d| d == 0 || d > scenario.elements) {
        return Err(Error::InvalidParameter(format!("rank {bad} outside 1..={}", scenario.elements)));
    }
    // (label, rank or None, index into expanded list)
    let mut expanded = Vec::new();
    let mut plan = Vec::new();
    for alg in &cfg.algorithms {
        if alg.kind.rank().is_some() {
            for &d in ranks {
                let kind = alg.kind.with_rank(d).expect("ranked kind");
                plan.push((alg.label().to_owned(), Some(d), expanded.len()));
                expanded.push(AlgorithmConfig::labeled(format!("{}@{d}", alg.label()), kind));
            }
        } else {
            plan.push((alg.label().to_owned(), None, expanded.len()));
            expanded.push(alg.clone());
        }
    }
    let res = run_algorithms(&scenario, &expanded, cfg.n_trials, cfg.n_snapshots)?;
    let last = cfg.n_snapshots - 1;
    let mut rows = Vec::new();
    for (label, rank, idx) in plan {
        let c = &res.curves[idx];
        match rank {
            Some(d) => rows.push(SweepRow { algorithm: label, rank: d, sinr_db: c.sinr_db[last], mse: c.mse[last] }),
            None => rows.extend(ranks.iter().map(|&d| SweepRow {
                algorithm: label.clone(),
                rank: d,
                sinr_db: c.sinr_db[last],
                mse: c.mse[last],
            })),
        }
    }
    Ok(RankSweep { rows })
}

/// First snapshot after which `curve` stays within `tol_db` of `target`.
pub fn convergence_time(curve: &[f64], target: f64, tol_db: f64) -> Option<usize> {
    let mut t = None;
    for (i, v) in curve.iter().enumerate() {
        if (v - target).abs() <= tol_db {
            t.get_or_insert(i);
        } else {
            t = None;
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ScenarioConfig, SourceConfig};

    fn small_config(n_trials: usize, n_snapshots: usize) -> ExperimentConfig {
        ExperimentConfig {
            scenario: ScenarioConfig {
                elements: 6,
                snr_db: 10.0,
                soi: SourceConfig::new(10.0, 0.0),
                interferers: vec![SourceConfig::new(-40.0, 0.0), SourceConfig::new(50.0, 3.0)],
                symbol_alphabet: Default::default(),
                power_jitter_db: 0.0,
                change_events: vec![],
                seed: 4,
            },
            n_trials,
            n_snapshots,
            algorithms: vec![
                AlgorithmConfig::new(AlgorithmKind::Opt),
                AlgorithmConfig::new(AlgorithmKind::JioSg { rank: 2, mu_s: 0.002, mu_w: 0.01 }),
                AlgorithmConfig::new(AlgorithmKind::JioRls { rank: 2, alpha: 0.998, delta: None, delta_bar: None }),
            ],
            analysis: None,
        }
    }

    #[test]
    fn rows_per_algorithm() {
        let res = run_experiment(&small_config(1, 100)).unwrap();
        let recs: Vec<_> = res.records().collect();
        assert_eq!(recs.len(), 300);
        assert_eq!(recs.iter().filter(|r| r.algorithm == "jio-sg").count(), 100);
    }

    #[test]
    fn deterministic_csv() {
        let cfg = small_config(8, 60);
        let mut a = Vec::new();
        let mut b = Vec::new();
        run_experiment(&cfg).unwrap().write_csv(&mut a).unwrap();
        run_experiment(&cfg).unwrap().write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("algorithm,snapshot,sinr_db,mse,rank\n"));
    }

    #[test]
    fn optimal_curve_is_flat() {
        let res = run_experiment(&small_config(3, 20)).unwrap();
        let opt = res.curve("opt").unwrap();
        assert!(opt.sinr_db.iter().all(|v| (v - opt.sinr_db[0]).abs() < 1e-12));
    }

    #[test]
    fn sweep_expands_ranks() {
        let sw = sweep_rank(&small_config(2, 20), &[1, 2, 3]).unwrap();
        assert_eq!(sw.rows.len(), 9);
        assert!(sw.get("jio-rls", 3).is_some());
        assert_eq!(sw.get("opt", 1).unwrap().sinr_db, sw.get("opt", 3).unwrap().sinr_db);
    }

    #[test]
    fn convergence_time_examples() {
        let v = [0.0, 5.0, 9.5, 8.0, 9.8, 10.0];
        assert_eq!(convergence_time(&v, 10.0, 1.0), Some(4));
        assert_eq!(convergence_time(&v, 20.0, 1.0), None);
    }
}
