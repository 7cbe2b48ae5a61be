//! JSON experiment configuration.
//!
//! DOAs in config files are measured from broadside, in degrees over
//! `(-90°, 90°)`, and source powers are given in dB (0 dB = unit variance).

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jio::{RlsParams, SgSteps};
use crate::linalg::from_db;
use crate::rank::{CostMode, RankAdaptConfig};
use crate::signal::{ChangeEvent, Scenario, Source, SymbolAlphabet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub doa_deg: f64,
    #[serde(default)]
    pub power_db: f64,
}

impl SourceConfig {
    pub fn new(doa_deg: f64, power_db: f64) -> Self {
        SourceConfig { doa_deg, power_db }
    }

    fn to_source(&self, is_soi: bool, field: &str) -> Result<Source> {
        if !(self.doa_deg > -90.0 && self.doa_deg < 90.0) {
            return Err(Error::config(format!("{field}.doa_deg"), "must lie in (-90, 90)"));
        }
        if !self.power_db.is_finite() {
            return Err(Error::config(format!("{field}.power_db"), "must be finite"));
        }
        Ok(Source { theta: 90.0 - self.doa_deg, power: from_db(self.power_db), is_soi })
    }
}

/// Adds and removes interferers relative to the source set in effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangeConfig {
    pub at_snapshot: usize,
    #[serde(default)]
    pub add: Vec<SourceConfig>,
    /// Broadside DOAs of interferers to drop.
    #[serde(default)]
    pub remove: Vec<f64>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub elements: usize,
    pub snr_db: f64,
    pub soi: SourceConfig,
    #[serde(default)]
    pub interferers: Vec<SourceConfig>,
    #[serde(default)]
    pub symbol_alphabet: SymbolAlphabet,
    #[serde(default)]
    pub power_jitter_db: f64,
    #[serde(default)]
    pub change_events: Vec<ChangeConfig>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

const DOA_MATCH_DEG: f64 = 1e-9;

impl ScenarioConfig {
    pub fn to_scenario(&self) -> Result<Scenario> {
        let mut sources = vec![self.soi.to_source(true, "scenario.soi")?];
        for (k, s) in self.interferers.iter().enumerate() {
            sources.push(s.to_source(false, &format!("scenario.interferers[{k}]"))?);
        }
        let mut events = Vec::with_capacity(self.change_events.len());
        let mut current = sources.clone();
        for (k, ev) in self.change_events.iter().enumerate() {
            let field = format!("scenario.change_events[{k}]");
            for (j, doa) in ev.remove.iter().enumerate() {
                let theta = 90.0 - doa;
                let before = current.len();
                current.retain(|s| s.is_soi || (s.theta - theta).abs() > DOA_MATCH_DEG);
                if current.len() == before {
                    return Err(Error::config(format!("{field}.remove[{j}]"), format!("no interferer at {doa}°")));
                }
            }
            for (j, s) in ev.add.iter().enumerate() {
                current.push(s.to_source(false, &format!("{field}.add[{j}]"))?);
            }
            events.push(ChangeEvent { at_snapshot: ev.at_snapshot, new_sources: current.clone() });
        }
        let scenario = Scenario {
            elements: self.elements,
            sources,
            snr_db: self.snr_db,
            symbol_alphabet: self.symbol_alphabet,
            power_jitter_db: self.power_jitter_db,
            change_events: events,
            seed: self.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Starting weights of the full-rank SG filter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SgInit {
    /// `[1, 0, …, 0]^T`, as for the JIO filters.
    #[default]
    FirstElement,
    /// `a / (a^H a)`.
    Quiescent,
}

fn default_alpha() -> f64 {
    0.998
}
fn default_d_min() -> usize {
    3
}
fn default_d_max() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoRankConfig {
    #[serde(default = "default_d_min")]
    pub d_min: usize,
    #[serde(default = "default_d_max")]
    pub d_max: usize,
    /// Forgetting factor of the rank costs; defaults to the filter's.
    #[serde(default)]
    pub cost_alpha: Option<f64>,
    #[serde(default)]
    pub freeze_after: Option<usize>,
    #[serde(default)]
    pub cost: CostMode,
}

impl Default for AutoRankConfig {
    fn default() -> Self {
        AutoRankConfig { d_min: 3, d_max: 8, cost_alpha: None, freeze_after: None, cost: CostMode::Normalized }
    }
}

impl AutoRankConfig {
    pub fn resolve(&self, filter_alpha: f64) -> RankAdaptConfig {
        RankAdaptConfig {
            d_min: self.d_min,
            d_max: self.d_max,
            alpha: self.cost_alpha.unwrap_or(filter_alpha),
            mode: self.cost,
            freeze_after: self.freeze_after,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlgorithmKind {
    Opt,
    FrSg {
        mu: f64,
        #[serde(default)]
        init: SgInit,
    },
    FrRls {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        delta: Option<f64>,
    },
    JioSg {
        rank: usize,
        mu_s: f64,
        mu_w: f64,
    },
    JioRls {
        rank: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default)]
        delta_bar: Option<f64>,
    },
    JioSgAuto {
        mu_s: f64,
        mu_w: f64,
        #[serde(flatten)]
        auto: AutoRankConfig,
    },
    JioRlsAuto {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default)]
        delta_bar: Option<f64>,
        #[serde(flatten)]
        auto: AutoRankConfig,
    },
}

impl AlgorithmKind {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::Opt => "opt",
            AlgorithmKind::FrSg { .. } => "fr-sg",
            AlgorithmKind::FrRls { .. } => "fr-rls",
            AlgorithmKind::JioSg { .. } => "jio-sg",
            AlgorithmKind::JioRls { .. } => "jio-rls",
            AlgorithmKind::JioSgAuto { .. } => "jio-sg-auto",
            AlgorithmKind::JioRlsAuto { .. } => "jio-rls-auto",
        }
    }

    /// Fixed rank, for kinds that have one.
    pub fn rank(&self) -> Option<usize> {
        match self {
            AlgorithmKind::JioSg { rank, .. } | AlgorithmKind::JioRls { rank, .. } => Some(*rank),
            _ => None,
        }
    }

    pub fn with_rank(&self, d: usize) -> Option<AlgorithmKind> {
        let mut k = self.clone();
        match &mut k {
            AlgorithmKind::JioSg { rank, .. } | AlgorithmKind::JioRls { rank, .. } => {
                *rank = d;
                Some(k)
            }
            _ => None,
        }
    }

    pub fn sg_steps(&self) -> Option<SgSteps> {
        match self {
            AlgorithmKind::JioSg { mu_s, mu_w, .. } | AlgorithmKind::JioSgAuto { mu_s, mu_w, .. } => {
                Some(SgSteps { mu_s: *mu_s, mu_w: *mu_w })
            }
            _ => None,
        }
    }

    pub(crate) fn rls_params(alpha: f64, delta: Option<f64>, delta_bar: Option<f64>, noise: f64) -> RlsParams {
        let base = RlsParams::with_noise(alpha, noise);
        RlsParams { alpha, delta: delta.unwrap_or(base.delta), delta_bar: delta_bar.unwrap_or(base.delta_bar) }
    }

    pub fn validate(&self, elements: usize, field: &str) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{field}.{name}"), "must be finite and >= 0"))
            }
        };
        let alpha_ok = |a: f64| {
            if a > 0.0 && a <= 1.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{field}.alpha"), "forgetting factor must lie in (0, 1]"))
            }
        };
        let delta_ok = |v: Option<f64>, name: &str| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::config(format!("{field}.{name}"), "must be positive")),
            _ => Ok(()),
        };
        let rank_ok = |d: usize| {
            if d >= 1 && d <= elements {
                Ok(())
            } else {
                Err(Error::config(format!("{field}.rank"), format!("must lie in 1..={elements}")))
            }
        };
        let auto_ok = |a: &AutoRankConfig| {
            if a.d_min < 1 || a.d_min > a.d_max || a.d_max > elements {
                return Err(Error::config(
                    format!("{field}.d_min"),
                    format!("need 1 <= d_min <= d_max <= {elements}"),
                ));
            }
            if let Some(c) = a.cost_alpha {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::config(format!("{field}.cost_alpha"), "must lie in [0, 1]"));
                }
            }
            Ok(())
        };
        match self {
            AlgorithmKind::Opt => Ok(()),
            AlgorithmKind::FrSg { mu, .. } => positive(*mu, "mu"),
            AlgorithmKind::FrRls { alpha, delta } => {
                alpha_ok(*alpha)?;
                delta_ok(*delta, "delta")
            }
            AlgorithmKind::JioSg { rank, mu_s, mu_w } => {
                rank_ok(*rank)?;
                positive(*mu_s, "mu_s")?;
                positive(*mu_w, "mu_w")
            }
            AlgorithmKind::JioRls { rank, alpha, delta, delta_bar } => {
                rank_ok(*rank)?;
                alpha_ok(*alpha)?;
                delta_ok(*delta, "delta")?;
                delta_ok(*delta_bar, "delta_bar")
            }
            AlgorithmKind::JioSgAuto { mu_s, mu_w, auto } => {
                positive(*mu_s, "mu_s")?;
                positive(*mu_w, "mu_w")?;
                auto_ok(auto)
            }
            AlgorithmKind::JioRlsAuto { alpha, delta, delta_bar, auto } => {
                alpha_ok(*alpha)?;
                delta_ok(*delta, "delta")?;
                delta_ok(*delta_bar, "delta_bar")?;
                auto_ok(auto)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub kind: AlgorithmKind,
}

impl AlgorithmConfig {
    pub fn new(kind: AlgorithmKind) -> Self {
        AlgorithmConfig { label: None, kind }
    }

    pub fn labeled(label: impl Into<String>, kind: AlgorithmKind) -> Self {
        AlgorithmConfig { label: Some(label.into()), kind }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.kind.name())
    }
}

/// Step sizes and ensemble for `predict-mse` and `stability-check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_ensemble() -> usize {
    200
}

fn default_trials() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    pub n_snapshots: usize,
    pub algorithms: Vec<AlgorithmConfig>,
    #[serde(default)]
    pub analysis: Option<AnalysisConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.to_scenario()?;
        if self.n_trials == 0 {
            return Err(Error::config("n_trials", "must be positive"));
        }
        if self.n_snapshots == 0 {
            return Err(Error::config("n_snapshots", "must be positive"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "at least one algorithm is required"));
        }
        let mut seen = HashSet::new();
        for (k, alg) in self.algorithms.iter().enumerate() {
            let field = format!("algorithms[{k}]");
            alg.kind.validate(self.scenario.elements, &field)?;
            if !seen.insert(alg.label().to_owned()) {
                return Err(Error::config(
                    format!("{field}.label"),
                    format!("duplicate label '{}'; give repeated kinds distinct labels", alg.label()),
                ));
            }
        }
        if let Some(a) = &self.analysis {
            if a.ensemble_size == 0 {
                return Err(Error::config("analysis.ensemble_size", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        self.scenario.to_scenario()
    }
}
