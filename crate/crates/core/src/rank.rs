//! Online rank selection. Adaptation always runs at `D_max`; each candidate
//! rank `d` reads the leading `d` columns of `S_D`, entries of `w̄` and `ā`,
//! and the leading principal block of `P̄`.

use nalgebra::{DMatrixView, DVectorView};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beamformer::Beamformer;
use crate::error::{Error, Result};
use crate::jio::{JioRls, JioSg, JioState};
use crate::linalg::{CMat, CVec, ZERO};

/// Leading-`d` views of an extended state.
#[derive(Debug, Clone, Copy)]
pub struct SubFilters<'a> {
    pub projection: DMatrixView<'a, Complex64>,
    pub filter: DVectorView<'a, Complex64>,
    pub reduced_steering: DVectorView<'a, Complex64>,
    pub reduced_inverse: Option<DMatrixView<'a, Complex64>>,
}

pub fn extract_subfilters<'a>(
    state: &'a JioState,
    reduced_inverse: Option<&'a CMat>,
    d: usize,
) -> Result<SubFilters<'a>> {
    if d == 0 || d > state.rank() {
        return Err(Error::InvalidParameter(format!("sub-rank {d} outside 1..={}", state.rank())));
    }
    Ok(SubFilters {
        projection: state.projection().columns(0, d),
        filter: state.filter().rows(0, d),
        reduced_steering: state.reduced_steering().rows(0, d),
        reduced_inverse: reduced_inverse.map(|p| p.view((0, 0), (d, d))),
    })
}

/// What each sub-filter contributes to its cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostMode {
    /// `|x̄_d|² / |w̄_d^H ā_d|²`: output power of the sub-filter rescaled to
    /// meet the unity constraint.
    #[default]
    Normalized,
    /// `|w̄_d^H S_d^H r|²`.
    Raw,
}

const GAIN_FLOOR: f64 = 1e-12;

/// Exponentially weighted per-rank costs `C_d`, `d = D_min..=D_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankCosts {
    d_min: usize,
    d_max: usize,
    alpha: f64,
    mode: CostMode,
    values: Vec<f64>,
}

impl RankCosts {
    pub fn new(d_min: usize, d_max: usize, alpha: f64, mode: CostMode) -> Result<Self> {
        if d_min == 0 || d_min > d_max {
            return Err(Error::InvalidParameter(format!("rank range {d_min}..={d_max}")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("cost forgetting factor {alpha} outside [0, 1]")));
        }
        Ok(RankCosts { d_min, d_max, alpha, mode, values: vec![0.0; d_max - d_min + 1] })
    }

    pub fn d_min(&self) -> usize {
        self.d_min
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> CostMode {
        self.mode
    }

    /// `C_d` for `d = D_min..=D_max`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cost(&self, d: usize) -> Option<f64> {
        d.checked_sub(self.d_min).and_then(|k| self.values.get(k).copied())
    }

    /// Overwrites all costs, e.g. to restore a checkpoint.
    pub fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::shape("RankCosts::set_values", self.values.len(), values.len()));
        }
        if values.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidParameter("costs must be finite and non-negative".into()));
        }
        self.values = values;
        Ok(())
    }
}

/// Per-rank outputs `x̄_d = w̄_d^H S_d^H r` for `d = 1..=D` from prefix sums,
/// together with the sub-rank constraint gains `g_d = w̄_d^H ā_d`.
pub fn subrank_outputs(state: &JioState, r: &CVec) -> (Vec<Complex64>, Vec<Complex64>) {
    let y = state.projection().ad_mul(r);
    let w = state.filter();
    let ab = state.reduced_steering();
    let mut x = Vec::with_capacity(w.len());
    let mut g = Vec::with_capacity(w.len());
    let (mut xs, mut gs) = (ZERO, ZERO);
    for k in 0..w.len() {
        xs += w[k].conj() * y[k];
        gs += w[k].conj() * ab[k];
        x.push(xs);
        g.push(gs);
    }
    (x, g)
}

/// `C_d ← α C_d + c_d(i)` for every candidate rank, with `c_d` per [`CostMode`].
pub fn rank_cost_update(costs: &mut RankCosts, state: &JioState, r: &CVec) -> Result<()> {
    if costs.d_max > state.rank() {
        return Err(Error::InvalidParameter(format!(
            "D_max = {} exceeds the state rank {}",
            costs.d_max,
            state.rank()
        )));
    }
    let (x, g) = subrank_outputs(state, r);
    for d in costs.d_min..=costs.d_max {
        let inst = match costs.mode {
            CostMode::Raw => x[d - 1].norm_sqr(),
            CostMode::Normalized => x[d - 1].norm_sqr() / g[d - 1].norm_sqr().max(GAIN_FLOOR * GAIN_FLOOR),
        };
        let c = &mut costs.values[d - costs.d_min];
        *c = costs.alpha * *c + inst;
    }
    Ok(())
}

/// `argmin_d C_d`; the smaller rank wins ties.
pub fn select_rank(costs: &RankCosts) -> usize {
    let mut best = 0;
    for (k, c) in costs.values.iter().enumerate() {
        if *c < costs.values[best] {
            best = k;
        }
    }
    costs.d_min + best
}

/// A JIO recursion whose state can be read by sub-rank.
pub trait ExtendedFilter: Beamformer {
    fn state(&self) -> &JioState;
    fn reduced_inverse(&self) -> Option<&CMat>;
    fn step(&mut self, r: &CVec) -> Result<Complex64>;
}

impl ExtendedFilter for JioSg {
    fn state(&self) -> &JioState {
        JioSg::state(self)
    }

    fn reduced_inverse(&self) -> Option<&CMat> {
        None
    }

    fn step(&mut self, r: &CVec) -> Result<Complex64> {
        JioSg::step(self, r)
    }
}

impl ExtendedFilter for JioRls {
    fn state(&self) -> &JioState {
        JioRls::state(self)
    }

    fn reduced_inverse(&self) -> Option<&CMat> {
        Some(self.reduced_inverse_covariance().matrix())
    }

    fn step(&mut self, r: &CVec) -> Result<Complex64> {
        JioRls::step(self, r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankAdaptConfig {
    pub d_min: usize,
    pub d_max: usize,
    pub alpha: f64,
    pub mode: CostMode,
    /// Stop re-selecting once this many snapshots have been processed.
    pub freeze_after: Option<usize>,
}

impl Default for RankAdaptConfig {
    fn default() -> Self {
        RankAdaptConfig { d_min: 3, d_max: 8, alpha: 0.998, mode: CostMode::Normalized, freeze_after: None }
    }
}

/// Rank-adaptive wrapper. Each snapshot: adapt at `D_max`, update the costs
/// with the updated filters, then reselect `D`.
#[derive(Debug, Clone)]
pub struct RankAdaptive<F> {
    inner: F,
    costs: RankCosts,
    current: usize,
    freeze_after: Option<usize>,
    processed: usize,
}

impl<F: ExtendedFilter> RankAdaptive<F> {
    pub fn new(inner: F, cfg: RankAdaptConfig) -> Result<Self> {
        let costs = RankCosts::new(cfg.d_min, cfg.d_max, cfg.alpha, cfg.mode)?;
        if inner.state().rank() != cfg.d_max {
            return Err(Error::InvalidParameter(format!(
                "inner filter rank {} must equal D_max = {}",
                inner.state().rank(),
                cfg.d_max
            )));
        }
        Ok(RankAdaptive { inner, costs, current: cfg.d_min, freeze_after: cfg.freeze_after, processed: 0 })
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }

    pub fn costs(&self) -> &RankCosts {
        &self.costs
    }

    pub fn current_rank(&self) -> usize {
        self.current
    }

    pub fn subfilters(&self, d: usize) -> Result<SubFilters<'_>> {
        extract_subfilters(self.inner.state(), self.inner.reduced_inverse(), d)
    }

    fn frozen(&self) -> bool {
        self.freeze_after.is_some_and(|n| self.processed > n)
    }
}

impl<F: ExtendedFilter> Beamformer for RankAdaptive<F> {
    /// Returns the constraint-normalized output of the selected sub-filter,
    /// computed after adaptation.
    fn process(&mut self, r: &CVec) -> Result<Complex64> {
        self.inner.step(r)?;
        self.processed += 1;
        rank_cost_update(&mut self.costs, self.inner.state(), r)?;
        if !self.frozen() {
            self.current = select_rank(&self.costs);
        }
        let (x, g) = subrank_outputs(self.inner.state(), r);
        let gain = g[self.current - 1];
        Ok(if gain.norm() > GAIN_FLOOR { x[self.current - 1] / gain } else { x[self.current - 1] })
    }

    /// `S_d w̄_d / (w̄_d^H ā_d)*` for the selected rank `d`.
    fn weights(&self) -> CVec {
        let sub = self.subfilters(self.current).expect("selected rank within range");
        let w = sub.projection * sub.filter;
        let gain = sub.filter.dotc(&sub.reduced_steering);
        if gain.norm() > GAIN_FLOOR {
            w / gain.conj()
        } else {
            w
        }
    }

    fn rank(&self) -> usize {
        self.current
    }
}
