//! Uniform linear array signal model.
//!
//! Snapshots follow `r(i) = A(θ) s(i) + n(i)` for a half-wavelength ULA with
//! element `m` of the steering vector equal to `exp(-jπ m cos θ)`. Angles in
//! this module are measured from the array axis, in degrees, over
//! `[0°, 180°]`; 90° is broadside. The JSON config layer converts the
//! broadside-referenced angles used in scenario files.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_db, CMat, CVec};

pub fn steering_vector(theta_deg: f64, elements: usize) -> Result<CVec> {
    if elements == 0 {
        return Err(Error::InvalidParameter("steering vector needs at least one element".into()));
    }
    if !(0.0..=180.0).contains(&theta_deg) {
        return Err(Error::InvalidParameter(format!(
            "steering angle {theta_deg}° outside [0°, 180°]"
        )));
    }
    let phase = -PI * theta_deg.to_radians().cos();
    Ok(CVec::from_fn(elements, |m, _| {
        if m == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, phase * m as f64)
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolAlphabet {
    /// Unit-power QPSK, `(±1 ± j)/√2`.
    #[default]
    Qpsk,
    ComplexGaussian,
}

impl SymbolAlphabet {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Complex64 {
        match self {
            SymbolAlphabet::Qpsk => {
                let re = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let im = if rng.random::<bool>() { 1.0 } else { -1.0 };
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            }
            SymbolAlphabet::ComplexGaussian => complex_gaussian(rng, 1.0),
        }
    }
}

/// Circular complex Gaussian sample with `E|z|^2 = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

pub fn draw_noise<R: Rng + ?Sized>(rng: &mut R, elements: usize, variance: f64) -> CVec {
    CVec::from_fn(elements, |_, _| complex_gaussian(rng, variance))
}

/// `Σ_l a_l s_l + n`.
pub fn synthesize(steering: &[CVec], symbols: &[Complex64], noise: &CVec) -> CVec {
    let mut r = noise.clone();
    for (a, s) in steering.iter().zip(symbols) {
        r.axpy(*s, a, Complex64::new(1.0, 0.0));
    }
    r
}

/// `Σ_l p_l a_l a_l^H + σ² I`.
pub fn covariance_from(steering: &[CVec], powers: &[f64], noise_variance: f64) -> CMat {
    let m = steering.first().map_or(0, |a| a.len());
    covariance_with_dim(m, steering, powers, noise_variance)
}

fn covariance_with_dim(m: usize, steering: &[CVec], powers: &[f64], noise_variance: f64) -> CMat {
    let mut r = CMat::identity(m, m) * Complex64::new(noise_variance, 0.0);
    for (a, &p) in steering.iter().zip(powers) {
        r += (a * a.adjoint()) * Complex64::new(p, 0.0);
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    /// Axis-referenced DOA in degrees, in `(0°, 180°)`.
    pub theta: f64,
    /// Linear variance.
    pub power: f64,
    #[serde(default)]
    pub is_soi: bool,
}

impl Source {
    pub fn soi(theta: f64, power: f64) -> Self {
        Source { theta, power, is_soi: true }
    }

    pub fn interferer(theta: f64, power: f64) -> Self {
        Source { theta, power, is_soi: false }
    }
}

/// Replaces the full source set from `at_snapshot` onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub at_snapshot: usize,
    pub new_sources: Vec<Source>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub elements: usize,
    pub sources: Vec<Source>,
    pub snr_db: f64,
    #[serde(default)]
    pub symbol_alphabet: SymbolAlphabet,
    #[serde(default)]
    pub power_jitter_db: f64,
    #[serde(default)]
    pub change_events: Vec<ChangeEvent>,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn new(elements: usize, sources: Vec<Source>, snr_db: f64) -> Result<Self> {
        let s = Scenario {
            elements,
            sources,
            snr_db,
            symbol_alphabet: SymbolAlphabet::Qpsk,
            power_jitter_db: 0.0,
            change_events: Vec::new(),
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements < 2 {
            return Err(Error::config("scenario.elements", "need at least 2 elements"));
        }
        if self.snr_db.is_nan() {
            return Err(Error::config("scenario.snr_db", "must be a number"));
        }
        if !(self.power_jitter_db >= 0.0 && self.power_jitter_db.is_finite()) {
            return Err(Error::config("scenario.power_jitter_db", "must be finite and >= 0"));
        }
        Self::validate_sources(self.elements, &self.sources, "scenario.sources")?;
        let soi = self.soi();
        let mut last = 0usize;
        for (k, ev) in self.change_events.iter().enumerate() {
            let field = format!("scenario.change_events[{k}]");
            if ev.at_snapshot == 0 || ev.at_snapshot < last {
                return Err(Error::config(&field, "at_snapshot must be positive and non-decreasing"));
            }
            last = ev.at_snapshot;
            Self::validate_sources(self.elements, &ev.new_sources, &format!("{field}.new_sources"))?;
            let new_soi = ev.new_sources.iter().find(|s| s.is_soi).expect("validated");
            if new_soi.theta != soi.theta || new_soi.power != soi.power {
                return Err(Error::config(&field, "the signal of interest must keep its DOA and power"));
            }
        }
        Ok(())
    }

    fn validate_sources(m: usize, sources: &[Source], field: &str) -> Result<()> {
        if sources.len() >= m {
            return Err(Error::config(field, format!("{} sources need more than {m} elements", sources.len())));
        }
        let n_soi = sources.iter().filter(|s| s.is_soi).count();
        if n_soi != 1 {
            return Err(Error::config(field, format!("exactly one signal of interest required, found {n_soi}")));
        }
        for (l, s) in sources.iter().enumerate() {
            if !(s.power > 0.0 && s.power.is_finite()) {
                return Err(Error::config(format!("{field}[{l}].power"), "must be positive"));
            }
            if !(s.theta > 0.0 && s.theta < 180.0) {
                return Err(Error::config(format!("{field}[{l}].theta"), "DOA must lie in (0°, 180°)"));
            }
        }
        Ok(())
    }

    pub fn soi_index(&self) -> usize {
        self.sources.iter().position(|s| s.is_soi).expect("scenario has a signal of interest")
    }

    pub fn soi(&self) -> &Source {
        &self.sources[self.soi_index()]
    }

    /// `σ_d²`.
    pub fn soi_power(&self) -> f64 {
        self.soi().power
    }

    /// `σ² = σ_d² / SNR`.
    pub fn noise_variance(&self) -> f64 {
        self.soi_power() / from_db(self.snr_db)
    }

    pub fn soi_steering(&self) -> CVec {
        steering_vector(self.soi().theta, self.elements).expect("validated scenario")
    }

    /// Source set in effect at snapshot `i`.
    pub fn sources_at(&self, i: usize) -> &[Source] {
        self.change_events
            .iter()
            .rev()
            .find(|ev| ev.at_snapshot <= i)
            .map_or(&self.sources[..], |ev| &ev.new_sources[..])
    }

    /// Segment boundaries `[0, e_1, e_2, ...]` of the piecewise stationary model.
    pub fn segment_starts(&self) -> Vec<usize> {
        std::iter::once(0).chain(self.change_events.iter().map(|e| e.at_snapshot)).collect()
    }

    fn covariance_parts(&self, sources: &[Source], include_soi: bool, include_interference: bool) -> CMat {
        let (steer, powers): (Vec<CVec>, Vec<f64>) = sources
            .iter()
            .filter(|s| if s.is_soi { include_soi } else { include_interference })
            .map(|s| (steering_vector(s.theta, self.elements).expect("validated"), s.power))
            .unzip();
        let noise = if include_interference { self.noise_variance() } else { 0.0 };
        covariance_with_dim(self.elements, &steer, &powers, noise)
    }

    /// `R = Σ p_l a(θ_l) a(θ_l)^H + σ² I` with nominal powers.
    pub fn true_covariance(&self) -> CMat {
        self.true_covariance_at(0)
    }

    pub fn true_covariance_at(&self, i: usize) -> CMat {
        self.covariance_parts(self.sources_at(i), true, true)
    }

    /// `E[p] / p` for an interferer whose power is jittered by a zero-mean
    /// Gaussian offset of `power_jitter_db` dB.
    pub fn jitter_mean_factor(&self) -> f64 {
        let s = self.power_jitter_db * std::f64::consts::LN_10 / 10.0;
        (s * s / 2.0).exp()
    }

    /// `E[r r^H]` over the per-trial power draws at snapshot `i`.
    pub fn expected_covariance_at(&self, i: usize) -> CMat {
        let k = self.jitter_mean_factor();
        let scaled: Vec<Source> = self
            .sources_at(i)
            .iter()
            .map(|s| Source { power: if s.is_soi { s.power } else { s.power * k }, ..s.clone() })
            .collect();
        self.covariance_parts(&scaled, true, true)
    }

    /// `R_s = σ_d² a a^H`.
    pub fn signal_covariance(&self) -> CMat {
        self.covariance_parts(&self.sources, true, false)
    }

    /// `R_I`: interference plus noise at snapshot `i`, nominal powers.
    pub fn interference_covariance_at(&self, i: usize) -> CMat {
        self.covariance_parts(self.sources_at(i), false, true)
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub index: usize,
    pub r: CVec,
    /// Symbol of the signal of interest, `d(i)`.
    pub d: Complex64,
}

struct Segment {
    start: usize,
    steering: Vec<CVec>,
    amplitudes: Vec<f64>,
    soi: usize,
}

/// Per-trial snapshot generator.
///
/// The stream is seeded from `(scenario.seed, trial)`; interferer powers are
/// redrawn once per trial when `power_jitter_db > 0`.
pub struct SnapshotStream {
    rng: ChaCha8Rng,
    segments: Vec<Segment>,
    alphabet: SymbolAlphabet,
    noise_variance: f64,
    elements: usize,
    next: usize,
}

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

impl SnapshotStream {
    pub fn new(scenario: &Scenario, trial: u64) -> Self {
        let mut rng = trial_rng(scenario.seed, trial);
        let jitter = Normal::new(0.0, scenario.power_jitter_db).expect("validated jitter");
        let mut segments = Vec::new();
        for start in scenario.segment_starts() {
            let sources = scenario.sources_at(start);
            let mut steering = Vec::with_capacity(sources.len());
            let mut amplitudes = Vec::with_capacity(sources.len());
            for s in sources {
                steering.push(steering_vector(s.theta, scenario.elements).expect("validated"));
                let mut p = s.power;
                if !s.is_soi && scenario.power_jitter_db > 0.0 {
                    let offset_db: f64 = jitter.sample(&mut rng);
                    p *= from_db(offset_db);
                }
                amplitudes.push(p.sqrt());
            }
            let soi = sources.iter().position(|s| s.is_soi).expect("validated");
            segments.push(Segment { start, steering, amplitudes, soi });
        }
        SnapshotStream {
            rng,
            segments,
            alphabet: scenario.symbol_alphabet,
            noise_variance: scenario.noise_variance(),
            elements: scenario.elements,
            next: 0,
        }
    }

    /// Powers of the sources in effect at snapshot `i` after the per-trial draw.
    pub fn realized_powers(&self, i: usize) -> Vec<f64> {
        self.segment(i).amplitudes.iter().map(|a| a * a).collect()
    }

    fn segment(&self, i: usize) -> &Segment {
        self.segments.iter().rev().find(|s| s.start <= i).expect("segment 0 starts at 0")
    }

    pub fn generate(&mut self) -> Snapshot {
        let i = self.next;
        self.next += 1;
        let seg_idx = self.segments.iter().rposition(|s| s.start <= i).expect("segment 0");
        let n_src = self.segments[seg_idx].steering.len();
        let mut symbols = Vec::with_capacity(n_src);
        for l in 0..n_src {
            let amp = self.segments[seg_idx].amplitudes[l];
            symbols.push(self.alphabet.draw(&mut self.rng) * amp);
        }
        let noise = draw_noise(&mut self.rng, self.elements, self.noise_variance);
        let seg = &self.segments[seg_idx];
        let r = synthesize(&seg.steering, &symbols, &noise);
        Snapshot { index: i, r, d: symbols[seg.soi] }
    }
}

impl Iterator for SnapshotStream {
    type Item = Snapshot;

    fn next(&mut self) -> Option<Snapshot> {
        Some(self.generate())
    }
}
