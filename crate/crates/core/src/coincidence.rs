//! Coincidence counting.
//!
//! For the fixed-window family, correlated coincidences obey
//! `R12 < (1 + (sigma / I_s)^2) T R1^2`; [`consistency_verdict`] inverts that
//! bound to show what window or noise level a measured `(R1, R12)` would need.
//!
//! [`simulate_coincidences`] runs two first-passage detectors on beams whose
//! fluctuations share a fraction `correlation` of their variance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require, require_nonneg, require_positive, Error, Result};
use crate::first_passage::FirstPassageDetector;
use crate::noise::{NoiseModel, SeedSpec};

/// Right-hand side of the fixed-window coincidence bound.
pub fn coincidence_bound(r1: f64, window: f64, sigma_over_is: f64) -> f64 {
    (1.0 + sigma_over_is * sigma_over_is) * window * r1 * r1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictStatus {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub verdict: VerdictStatus,
    pub r1: f64,
    pub r12: f64,
    #[serde(rename = "T")]
    pub window: f64,
    pub sigma_over_is: f64,
    pub bound: f64,
    /// Smallest window restoring the bound at the given `sigma / I_s`.
    #[serde(rename = "requires_T_at_least", skip_serializing_if = "Option::is_none")]
    pub required_window: Option<f64>,
    /// Smallest `sigma / I_s` restoring the bound at the given window.
    #[serde(rename = "requires_sigma_ratio_at_least", skip_serializing_if = "Option::is_none")]
    pub required_sigma_ratio: Option<f64>,
}

impl Verdict {
    pub fn is_consistent(&self) -> bool {
        self.verdict == VerdictStatus::Consistent
    }
}

/// Checks `R12` against the bound; when violated, reports the minimal window
/// `R12 / ((1 + r^2) R1^2)` and minimal ratio `sqrt(R12 / (T R1^2) - 1)` at
/// which it would hold with equality. Both are infinite when `R1 = 0 < R12`.
pub fn consistency_verdict(r1: f64, r12: f64, window: f64, sigma_over_is: f64) -> Result<Verdict> {
    require_nonneg(r1, "r1")?;
    require_nonneg(r12, "r12")?;
    require_positive(window, "t")?;
    require_nonneg(sigma_over_is, "ratio")?;
    let bound = coincidence_bound(r1, window, sigma_over_is);
    let mut verdict = Verdict {
        verdict: VerdictStatus::Consistent,
        r1,
        r12,
        window,
        sigma_over_is,
        bound,
        required_window: None,
        required_sigma_ratio: None,
    };
    if r12 == 0.0 || r12 < bound {
        return Ok(verdict);
    }
    verdict.verdict = VerdictStatus::Inconsistent;
    let r1_sq = r1 * r1;
    if r1_sq == 0.0 {
        verdict.required_window = Some(f64::INFINITY);
        verdict.required_sigma_ratio = Some(f64::INFINITY);
    } else {
        verdict.required_window = Some(r12 / ((1.0 + sigma_over_is * sigma_over_is) * r1_sq));
        verdict.required_sigma_ratio = Some((r12 / (window * r1_sq) - 1.0).max(0.0).sqrt());
    }
    Ok(verdict)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedBeamPair {
    pub intensity: f64,
    /// Fraction of fluctuation variance shared by the two beams.
    pub correlation: f64,
    pub noise: NoiseModel,
}

impl CorrelatedBeamPair {
    pub fn new(intensity: f64, correlation: f64, noise: NoiseModel) -> Result<Self> {
        let pair = Self { intensity, correlation, noise };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        require_nonneg(self.intensity, "is")?;
        require((0.0..=1.0).contains(&self.correlation), "correlation", || {
            format!("must lie in [0, 1] (got {})", self.correlation)
        })?;
        self.noise.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceConfig {
    /// Coincidence window `w`: events closer than `w` form a pair.
    pub window: f64,
    pub duration: f64,
    pub dt: f64,
    /// Events before `warmup` are discarded.
    pub warmup: f64,
    pub detectors: [FirstPassageDetector; 2],
}

impl CoincidenceConfig {
    pub fn new(window: f64, duration: f64, dt: f64, detectors: [FirstPassageDetector; 2]) -> Self {
        Self { window, duration, dt, warmup: 0.0, detectors }
    }

    pub fn with_warmup(mut self, warmup: f64) -> Self {
        self.warmup = warmup;
        self
    }

    fn window_steps(&self) -> Result<u64> {
        require_positive(self.window, "window")?;
        require_positive(self.dt, "dt")?;
        let steps = self.window / self.dt;
        let rounded = steps.round();
        require(rounded >= 1.0 && (steps - rounded).abs() <= 1e-9 * rounded, "window", || {
            format!("must be a whole multiple of dt = {} (got {})", self.dt, self.window)
        })?;
        Ok(rounded as u64)
    }

    pub fn validate(&self) -> Result<()> {
        self.window_steps()?;
        require_positive(self.duration, "duration")?;
        require_nonneg(self.warmup, "warmup")?;
        require(self.duration > self.warmup + 10.0 * self.window, "duration", || {
            format!("must exceed warmup + 10 windows (got {})", self.duration)
        })?;
        for d in &self.detectors {
            d.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoincidenceRates {
    #[serde(rename = "I_s")]
    pub intensity: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    #[serde(rename = "R12")]
    pub r12: f64,
    /// `2 w R1 R2`.
    pub accidental: f64,
    pub excess: f64,
    /// Poisson error of the pair count, `sqrt(N12) / live_time`.
    pub excess_stderr: f64,
    pub counts: [u64; 3],
    pub live_time: f64,
}

impl CoincidenceRates {
    /// `(R12 - accidental) / R1`.
    pub fn normalized_excess(&self) -> f64 {
        self.excess / self.r1
    }
}

struct Channel {
    threshold: f64,
    dead_steps: u64,
    energy: f64,
    dead_left: u64,
    events: Vec<u64>,
}

impl Channel {
    fn new(det: &FirstPassageDetector, dt: f64) -> Self {
        Self {
            threshold: det.threshold,
            dead_steps: (det.dead_time / dt).round() as u64,
            energy: 0.0,
            dead_left: 0,
            events: Vec::new(),
        }
    }

    #[inline]
    fn advance(&mut self, step: u64, increment: f64) {
        if self.dead_left > 0 {
            self.dead_left -= 1;
            return;
        }
        self.energy += increment;
        if self.energy >= self.threshold {
            self.events.push(step);
            self.energy = 0.0;
            self.dead_left = self.dead_steps;
        }
    }
}

/// Number of pairs `(a, b)` with `|a - b| < width`, both lists sorted.
fn count_pairs(a: &[u64], b: &[u64], width: u64) -> u64 {
    let mut total = 0u64;
    let mut lo = 0usize;
    let mut hi = 0usize;
    for &t in a {
        let start = t.saturating_sub(width - 1);
        while lo < b.len() && b[lo] < start {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < b.len() && b[hi] <= t + (width - 1) {
            hi += 1;
        }
        total += (hi - lo) as u64;
    }
    total
}

/// Simulates both detectors over `duration` on a common grid.
///
/// Beam `i` receives `I_s dt + sqrt(c) f_shared + sqrt(1 - c) f_i` per step,
/// where the three fluctuation streams are independent copies of the noise
/// model drawn from `seed.child(0..3)`. Each detector restarts from zero
/// energy after a count and stays blind for its dead time.
pub fn simulate_coincidences(pair: &CorrelatedBeamPair, config: &CoincidenceConfig, seed: SeedSpec) -> Result<CoincidenceRates> {
    pair.validate()?;
    config.validate()?;
    let window_steps = config.window_steps()?;
    let dt = config.dt;
    let n_steps = (config.duration / dt).round() as u64;
    let warmup_steps = (config.warmup / dt).ceil() as u64;
    let shared_scale = pair.correlation.sqrt();
    let own_scale = (1.0 - pair.correlation).sqrt();
    let mut shared = pair.noise.sampler(dt, seed.child(0))?;
    let mut own = [pair.noise.sampler(dt, seed.child(1))?, pair.noise.sampler(dt, seed.child(2))?];
    let mut channels = [Channel::new(&config.detectors[0], dt), Channel::new(&config.detectors[1], dt)];
    let drift = pair.intensity * dt;
    for step in 1..=n_steps {
        let common = drift + shared_scale * shared.next_increment();
        for (ch, noise) in channels.iter_mut().zip(own.iter_mut()) {
            ch.advance(step, common + own_scale * noise.next_increment());
        }
    }
    let [a, b] = channels.map(|ch| ch.events.into_iter().filter(|&s| s > warmup_steps).collect::<Vec<_>>());
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientStatistics(format!(
            "detector {} recorded no counts in {} time units; extend `duration`",
            if a.is_empty() { 1 } else { 2 },
            config.duration - config.warmup
        )));
    }
    let n12 = count_pairs(&a, &b, window_steps);
    let live_time = (n_steps - warmup_steps.min(n_steps)) as f64 * dt;
    let r1 = a.len() as f64 / live_time;
    let r2 = b.len() as f64 / live_time;
    let r12 = n12 as f64 / live_time;
    let accidental = 2.0 * config.window * r1 * r2;
    Ok(CoincidenceRates {
        intensity: pair.intensity,
        r1,
        r2,
        r12,
        accidental,
        excess: r12 - accidental,
        excess_stderr: (n12 as f64).max(1.0).sqrt() / live_time,
        counts: [a.len() as u64, b.len() as u64, n12],
        live_time,
    })
}

/// Runs [`simulate_coincidences`] at each intensity; point `k` uses `seed.child(k)`.
/// Points run in parallel and come back in input order.
pub fn coincidence_curve(
    pair: &CorrelatedBeamPair,
    config: &CoincidenceConfig,
    intensities: &[f64],
    seed: SeedSpec,
) -> Result<Vec<CoincidenceRates>> {
    crate::curve::check_intensities(intensities)?;
    intensities
        .par_iter()
        .enumerate()
        .map(|(k, &i)| simulate_coincidences(&CorrelatedBeamPair { intensity: i, ..*pair }, config, seed.child(k as u64)))
        .collect()
}
