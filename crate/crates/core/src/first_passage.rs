//! Detectors whose detection time varies: a count fires when the accumulated,
//! mean-subtracted energy first reaches a threshold `E_m`.
//!
//! The heuristic treats the accumulated zero-point energy as reaching
//! `Sigma sqrt(T)` in time `T`, so the detection time solves
//! `I_s T + Sigma sqrt(T) = E_m` and the rate is
//!
//! `R = (Sigma + sqrt(Sigma^2 + 4 I_s E_m))^2 / (4 E_m^2)`,
//!
//! the cancellation-free form of `4 I_s^2 / (sqrt(Sigma^2 + 4 I_s E_m) - Sigma)^2`.
//! Its high-intensity expansion is `I_s/E_m + Sigma sqrt(I_s)/E_m^{3/2} + Sigma^2/(2 E_m^2)`.
//!
//! [`simulate_first_passage`] measures the real first-passage statistics of
//! the accumulation so the heuristic can be audited.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{check_intensities, RateCurve, RatePoint};
use crate::error::{require, require_nonneg, require_positive, Error, Result};
use crate::noise::{NoiseKind, NoiseModel, SeedSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageDetector {
    /// Energy threshold `E_m` above the subtracted zero-point mean.
    pub threshold: f64,
    /// Fluctuation coefficient `Sigma` (energy / sqrt(time)).
    pub sigma: f64,
    /// Dead time added after every count.
    pub dead_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateModel {
    Exact,
    Series,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRate {
    pub value: f64,
    /// `Sigma / sqrt(I_s E_m)`; infinite at `I_s = 0`.
    pub expansion_parameter: f64,
}

impl FirstPassageDetector {
    pub fn new(threshold: f64, sigma: f64) -> Result<Self> {
        let det = Self { threshold, sigma, dead_time: 0.0 };
        det.validate()?;
        Ok(det)
    }

    pub fn with_dead_time(mut self, dead_time: f64) -> Result<Self> {
        require_nonneg(dead_time, "dead_time")?;
        self.dead_time = dead_time;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive(self.threshold, "em")?;
        require_nonneg(self.sigma, "sigma")?;
        require_nonneg(self.dead_time, "dead_time")
    }

    /// White noise with this detector's `Sigma`.
    pub fn white_noise(&self) -> NoiseModel {
        NoiseModel { i0: 0.0, kind: NoiseKind::White { sigma: self.sigma } }
    }

    fn check_signal(&self, signal: f64) -> Result<()> {
        require_nonneg(signal, "is")?;
        if signal == 0.0 && self.sigma == 0.0 {
            return Err(Error::NoDetection);
        }
        Ok(())
    }

    fn root_term(&self, signal: f64) -> f64 {
        (self.sigma * self.sigma + 4.0 * signal * self.threshold).sqrt()
    }

    /// Positive root of `I_s T + Sigma sqrt(T) = E_m`.
    pub fn heuristic_detection_time(&self, signal: f64) -> Result<f64> {
        self.check_signal(signal)?;
        if self.sigma == 0.0 {
            return Ok(self.threshold / signal);
        }
        let root_t = 2.0 * self.threshold / (self.sigma + self.root_term(signal));
        Ok(root_t * root_t)
    }

    pub fn rate_analytic(&self, signal: f64) -> Result<f64> {
        self.check_signal(signal)?;
        let s = self.sigma + self.root_term(signal);
        Ok(s * s / (4.0 * self.threshold * self.threshold))
    }

    pub fn rate_series(&self, signal: f64) -> Result<SeriesRate> {
        require_nonneg(signal, "is")?;
        let em = self.threshold;
        let value = signal / em + self.sigma * signal.sqrt() / em.powf(1.5) + self.sigma * self.sigma / (2.0 * em * em);
        let expansion_parameter = if signal == 0.0 {
            if self.sigma == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            self.sigma / (signal * em).sqrt()
        };
        Ok(SeriesRate { value, expansion_parameter })
    }

    pub fn rate(&self, model: RateModel, signal: f64) -> Result<f64> {
        match model {
            RateModel::Exact => self.rate_analytic(signal),
            RateModel::Series => self.rate_series(signal).map(|s| s.value),
        }
    }

    /// Zero-signal rate: `Sigma^2 / E_m^2` exactly, `Sigma^2 / (2 E_m^2)` from the series.
    pub fn dark_rate(&self, model: RateModel) -> f64 {
        let exact = (self.sigma / self.threshold).powi(2);
        match model {
            RateModel::Exact => exact,
            RateModel::Series => 0.5 * exact,
        }
    }

    /// `dR/dI_s` of the exact law: `(Sigma + S) / (E_m S)`, `S = sqrt(Sigma^2 + 4 I_s E_m)`.
    pub fn slope_analytic(&self, signal: f64) -> Result<f64> {
        self.check_signal(signal)?;
        let s = self.root_term(signal);
        Ok((self.sigma + s) / (self.threshold * s))
    }

    /// `dR/dI_s` of the series: `1/E_m + Sigma / (2 sqrt(I_s) E_m^{3/2})`.
    pub fn slope_series(&self, signal: f64) -> Result<f64> {
        require_positive(signal, "is")?;
        Ok(1.0 / self.threshold + self.sigma / (2.0 * signal.sqrt() * self.threshold.powf(1.5)))
    }
}

/// How the simulator advances white-noise accumulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stepping {
    /// One Gaussian increment per `dt`.
    Euler,
    /// While the threshold is out of reach, jump many grid steps at once
    /// with the exact Gaussian marginal. A jump of duration `t` is taken only
    /// if the continuous path crossing within it has probability below
    /// `erfc(BLOCK_Z / sqrt 2)`; the grid path is then reproduced in
    /// distribution. Colored noise always uses Euler steps.
    #[default]
    Accelerated,
}

/// Standard deviations of clearance required before a block jump.
pub const BLOCK_Z: f64 = 8.5;

/// Driftless passage has infinite mean, so trials stop here and are censored.
pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub dt: f64,
    pub n_trials: usize,
    pub max_steps: u64,
    pub seed: SeedSpec,
    pub stepping: Stepping,
    /// Count crossings between grid points using the Brownian-bridge
    /// probability `exp(-2 d0 d1 / (Sigma^2 dt))` (white noise only).
    pub bridge_correction: bool,
}

impl SimulationConfig {
    pub fn new(dt: f64, n_trials: usize, seed: impl Into<SeedSpec>) -> Self {
        Self {
            dt,
            n_trials,
            max_steps: DEFAULT_MAX_STEPS,
            seed: seed.into(),
            stepping: Stepping::default(),
            bridge_correction: false,
        }
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_stepping(mut self, stepping: Stepping) -> Self {
        self.stepping = stepping;
        self
    }

    pub fn with_bridge_correction(mut self, on: bool) -> Self {
        self.bridge_correction = on;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstPassageSample {
    /// Grid time of the first step at or beyond the threshold, plus dead time.
    /// For censored trials, the censoring time.
    pub passage_time: f64,
    /// Accumulated energy minus `E_m` at the crossing step.
    pub overshoot: f64,
    pub censored: bool,
    pub trial_seed: SeedSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstPassageSummary {
    pub n_trials: usize,
    pub n_censored: usize,
    pub censored_fraction: f64,
    /// Mean over uncensored trials.
    pub mean_passage_time: f64,
    pub mean_stderr: f64,
    /// Median over all trials, censored ones counted as larger than any
    /// observed time. `None` when half or more are censored.
    pub median_passage_time: Option<f64>,
    /// `1 / mean`: the long-run count rate of the renewal process.
    pub renewal_rate: f64,
    pub renewal_rate_stderr: f64,
    pub mean_overshoot: f64,
    /// Mean accumulated energy at stopping, `E_m + overshoot`.
    pub mean_stopped_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstPassageRun {
    pub samples: Vec<FirstPassageSample>,
    pub summary: FirstPassageSummary,
}

/// Monte Carlo first passage of `E(t) = I_s t + noise` through `E_m`.
///
/// The fluctuations come from `noise`; the detector contributes `E_m` and
/// dead time. Trials run in parallel on independent substreams
/// `config.seed.child(trial)`, and the summary is reduced in trial order, so
/// results do not depend on scheduling.
pub fn simulate_first_passage(
    det: &FirstPassageDetector,
    signal: f64,
    noise: &NoiseModel,
    config: &SimulationConfig,
) -> Result<FirstPassageRun> {
    det.validate()?;
    noise.validate()?;
    require_nonneg(signal, "is")?;
    require_positive(config.dt, "dt")?;
    require(config.n_trials >= 1, "trials", || "must be >= 1".into())?;
    require(config.max_steps >= 1, "max_steps", || "must be >= 1".into())?;
    let step_sd = noise.effective_sigma() * config.dt.sqrt();
    require(step_sd < det.threshold / 10.0, "dt", || {
        format!("too coarse: per-step noise {step_sd:e} must stay below em/10 = {:e}", det.threshold / 10.0)
    })?;

    let samples: Vec<FirstPassageSample> = (0..config.n_trials as u64)
        .into_par_iter()
        .map(|trial| run_trial(det, signal, noise, config, config.seed.child(trial)))
        .collect::<Result<_>>()?;
    let summary = summarize(&samples, det.threshold);
    Ok(FirstPassageRun { samples, summary })
}

struct Outcome {
    steps: u64,
    overshoot: f64,
    censored: bool,
}

fn run_trial(
    det: &FirstPassageDetector,
    signal: f64,
    noise: &NoiseModel,
    config: &SimulationConfig,
    seed: SeedSpec,
) -> Result<FirstPassageSample> {
    let outcome = match noise.kind {
        NoiseKind::White { sigma } => white_trial(det.threshold, signal, sigma, config, seed),
        NoiseKind::Colored { .. } => colored_trial(det.threshold, signal, noise, config, seed)?,
    };
    let passage_time = outcome.steps as f64 * config.dt + if outcome.censored { 0.0 } else { det.dead_time };
    Ok(FirstPassageSample { passage_time, overshoot: outcome.overshoot, censored: outcome.censored, trial_seed: seed })
}

/// Largest block duration whose crossing probability is negligible from distance `gap`.
fn safe_block_time(gap: f64, drift: f64, sigma: f64) -> f64 {
    let vol = BLOCK_Z * sigma;
    if drift == 0.0 {
        if sigma == 0.0 {
            return f64::INFINITY;
        }
        return (gap / vol).powi(2);
    }
    // Largest t with gap - drift t >= BLOCK_Z sigma sqrt(t).
    let root_t = 2.0 * gap / (vol + (vol * vol + 4.0 * drift * gap).sqrt());
    root_t * root_t
}

fn white_trial(threshold: f64, drift: f64, sigma: f64, config: &SimulationConfig, seed: SeedSpec) -> Outcome {
    let mut rng = seed.rng();
    let dt = config.dt;
    let step_sd = sigma * dt.sqrt();
    let step_drift = drift * dt;
    let two_over_var = if sigma > 0.0 { 2.0 / (sigma * sigma * dt) } else { 0.0 };
    let accelerated = config.stepping == Stepping::Accelerated;
    let mut energy = 0.0f64;
    let mut steps = 0u64;
    while steps < config.max_steps {
        let remaining = config.max_steps - steps;
        if accelerated {
            let block = safe_block_time(threshold - energy, drift, sigma) / dt;
            // One step of margin keeps the block strictly inside the safe horizon.
            let k = if block.is_finite() { (block.floor() as u64).saturating_sub(1) } else { u64::MAX };
            if k >= 2 {
                let k = k.min(remaining);
                let t = k as f64 * dt;
                let z: f64 = rng.sample(StandardNormal);
                energy += drift * t + sigma * t.sqrt() * z;
                steps += k;
                if energy >= threshold {
                    return Outcome { steps, overshoot: energy - threshold, censored: false };
                }
                continue;
            }
        }
        let z: f64 = rng.sample(StandardNormal);
        let next = energy + step_drift + step_sd * z;
        steps += 1;
        if next >= threshold {
            return Outcome { steps, overshoot: next - threshold, censored: false };
        }
        if config.bridge_correction && sigma > 0.0 {
            let crossed = (-(threshold - energy) * (threshold - next) * two_over_var).exp();
            if rng.random::<f64>() < crossed {
                return Outcome { steps, overshoot: 0.0, censored: false };
            }
        }
        energy = next;
    }
    Outcome { steps, overshoot: 0.0, censored: true }
}

fn colored_trial(
    threshold: f64,
    drift: f64,
    noise: &NoiseModel,
    config: &SimulationConfig,
    seed: SeedSpec,
) -> Result<Outcome> {
    let mut sampler = noise.sampler(config.dt, seed)?;
    let step_drift = drift * config.dt;
    let mut energy = 0.0;
    for steps in 1..=config.max_steps {
        energy += step_drift + sampler.next_increment();
        if energy >= threshold {
            return Ok(Outcome { steps, overshoot: energy - threshold, censored: false });
        }
    }
    Ok(Outcome { steps: config.max_steps, overshoot: 0.0, censored: true })
}

fn summarize(samples: &[FirstPassageSample], threshold: f64) -> FirstPassageSummary {
    let n_trials = samples.len();
    let observed: Vec<&FirstPassageSample> = samples.iter().filter(|s| !s.censored).collect();
    let n_censored = n_trials - observed.len();
    let n = observed.len() as f64;
    let (mean, mean_stderr, mean_overshoot) = if observed.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let mean = observed.iter().map(|s| s.passage_time).sum::<f64>() / n;
        let var = if observed.len() > 1 {
            observed.iter().map(|s| (s.passage_time - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            f64::NAN
        };
        let overshoot = observed.iter().map(|s| s.overshoot).sum::<f64>() / n;
        (mean, (var / n).sqrt(), overshoot)
    };
    let median = if 2 * n_censored >= n_trials {
        None
    } else {
        let mut times: Vec<f64> = observed.iter().map(|s| s.passage_time).collect();
        times.sort_by(f64::total_cmp);
        // Censored trials sit above every observed time, so ranks below
        // n_trials - n_censored are the observed order statistics.
        let rank = |k: usize| times[k];
        Some(if n_trials % 2 == 1 { rank(n_trials / 2) } else { 0.5 * (rank(n_trials / 2 - 1) + rank(n_trials / 2)) })
    };
    FirstPassageSummary {
        n_trials,
        n_censored,
        censored_fraction: n_censored as f64 / n_trials as f64,
        mean_passage_time: mean,
        mean_stderr,
        median_passage_time: median,
        renewal_rate: 1.0 / mean,
        renewal_rate_stderr: mean_stderr / (mean * mean),
        mean_overshoot,
        mean_stopped_energy: threshold + mean_overshoot,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveMethod {
    Analytic,
    Series,
    MonteCarlo { noise: NoiseModel, config: SimulationConfig },
}

/// Rate curve over `intensities`. Monte Carlo points report the renewal rate
/// with its standard error; point `k` uses the substream `config.seed.child(k)`.
pub fn rate_curve(det: &FirstPassageDetector, intensities: &[f64], method: &CurveMethod) -> Result<RateCurve> {
    check_intensities(intensities)?;
    match method {
        CurveMethod::Analytic => RateCurve::from_fn(intensities, |i| det.rate_analytic(i)),
        CurveMethod::Series => RateCurve::from_fn(intensities, |i| det.rate_series(i).map(|s| s.value)),
        CurveMethod::MonteCarlo { noise, config } => {
            let mut points = Vec::with_capacity(intensities.len());
            for (k, &i) in intensities.iter().enumerate() {
                let cfg = SimulationConfig { seed: config.seed.child(k as u64), ..*config };
                let run = simulate_first_passage(det, i, noise, &cfg)?;
                points.push(RatePoint {
                    intensity: i,
                    rate: run.summary.renewal_rate,
                    weight: 1.0,
                    stderr: Some(run.summary.renewal_rate_stderr),
                });
            }
            Ok(RateCurve::new(points))
        }
    }
}
