//! Reproducible realizations of the zero-point intensity fluctuations.
//!
//! Two models are available. The white model treats the mean-subtracted
//! intensity as white noise, so the accumulated energy is a Wiener process
//! with `Var E(T) = sigma^2 T`. The colored model is a stationary
//! Ornstein–Uhlenbeck intensity with standard deviation `sigma_i` and
//! coherence time `tau_c`; for `T >> tau_c` its integral behaves like the
//! white model with `sigma_eff = sigma_i * sqrt(2 tau_c)`.
//!
//! Intensity samples are Gaussian and may be negative. Nothing is clamped.
//!
//! Every generator is a pure function of its parameters and a [`SeedSpec`].
//! Substreams use ChaCha stream selection, so the number `k` draw of stream
//! `s` never depends on how many other streams were consumed or where.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{require, require_nonneg, require_positive, Result};

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A master seed plus a substream index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub const fn new(master_seed: u64, stream_index: u64) -> Self {
        Self { master_seed, stream_index }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Seed for the `index`-th sub-task of this stream (trial, sweep point, beam).
    ///
    /// Children of distinct parents get distinct master seeds, so nested
    /// derivations never collide on the same ChaCha key and stream.
    pub fn child(&self, index: u64) -> SeedSpec {
        let master = splitmix64(self.master_seed ^ splitmix64(self.stream_index.wrapping_mul(GOLDEN) ^ 0x5eed));
        SeedSpec { master_seed: master, stream_index: index }
    }
}

impl From<u64> for SeedSpec {
    fn from(master_seed: u64) -> Self {
        SeedSpec::new(master_seed, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseKind {
    /// Wiener accumulation with dispersion coefficient `sigma` (energy / sqrt(time)).
    White { sigma: f64 },
    /// Ornstein–Uhlenbeck intensity, stationary deviation `sigma_i`, coherence time `tau_c`.
    Colored { sigma_i: f64, tau_c: f64 },
}

/// Zero-point intensity process: its mean `i0` and the fluctuation model.
///
/// Accumulators in this crate work on the mean-subtracted intensity, so `i0`
/// is carried for bookkeeping and never enters a sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub i0: f64,
    #[serde(flatten)]
    pub kind: NoiseKind,
}

impl NoiseModel {
    pub fn white(sigma: f64) -> Result<Self> {
        let model = NoiseModel { i0: 0.0, kind: NoiseKind::White { sigma } };
        model.validate()?;
        Ok(model)
    }

    pub fn colored(sigma_i: f64, tau_c: f64) -> Result<Self> {
        let model = NoiseModel { i0: 0.0, kind: NoiseKind::Colored { sigma_i, tau_c } };
        model.validate()?;
        Ok(model)
    }

    /// Colored model whose long-time accumulation matches white noise of strength `sigma`.
    pub fn colored_matching(sigma: f64, tau_c: f64) -> Result<Self> {
        require_nonneg(sigma, "sigma")?;
        require_positive(tau_c, "tau_c")?;
        Self::colored(sigma / (2.0 * tau_c).sqrt(), tau_c)
    }

    pub fn with_mean(mut self, i0: f64) -> Result<Self> {
        require_nonneg(i0, "i0")?;
        self.i0 = i0;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        require_nonneg(self.i0, "i0")?;
        match self.kind {
            NoiseKind::White { sigma } => require_nonneg(sigma, "sigma"),
            NoiseKind::Colored { sigma_i, tau_c } => {
                require_nonneg(sigma_i, "sigma_i")?;
                require_positive(tau_c, "tau_c")
            }
        }
    }

    pub fn is_white(&self) -> bool {
        matches!(self.kind, NoiseKind::White { .. })
    }

    /// Long-time accumulation coefficient: `Var E(T) ~ sigma_eff^2 T`.
    pub fn effective_sigma(&self) -> f64 {
        match self.kind {
            NoiseKind::White { sigma } => sigma,
            NoiseKind::Colored { sigma_i, tau_c } => sigma_i * (2.0 * tau_c).sqrt(),
        }
    }

    /// Same process with its fluctuation amplitude scaled by `factor` (variance by `factor^2`).
    pub fn scaled(&self, factor: f64) -> NoiseModel {
        let kind = match self.kind {
            NoiseKind::White { sigma } => NoiseKind::White { sigma: sigma * factor },
            NoiseKind::Colored { sigma_i, tau_c } => NoiseKind::Colored { sigma_i: sigma_i * factor, tau_c },
        };
        NoiseModel { i0: self.i0, kind }
    }

    pub fn sampler(&self, dt: f64, seed: SeedSpec) -> Result<EnergySampler> {
        EnergySampler::new(self, dt, seed.rng())
    }
}

fn check_grid(dt: f64, n: usize) -> Result<()> {
    require_positive(dt, "dt")?;
    require(n >= 1, "n", || "must be >= 1 (got 0)".into())
}

/// Draws the zero-mean energy collected in successive steps of length `dt`.
#[derive(Debug, Clone)]
pub struct EnergySampler {
    rng: StreamRng,
    dt: f64,
    step: Step,
}

#[derive(Debug, Clone)]
enum Step {
    White { scale: f64 },
    Colored { state: f64, decay: f64, kick: f64 },
}

impl EnergySampler {
    pub fn new(model: &NoiseModel, dt: f64, mut rng: StreamRng) -> Result<Self> {
        model.validate()?;
        require_positive(dt, "dt")?;
        let step = match model.kind {
            NoiseKind::White { sigma } => Step::White { scale: sigma * dt.sqrt() },
            NoiseKind::Colored { sigma_i, tau_c } => {
                let decay = (-dt / tau_c).exp();
                let kick = sigma_i * (-(-2.0 * dt / tau_c).exp_m1()).sqrt();
                let z: f64 = rng.sample(StandardNormal);
                Step::Colored { state: sigma_i * z, decay, kick }
            }
        };
        Ok(Self { rng, dt, step })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Energy increment over the next step. Colored paths use the trapezoid
    /// rule between consecutive exact OU states.
    #[inline]
    pub fn next_increment(&mut self) -> f64 {
        match &mut self.step {
            Step::White { scale } => {
                let z: f64 = self.rng.sample(StandardNormal);
                *scale * z
            }
            Step::Colored { state, decay, kick } => {
                let z: f64 = self.rng.sample(StandardNormal);
                let next = *decay * *state + *kick * z;
                let inc = 0.5 * (*state + next) * self.dt;
                *state = next;
                inc
            }
        }
    }
}

/// `n` independent Gaussian energy increments of variance `sigma^2 dt`.
pub fn wiener_increments(sigma: f64, dt: f64, n: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    check_grid(dt, n)?;
    let mut sampler = NoiseModel::white(sigma)?.sampler(dt, seed)?;
    Ok((0..n).map(|_| sampler.next_increment()).collect())
}

/// Stationary zero-mean OU intensity path sampled every `dt`, using the exact
/// update `x' = e^{-dt/tau} x + sigma_i sqrt(1 - e^{-2 dt/tau}) z`.
pub fn ou_intensity_path(sigma_i: f64, tau_c: f64, dt: f64, n: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    check_grid(dt, n)?;
    require_nonneg(sigma_i, "sigma_i")?;
    require_positive(tau_c, "tau_c")?;
    let mut rng = seed.rng();
    let decay = (-dt / tau_c).exp();
    let kick = sigma_i * (-(-2.0 * dt / tau_c).exp_m1()).sqrt();
    let mut x = sigma_i * rng.sample::<f64, _>(StandardNormal);
    let mut path = Vec::with_capacity(n);
    for _ in 0..n {
        path.push(x);
        x = decay * x + kick * rng.sample::<f64, _>(StandardNormal);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn zero_sigma_gives_zero_increments() {
        let inc = wiener_increments(0.0, 0.01, 100, SeedSpec::new(1, 0)).unwrap();
        assert!(inc.iter().all(|&x| x == 0.0));
        let path = ou_intensity_path(0.0, 1.0, 0.1, 100, SeedSpec::new(1, 0)).unwrap();
        assert!(path.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(wiener_increments(1.0, 0.0, 10, SeedSpec::new(1, 0)).is_err());
        assert!(wiener_increments(1.0, -1.0, 10, SeedSpec::new(1, 0)).is_err());
        assert!(wiener_increments(1.0, 0.1, 0, SeedSpec::new(1, 0)).is_err());
        assert!(wiener_increments(-1.0, 0.1, 10, SeedSpec::new(1, 0)).is_err());
        assert!(ou_intensity_path(1.0, 0.0, 0.1, 10, SeedSpec::new(1, 0)).is_err());
    }

    #[test]
    fn increment_variance_within_three_standard_errors() {
        let n = 1_000_000;
        let inc = wiener_increments(1.0, 0.01, n, SeedSpec::new(7, 3)).unwrap();
        let (_, var) = mean_var(&inc);
        // Var of the sample variance of a Gaussian: 2 s^4 / (n - 1).
        let se = 0.01 * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - 0.01).abs() < 3.0 * se, "var = {var}, se = {se}");
    }

    #[test]
    fn summed_variance_over_streams() {
        let (sigma, dt, n) = (2.0, 0.5, 100_000);
        let streams = 400;
        let sums: Vec<f64> = (0..streams)
            .map(|s| wiener_increments(sigma, dt, n, SeedSpec::new(11, s)).unwrap().iter().sum())
            .collect();
        let (_, var) = mean_var(&sums);
        let expect = sigma * sigma * n as f64 * dt;
        let se = expect * (2.0 / (streams as f64 - 1.0)).sqrt();
        assert!((var - expect).abs() < 3.0 * se, "var = {var}, expect = {expect}");
    }

    #[test]
    fn ou_lag_autocorrelation() {
        let n = 1_000_000;
        let path = ou_intensity_path(1.0, 1.0, 0.1, n, SeedSpec::new(5, 0)).unwrap();
        let (mean, var) = mean_var(&path);
        let lag = 10;
        let cov = path.windows(lag + 1).map(|w| (w[0] - mean) * (w[lag] - mean)).sum::<f64>()
            / (n - lag) as f64;
        let rho = cov / var;
        let expect = (-1.0f64).exp();
        // Bartlett variance of a lag-k AR(1) autocorrelation estimate,
        // phi = e^{-dt/tau}: (1+phi^2)(1-phi^{2k})/(1-phi^2) - 2k phi^{2k}.
        let phi = (-0.1f64).exp();
        let k = lag as f64;
        let bartlett = (1.0 + phi * phi) * (1.0 - phi.powf(2.0 * k)) / (1.0 - phi * phi) - 2.0 * k * phi.powf(2.0 * k);
        let se = (bartlett / n as f64).sqrt();
        assert!((rho - expect).abs() < 3.0 * se, "rho = {rho}, se = {se}");
    }

    #[test]
    fn ou_stationary_variance() {
        let n = 1_000_000;
        let path = ou_intensity_path(2.0, 0.5, 0.05, n, SeedSpec::new(9, 1)).unwrap();
        let (_, var) = mean_var(&path);
        // Effective sample size of an AR(1) series: n (1 - phi^2) / (1 + phi^2).
        let phi = (-0.1f64).exp();
        let n_eff = n as f64 * (1.0 - phi * phi) / (1.0 + phi * phi);
        let se = 4.0 * (2.0 / n_eff).sqrt();
        assert!((var - 4.0).abs() < 3.0 * se, "var = {var}, se = {se}");
    }

    #[test]
    fn identical_seed_is_bit_identical() {
        let a = wiener_increments(1.3, 0.2, 1000, SeedSpec::new(42, 9)).unwrap();
        let b = wiener_increments(1.3, 0.2, 1000, SeedSpec::new(42, 9)).unwrap();
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn parallel_generation_matches_serial() {
        use rayon::prelude::*;
        let serial: Vec<Vec<f64>> = (0..16).map(|s| wiener_increments(1.0, 0.1, 256, SeedSpec::new(3, s)).unwrap()).collect();
        let parallel: Vec<Vec<f64>> =
            (0..16u64).into_par_iter().map(|s| wiener_increments(1.0, 0.1, 256, SeedSpec::new(3, s)).unwrap()).collect();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let n = 200_000;
        for (a, b) in [(0, 1), (1, 2), (0, 77)] {
            let x = wiener_increments(1.0, 1.0, n, SeedSpec::new(13, a)).unwrap();
            let y = wiener_increments(1.0, 1.0, n, SeedSpec::new(13, b)).unwrap();
            let r = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>()
                / (x.iter().map(|a| a * a).sum::<f64>() * y.iter().map(|b| b * b).sum::<f64>()).sqrt();
            assert!(r.abs() < 4.0 / (n as f64).sqrt(), "streams {a},{b}: r = {r}");
        }
        let parent = SeedSpec::new(13, 0);
        assert_ne!(parent.child(0), SeedSpec::new(13, 1).child(0));
        assert_ne!(parent.child(0).rng().random::<u64>(), parent.child(1).rng().random::<u64>());
    }

    #[test]
    fn colored_integral_converges_to_white_noise() {
        let (sigma_i, tau_c) = (1.0, 0.05);
        let model = NoiseModel::colored(sigma_i, tau_c).unwrap();
        let dt = tau_c / 20.0;
        let horizon = 100.0 * tau_c;
        let steps = (horizon / dt).round() as usize;
        let trials = 20_000;
        let totals: Vec<f64> = (0..trials)
            .map(|t| {
                let mut s = model.sampler(dt, SeedSpec::new(21, t)).unwrap();
                (0..steps).map(|_| s.next_increment()).sum()
            })
            .collect();
        let (_, var) = mean_var(&totals);
        let expect = model.effective_sigma().powi(2) * horizon;
        assert!((var / expect - 1.0).abs() < 0.05, "var = {var}, expect = {expect}");
    }
}
