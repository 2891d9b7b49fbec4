//! Detectors with a fixed detection window.
//!
//! During a window of length `T` the detector collects filtered energy `I`,
//! Gaussian with mean `I0 + I_s` and deviation `sigma`. A count happens with
//! probability `Q(I) = xi (I - I0) Theta(I - I0 - I_m)`, so the rate is
//!
//! `R(I_s) = (xi / T) [sigma phi(a) + I_s (1 - Phi(a))]`, `a = (I_m - I_s) / sigma`.
//!
//! `xi` is the per-window coefficient; the per-unit-time asymptotic slope of
//! `R` is `xi / T` ([`FixedWindowDetector::asymptotic_slope`]).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{require, require_nonneg, require_positive, Result};
use crate::quad::{integrate, Tolerance};

/// Half-width of the quadrature domain in units of `sigma`.
pub const QUADRATURE_HALF_WIDTH: f64 = 12.0;

pub(crate) fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `1 - Phi(x)`, accurate in the far upper tail.
pub(crate) fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedWindowDetector {
    /// Detection window `T`.
    pub window: f64,
    /// Threshold `I_m` above the zero-point mean.
    pub threshold: f64,
    /// Per-window efficiency coefficient `xi`.
    pub xi: f64,
    /// Zero-point mean `I0`.
    pub zpf_mean: f64,
    /// Dispersion of the filtered zero-point intensity.
    pub sigma: f64,
}

/// A probability or rate, flagged when the `Q <= 1` clamp is involved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flagged {
    pub value: f64,
    pub saturated: bool,
}

impl FixedWindowDetector {
    pub fn new(window: f64, threshold: f64, xi: f64, zpf_mean: f64, sigma: f64) -> Result<Self> {
        let det = Self { window, threshold, xi, zpf_mean, sigma };
        det.validate()?;
        Ok(det)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive(self.window, "window")?;
        require_positive(self.threshold, "threshold")?;
        require_positive(self.xi, "xi")?;
        require_nonneg(self.zpf_mean, "i0")?;
        require_positive(self.sigma, "sigma")
    }

    /// Density of the collected window energy at `intensity` for signal `signal`.
    pub fn window_intensity_pdf(&self, intensity: f64, signal: f64) -> Result<f64> {
        require_nonneg(signal, "is")?;
        require_positive(self.sigma, "sigma")?;
        let z = (intensity - self.zpf_mean - signal) / self.sigma;
        Ok(std_normal_pdf(z) / self.sigma)
    }

    /// `Q(I)`, with `Theta(0) = 0` and clamping at 1.
    pub fn count_probability(&self, intensity: f64) -> Flagged {
        let excess = intensity - self.zpf_mean;
        if excess <= self.threshold {
            return Flagged { value: 0.0, saturated: false };
        }
        let q = self.xi * excess;
        if q > 1.0 {
            Flagged { value: 1.0, saturated: true }
        } else {
            Flagged { value: q, saturated: false }
        }
    }

    /// True when the clamp region `xi (I - I0) > 1` lies inside the
    /// integration domain for this signal.
    fn saturates(&self, signal: f64) -> bool {
        signal + QUADRATURE_HALF_WIDTH * self.sigma > 1.0 / self.xi
    }

    /// Closed-form counting rate. The closed form treats `Q` as unclamped;
    /// the result is flagged when the clamp would matter.
    pub fn rate(&self, signal: f64) -> Result<Flagged> {
        require_nonneg(signal, "is")?;
        let a = (self.threshold - signal) / self.sigma;
        let collected = self.sigma * std_normal_pdf(a) + signal * std_normal_sf(a);
        Ok(Flagged { value: self.xi / self.window * collected, saturated: self.saturates(signal) })
    }

    /// Counting rate by adaptive quadrature of `rho(I) Q(I)` with the clamp applied.
    pub fn rate_quadrature(&self, signal: f64) -> Result<Flagged> {
        require_nonneg(signal, "is")?;
        let mean = self.zpf_mean + signal;
        let lo = self.zpf_mean + self.threshold;
        let hi = lo.max(mean) + QUADRATURE_HALF_WIDTH * self.sigma;
        let integrand = |i: f64| {
            let z = (i - mean) / self.sigma;
            std_normal_pdf(z) / self.sigma * self.count_probability(i).value
        };
        let mut value = 0.0;
        // Split at the clamp point so the kink sits on a panel edge.
        let knee = self.zpf_mean + 1.0 / self.xi;
        let cuts: Vec<f64> = if knee > lo && knee < hi { vec![lo, knee, hi] } else { vec![lo, hi] };
        for w in cuts.windows(2) {
            value += integrate(integrand, w[0], w[1], Tolerance::new(1e-300, 1e-12))?.value;
        }
        Ok(Flagged { value: value / self.window, saturated: self.saturates(signal) })
    }

    /// `lim R / I_s = xi / T`.
    pub fn asymptotic_slope(&self) -> f64 {
        self.xi / self.window
    }

    pub fn dark_rate(&self) -> f64 {
        self.xi / self.window * self.sigma * std_normal_pdf(self.threshold / self.sigma)
    }

    /// `R(I_s) / ((xi / T) I_s)`: how far the curve sits below its linear asymptote.
    pub fn low_signal_suppression(&self, signal: f64) -> Result<f64> {
        require(signal.is_finite() && signal > 0.0, "is", || format!("suppression ratio needs I_s > 0 (got {signal})"))?;
        Ok(self.rate(signal)?.value / (self.asymptotic_slope() * signal))
    }

    /// Smallest threshold keeping the dark counts per window, `R(0) T`, at or
    /// below `budget`. Returns the detector with that threshold.
    ///
    /// `R(0) T = xi sigma phi(I_m / sigma)` is inverted in closed form.
    pub fn with_dark_budget(&self, budget: f64) -> Result<Self> {
        require_positive(budget, "budget")?;
        let peak = self.xi * self.sigma * std_normal_pdf(0.0);
        require(budget < peak, "budget", || format!("must be below xi sigma phi(0) = {peak:e} (got {budget:e})"))?;
        let a = (-2.0 * (budget / peak).ln()).sqrt();
        Ok(Self { threshold: a * self.sigma, ..*self })
    }
}
