//! Planck spectral energy density with the zero-point term, and band integrals.
//!
//! `rho(w, T) = w^2 / (pi^2 c^3) * [hbar w / (exp(hbar w / kT) - 1) + hbar w / 2]`
//!
//! Energy densities convert to intensities with a configurable factor:
//! `I = c u` for a one-way plane wave (default) or `I = c u / 4` for the flux
//! of an isotropic field through a surface.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{require, require_nonneg, require_positive, Result};
use crate::quad::{integrate, Tolerance};

/// CODATA 2018 exact or recommended values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub k_b: f64,
    pub c: f64,
    pub electron_mass: f64,
}

pub const CODATA: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    k_b: 1.380_649e-23,
    c: 299_792_458.0,
    electron_mass: 9.109_383_701_5e-31,
};

impl PhysicalConstants {
    /// Compton angular frequency `m_e c^2 / hbar`.
    pub fn compton_omega(&self) -> f64 {
        self.electron_mass * self.c * self.c / self.hbar
    }

    /// Radiation constant `a = pi^2 k^4 / (15 hbar^3 c^3)`, so that `u = a T^4`.
    pub fn radiation_constant(&self) -> f64 {
        PI * PI * self.k_b.powi(4) / (15.0 * self.hbar.powi(3) * self.c.powi(3))
    }

    /// Angular frequency of light with vacuum wavelength `lambda` (metres).
    pub fn omega_from_wavelength(&self, lambda: f64) -> f64 {
        2.0 * PI * self.c / lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntensityConvention {
    #[default]
    PlaneWave,
    Isotropic,
}

impl IntensityConvention {
    pub fn factor(self, c: f64) -> f64 {
        match self {
            IntensityConvention::PlaneWave => c,
            IntensityConvention::Isotropic => c / 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumParams {
    pub temperature: f64,
    pub omega_cutoff: f64,
    pub convention: IntensityConvention,
    pub constants: PhysicalConstants,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            omega_cutoff: CODATA.compton_omega(),
            convention: IntensityConvention::PlaneWave,
            constants: CODATA,
        }
    }
}

impl SpectrumParams {
    pub fn new(temperature: f64) -> Result<Self> {
        let params = Self { temperature, ..Self::default() };
        params.validate()?;
        Ok(params)
    }

    pub fn with_cutoff(mut self, omega_cutoff: f64) -> Result<Self> {
        self.omega_cutoff = omega_cutoff;
        self.validate()?;
        Ok(self)
    }

    pub fn with_convention(mut self, convention: IntensityConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        require_nonneg(self.temperature, "temperature")?;
        require_positive(self.omega_cutoff, "omega_cutoff")
    }

    pub fn spectral_density(&self, omega: f64) -> Result<SpectralDensity> {
        spectral_density_with(&self.constants, omega, self.temperature)
    }

    /// Band-integrated zero-point intensity (W/m^2), closed form.
    pub fn zpf_band_intensity(&self, omega_lo: f64, omega_hi: f64) -> Result<f64> {
        self.check_band(omega_lo, omega_hi)?;
        let k = &self.constants;
        let u = k.hbar * (omega_hi.powi(4) - omega_lo.powi(4)) / (8.0 * PI * PI * k.c.powi(3));
        Ok(self.convention.factor(k.c) * u)
    }

    /// Same integral evaluated by adaptive quadrature of the density.
    pub fn zpf_band_intensity_quadrature(&self, omega_lo: f64, omega_hi: f64) -> Result<f64> {
        self.check_band(omega_lo, omega_hi)?;
        let k = self.constants;
        let zpf = |w: f64| zpf_term(&k, w);
        // Integrate on a rescaled axis to keep tolerances in a sane range.
        let scale = omega_hi;
        let q = integrate(|x| zpf(x * scale) * scale, omega_lo / scale, 1.0, Tolerance::new(0.0, 1e-13))?;
        Ok(self.convention.factor(k.c) * q.value)
    }

    fn check_band(&self, lo: f64, hi: f64) -> Result<()> {
        require_positive(lo, "omega_lo")?;
        require(hi.is_finite() && hi >= lo, "omega_hi", || format!("must satisfy omega_lo <= omega_hi (got [{lo}, {hi}])"))?;
        require(hi <= self.omega_cutoff, "omega_hi", || {
            format!("exceeds the ultraviolet cutoff {:e} rad/s (got {hi:e})", self.omega_cutoff)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralDensity {
    pub omega: f64,
    pub thermal: f64,
    pub zpf: f64,
}

impl SpectralDensity {
    pub fn total(&self) -> f64 {
        self.thermal + self.zpf
    }
}

fn zpf_term(k: &PhysicalConstants, omega: f64) -> f64 {
    k.hbar * omega.powi(3) / (2.0 * PI * PI * k.c.powi(3))
}

/// Thermal part; the Bose factor is written as `e^{-x} / (1 - e^{-x})` so it
/// underflows to zero instead of overflowing for large `x`.
fn thermal_term(k: &PhysicalConstants, omega: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        return 0.0;
    }
    let x = k.hbar * omega / (k.k_b * temperature);
    let occupation = (-x).exp() / -(-x).exp_m1();
    omega * omega / (PI * PI * k.c.powi(3)) * k.hbar * omega * occupation
}

fn spectral_density_with(k: &PhysicalConstants, omega: f64, temperature: f64) -> Result<SpectralDensity> {
    require_positive(omega, "omega")?;
    require_nonneg(temperature, "temperature")?;
    Ok(SpectralDensity { omega, thermal: thermal_term(k, omega, temperature), zpf: zpf_term(k, omega) })
}

/// Spectral energy density per unit angular frequency (J s / m^3) with CODATA constants.
pub fn spectral_density(omega: f64, temperature: f64) -> Result<f64> {
    spectral_density_with(&CODATA, omega, temperature).map(|d| d.total())
}

/// `spectral_density` split into its thermal and zero-point parts.
pub fn spectral_components(omega: f64, temperature: f64) -> Result<SpectralDensity> {
    spectral_density_with(&CODATA, omega, temperature)
}

/// Zero-point intensity in `[omega_lo, omega_hi]` with default parameters.
pub fn zpf_band_intensity(omega_lo: f64, omega_hi: f64) -> Result<f64> {
    SpectrumParams::default().zpf_band_intensity(omega_lo, omega_hi)
}

/// Thermal energy density (J/m^3) in `[omega_lo, omega_hi]`. `omega_hi` may be
/// infinite and `omega_lo` may be zero.
///
/// Integrated in the reduced variable `x = hbar w / kT`; the integrand
/// `x^3 / (e^x - 1)` is below 1e-300 past `x = 750`, where the range is cut.
pub fn thermal_band_energy_density(omega_lo: f64, omega_hi: f64, temperature: f64) -> Result<f64> {
    require_nonneg(omega_lo, "omega_lo")?;
    require(!omega_hi.is_nan() && omega_hi >= omega_lo, "omega_hi", || {
        format!("must satisfy omega_lo <= omega_hi (got [{omega_lo}, {omega_hi}])")
    })?;
    require_nonneg(temperature, "temperature")?;
    if temperature == 0.0 || omega_lo == omega_hi {
        return Ok(0.0);
    }
    let k = CODATA;
    let kt = k.k_b * temperature;
    const X_MAX: f64 = 750.0;
    let x_lo = (k.hbar * omega_lo / kt).min(X_MAX);
    let x_hi = (k.hbar * omega_hi / kt).min(X_MAX);
    let planck = |x: f64| if x == 0.0 { 0.0 } else { x.powi(3) * (-x).exp() / -(-x).exp_m1() };
    let q = integrate(planck, x_lo, x_hi, Tolerance::new(1e-300, 1e-13))?;
    let prefactor = kt.powi(4) / (PI * PI * k.c.powi(3) * k.hbar.powi(3));
    Ok(prefactor * q.value)
}
