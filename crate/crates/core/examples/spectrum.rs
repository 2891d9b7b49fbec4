//! Planck spectrum with its zero-point term, and the zero-point intensity of
//! the visible band.

use zpfdet::spectrum::{thermal_band_energy_density, IntensityConvention, SpectrumParams, CODATA};

fn main() -> zpfdet::Result<()> {
    let room = SpectrumParams::new(300.0)?;
    println!("{:>12} {:>14} {:>14} {:>8}", "omega", "thermal", "zero-point", "zpf/tot");
    for omega in [1e13, 3e13, 1e14, 3e14, 1e15, 3e15] {
        let d = room.spectral_density(omega)?;
        println!("{omega:>12.3e} {:>14.4e} {:>14.4e} {:>8.4}", d.thermal, d.zpf, d.zpf / d.total());
    }

    let lo = CODATA.omega_from_wavelength(700e-9);
    let hi = CODATA.omega_from_wavelength(400e-9);
    let plane = room.zpf_band_intensity(lo, hi)?;
    let iso = room.with_convention(IntensityConvention::Isotropic).zpf_band_intensity(lo, hi)?;
    println!("\nzero-point intensity, 400-700 nm:");
    println!("  I = c u    {:.1} kW/cm^2", plane * 1e-7);
    println!("  I = c u/4  {:.1} kW/cm^2", iso * 1e-7);
    println!("  quadrature check {:.3e}", (room.zpf_band_intensity_quadrature(lo, hi)? / plane - 1.0).abs());

    let u = thermal_band_energy_density(0.0, f64::INFINITY, 300.0)?;
    println!("\nthermal energy density at 300 K: {u:.6e} J/m^3 (aT^4 = {:.6e})", CODATA.radiation_constant() * 300f64.powi(4));
    println!("Compton cutoff: {:.4e} rad/s", CODATA.compton_omega());
    Ok(())
}
