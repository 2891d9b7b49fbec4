//! White and colored zero-point noise. Colored noise with a short coherence
//! time accumulates energy like white noise of strength sigma_i sqrt(2 tau_c).

use zpfdet::noise::{ou_intensity_path, wiener_increments, NoiseModel, SeedSpec};

fn variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

fn main() -> zpfdet::Result<()> {
    let inc = wiener_increments(2.0, 0.01, 200_000, SeedSpec::new(1, 0))?;
    println!("white increments: variance {:.5e}, expected {:.5e}", variance(&inc), 4.0 * 0.01);

    let (sigma_i, tau_c, dt) = (3.0, 0.1, 0.005);
    let path = ou_intensity_path(sigma_i, tau_c, dt, 400_000, SeedSpec::new(1, 1))?;
    println!("OU intensity: variance {:.4}, expected {:.4}", variance(&path), sigma_i * sigma_i);
    let lag = 20;
    let n = path.len() - lag;
    let acf = path[..n].iter().zip(&path[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 / variance(&path);
    println!("  autocorrelation at {:.2}: {acf:.4}, expected {:.4}", lag as f64 * dt, (-(lag as f64) * dt / tau_c).exp());

    let horizon = 5.0;
    for tau in [0.5, 0.1, 0.02] {
        let model = NoiseModel::colored_matching(1.0, tau)?;
        let dt = tau / 20.0;
        let steps = (horizon / dt).round() as usize;
        let totals: Vec<f64> = (0..2000u64)
            .map(|k| {
                let mut s = model.sampler(dt, SeedSpec::new(5, k)).unwrap();
                (0..steps).map(|_| s.next_increment()).sum()
            })
            .collect();
        println!(
            "tau_c = {tau:<5} accumulated variance over T = {horizon}: {:.4} (white limit {horizon})",
            variance(&totals)
        );
    }
    Ok(())
}
