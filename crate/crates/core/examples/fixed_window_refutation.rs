//! Why a fixed detection window cannot work: a low dark rate forces a high
//! threshold, which suppresses weak signals, while the coincidence bound
//! then demands windows far longer than any real detector's.

use zpfdet::coincidence::consistency_verdict;
use zpfdet::fixed_window::FixedWindowDetector;

fn main() -> zpfdet::Result<()> {
    let base = FixedWindowDetector::new(1.0, 1.0, 1e-4, 0.0, 1.0)?;
    println!("dark counts per window -> threshold I_m/sigma, response at I_s = sigma relative to linear");
    for budget in [1e-6, 1e-8, 1e-10, 1e-12] {
        let det = base.with_dark_budget(budget)?;
        println!(
            "  {budget:>7.0e}  I_m/sigma = {:.3}  R/(xi I_s/T) = {:.3e}",
            det.threshold / det.sigma,
            det.low_signal_suppression(det.sigma)?
        );
    }

    let det = FixedWindowDetector::new(1.0, 3.0, 1e-4, 0.0, 1.0)?;
    println!("\nI_m = 3 sigma:");
    for is in [0.5, 1.0, 2.0, 5.0, 10.0, 100.0] {
        let r = det.rate(is)?;
        println!(
            "  I_s = {is:>5}  R = {:.5e}  quadrature {:.5e}  suppression {:.4}",
            r.value,
            det.rate_quadrature(is)?.value,
            det.low_signal_suppression(is)?
        );
    }

    // Singles and coincidences typical of a down-conversion experiment.
    let v = consistency_verdict(1000.0, 100.0, 1e-8, 0.0)?;
    println!("\nR1 = 1000/s, R12 = 100/s, T = 10 ns: {:?}", v.verdict);
    println!("  needs T >= {:.1e} s, or sigma/I_s >= {:.2}", v.required_window.unwrap(), v.required_sigma_ratio.unwrap());
    println!("{}", serde_json::to_string(&v).unwrap());
    Ok(())
}
