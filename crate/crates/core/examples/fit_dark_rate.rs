//! Fit the rate law to a noisy counting curve, predict the zero-signal dark
//! rate, and measure how much the slope falls across the curve.

use rand_distr::{Distribution, StandardNormal};

use zpfdet::curve::{grid, RateCurve, RatePoint};
use zpfdet::first_passage::{FirstPassageDetector, RateModel};
use zpfdet::fit::{fit_rate_curve, slope_change};
use zpfdet::noise::SeedSpec;

fn main() -> zpfdet::Result<()> {
    let truth = FirstPassageDetector::new(2.0, 0.6)?;
    let mut rng = SeedSpec::new(3, 0).rng();
    let data: Vec<RatePoint> = grid(0.2, 50.0, 30, true)?
        .into_iter()
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            RatePoint::new(i, truth.rate_analytic(i).unwrap() * (1.0 + 0.02 * z))
        })
        .collect();

    for model in [RateModel::Exact, RateModel::Series] {
        let fit = fit_rate_curve(&data, model, None)?;
        println!(
            "{model:?}: E_m = {:.4} +- {:.4}, Sigma = {:.4} +- {:.4}, rms {:.3e}, {} iterations",
            fit.em,
            fit.covariance[0][0].sqrt(),
            fit.sigma,
            fit.covariance[1][1].sqrt(),
            fit.residual_norm,
            fit.iterations
        );
        println!(
            "  dark rate {:.5} (series form {:.5}); true {:.5}",
            fit.predicted_dark_rate_exact,
            fit.predicted_dark_rate_series,
            truth.dark_rate(RateModel::Exact)
        );
    }

    let curve = RateCurve::from_fn(&grid(0.1, 100.0, 300, true)?, |i| truth.rate_analytic(i))?;
    let change = slope_change(&curve, 1.0, 30.0)?;
    println!(
        "slope falls {:.1}% between I_s = 1 and 30 ({:.4} -> {:.4})",
        100.0 * change.fractional_decrease,
        change.slope_lo,
        change.slope_hi
    );
    Ok(())
}
