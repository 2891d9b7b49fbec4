//! Counting rate of the threshold-crossing detector: the exact rate law, its
//! three-term series, the dark rate, and the slowly falling slope.

use zpfdet::curve::grid;
use zpfdet::first_passage::{FirstPassageDetector, RateModel};

fn main() -> zpfdet::Result<()> {
    let det = FirstPassageDetector::new(1.0, 1.0)?;
    println!("dark rate: exact {:.4}, series {:.4}", det.dark_rate(RateModel::Exact), det.dark_rate(RateModel::Series));
    println!("{:>8} {:>10} {:>10} {:>10} {:>9} {:>9}", "I_s", "T", "R exact", "R series", "slope", "gap");
    for is in grid(0.01, 1e3, 11, true)? {
        let exact = det.rate_analytic(is)?;
        let series = det.rate_series(is)?;
        println!(
            "{is:>8.3} {:>10.4e} {:>10.4e} {:>10.4e} {:>9.4} {:>9.2e}",
            det.heuristic_detection_time(is)?,
            exact,
            series.value,
            det.slope_analytic(is)?,
            (series.value - exact) / exact
        );
    }
    Ok(())
}
