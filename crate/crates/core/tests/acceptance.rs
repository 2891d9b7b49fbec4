//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with
//! its measured values and runtime; the process exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand_distr::{Distribution, StandardNormal};

use zpfdet::coincidence::{coincidence_bound, consistency_verdict};
use zpfdet::curve::{grid, RateCurve, RatePoint};
use zpfdet::first_passage::{simulate_first_passage, FirstPassageDetector, RateModel, SimulationConfig};
use zpfdet::fit::{fit_rate_curve, local_slope, slope_change};
use zpfdet::fixed_window::FixedWindowDetector;
use zpfdet::noise::{NoiseModel, SeedSpec};
use zpfdet::spectrum::{thermal_band_energy_density, SpectrumParams, CODATA};

type Outcome = Result<String, String>;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn zero_noise_linearity() -> Outcome {
    let det = FirstPassageDetector::new(1.0, 0.0).map_err(|e| e.to_string())?;
    let noise = NoiseModel::white(0.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for (k, is) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let cfg = SimulationConfig::new(1e-3, 100, SeedSpec::new(1, k as u64));
        let run = simulate_first_passage(&det, is, &noise, &cfg).map_err(|e| e.to_string())?;
        let err = rel(run.summary.renewal_rate, is / det.threshold);
        worst = worst.max(err);
        detail.push(format!("R({is})={:.6}", run.summary.renewal_rate));
    }
    check(worst < 5e-3, format!("{} max rel err {worst:.2e} (tol 5e-3)", detail.join(" ")))
}

fn wald_identity() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (k, sigma) in [0.25, 0.5, 1.0].into_iter().enumerate() {
        let det = FirstPassageDetector::new(1.0, sigma).map_err(|e| e.to_string())?;
        let cfg = SimulationConfig::new(1e-4, 100_000, SeedSpec::new(2, k as u64));
        let s = simulate_first_passage(&det, 0.5, &det.white_noise(), &cfg).map_err(|e| e.to_string())?.summary;
        let err = rel(s.mean_passage_time, 2.0);
        ok &= err < 0.02 && s.n_censored == 0;
        detail.push(format!("Sigma={sigma}: mean={:.5} (rel {err:.2e})", s.mean_passage_time));
    }
    check(ok, format!("{} tol 2e-2", detail.join(", ")))
}

fn driftless_median() -> Outcome {
    let det = FirstPassageDetector::new(1.0, 1.0).map_err(|e| e.to_string())?;
    let cfg = SimulationConfig::new(1e-4, 100_000, SeedSpec::new(3, 0)).with_max_steps(100_000_000);
    let s = simulate_first_passage(&det, 0.0, &det.white_noise(), &cfg).map_err(|e| e.to_string())?.summary;
    let median = s.median_passage_time.ok_or("median undefined: half or more trials censored")?;
    // (E_m / Sigma)^2 / (2 erfc^-1(1/2)^2), the reflection-principle median.
    let oracle = 2.198_109_338_317_73;
    let err = rel(median, oracle);
    check(
        err < 0.03,
        format!("median={median:.5} vs {oracle:.5} (rel {err:.2e}, tol 3e-2), censored {:.4}", s.censored_fraction),
    )
}

fn exact_vs_series() -> Outcome {
    let det = FirstPassageDetector::new(1.0, 1.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for x in grid(25.0, 1e4, 500, true).map_err(|e| e.to_string())? {
        let is = x * det.sigma * det.sigma / det.threshold;
        let exact = det.rate_analytic(is).map_err(|e| e.to_string())?;
        let series = det.rate_series(is).map_err(|e| e.to_string())?.value;
        worst = worst.max(rel(series, exact));
    }
    let ratio = det.dark_rate(RateModel::Exact) / det.dark_rate(RateModel::Series);
    check(worst < 2e-3 && ratio == 2.0, format!("max gap {worst:.3e} on [25, 1e4] (tol 2e-3), dark ratio {ratio}"))
}

fn fixed_window_quadrature() -> Outcome {
    let sigma = 1.0;
    let det = FixedWindowDetector::new(1.0, 2.0, 1e-4, 0.5, sigma).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for is in grid(0.0, 100.0 * sigma, 100, false).map_err(|e| e.to_string())? {
        let closed = det.rate(is).map_err(|e| e.to_string())?;
        let quad = det.rate_quadrature(is).map_err(|e| e.to_string())?;
        if closed.saturated {
            return Err(format!("saturated at I_s={is}"));
        }
        worst = worst.max(rel(quad.value, closed.value));
    }
    check(worst < 1e-6, format!("max rel diff {worst:.2e} over 100 points (tol 1e-6)"))
}

fn low_signal_suppression() -> Outcome {
    let sigma = 1.0;
    let det = FixedWindowDetector::new(1.0, 3.0 * sigma, 1e-4, 0.0, sigma).map_err(|e| e.to_string())?;
    let low = det.low_signal_suppression(sigma).map_err(|e| e.to_string())?;
    let high = det.low_signal_suppression(100.0 * sigma).map_err(|e| e.to_string())?;
    check(low < 0.15 && high > 0.99, format!("ratio(sigma)={low:.6} (<0.15), ratio(100 sigma)={high:.6} (>0.99)"))
}

fn reductio() -> Outcome {
    let (r1, r12, t) = (1000.0, 100.0, 1e-8);
    let v = consistency_verdict(r1, r12, t, 0.0).map_err(|e| e.to_string())?;
    let tmin = v.required_window.ok_or("no required window")?;
    let rmin = v.required_sigma_ratio.ok_or("no required ratio")?;
    let at_tmin = rel(coincidence_bound(r1, tmin, 0.0), r12);
    let at_rmin = rel(coincidence_bound(r1, t, rmin), r12);
    let scale = 0.1 / r1;
    check(
        !v.is_consistent() && rel(tmin, 1e-4) < 1e-12 && tmin >= scale * (1.0 - 1e-12) && at_tmin < 1e-9 && at_rmin < 1e-9,
        format!("T_min={tmin:e} (>= {scale:e}), ratio_min={rmin:.4}, self-consistency {at_tmin:.1e}/{at_rmin:.1e}"),
    )
}

fn visible_band() -> Outcome {
    let params = SpectrumParams::new(300.0).map_err(|e| e.to_string())?;
    let lo = CODATA.omega_from_wavelength(700e-9);
    let hi = CODATA.omega_from_wavelength(400e-9);
    let closed = params.zpf_band_intensity(lo, hi).map_err(|e| e.to_string())?;
    let quad = params.zpf_band_intensity_quadrature(lo, hi).map_err(|e| e.to_string())?;
    let kw_cm2 = closed * 1e-7;
    let err = rel(quad, closed);
    check(
        (1.0..=1e3).contains(&kw_cm2) && err < 1e-10,
        format!("{kw_cm2:.2} kW/cm^2 (in [1, 1e3]), quadrature rel diff {err:.1e}"),
    )
}

fn stefan_boltzmann() -> Outcome {
    let u = thermal_band_energy_density(0.0, f64::INFINITY, 300.0).map_err(|e| e.to_string())?;
    let sb = CODATA.radiation_constant() * 300f64.powi(4);
    let err = rel(u, sb);
    check(err < 1e-3, format!("u={u:.9e} J/m^3 vs aT^4={sb:.9e} (rel {err:.1e}, tol 1e-3)"))
}

fn fit_recovery() -> Outcome {
    let (em, sigma) = (1.5, 0.8);
    let truth = FirstPassageDetector::new(em, sigma).map_err(|e| e.to_string())?;
    let intensities = grid(0.01, 20.0, 40, true).map_err(|e| e.to_string())?;
    let clean: Vec<RatePoint> =
        intensities.iter().map(|&i| RatePoint::new(i, truth.rate_analytic(i).unwrap())).collect();
    let f = fit_rate_curve(&clean, RateModel::Exact, None).map_err(|e| e.to_string())?;
    let noiseless = rel(f.em, em).max(rel(f.sigma, sigma));

    let mut recovered = 0;
    for trial in 0..100u64 {
        let mut rng = SeedSpec::new(10, trial).rng();
        let noisy: Vec<RatePoint> = clean
            .iter()
            .map(|p| {
                let z: f64 = StandardNormal.sample(&mut rng);
                RatePoint::new(p.intensity, p.rate * (1.0 + 0.01 * z))
            })
            .collect();
        if let Ok(f) = fit_rate_curve(&noisy, RateModel::Exact, None) {
            if rel(f.em, em) < 0.05 && rel(f.sigma, sigma) < 0.05 {
                recovered += 1;
            }
        }
    }
    check(
        noiseless < 1e-6 && recovered >= 95,
        format!("noiseless rel err {noiseless:.1e} (tol 1e-6), 1% noise: {recovered}/100 within 5% (need 95)"),
    )
}

fn cli_bytes(args: &[&str], threads: &str) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_zpfdet"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("zpfdet {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn read_dir_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let e = e.map_err(|e| e.to_string())?;
            let bytes = std::fs::read(e.path()).map_err(|e| e.to_string())?;
            Ok((e.file_name().to_string_lossy().into_owned(), bytes))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let runs: [&[&str]; 3] = [
        &["--seed", "42", "first-passage", "--em", "1", "--sigma", "0.5", "--is", "0.5,1", "--method", "monte-carlo",
          "--dt", "1e-3", "--trials", "2000"],
        &["--seed", "42", "coincide", "--em", "1", "--sigma", "1", "--is", "0.5,1", "--correlation", "0.5",
          "--duration", "200", "--dt", "1e-3", "--window", "0.01"],
        &["spectrum", "--points", "20", "--log"],
    ];
    for args in runs {
        let a = cli_bytes(args, "1")?;
        let b = cli_bytes(args, "3")?;
        if a != b || a.is_empty() {
            return Err(format!("output differs between repeats of {args:?}"));
        }
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "command = \"first-passage\"\nseed = 9\n[params]\nem = 1.0\nmethod = \"monte-carlo\"\ndt = 1e-3\ntrials = 500\n\
         [grid]\nis = [0.5, 1.0, 2.0]\nsigma = [0.25, 0.5]\n",
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "3"].into_iter().enumerate() {
        let out_dir = dir.path().join(format!("run{k}"));
        cli_bytes(&["sweep", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()], threads)?;
        outputs.push(read_dir_bytes(&out_dir)?);
    }
    check(
        outputs[0] == outputs[1] && outputs[0].len() == 7,
        format!("3 runs and a {}-file sweep byte-identical across repeats and thread counts", outputs[0].len()),
    )
}

fn slope_diagnostic() -> Outcome {
    let det = FirstPassageDetector::new(1.0, 1.0).map_err(|e| e.to_string())?;
    let intensities = grid(0.01, 100.0, 400, true).map_err(|e| e.to_string())?;
    let curve = RateCurve::from_fn(&intensities, |i| det.rate_analytic(i)).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for center in [0.05, 0.3, 1.0, 4.0, 20.0] {
        let fitted = local_slope(&curve, center).map_err(|e| e.to_string())?;
        worst = worst.max(rel(fitted, det.slope_analytic(center).map_err(|e| e.to_string())?));
    }
    let change = slope_change(&curve, 1.0, 20.0).map_err(|e| e.to_string())?;
    let exact = 1.0 - det.slope_analytic(20.0).unwrap() / det.slope_analytic(1.0).unwrap();
    let change_err = (change.fractional_decrease - exact).abs() / exact;
    check(
        worst < 0.01 && change_err < 0.01,
        format!(
            "local slope max rel err {worst:.2e}, slope decrease 1->20: {:.4} vs {exact:.4} (tol 1e-2)",
            change.fractional_decrease
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("zero-noise linearity", zero_noise_linearity),
        ("Wald identity", wald_identity),
        ("driftless median", driftless_median),
        ("exact vs series rate", exact_vs_series),
        ("fixed-window closed form vs quadrature", fixed_window_quadrature),
        ("low-signal suppression", low_signal_suppression),
        ("coincidence-bound reductio", reductio),
        ("visible-band zero-point intensity", visible_band),
        ("Stefan-Boltzmann full band", stefan_boltzmann),
        ("fit recovery", fit_recovery),
        ("CLI determinism", determinism),
        ("slope-change diagnostic", slope_diagnostic),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed: Duration = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{:.2?}]", k + 1, elapsed),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail} [{:.2?}]", k + 1, elapsed);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
