//! Fitting the first-passage rate law to counting-rate data.
//!
//! Parameters are fitted as `(ln E_m, ln Sigma)` with Levenberg–Marquardt, so
//! both stay positive without constrained steps. The covariance is reported
//! for the natural parameters `(E_m, Sigma)` and scaled by the reduced
//! chi-square.

use serde::Serialize;

use crate::curve::{RateCurve, RatePoint};
use crate::error::{require, Error, Result};
use crate::first_passage::{FirstPassageDetector, RateModel};

pub use crate::curve::{load_rate_csv, read_rate_csv, write_rate_csv};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged when the log-parameter step is below this, relative.
    pub step_tolerance: f64,
    /// Converged when the gradient of the half squared residual is below this.
    pub gradient_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iterations: 200, step_tolerance: 1e-10, gradient_tolerance: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub model: RateModel,
    #[serde(rename = "E_m")]
    pub em: f64,
    #[serde(rename = "Sigma")]
    pub sigma: f64,
    /// Weighted RMS of the residuals.
    pub residual_norm: f64,
    /// Covariance over `(E_m, Sigma)`.
    pub covariance: [[f64; 2]; 2],
    pub predicted_dark_rate_exact: f64,
    pub predicted_dark_rate_series: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn detector(&self) -> FirstPassageDetector {
        FirstPassageDetector { threshold: self.em, sigma: self.sigma, dead_time: 0.0 }
    }
}

/// Model value and its derivatives with respect to `(E_m, Sigma)`.
fn model_and_gradient(model: RateModel, intensity: f64, em: f64, sigma: f64) -> (f64, f64, f64) {
    match model {
        RateModel::Exact => {
            let s = (sigma * sigma + 4.0 * intensity * em).sqrt();
            let sum = sigma + s;
            let rate = sum * sum / (4.0 * em * em);
            let (d_em, d_sigma) = if s > 0.0 {
                (sum * intensity / (em * em * s) - sum * sum / (2.0 * em.powi(3)), sum * sum / (2.0 * em * em * s))
            } else {
                (0.0, 0.0)
            };
            (rate, d_em, d_sigma)
        }
        RateModel::Series => {
            let root_i = intensity.sqrt();
            let rate = intensity / em + sigma * root_i / em.powf(1.5) + sigma * sigma / (2.0 * em * em);
            let d_em = -intensity / (em * em) - 1.5 * sigma * root_i / em.powf(2.5) - sigma * sigma / em.powi(3);
            let d_sigma = root_i / em.powf(1.5) + sigma / (em * em);
            (rate, d_em, d_sigma)
        }
    }
}

struct Problem<'a> {
    points: &'a [RatePoint],
    model: RateModel,
}

impl Problem<'_> {
    /// Residuals and Jacobian in log parameters.
    fn evaluate(&self, p: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let (em, sigma) = (p[0].exp(), p[1].exp());
        let mut r = Vec::with_capacity(self.points.len());
        let mut jac = Vec::with_capacity(self.points.len());
        for pt in self.points {
            let sw = pt.weight.sqrt();
            let (rate, d_em, d_sigma) = model_and_gradient(self.model, pt.intensity, em, sigma);
            r.push(sw * (rate - pt.rate));
            jac.push([sw * d_em * em, sw * d_sigma * sigma]);
        }
        (r, jac)
    }

    fn cost(&self, p: [f64; 2]) -> f64 {
        let (em, sigma) = (p[0].exp(), p[1].exp());
        0.5 * self
            .points
            .iter()
            .map(|pt| pt.weight * (model_and_gradient(self.model, pt.intensity, em, sigma).0 - pt.rate).powi(2))
            .sum::<f64>()
    }
}

fn normal_equations(r: &[f64], jac: &[[f64; 2]]) -> ([[f64; 2]; 2], [f64; 2]) {
    let mut a = [[0.0; 2]; 2];
    let mut g = [0.0; 2];
    for (ri, ji) in r.iter().zip(jac) {
        for i in 0..2 {
            g[i] += ji[i] * ri;
            for j in 0..2 {
                a[i][j] += ji[i] * ji[j];
            }
        }
    }
    (a, g)
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([(b[0] * a[1][1] - b[1] * a[0][1]) / det, (a[0][0] * b[1] - a[1][0] * b[0]) / det])
}

fn invert2(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det <= 0.0 || !det.is_finite() {
        return [[f64::NAN; 2]; 2];
    }
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

/// Weighted straight-line fit `R = intercept + slope I`.
fn linear_fit(points: &[RatePoint]) -> Option<(f64, f64)> {
    let sw: f64 = points.iter().map(|p| p.weight).sum();
    let mx = points.iter().map(|p| p.weight * p.intensity).sum::<f64>() / sw;
    let my = points.iter().map(|p| p.weight * p.rate).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.weight * (p.intensity - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| p.weight * (p.intensity - mx) * (p.rate - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Starting point: `E_m = 1 / slope` of a line through the upper half of the
/// curve, `Sigma` from its intercept read as the exact dark rate `Sigma^2 / E_m^2`.
pub fn initial_guess(points: &[RatePoint]) -> (f64, f64) {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.intensity.total_cmp(&b.intensity));
    let upper = &sorted[sorted.len() / 2..];
    let upper = if upper.len() >= 2 { upper } else { &sorted[..] };
    let (intercept, slope) = linear_fit(upper).unwrap_or((0.0, 0.0));
    let mean_i = upper.iter().map(|p| p.intensity).sum::<f64>() / upper.len() as f64;
    let mean_r = upper.iter().map(|p| p.rate).sum::<f64>() / upper.len() as f64;
    let em = if slope > 0.0 { 1.0 / slope } else { (mean_i / mean_r.max(f64::MIN_POSITIVE)).max(f64::MIN_POSITIVE) };
    let sigma = if intercept > 0.0 { em * intercept.sqrt() } else { 1e-3 * (em * mean_i.max(f64::MIN_POSITIVE)).sqrt() };
    (em, sigma.max(f64::MIN_POSITIVE))
}

fn check_points(points: &[RatePoint]) -> Result<()> {
    for (k, p) in points.iter().enumerate() {
        p.validate().map_err(|reason| Error::InvalidParameter { name: "points", reason: format!("point {k}: {reason}") })?;
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.intensity).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let positive = distinct.iter().filter(|&&i| i > 0.0).count();
    if distinct.len() < 3 || positive < 2 {
        return Err(Error::Underdetermined { points: distinct.len().min(positive + 1), params: 2 });
    }
    Ok(())
}

pub fn fit_rate_curve(points: &[RatePoint], model: RateModel, init: Option<(f64, f64)>) -> Result<FitResult> {
    fit_rate_curve_with(points, model, init, &FitOptions::default())
}

pub fn fit_rate_curve_with(
    points: &[RatePoint],
    model: RateModel,
    init: Option<(f64, f64)>,
    options: &FitOptions,
) -> Result<FitResult> {
    check_points(points)?;
    let (em0, sigma0) = init.unwrap_or_else(|| initial_guess(points));
    require(em0.is_finite() && em0 > 0.0, "init_em", || format!("must be > 0 (got {em0})"))?;
    require(sigma0.is_finite() && sigma0 > 0.0, "init_sigma", || format!("must be > 0 (got {sigma0})"))?;

    let problem = Problem { points, model };
    let mut p = [em0.ln(), sigma0.ln()];
    let mut cost = problem.cost(p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        let (r, jac) = problem.evaluate(p);
        let (a, g) = normal_equations(&r, &jac);
        if g[0].abs().max(g[1].abs()) < options.gradient_tolerance {
            converged = true;
            break;
        }
        let mut accepted = None;
        for _ in 0..40 {
            let damped = [
                [a[0][0] + lambda * a[0][0].max(1e-300), a[0][1]],
                [a[1][0], a[1][1] + lambda * a[1][1].max(1e-300)],
            ];
            if let Some(step) = solve2(damped, [-g[0], -g[1]]) {
                let trial = [p[0] + step[0], p[1] + step[1]];
                let trial_cost = problem.cost(trial);
                if trial_cost.is_finite() && trial_cost <= cost {
                    accepted = Some((step, trial, trial_cost));
                    break;
                }
            }
            lambda *= 10.0;
        }
        let Some((step, trial, trial_cost)) = accepted else {
            // No downhill step at any damping: stationary to working precision.
            converged = cost == 0.0 || g[0].abs().max(g[1].abs()) < 1e-6 * (2.0 * cost).sqrt().max(options.gradient_tolerance);
            break;
        };
        p = trial;
        cost = trial_cost;
        lambda = (lambda * 0.3).max(1e-12);
        let rel_step = (step[0].abs() / (1.0 + p[0].abs())).max(step[1].abs() / (1.0 + p[1].abs()));
        if rel_step < options.step_tolerance {
            converged = true;
            break;
        }
    }

    let (em, sigma) = (p[0].exp(), p[1].exp());
    let mut jac_nat = [[0.0; 2]; 2];
    let mut sum_w = 0.0;
    let mut ssr = 0.0;
    for pt in points {
        let (rate, d_em, d_sigma) = model_and_gradient(model, pt.intensity, em, sigma);
        let g = [d_em, d_sigma];
        for i in 0..2 {
            for j in 0..2 {
                jac_nat[i][j] += pt.weight * g[i] * g[j];
            }
        }
        sum_w += pt.weight;
        ssr += pt.weight * (rate - pt.rate).powi(2);
    }
    let dof = points.len().saturating_sub(2).max(1) as f64;
    let inv = invert2(jac_nat);
    let scale = ssr / dof;
    let covariance = [[inv[0][0] * scale, inv[0][1] * scale], [inv[1][0] * scale, inv[1][1] * scale]];
    let dark_exact = (sigma / em).powi(2);
    Ok(FitResult {
        model,
        em,
        sigma,
        residual_norm: (ssr / sum_w).sqrt(),
        covariance,
        predicted_dark_rate_exact: dark_exact,
        predicted_dark_rate_series: 0.5 * dark_exact,
        iterations,
        converged,
    })
}

/// Half-width, in decades, of the neighbourhood used for local slopes.
pub const SLOPE_WINDOW_DECADES: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeChange {
    pub slope_lo: f64,
    pub slope_hi: f64,
    /// `(slope_lo - slope_hi) / slope_lo`.
    pub fractional_decrease: f64,
}

/// Weighted regression slope over the points within `SLOPE_WINDOW_DECADES`
/// of `center` on a log axis. Needs at least 3 such points.
pub fn local_slope(curve: &RateCurve, center: f64) -> Result<f64> {
    require(center.is_finite() && center > 0.0, "intensity", || format!("local slope needs I > 0 (got {center})"))?;
    let lo = center * 10f64.powf(-SLOPE_WINDOW_DECADES);
    let hi = center * 10f64.powf(SLOPE_WINDOW_DECADES);
    let local: Vec<RatePoint> = curve.points.iter().copied().filter(|p| p.intensity >= lo && p.intensity <= hi).collect();
    if local.len() < 3 {
        return Err(Error::InsufficientStatistics(format!(
            "slope window [{lo:.6e}, {hi:.6e}] around I_s = {center:e} holds {} points, need 3",
            local.len()
        )));
    }
    linear_fit(&local).map(|(_, slope)| slope).ok_or_else(|| {
        Error::InsufficientStatistics(format!("slope window [{lo:.6e}, {hi:.6e}] has no spread in I_s"))
    })
}

pub fn slope_change(curve: &RateCurve, intensity_lo: f64, intensity_hi: f64) -> Result<SlopeChange> {
    require(curve.len() >= 4, "curve", || format!("needs at least 4 points (got {})", curve.len()))?;
    require(intensity_lo < intensity_hi, "intensity_lo", || {
        format!("must be below intensity_hi ({intensity_lo} vs {intensity_hi})")
    })?;
    let (min, max) = curve
        .intensities()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), i| (a.min(i), b.max(i)));
    for (name, i) in [("intensity_lo", intensity_lo), ("intensity_hi", intensity_hi)] {
        require(i >= min && i <= max, name, || format!("{i} lies outside the curve range [{min}, {max}]"))?;
    }
    let slope_lo = local_slope(curve, intensity_lo)?;
    let slope_hi = local_slope(curve, intensity_hi)?;
    Ok(SlopeChange { slope_lo, slope_hi, fractional_decrease: (slope_lo - slope_hi) / slope_lo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::grid;
    use crate::first_passage::{rate_curve, CurveMethod};
    use proptest::prelude::*;

    fn synthetic(em: f64, sigma: f64, model: RateModel) -> Vec<RatePoint> {
        let d = FirstPassageDetector::new(em, sigma).unwrap();
        grid(0.1, 10.0, 20, false).unwrap().into_iter().map(|i| RatePoint::new(i, d.rate(model, i).unwrap())).collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        for model in [RateModel::Exact, RateModel::Series] {
            for &(i, em, s) in &[(0.3, 2.0, 0.5), (5.0, 0.7, 1.3), (0.0, 1.0, 1.0)] {
                let (_, d_em, d_s) = model_and_gradient(model, i, em, s);
                let h = 1e-6;
                let fd_em = (model_and_gradient(model, i, em + h, s).0 - model_and_gradient(model, i, em - h, s).0) / (2.0 * h);
                let fd_s = (model_and_gradient(model, i, em, s + h).0 - model_and_gradient(model, i, em, s - h).0) / (2.0 * h);
                assert!((d_em - fd_em).abs() < 1e-6 * (1.0 + fd_em.abs()), "{model:?} {i}");
                assert!((d_s - fd_s).abs() < 1e-6 * (1.0 + fd_s.abs()), "{model:?} {i}");
            }
        }
    }

    #[test]
    fn noiseless_recovery() {
        for model in [RateModel::Exact, RateModel::Series] {
            let fit = fit_rate_curve(&synthetic(2.0, 0.5, model), model, None).unwrap();
            assert!(fit.converged, "{fit:?}");
            assert!((fit.em / 2.0 - 1.0).abs() < 1e-6, "{fit:?}");
            assert!((fit.sigma / 0.5 - 1.0).abs() < 1e-6, "{fit:?}");
            assert_eq!(fit.predicted_dark_rate_exact, 2.0 * fit.predicted_dark_rate_series);
        }
    }

    #[test]
    fn too_few_points() {
        let pts = vec![RatePoint::new(1.0, 1.0), RatePoint::new(2.0, 2.0)];
        assert!(matches!(fit_rate_curve(&pts, RateModel::Exact, None), Err(Error::Underdetermined { .. })));
        let pts = vec![RatePoint::new(0.0, 1.0), RatePoint::new(0.0, 1.1), RatePoint::new(2.0, 2.0), RatePoint::new(2.0, 2.1)];
        assert!(matches!(fit_rate_curve(&pts, RateModel::Exact, None), Err(Error::Underdetermined { .. })));
    }

    #[test]
    fn refit_is_idempotent() {
        let mut pts = synthetic(1.5, 0.8, RateModel::Exact);
        for (k, p) in pts.iter_mut().enumerate() {
            p.rate *= 1.0 + 0.01 * ((k as f64 * 1.7).sin());
        }
        let first = fit_rate_curve(&pts, RateModel::Exact, None).unwrap();
        let again = fit_rate_curve(&pts, RateModel::Exact, Some((first.em, first.sigma))).unwrap();
        assert!((again.em / first.em - 1.0).abs() < 1e-10);
        assert!((again.sigma / first.sigma - 1.0).abs() < 1e-10);
    }

    #[test]
    fn covariance_is_positive_semidefinite() {
        let mut pts = synthetic(2.0, 0.5, RateModel::Exact);
        for (k, p) in pts.iter_mut().enumerate() {
            p.rate *= 1.0 + 0.02 * ((k as f64 * 2.3).cos());
        }
        let c = fit_rate_curve(&pts, RateModel::Exact, None).unwrap().covariance;
        assert!(c[0][0] >= 0.0 && c[1][1] >= 0.0);
        assert!((c[0][1] - c[1][0]).abs() <= 1e-12 * c[0][0].max(c[1][1]));
        assert!(c[0][0] * c[1][1] - c[0][1] * c[1][0] >= -1e-12 * c[0][0] * c[1][1]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn rate_rescaling_maps_parameters(em in 0.3f64..5.0, sigma in 0.1f64..3.0, c in 0.1f64..20.0) {
            let pts = synthetic(em, sigma, RateModel::Exact);
            let scaled: Vec<RatePoint> = pts.iter().map(|p| RatePoint::new(p.intensity, c * p.rate)).collect();
            let a = fit_rate_curve(&pts, RateModel::Exact, None).unwrap();
            let b = fit_rate_curve(&scaled, RateModel::Exact, None).unwrap();
            prop_assert!((b.em * c / a.em - 1.0).abs() < 1e-6);
            prop_assert!((b.sigma * c.sqrt() / a.sigma - 1.0).abs() < 1e-6);
        }

        #[test]
        fn slope_change_nonnegative(em in 0.2f64..5.0, sigma in 0.01f64..5.0) {
            let d = FirstPassageDetector::new(em, sigma).unwrap();
            let curve = rate_curve(&d, &grid(0.05, 20.0, 200, true).unwrap(), &CurveMethod::Analytic).unwrap();
            prop_assert!(slope_change(&curve, 0.1, 10.0).unwrap().fractional_decrease >= 0.0);
        }
    }

    #[test]
    fn slope_change_examples() {
        let d = FirstPassageDetector::new(1.0, 0.0).unwrap();
        let curve = rate_curve(&d, &grid(0.05, 20.0, 120, true).unwrap(), &CurveMethod::Analytic).unwrap();
        assert!(slope_change(&curve, 0.1, 10.0).unwrap().fractional_decrease.abs() < 1e-12);

        let d = FirstPassageDetector::new(1.0, 1.0).unwrap();
        let lo = d.slope_series(0.1).unwrap();
        let hi = d.slope_series(10.0).unwrap();
        assert!((lo - 2.581_138_83).abs() < 1e-8 && (hi - 1.158_113_883).abs() < 1e-9);
        assert!(((lo - hi) / lo - 0.551_316_701_9).abs() < 1e-9);

        let curve = rate_curve(&d, &grid(0.05, 20.0, 400, true).unwrap(), &CurveMethod::Analytic).unwrap();
        for i in [0.1, 1.0, 10.0] {
            let fitted = local_slope(&curve, i).unwrap();
            assert!((fitted / d.slope_analytic(i).unwrap() - 1.0).abs() < 0.01, "I_s = {i}");
        }
    }

    #[test]
    fn slope_change_errors() {
        let d = FirstPassageDetector::new(1.0, 1.0).unwrap();
        let sparse = rate_curve(&d, &[0.1, 1.0, 5.0, 10.0], &CurveMethod::Analytic).unwrap();
        let err = slope_change(&sparse, 0.1, 10.0).unwrap_err();
        assert!(err.to_string().contains("slope window"), "{err}");
        let dense = rate_curve(&d, &grid(0.1, 10.0, 100, true).unwrap(), &CurveMethod::Analytic).unwrap();
        assert!(slope_change(&dense, 10.0, 0.1).is_err());
        assert!(slope_change(&dense, 0.01, 1.0).is_err());
    }
}
