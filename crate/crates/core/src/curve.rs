//! Rate curves: ordered `(I_s, R)` points shared by simulation, fitting and the CLI.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub intensity: f64,
    pub rate: f64,
    pub weight: f64,
    /// Monte Carlo standard error, when the rate is an estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

impl RatePoint {
    pub fn new(intensity: f64, rate: f64) -> Self {
        Self { intensity, rate, weight: 1.0, stderr: None }
    }

    pub fn weighted(intensity: f64, rate: f64, weight: f64) -> Self {
        Self { intensity, rate, weight, stderr: None }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.intensity.is_finite() && self.intensity >= 0.0) {
            return Err(format!("I_s must be a finite value >= 0 (got {})", self.intensity));
        }
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(format!("R must be a finite value >= 0 (got {})", self.rate));
        }
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(format!("weight must be a finite value > 0 (got {})", self.weight));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
}

impl RateCurve {
    pub fn new(points: Vec<RatePoint>) -> Self {
        Self { points }
    }

    pub fn from_fn(intensities: &[f64], mut rate: impl FnMut(f64) -> Result<f64>) -> Result<Self> {
        check_intensities(intensities)?;
        let points = intensities.iter().map(|&i| Ok(RatePoint::new(i, rate(i)?))).collect::<Result<_>>()?;
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn intensities(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.intensity)
    }
}

/// Intensities for a curve must be non-empty, non-negative and strictly increasing.
pub fn check_intensities(intensities: &[f64]) -> Result<()> {
    require(!intensities.is_empty(), "intensities", || "must not be empty".into())?;
    for (k, &i) in intensities.iter().enumerate() {
        require(i.is_finite() && i >= 0.0, "intensities", || format!("entry {k} must be >= 0 (got {i})"))?;
    }
    for w in intensities.windows(2) {
        require(w[1] > w[0], "intensities", || format!("must be strictly increasing ({} then {})", w[0], w[1]))?;
    }
    Ok(())
}

/// `n` points evenly spaced on `[lo, hi]`, or log-spaced when `log` is set.
pub fn grid(lo: f64, hi: f64, n: usize, log: bool) -> Result<Vec<f64>> {
    require(n >= 1, "points", || "must be >= 1".into())?;
    require(lo.is_finite() && hi.is_finite() && hi >= lo, "range", || format!("need lo <= hi (got {lo}, {hi})"))?;
    if n == 1 {
        return Ok(vec![lo]);
    }
    if log {
        require(lo > 0.0, "range", || format!("log grid needs lo > 0 (got {lo})"))?;
        let (a, b) = (lo.ln(), hi.ln());
        Ok((0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect())
    } else {
        Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
    }
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    #[serde(rename = "I_s")]
    intensity: f64,
    #[serde(rename = "R")]
    rate: f64,
    #[serde(default)]
    weight: Option<f64>,
}

/// Reads `I_s,R[,weight]` CSV. Lines starting with `#` are comments. Rows are
/// numbered from 1 after the header in error messages.
pub fn read_rate_csv<R: Read>(reader: R, source: &Path) -> Result<Vec<RatePoint>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if !(names == ["I_s", "R"] || names == ["I_s", "R", "weight"]) {
        return Err(Error::Row {
            path: source.to_path_buf(),
            row: 0,
            message: format!("expected header `I_s,R[,weight]`, found `{}`", names.join(",")),
        });
    }
    let mut points = Vec::new();
    for (k, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let row_no = k + 1;
        let row = row.map_err(|e| Error::Row { path: source.to_path_buf(), row: row_no, message: e.to_string() })?;
        let point = RatePoint::weighted(row.intensity, row.rate, row.weight.unwrap_or(1.0));
        point.validate().map_err(|message| Error::Row { path: source.to_path_buf(), row: row_no, message })?;
        points.push(point);
    }
    Ok(points)
}

pub fn load_rate_csv(path: impl AsRef<Path>) -> Result<Vec<RatePoint>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_rate_csv(file, path)
}

/// Writes `I_s,R,weight` with shortest round-trip decimal formatting.
pub fn write_rate_csv<W: Write>(writer: W, points: &[RatePoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["I_s", "R", "weight"])?;
    for p in points {
        wtr.write_record([p.intensity.to_string(), p.rate.to_string(), p.weight.to_string()])?;
    }
    wtr.flush().map_err(|source| Error::Io { path: "<output>".into(), source })?;
    Ok(())
}
