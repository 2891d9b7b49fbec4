//! The `zpfdet` command line.
//!
//! Curves go out as CSV with a fixed header, preceded by `#` comment lines
//! recording the command, seed and resolved parameters. Scalar results
//! (single-point runs, verdicts, fits) go out as one JSON record. `--output`
//! overrides the choice. Exit codes: 0 success, 2 bad arguments or
//! parameters, 3 runtime failures such as insufficient statistics.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::coincidence::{coincidence_curve, consistency_verdict, CoincidenceConfig, CorrelatedBeamPair};
use crate::curve::{grid, load_rate_csv};
use crate::error::{Error, Result};
use crate::first_passage::{simulate_first_passage, FirstPassageDetector, RateModel, SimulationConfig, Stepping, DEFAULT_MAX_STEPS};
use crate::fit::fit_rate_curve;
use crate::fixed_window::FixedWindowDetector;
use crate::noise::{NoiseModel, SeedSpec};
use crate::spectrum::{IntensityConvention, SpectrumParams, CODATA};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 0x5eed_cafe;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "zpfdet", version, about = "Photodetector models with a real zero-point field")]
struct Cli {
    /// Master seed (integer) or `random`.
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Output format; defaults to JSON for single results and CSV for curves.
    #[arg(long, global = true, value_enum)]
    output: Option<OutputFormat>,
    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Planck spectrum with zero-point term: omega,rho_thermal,rho_zpf,rho_total.
    #[command(allow_negative_numbers = true)]
    Spectrum(SpectrumArgs),
    /// Fixed-window detector rates: I_s,R_closed,R_quadrature,suppression_ratio.
    #[command(name = "fixed-window", allow_negative_numbers = true)]
    FixedWindow(FixedWindowArgs),
    /// First-passage rates: I_s,R_analytic,R_series,R_mc,R_mc_stderr,censored_fraction.
    #[command(name = "first-passage", allow_negative_numbers = true)]
    FirstPassage(FirstPassageArgs),
    /// Two-detector coincidence simulation: I_s,R1,R2,R12,accidental,excess,excess_stderr.
    #[command(allow_negative_numbers = true)]
    Coincide(CoincideArgs),
    /// Check a singles/coincidence pair against the fixed-window bound.
    #[command(allow_negative_numbers = true)]
    Verdict(VerdictArgs),
    /// Fit the first-passage rate law to an `I_s,R[,weight]` CSV file.
    #[command(allow_negative_numbers = true)]
    Fit(FitArgs),
    /// Run a parameter grid from a TOML file, one output file per point.
    Sweep(SweepArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::FixedWindow(_) => "fixed-window",
            Command::FirstPassage(_) => "first-passage",
            Command::Coincide(_) => "coincide",
            Command::Verdict(_) => "verdict",
            Command::Fit(_) => "fit",
            Command::Sweep(_) => "sweep",
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct IntensityArgs {
    /// Signal intensities (comma separated, strictly increasing).
    #[arg(long = "is", value_delimiter = ',')]
    #[serde(rename = "is")]
    intensities: Vec<f64>,
    #[arg(long)]
    is_min: Option<f64>,
    #[arg(long)]
    is_max: Option<f64>,
    /// Grid size when using --is-min/--is-max.
    #[arg(long)]
    points: Option<usize>,
    /// Log-spaced grid.
    #[arg(long)]
    log: bool,
}

impl IntensityArgs {
    fn resolve(&self) -> Result<Vec<f64>> {
        if !self.intensities.is_empty() {
            return Ok(self.intensities.clone());
        }
        match (self.is_min, self.is_max) {
            (Some(lo), Some(hi)) => grid(lo, hi, self.points.unwrap_or(50), self.log),
            _ => Err(Error::invalid("is", "give --is or both --is-min and --is-max")),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct SpectrumArgs {
    /// Temperature in kelvin.
    #[arg(long, default_value_t = 300.0)]
    temperature: f64,
    #[arg(long, default_value_t = 1e13)]
    omega_min: f64,
    #[arg(long, default_value_t = 1e16)]
    omega_max: f64,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long)]
    log: bool,
    /// Ultraviolet cutoff (rad/s); defaults to the Compton frequency.
    #[arg(long)]
    cutoff: Option<f64>,
    /// Report the zero-point intensity of a wavelength band `LO,HI` in nm instead.
    #[arg(long, value_delimiter = ',')]
    band_nm: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "plane-wave")]
    convention: ConventionArg,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ConventionArg {
    PlaneWave,
    Isotropic,
}

#[derive(Debug, Args, Serialize)]
struct FixedWindowArgs {
    /// Detection window T.
    #[arg(long, default_value_t = 1.0)]
    window: f64,
    /// Threshold I_m above the zero-point mean.
    #[arg(long)]
    threshold: f64,
    #[arg(long)]
    xi: f64,
    #[arg(long, default_value_t = 0.0)]
    i0: f64,
    #[arg(long)]
    sigma: f64,
    #[command(flatten)]
    #[serde(flatten)]
    grid: IntensityArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    Analytic,
    Series,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum NoiseArg {
    White,
    Colored,
}

#[derive(Debug, Args, Serialize)]
struct NoiseArgs {
    #[arg(long, value_enum, default_value = "white")]
    noise: NoiseArg,
    /// Coherence time for colored noise; its strength matches --sigma at long times.
    #[arg(long)]
    tau_c: Option<f64>,
}

impl NoiseArgs {
    fn model(&self, sigma: f64) -> Result<NoiseModel> {
        match self.noise {
            NoiseArg::White => NoiseModel::white(sigma),
            NoiseArg::Colored => {
                let tau_c = self.tau_c.ok_or_else(|| Error::invalid("tau_c", "required with --noise colored"))?;
                NoiseModel::colored_matching(sigma, tau_c)
            }
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct FirstPassageArgs {
    #[arg(long)]
    em: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    dead_time: f64,
    #[command(flatten)]
    #[serde(flatten)]
    grid: IntensityArgs,
    #[arg(long, value_enum, default_value = "analytic")]
    method: Method,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: u64,
    #[arg(long, value_enum, default_value = "accelerated")]
    stepping: SteppingArg,
    /// Brownian-bridge crossing correction between grid points.
    #[arg(long)]
    bridge: bool,
    #[command(flatten)]
    #[serde(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SteppingArg {
    Euler,
    Accelerated,
}

#[derive(Debug, Args, Serialize)]
struct CoincideArgs {
    #[arg(long)]
    em: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    dead_time: f64,
    #[command(flatten)]
    #[serde(flatten)]
    grid: IntensityArgs,
    /// Shared fraction of fluctuation variance.
    #[arg(long, default_value_t = 1.0)]
    correlation: f64,
    /// Coincidence window (a whole multiple of dt).
    #[arg(long, default_value_t = 0.01)]
    window: f64,
    #[arg(long, default_value_t = 1000.0)]
    duration: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 0.0)]
    warmup: f64,
    #[command(flatten)]
    #[serde(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Args, Serialize)]
struct VerdictArgs {
    #[arg(long)]
    r1: f64,
    #[arg(long)]
    r12: f64,
    /// Detection window T.
    #[arg(long)]
    t: f64,
    /// sigma / I_s.
    #[arg(long, default_value_t = 0.0)]
    ratio: f64,
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    #[arg(long, value_enum, default_value = "exact")]
    model: ModelArg,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    init_em: Option<f64>,
    #[arg(long)]
    init_sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelArg {
    Exact,
    Series,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    /// TOML sweep description.
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving `<command>_<index>.<ext>` files and `manifest.json`.
    #[arg(long)]
    out_dir: PathBuf,
}

struct Table {
    columns: &'static [&'static str],
    rows: Vec<Vec<Option<f64>>>,
    /// Fields added to each row of the JSON form only.
    json_extra: Vec<Map<String, Value>>,
}

impl Table {
    fn new(columns: &'static [&'static str], rows: Vec<Vec<Option<f64>>>) -> Self {
        Table { columns, rows, json_extra: Vec::new() }
    }
}

enum Payload {
    Table(Table),
    Record(Value),
}

struct Rendered {
    bytes: Vec<u8>,
    format: OutputFormat,
}

/// Shortest decimal that reads back to the same `f64`.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn header_lines(command: &str, seed: u64, parameters: &Value) -> String {
    format!("# zpfdet {command}\n# seed={seed}\n# parameters={parameters}\n")
}

fn render(command: &str, seed: u64, parameters: Value, payload: Payload, forced: Option<OutputFormat>) -> Result<Rendered> {
    let mut bytes = Vec::new();
    match payload {
        Payload::Table(table) => {
            let format = forced.unwrap_or(if table.rows.len() == 1 { OutputFormat::Json } else { OutputFormat::Csv });
            match format {
                OutputFormat::Csv => {
                    bytes.extend_from_slice(header_lines(command, seed, &parameters).as_bytes());
                    let mut w = csv::Writer::from_writer(&mut bytes);
                    w.write_record(table.columns)?;
                    for row in &table.rows {
                        w.write_record(row.iter().map(|v| v.map(format_number).unwrap_or_default()))?;
                    }
                    w.flush().map_err(|source| Error::Io { path: "<buffer>".into(), source })?;
                }
                OutputFormat::Json => {
                    let rows: Vec<Value> = table
                        .rows
                        .iter()
                        .enumerate()
                        .map(|(k, row)| {
                            let mut obj: Map<String, Value> =
                                table.columns.iter().zip(row).map(|(c, v)| (c.to_string(), json!(v))).collect();
                            if let Some(extra) = table.json_extra.get(k) {
                                obj.extend(extra.clone());
                            }
                            Value::Object(obj)
                        })
                        .collect();
                    let mut record = json!({ "command": command, "seed": seed, "parameters": parameters });
                    if rows.len() == 1 {
                        record["result"] = rows.into_iter().next().expect("one row");
                    } else {
                        record["rows"] = Value::Array(rows);
                    }
                    serde_json::to_writer(&mut bytes, &record)?;
                    bytes.push(b'\n');
                }
            }
            Ok(Rendered { bytes, format })
        }
        Payload::Record(result) => {
            if forced == Some(OutputFormat::Csv) {
                return Err(Error::invalid("output", format!("`{command}` produces a single record; use --output json")));
            }
            let record = json!({ "command": command, "seed": seed, "parameters": parameters, "result": result });
            serde_json::to_writer(&mut bytes, &record)?;
            bytes.push(b'\n');
            Ok(Rendered { bytes, format: OutputFormat::Json })
        }
    }
}

fn resolve_seed(raw: Option<&str>) -> Result<u64> {
    match raw {
        None => Ok(DEFAULT_SEED),
        Some("random") => Ok(rand::random()),
        Some(s) => s.parse().map_err(|_| Error::invalid("seed", format!("expected an integer or `random` (got `{s}`)"))),
    }
}

fn params_json<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).unwrap_or(Value::Null)
}

fn spectrum(args: &SpectrumArgs) -> Result<Payload> {
    let mut params = SpectrumParams::new(args.temperature)?.with_convention(match args.convention {
        ConventionArg::PlaneWave => IntensityConvention::PlaneWave,
        ConventionArg::Isotropic => IntensityConvention::Isotropic,
    });
    if let Some(cutoff) = args.cutoff {
        params = params.with_cutoff(cutoff)?;
    }
    if let Some(band) = &args.band_nm {
        let &[a, b] = band.as_slice() else {
            return Err(Error::invalid("band_nm", format!("expected two wavelengths LO,HI (got {})", band.len())));
        };
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::invalid("band_nm", format!("wavelengths must be > 0 (got {a}, {b})")));
        }
        let lo = CODATA.omega_from_wavelength(a.max(b) * 1e-9);
        let hi = CODATA.omega_from_wavelength(a.min(b) * 1e-9);
        let closed = params.zpf_band_intensity(lo, hi)?;
        let quad = params.zpf_band_intensity_quadrature(lo, hi)?;
        return Ok(Payload::Record(json!({
            "omega_lo": lo,
            "omega_hi": hi,
            "zpf_intensity_w_m2": closed,
            "zpf_intensity_kw_cm2": closed * 1e-7,
            "zpf_intensity_quadrature_w_m2": quad,
        })));
    }
    let omegas = grid(args.omega_min, args.omega_max, args.points, args.log)?;
    let rows = omegas
        .into_iter()
        .map(|w| {
            let d = params.spectral_density(w)?;
            Ok(vec![Some(w), Some(d.thermal), Some(d.zpf), Some(d.total())])
        })
        .collect::<Result<_>>()?;
    Ok(Payload::Table(Table::new(&["omega", "rho_thermal", "rho_zpf", "rho_total"], rows)))
}

fn fixed_window(args: &FixedWindowArgs) -> Result<Payload> {
    let det = FixedWindowDetector::new(args.window, args.threshold, args.xi, args.i0, args.sigma)?;
    let intensities = args.grid.resolve()?;
    crate::curve::check_intensities(&intensities)?;
    let rows = intensities
        .into_iter()
        .map(|i| {
            let closed = det.rate(i)?.value;
            let quad = det.rate_quadrature(i)?.value;
            let suppression = if i > 0.0 { Some(det.low_signal_suppression(i)?) } else { None };
            Ok(vec![Some(i), Some(closed), Some(quad), suppression])
        })
        .collect::<Result<_>>()?;
    Ok(Payload::Table(Table::new(&["I_s", "R_closed", "R_quadrature", "suppression_ratio"], rows)))
}

fn first_passage(args: &FirstPassageArgs, seed: u64) -> Result<Payload> {
    let det = FirstPassageDetector::new(args.em, args.sigma)?.with_dead_time(args.dead_time)?;
    let intensities = args.grid.resolve()?;
    crate::curve::check_intensities(&intensities)?;
    let noise = args.noise.model(args.sigma)?;
    let base = SeedSpec::new(seed, 0);
    let mut rows = Vec::with_capacity(intensities.len());
    let mut extra = Vec::with_capacity(intensities.len());
    for (k, &i) in intensities.iter().enumerate() {
        let analytic = det.rate_analytic(i)?;
        let series = det.rate_series(i)?.value;
        let (mc, mc_se, censored) = if args.method == Method::MonteCarlo {
            let cfg = SimulationConfig::new(args.dt, args.trials, base.child(k as u64))
                .with_max_steps(args.max_steps)
                .with_stepping(match args.stepping {
                    SteppingArg::Euler => Stepping::Euler,
                    SteppingArg::Accelerated => Stepping::Accelerated,
                })
                .with_bridge_correction(args.bridge);
            let s = simulate_first_passage(&det, i, &noise, &cfg)?.summary;
            (Some(s.renewal_rate), Some(s.renewal_rate_stderr), Some(s.censored_fraction))
        } else {
            (None, None, None)
        };
        let rate = match args.method {
            Method::Analytic => Some(analytic),
            Method::Series => Some(series),
            Method::MonteCarlo => mc,
        };
        rows.push(vec![Some(i), Some(analytic), Some(series), mc, mc_se, censored]);
        let mut fields = Map::new();
        fields.insert("rate".into(), json!(rate));
        extra.push(fields);
    }
    let mut table = Table::new(&["I_s", "R_analytic", "R_series", "R_mc", "R_mc_stderr", "censored_fraction"], rows);
    table.json_extra = extra;
    Ok(Payload::Table(table))
}

fn coincide(args: &CoincideArgs, seed: u64) -> Result<Payload> {
    let det = FirstPassageDetector::new(args.em, args.sigma)?.with_dead_time(args.dead_time)?;
    let intensities = args.grid.resolve()?;
    let noise = args.noise.model(args.sigma)?;
    let pair = CorrelatedBeamPair::new(intensities.first().copied().unwrap_or(0.0), args.correlation, noise)?;
    let config = CoincidenceConfig::new(args.window, args.duration, args.dt, [det, det]).with_warmup(args.warmup);
    let rates = coincidence_curve(&pair, &config, &intensities, SeedSpec::new(seed, 0))?;
    let rows = rates
        .iter()
        .map(|r| vec![Some(r.intensity), Some(r.r1), Some(r.r2), Some(r.r12), Some(r.accidental), Some(r.excess), Some(r.excess_stderr)])
        .collect();
    Ok(Payload::Table(Table::new(&["I_s", "R1", "R2", "R12", "accidental", "excess", "excess_stderr"], rows)))
}

fn verdict(args: &VerdictArgs) -> Result<Payload> {
    Ok(Payload::Record(serde_json::to_value(consistency_verdict(args.r1, args.r12, args.t, args.ratio)?)?))
}

fn fit(args: &FitArgs) -> Result<Payload> {
    let points = load_rate_csv(&args.input)?;
    let model = match args.model {
        ModelArg::Exact => RateModel::Exact,
        ModelArg::Series => RateModel::Series,
    };
    let init = match (args.init_em, args.init_sigma) {
        (Some(e), Some(s)) => Some((e, s)),
        (None, None) => None,
        _ => return Err(Error::invalid("init_em", "give both --init-em and --init-sigma or neither")),
    };
    Ok(Payload::Record(serde_json::to_value(fit_rate_curve(&points, model, init)?)?))
}

fn exit_code(err: &Error) -> i32 {
    if err.is_validation() || matches!(err, Error::Io { .. }) {
        EXIT_USAGE
    } else {
        EXIT_RUNTIME
    }
}

/// Parses `argv` (program name first), runs it, and returns the exit code.
/// Data goes to `out` (or `--out`), diagnostics to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let seed = match resolve_seed(cli.seed.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Command::Sweep(args) = &cli.command {
        return match sweep(args, seed, cli.output) {
            Ok(summary) => {
                let _ = writeln!(out, "{summary}");
                if summary.failed > 0 {
                    let _ = writeln!(err, "error: {} of {} grid points failed; see manifest.json", summary.failed, summary.total);
                    EXIT_RUNTIME
                } else {
                    EXIT_OK
                }
            }
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                exit_code(&e)
            }
        };
    }
    match execute(&cli.command, seed, cli.output) {
        Ok(rendered) => {
            if let Some(path) = &cli.out {
                if let Err(source) = std::fs::write(path, &rendered.bytes) {
                    let _ = writeln!(err, "error: {}: {source}", path.display());
                    return EXIT_RUNTIME;
                }
            } else if out.write_all(&rendered.bytes).is_err() {
                return EXIT_RUNTIME;
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(command: &Command, seed: u64, forced: Option<OutputFormat>) -> Result<Rendered> {
    let name = command.name();
    let (params, payload) = match command {
        Command::Spectrum(a) => (params_json(a), spectrum(a)?),
        Command::FixedWindow(a) => (params_json(a), fixed_window(a)?),
        Command::FirstPassage(a) => (params_json(a), first_passage(a, seed)?),
        Command::Coincide(a) => (params_json(a), coincide(a, seed)?),
        Command::Verdict(a) => (params_json(a), verdict(a)?),
        Command::Fit(a) => (params_json(a), fit(a)?),
        Command::Sweep(_) => unreachable!("sweep is dispatched separately"),
    };
    render(name, seed, params, payload, forced)
}

#[derive(Debug)]
struct SweepSummary {
    total: usize,
    failed: usize,
    manifest: PathBuf,
}

impl std::fmt::Display for SweepSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} grid points, {} failed, manifest {}", self.total, self.failed, self.manifest.display())
    }
}

fn toml_to_arg(key: &str, value: &toml::Value) -> Result<Option<String>> {
    Ok(Some(match value {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(x) => format_number(*x),
        toml::Value::Boolean(true) => return Ok(Some(String::new())),
        toml::Value::Boolean(false) => return Ok(None),
        toml::Value::Array(items) => {
            let parts = items
                .iter()
                .map(|v| toml_to_arg(key, v).map(|s| s.unwrap_or_default()))
                .collect::<Result<Vec<_>>>()?;
            parts.join(",")
        }
        other => {
            return Err(Error::InvalidParameter { name: "config", reason: format!("unsupported value for `{key}`: {other}") });
        }
    }))
}

fn push_flag(argv: &mut Vec<String>, key: &str, value: &toml::Value) -> Result<()> {
    if let Some(v) = toml_to_arg(key, value)? {
        argv.push(format!("--{}", key.replace('_', "-")));
        if !v.is_empty() {
            argv.push(v);
        }
    }
    Ok(())
}

#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    command: String,
    seed: Option<u64>,
    output: Option<String>,
    #[serde(default)]
    params: BTreeMap<String, toml::Value>,
    #[serde(default)]
    grid: BTreeMap<String, Vec<toml::Value>>,
}

/// Cartesian product of the grid axes, last key (alphabetically) fastest.
fn grid_points(axes: &BTreeMap<String, Vec<toml::Value>>) -> Vec<Vec<(&str, &toml::Value)>> {
    let mut points: Vec<Vec<(&str, &toml::Value)>> = vec![Vec::new()];
    for (key, values) in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((key.as_str(), v));
                    q
                })
            })
            .collect();
    }
    points
}

fn sweep(args: &SweepArgs, seed_flag: u64, forced: Option<OutputFormat>) -> Result<SweepSummary> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| Error::Io { path: args.config.clone(), source })?;
    let plan: SweepFile = toml::from_str(&text).map_err(|e| Error::invalid("config", e.to_string()))?;
    if matches!(plan.command.as_str(), "sweep") {
        return Err(Error::invalid("command", "a sweep cannot run `sweep`"));
    }
    if plan.grid.is_empty() || plan.grid.values().any(|v| v.is_empty()) {
        return Err(Error::invalid("grid", "the sweep grid is empty"));
    }
    let seed = plan.seed.unwrap_or(seed_flag);
    let output = match (plan.output.as_deref(), forced) {
        (Some("csv"), _) => Some(OutputFormat::Csv),
        (Some("json"), _) => Some(OutputFormat::Json),
        (Some(other), _) => return Err(Error::invalid("output", format!("expected csv or json (got `{other}`)"))),
        (None, f) => f,
    };
    let output = output.or(match plan.command.as_str() {
        "verdict" | "fit" => None,
        _ => Some(OutputFormat::Csv),
    });

    let points = grid_points(&plan.grid);
    let base = SeedSpec::new(seed, 0);
    let results: Vec<(u64, Value, std::result::Result<Rendered, (i32, String)>)> = points
        .par_iter()
        .enumerate()
        .map(|(k, point)| {
            let point_seed = base.child(k as u64).master_seed;
            let mut argv = vec!["zpfdet".to_string(), "--seed".into(), point_seed.to_string()];
            let mut values = Map::new();
            let mut build = || -> Result<()> {
                argv.push(plan.command.clone());
                for (key, value) in plan.params.iter().map(|(k, v)| (k.as_str(), v)).chain(point.iter().copied()) {
                    push_flag(&mut argv, key, value)?;
                    values.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
                }
                Ok(())
            };
            let outcome = match build() {
                Err(e) => Err((exit_code(&e), e.to_string())),
                Ok(()) => match Cli::try_parse_from(&argv) {
                    Err(e) => Err((EXIT_USAGE, e.render().to_string().trim().to_string())),
                    Ok(cli) => execute(&cli.command, point_seed, output).map_err(|e| (exit_code(&e), e.to_string())),
                },
            };
            (point_seed, Value::Object(values), outcome)
        })
        .collect();

    std::fs::create_dir_all(&args.out_dir).map_err(|source| Error::Io { path: args.out_dir.clone(), source })?;
    let mut entries = Vec::with_capacity(results.len());
    let mut failed = 0;
    for (k, (point_seed, values, outcome)) in results.into_iter().enumerate() {
        let mut entry = json!({ "index": k, "seed": point_seed, "parameters": values });
        match outcome {
            Ok(rendered) => {
                let ext = match rendered.format {
                    OutputFormat::Csv => "csv",
                    OutputFormat::Json => "json",
                };
                let file = format!("{}_{k}.{ext}", plan.command);
                write_file(&args.out_dir.join(&file), &rendered.bytes)?;
                entry["file"] = json!(file);
                entry["status"] = json!("ok");
            }
            Err((code, message)) => {
                failed += 1;
                entry["status"] = json!("error");
                entry["exit_code"] = json!(code);
                entry["error"] = json!(message);
            }
        }
        entries.push(entry);
    }
    let manifest = json!({
        "command": plan.command,
        "seed": seed,
        "params": serde_json::to_value(&plan.params)?,
        "points": entries,
    });
    let manifest_path = args.out_dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write_file(&manifest_path, &bytes)?;
    Ok(SweepSummary { total: points.len(), failed, manifest: manifest_path })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
