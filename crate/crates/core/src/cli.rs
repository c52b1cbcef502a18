//! Command-line front end.
//!
//! Exit codes: 0 ok, 2 usage, 3 convergence, 4 I/O, 5 anomalies flagged by
//! `map` (or a non-simple zero from `zeros`, a failing `verify` check).

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critical_line::{pq_table, scan_zeros, stationary_points, LineError, ZeroRow};
use crate::eta_integral::{eta, xi_oracle, QuadratureError, QuadratureSpec, Route};
use crate::export::{write_json, write_rows, ExportError, Format};
use crate::strip_mapper::{
    anomaly_scan, curve_audit, curve_rows, grid_rows, grid_signs, sign_grid, trace_curves, Field, MapError, Region,
};
use crate::theta_series::{g_deriv, g_eval, SeriesError, TruncationPolicy};
use crate::verify::{self, agreement_points};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_ANOMALY: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Convergence(_) => EXIT_CONVERGENCE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<QuadratureError> for CliError {
    fn from(e: QuadratureError) -> Self {
        match e {
            QuadratureError::BadSpec(_) | QuadratureError::OutOfRange(_) => CliError::Usage(e.to_string()),
            QuadratureError::Series(SeriesError::Domain { .. }) => CliError::Usage(e.to_string()),
            _ => CliError::Convergence(e.to_string()),
        }
    }
}

impl From<SeriesError> for CliError {
    fn from(e: SeriesError) -> Self {
        QuadratureError::from(e).into()
    }
}

impl From<LineError> for CliError {
    fn from(e: LineError) -> Self {
        match e {
            LineError::Usage(_) | LineError::NoSignChange { .. } => CliError::Usage(e.to_string()),
            LineError::Coverage { .. } => CliError::Convergence(e.to_string()),
            LineError::Quadrature(q) => q.into(),
            LineError::Series(s) => s.into(),
        }
    }
}

impl From<MapError> for CliError {
    fn from(e: MapError) -> Self {
        match e {
            MapError::Region(_) | MapError::WrongField => CliError::Usage(e.to_string()),
            MapError::Node { source, .. } => source.into(),
            MapError::Line(l) => l.into(),
        }
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "xilab", version, about = "Quadrature, zeros and sign maps of eta(z) = int_0^inf G(t) cosh(zt) dt")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// JSON file with flat keys mirroring the flags; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Absolute quadrature tolerance, within [1e-14, 1e-2].
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output file (a directory for `map`); stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, env = "XILAB_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate eta at one point along every route.
    Eval {
        /// Complex literal such as 0.4+10i.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[command(flatten)]
        common: Common,
    },
    /// Zeros of u(0, y) on (0, y_max].
    Zeros {
        #[arg(long)]
        y_max: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// The p(y), q(y) table.
    Pq {
        /// Ordinates, comma separated.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        y: Vec<f64>,
        /// Half-period intervals; derived from the cutoff when absent.
        #[arg(long)]
        intervals: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Sign grid, v = 0 curves and anomaly report over a region.
    Map {
        /// x0:x1:y0:y1
        #[arg(long)]
        region: Option<String>,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run every audit and report pass/fail.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Route agreement over the fixed sample of 20 points.
    OracleCompare {
        #[command(flatten)]
        common: Common,
    },
    /// Table of t, G(t), G'(t).
    GTable {
        #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
        t_min: f64,
        #[arg(long, default_value_t = 1.0)]
        t_max: f64,
        #[arg(long, default_value_t = 151)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
}

/// Settings after merging the config file with the flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tol: f64,
    pub y_max: f64,
    pub step: f64,
    pub region: Option<String>,
    pub nx: usize,
    pub ny: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            y_max: 100.0,
            step: 0.5,
            region: None,
            nx: 128,
            ny: 512,
            format: Format::Csv,
            out: None,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(1e-14..=1e-2).contains(&self.tol) {
            return Err(CliError::Usage(format!("tol must lie in [1e-14, 1e-2], got {}", self.tol)));
        }
        if !(self.y_max > 0.0 && self.y_max <= 1000.0) {
            return Err(CliError::Usage(format!("y-max must lie in (0, 1000], got {}", self.y_max)));
        }
        if !(self.step > 0.0) {
            return Err(CliError::Usage(format!("step must be positive, got {}", self.step)));
        }
        Ok(())
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec {
            tol: self.tol,
            ..QuadratureSpec::default()
        }
    }

    pub fn region(&self) -> Result<Region, CliError> {
        match &self.region {
            Some(text) => Ok(Region::parse_bounds(text, self.nx, self.ny)?),
            None => {
                let r = Region {
                    nx: self.nx,
                    ny: self.ny,
                    ..Region::default()
                };
                r.validate()?;
                Ok(r)
            }
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(t) = common.tol {
        cfg.tol = t;
    }
    if let Some(f) = common.format {
        cfg.format = f;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

/// Parses `a+bi`, `a-bi`, `a` or `bi`, with optional spaces.
pub fn parse_complex(text: &str) -> Result<Complex64, CliError> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || CliError::Usage(format!("cannot parse complex number '{text}' (expected a+bi)"));
    if s.is_empty() {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix('i') else {
        return match s.parse::<f64>() {
            Ok(re) if re.is_finite() => Ok(Complex64::new(re, 0.0)),
            _ => Err(bad()),
        };
    };
    // split at the last sign that is not an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        other => other,
    };
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = im.trim_start_matches('+').parse().map_err(|_| bad())?;
    if !re.is_finite() || !im.is_finite() {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn create_in(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let p = dir.join(name);
    File::create(&p)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
}

#[derive(Debug, Clone, Serialize)]
struct RouteRow {
    route: &'static str,
    re: f64,
    im: f64,
    bound: f64,
    delta_from_g: f64,
}

fn cmd_eval(z: &str, cfg: &RunConfig) -> Result<i32, CliError> {
    let z = parse_complex(z)?;
    let spec = cfg.quadrature();
    let g = eta(z, &spec, Route::ViaG)?;
    let f = eta(z, &spec, Route::ViaF)?;
    let o = xi_oracle((z + 1.0) / 2.0, &spec)?;
    let rows: Vec<RouteRow> = [("via_g", g), ("via_f", f), ("oracle_xi", o)]
        .into_iter()
        .map(|(route, r)| RouteRow {
            route,
            re: r.value.re,
            im: r.value.im,
            bound: r.abs_error_bound,
            delta_from_g: (r.value - g.value).norm(),
        })
        .collect();
    write_rows(&rows, &["route", "re", "im", "bound", "delta_from_g"], cfg.format, open_out(&cfg.out)?)?;
    Ok(EXIT_OK)
}

fn cmd_zeros(cfg: &RunConfig) -> Result<i32, CliError> {
    let spec = cfg.quadrature();
    let zeros = scan_zeros(0.0, cfg.y_max, cfg.step, 1e-8, &spec)?;
    let rows: Vec<ZeroRow> = zeros.iter().map(ZeroRow::from).collect();
    write_rows(&rows, &["y", "t_zeta", "residual", "u_deriv", "simple"], cfg.format, open_out(&cfg.out)?)?;
    let all_simple = zeros.iter().all(|z| z.simple);
    if !all_simple {
        eprintln!("some zeros did not classify as simple");
    }
    Ok(if all_simple { EXIT_OK } else { EXIT_ANOMALY })
}

fn cmd_pq(ys: &[f64], intervals: Option<usize>, cfg: &RunConfig) -> Result<i32, CliError> {
    let rows = pq_table(ys, intervals, &cfg.quadrature())?;
    write_rows(&rows, &["y", "p", "q", "diff", "scaled_p"], cfg.format, open_out(&cfg.out)?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct MapSummary<'a> {
    region: Region,
    curves: usize,
    audits: Vec<crate::strip_mapper::CurveAudit>,
    anomalies: &'a crate::strip_mapper::AnomalyReport,
}

fn cmd_map(cfg: &RunConfig) -> Result<i32, CliError> {
    let region = cfg.region()?;
    let spec = cfg.quadrature();
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let grid = sign_grid(&region, Field::V, &spec)?;
    let anchors = stationary_points(region.y_min, region.y_max, 0.5, 1e-9, &spec)?;
    let curves = trace_curves(&grid, 1e-10, &anchors, &spec)?;
    let anomalies = anomaly_scan(&curves, &grid);
    match cfg.format {
        Format::Csv => {
            write_rows(&grid_rows(&grid), &["x", "y", "u", "v", "sign_u", "sign_v"], Format::Csv, create_in(&dir, "grid.csv")?)?;
            write_rows(&curve_rows(&curves), &["curve_id", "x", "y", "u", "v"], Format::Csv, create_in(&dir, "curves.csv")?)?;
        }
        Format::Json => {
            write_json(&grid_signs(&grid), create_in(&dir, "grid.json")?)?;
            write_json(&curve_rows(&curves), create_in(&dir, "curves.json")?)?;
        }
    }
    let summary = MapSummary {
        region,
        curves: curves.len(),
        audits: curves.iter().map(curve_audit).collect(),
        anomalies: &anomalies,
    };
    write_json(&summary, create_in(&dir, "anomalies.json")?)?;
    println!(
        "{} curves traced, {} anomalies, output in {}",
        curves.len(),
        anomalies.anomalies.len(),
        dir.display()
    );
    Ok(if anomalies.is_empty() { EXIT_OK } else { EXIT_ANOMALY })
}

fn cmd_verify(cfg: &RunConfig) -> Result<i32, CliError> {
    let report = verify::run(cfg.tol);
    match (&cfg.out, cfg.format) {
        (Some(path), _) => {
            print!("{}", report.to_text());
            let f = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            write_json(&report, BufWriter::new(f))?;
        }
        (None, Format::Json) => write_json(&report, io::stdout().lock())?,
        (None, Format::Csv) => print!("{}", report.to_text()),
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_ANOMALY })
}

#[derive(Debug, Serialize)]
struct CompareRow {
    x: f64,
    y: f64,
    via_g_re: f64,
    via_g_im: f64,
    via_f_re: f64,
    via_f_im: f64,
    oracle_re: f64,
    oracle_im: f64,
    max_delta: f64,
    bound_sum: f64,
}

fn cmd_oracle_compare(cfg: &RunConfig) -> Result<i32, CliError> {
    use rayon::prelude::*;
    let spec = cfg.quadrature();
    let rows: Vec<CompareRow> = agreement_points()
        .par_iter()
        .map(|&z| -> Result<CompareRow, CliError> {
            let g = eta(z, &spec, Route::ViaG)?;
            let f = eta(z, &spec, Route::ViaF)?;
            let o = xi_oracle((z + 1.0) / 2.0, &spec)?;
            let max_delta = (g.value - f.value)
                .norm()
                .max((g.value - o.value).norm())
                .max((f.value - o.value).norm());
            Ok(CompareRow {
                x: z.re,
                y: z.im,
                via_g_re: g.value.re,
                via_g_im: g.value.im,
                via_f_re: f.value.re,
                via_f_im: f.value.im,
                oracle_re: o.value.re,
                oracle_im: o.value.im,
                max_delta,
                bound_sum: g.abs_error_bound + f.abs_error_bound + o.abs_error_bound,
            })
        })
        .collect::<Result<_, _>>()?;
    let header = [
        "x", "y", "via_g_re", "via_g_im", "via_f_re", "via_f_im", "oracle_re", "oracle_im", "max_delta", "bound_sum",
    ];
    write_rows(&rows, &header, cfg.format, open_out(&cfg.out)?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct GRow {
    t: f64,
    g: f64,
    g_prime: f64,
}

fn cmd_g_table(t_min: f64, t_max: f64, n: usize, cfg: &RunConfig) -> Result<i32, CliError> {
    if n < 2 || !(t_max > t_min) {
        return Err(CliError::Usage("need n >= 2 and t_max > t_min".into()));
    }
    let policy = TruncationPolicy::default();
    let rows: Vec<GRow> = (0..n)
        .map(|k| {
            let t = t_min + (t_max - t_min) * k as f64 / (n - 1) as f64;
            Ok(GRow {
                t,
                g: g_eval(t, &policy)?.value,
                g_prime: g_deriv(t, 1, &policy)?.value,
            })
        })
        .collect::<Result<_, CliError>>()?;
    write_rows(&rows, &["t", "g", "g_prime"], cfg.format, open_out(&cfg.out)?)?;
    Ok(EXIT_OK)
}

fn dispatch(command: &Command) -> Result<i32, CliError> {
    let common = match command {
        Command::Eval { common, .. }
        | Command::Zeros { common, .. }
        | Command::Pq { common, .. }
        | Command::Map { common, .. }
        | Command::Verify { common }
        | Command::OracleCompare { common }
        | Command::GTable { common, .. } => common,
    };
    let mut cfg = load_config(common)?;
    match command {
        Command::Zeros { y_max, step, .. } => {
            if let Some(y) = y_max {
                cfg.y_max = *y;
            }
            if let Some(s) = step {
                cfg.step = *s;
            }
        }
        Command::Map { region, nx, ny, .. } => {
            if region.is_some() {
                cfg.region = region.clone();
            }
            if let Some(n) = nx {
                cfg.nx = *n;
            }
            if let Some(n) = ny {
                cfg.ny = *n;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| match command {
        Command::Eval { z, .. } => cmd_eval(z, &cfg),
        Command::Zeros { .. } => cmd_zeros(&cfg),
        Command::Pq { y, intervals, .. } => cmd_pq(y, *intervals, &cfg),
        Command::Map { .. } => cmd_map(&cfg),
        Command::Verify { .. } => cmd_verify(&cfg),
        Command::OracleCompare { .. } => cmd_oracle_compare(&cfg),
        Command::GTable { t_min, t_max, n, .. } => cmd_g_table(*t_min, *t_max, *n, &cfg),
    })
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("1+0i").unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(parse_complex("0 + 28.2694502i").unwrap(), Complex64::new(0.0, 28.2694502));
        assert_eq!(parse_complex("-0.5-3i").unwrap(), Complex64::new(-0.5, -3.0));
        assert_eq!(parse_complex("2.5").unwrap(), Complex64::new(2.5, 0.0));
        assert_eq!(parse_complex("4i").unwrap(), Complex64::new(0.0, 4.0));
        assert_eq!(parse_complex("1e-3+2e+1i").unwrap(), Complex64::new(1e-3, 20.0));
        assert_eq!(parse_complex("1-i").unwrap(), Complex64::new(1.0, -1.0));
        for bad in ["bogus", "", "1+2j", "i+1", "nan"] {
            assert!(parse_complex(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn config_bounds() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.tol = 1e-1;
        assert!(c.validate().is_err());
        c.tol = 1e-10;
        c.y_max = 2000.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_file_keys() {
        let c: RunConfig = serde_json::from_str(r#"{"tol": 1e-8, "y_max": 50, "format": "json", "threads": 2}"#).unwrap();
        assert_eq!(c.tol, 1e-8);
        assert_eq!(c.format, Format::Json);
        assert_eq!(c.nx, 128);
        assert!(serde_json::from_str::<RunConfig>(r#"{"tolerance": 1}"#).is_err());
    }
}
