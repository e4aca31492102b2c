//! Batch front end behind the `modphi-credit` binary.
//!
//! Four subcommands write fixed-column CSV (or JSON) tables:
//!
//! | command  | columns |
//! |----------|---------|
//! | `tail`   | `method,order,x,estimate,std_error,runs,seconds` |
//! | `var-es` | `method,order,alpha,var,es,seconds` |
//! | `cdo`    | `tranche,attach,detach,default_leg_bp,premium_leg_bp,fair_spread_bp,engine,seconds` |
//! | `bench`  | `preset,method,order,n,quantity,parameter,value,seconds` |
//!
//! Numbers carry 12 significant digits, basis points 4 decimals. Exit codes:
//! 2 for configuration errors, 3 for numeric failures, 4 for resource limits.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cdo::{price_tranches, PaymentSchedule, TrancheSpec};
use crate::error::Error;
use crate::estimators::{mixed_pmf, mixed_tail, slice_tail, Method};
use crate::model::{self, Portfolio};
use crate::risk::risk_report;
use crate::specfun::{gauss_hermite, Quadrature};

#[derive(Debug, Parser)]
#[command(name = "modphi-credit", version, about = "Credit portfolio loss estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tail probabilities P{L > x}.
    Tail(TailArgs),
    /// Value at Risk and Expected Shortfall.
    VarEs(VarEsArgs),
    /// Tranche legs and fair spreads.
    Cdo(CdoArgs),
    /// Regenerates a benchmark table on a built-in portfolio.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Output {
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write 0 in the `seconds` column so outputs are byte-stable.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args)]
struct Engine {
    /// Portfolio JSON file.
    #[arg(long)]
    portfolio: PathBuf,
    /// recursive, modpoisson, modcompound, ld, stein-gauss, stein-poisson,
    /// mc, is1 or is2.
    #[arg(long, default_value = "modpoisson")]
    method: String,
    /// Approximation order for modpoisson and modcompound.
    #[arg(long)]
    order: Option<usize>,
    /// Gauss–Hermite nodes for the factor integral.
    #[arg(long, default_value_t = 64)]
    nodes: usize,
    /// Simulation runs.
    #[arg(long, default_value_t = 100_000)]
    runs: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TailArgs {
    #[command(flatten)]
    engine: Engine,
    /// Loss thresholds, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    x: Vec<f64>,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Args)]
struct VarEsArgs {
    #[command(flatten)]
    engine: Engine,
    /// Confidence levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.95,0.99,0.9999,0.999999")]
    alpha: Vec<f64>,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Args)]
struct CdoArgs {
    #[command(flatten)]
    engine: Engine,
    /// JSON array of {attach, detach}; the standard ladder when absent.
    #[arg(long)]
    tranches: Option<PathBuf>,
    /// Maturity in years.
    #[arg(long, default_value_t = 5.0)]
    maturity: f64,
    /// Payments per year.
    #[arg(long, default_value_t = 4)]
    freq: usize,
    /// Continuously compounded rate.
    #[arg(long, default_value_t = 0.03)]
    rate: f64,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Tails of every deterministic method on the grid portfolio.
    TailCurve,
    /// VaR and ES of the exact law, mod-Poisson orders and Monte Carlo.
    VarEs,
    /// Fair spreads of the standard ladder per engine.
    Cdo,
    /// One conditional tail evaluation, recursive against mod-Poisson.
    Timing,
    /// Plain Monte Carlo against importance sampling at a rare threshold.
    Rare,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    preset: Preset,
    #[arg(long, default_value_t = 64)]
    nodes: usize,
    #[arg(long, default_value_t = 10_000)]
    runs: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn from_lib(method: Option<Method>, e: Error) -> Self {
        let code = match e.root() {
            Error::Config { .. } | Error::Incompatible { .. } | Error::InvalidInput(_) | Error::UnsupportedOrder { .. } => 2,
            Error::Resource(_) => 4,
            Error::Io(_) => 1,
            _ => 3,
        };
        let message = match method {
            Some(m) => format!("method {m}: {e}"),
            None => e.to_string(),
        };
        Self { code, message }
    }
}

enum Cell {
    Num(f64),
    Bp(f64),
    Int(u64),
    Text(String),
    Empty,
}

/// Formats with 12 significant digits, trimming trailing zeros.
fn sig12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".to_string() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i32;
    let s = if (-5..12).contains(&exp) {
        format!("{:.*}", (11 - exp).max(0) as usize, v)
    } else {
        let s = format!("{v:.11e}");
        let (m, e) = s.split_once('e').expect("scientific format");
        let m = if m.contains('.') { m.trim_end_matches('0').trim_end_matches('.') } else { m };
        return format!("{m}e{e}");
    };
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: &'static [&'static str]) -> Self {
        Self { header, rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = self.header.join(",");
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row
                        .iter()
                        .map(|c| match c {
                            Cell::Num(v) => sig12(*v),
                            Cell::Bp(v) => format!("{v:.4}"),
                            Cell::Int(v) => v.to_string(),
                            Cell::Text(s) => s.clone(),
                            Cell::Empty => String::new(),
                        })
                        .collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let rows: Vec<serde_json::Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let map = self
                            .header
                            .iter()
                            .zip(row)
                            .map(|(k, c)| {
                                let v = match c {
                                    Cell::Num(v) => serde_json::json!(v),
                                    Cell::Bp(v) => serde_json::json!((v * 1e4).round() / 1e4),
                                    Cell::Int(v) => serde_json::json!(v),
                                    Cell::Text(s) => serde_json::json!(s),
                                    Cell::Empty => serde_json::Value::Null,
                                };
                                (k.to_string(), v)
                            })
                            .collect();
                        serde_json::Value::Object(map)
                    })
                    .collect();
                let mut s = serde_json::to_string_pretty(&rows).expect("serializable");
                s.push('\n');
                s
            }
        }
    }
}

fn order_cell(m: Method) -> Cell {
    m.order().map_or(Cell::Empty, |r| Cell::Int(r as u64))
}

struct Clock {
    enabled: bool,
}

impl Clock {
    fn time<T>(&self, f: impl FnOnce() -> T) -> (T, f64) {
        let start = Instant::now();
        let v = f();
        let s = if self.enabled { start.elapsed().as_secs_f64() } else { 0.0 };
        (v, s)
    }

    fn seconds(&self, s: f64) -> f64 {
        if self.enabled {
            s
        } else {
            0.0
        }
    }
}

fn quadrature(nodes: usize) -> Result<Quadrature, CliError> {
    gauss_hermite(nodes).map_err(|e| CliError::config(format!("invalid --nodes: {e}")))
}

fn load(engine: &Engine) -> Result<(Portfolio, Method, Quadrature), CliError> {
    let port = Portfolio::from_path(&engine.portfolio).map_err(|e| CliError::from_lib(None, e))?;
    let method = Method::parse(&engine.method, engine.order).map_err(|e| CliError::from_lib(None, e))?;
    Ok((port, method, quadrature(engine.nodes)?))
}

fn tail_command(a: &TailArgs, clock: &Clock) -> Result<Table, CliError> {
    let (port, method, quad) = load(&a.engine)?;
    let mut table = Table::new(&["method", "order", "x", "estimate", "std_error", "runs", "seconds"]);
    for &x in &a.x {
        let (est, secs) = clock.time(|| mixed_tail(&port, method, &quad, x, a.engine.runs, a.engine.seed));
        let est = est.map_err(|e| CliError::from_lib(Some(method), e))?;
        table.push(vec![
            Cell::Text(method.name().into()),
            order_cell(method),
            Cell::Num(x),
            Cell::Num(est.mean),
            Cell::Num(est.std_error),
            Cell::Int(if method.is_simulation() { est.runs } else { 0 }),
            Cell::Num(secs),
        ]);
    }
    Ok(table)
}

fn var_es_command(a: &VarEsArgs, clock: &Clock) -> Result<Table, CliError> {
    let (port, method, quad) = load(&a.engine)?;
    let report = risk_report(&port, method, &quad, &a.alpha, a.engine.runs, a.engine.seed)
        .map_err(|e| CliError::from_lib(Some(method), e))?;
    if report.non_monotone {
        eprintln!("warning: method {method}: mixed tail was not monotone and has been regularized");
    }
    let mut table = Table::new(&["method", "order", "alpha", "var", "es", "seconds"]);
    for i in 0..report.alpha.len() {
        table.push(vec![
            Cell::Text(method.name().into()),
            order_cell(method),
            Cell::Num(report.alpha[i]),
            Cell::Int(report.var[i] as u64),
            Cell::Num(report.es[i]),
            Cell::Num(clock.seconds(report.seconds)),
        ]);
    }
    Ok(table)
}

fn cdo_command(a: &CdoArgs, clock: &Clock) -> Result<Table, CliError> {
    let (port, method, quad) = load(&a.engine)?;
    let tranches = match &a.tranches {
        Some(p) => TrancheSpec::list_from_path(p).map_err(|e| CliError::from_lib(None, e))?,
        None => TrancheSpec::standard(),
    };
    let sched = PaymentSchedule::regular(a.maturity, a.freq, a.rate)
        .map_err(|e| CliError::config(format!("invalid schedule: {e}")))?;
    let prices =
        price_tranches(&port, &tranches, &sched, method, &quad).map_err(|e| CliError::from_lib(Some(method), e))?;
    let mut table = Table::new(&[
        "tranche",
        "attach",
        "detach",
        "default_leg_bp",
        "premium_leg_bp",
        "fair_spread_bp",
        "engine",
        "seconds",
    ]);
    for (i, p) in prices.iter().enumerate() {
        table.push(vec![
            Cell::Int(i as u64),
            Cell::Num(p.tranche.attach),
            Cell::Num(p.tranche.detach),
            Cell::Bp(p.default_leg_bp),
            Cell::Bp(p.premium_leg_bp),
            Cell::Bp(p.fair_spread_bp),
            Cell::Text(method.to_string()),
            Cell::Num(clock.seconds(p.seconds)),
        ]);
    }
    Ok(table)
}

const BENCH_HEADER: &[&str] = &["preset", "method", "order", "n", "quantity", "parameter", "value", "seconds"];

struct BenchRow<'a> {
    preset: &'a str,
    method: Method,
    n: usize,
}

impl BenchRow<'_> {
    fn cells(&self, quantity: &str, parameter: String, value: f64, seconds: f64) -> Vec<Cell> {
        vec![
            Cell::Text(self.preset.into()),
            Cell::Text(self.method.name().into()),
            order_cell(self.method),
            Cell::Int(self.n as u64),
            Cell::Text(quantity.into()),
            Cell::Text(parameter),
            Cell::Num(value),
            Cell::Num(seconds),
        ]
    }
}

fn lib<T>(method: Method, r: crate::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::from_lib(Some(method), e))
}

fn bench_command(a: &BenchArgs, clock: &Clock) -> Result<Table, CliError> {
    let quad = quadrature(a.nodes)?;
    let mut table = Table::new(BENCH_HEADER);
    let name = a.preset.to_possible_value().expect("named").get_name().to_string();
    match a.preset {
        Preset::TailCurve => {
            let port = model::grid_benchmark();
            let methods = [
                Method::Recursive,
                Method::ModPoisson { order: 2 },
                Method::ModPoisson { order: 4 },
                Method::ModPoisson { order: 6 },
                Method::ModPoisson { order: 10 },
                Method::LargeDeviations,
                Method::SteinGaussian,
                Method::SteinPoisson,
            ];
            for method in methods {
                let row = BenchRow { preset: &name, method, n: port.n() };
                for x in (10..=120).step_by(10) {
                    let (v, s) = clock.time(|| mixed_tail(&port, method, &quad, x as f64, 0, 0));
                    table.push(row.cells("tail", x.to_string(), lib(method, v)?.mean, s));
                }
            }
        }
        Preset::VarEs => {
            let port = model::grid_benchmark();
            let alphas = [0.95, 0.99, 0.9999, 0.999999];
            let methods = [
                Method::Recursive,
                Method::ModPoisson { order: 4 },
                Method::ModPoisson { order: 6 },
                Method::ModPoisson { order: 10 },
                Method::MonteCarlo,
            ];
            for method in methods {
                let row = BenchRow { preset: &name, method, n: port.n() };
                let r = lib(method, risk_report(&port, method, &quad, &alphas, a.runs, a.seed))?;
                let secs = clock.seconds(r.seconds);
                for (i, &al) in alphas.iter().enumerate() {
                    table.push(row.cells("var", al.to_string(), r.var[i] as f64, secs));
                    table.push(row.cells("es", al.to_string(), r.es[i], secs));
                }
            }
        }
        Preset::Cdo => {
            let port = model::tranche_benchmark();
            let sched = PaymentSchedule::regular(5.0, 4, 0.03).expect("valid schedule");
            let methods = [
                Method::Recursive,
                Method::ModPoisson { order: 4 },
                Method::ModPoisson { order: 6 },
                Method::ModPoisson { order: 10 },
                Method::SteinGaussian,
            ];
            for method in methods {
                let row = BenchRow { preset: &name, method, n: port.n() };
                let prices = lib(method, price_tranches(&port, &TrancheSpec::standard(), &sched, method, &quad))?;
                for p in prices {
                    let label = format!("{}-{}", p.tranche.attach, p.tranche.detach);
                    table.push(row.cells("fair_spread_bp", label, p.fair_spread_bp, clock.seconds(p.seconds)));
                }
            }
        }
        Preset::Timing => {
            for n in [100usize, 1000, 10_000] {
                let port = Portfolio::with_pd_grid(n, 0.3, 0.02, 0.08).expect("valid grid");
                let slice = port.conditional_pd(0.0);
                let sd = slice.pd().iter().map(|p| p * (1.0 - p)).sum::<f64>().sqrt();
                let x = (slice.mean() + 3.0 * sd).floor();
                for method in [Method::Recursive, Method::ModPoisson { order: 6 }] {
                    let row = BenchRow { preset: &name, method, n };
                    let (v, s) = clock.time(|| slice_tail(method, &slice, None, x));
                    table.push(row.cells("slice_tail", x.to_string(), lib(method, v)?, s));
                }
            }
        }
        Preset::Rare => {
            let port = Portfolio::with_pd_grid(50, 0.3, 0.02, 0.08).expect("valid grid");
            let exact = lib(Method::Recursive, mixed_pmf(&port, &quad))?;
            let tails = exact.tails();
            let x = tails.iter().position(|&t| t < 1e-4).unwrap_or(port.max_loss());
            let row = BenchRow { preset: &name, method: Method::Recursive, n: port.n() };
            table.push(row.cells("tail", x.to_string(), tails[x], 0.0));
            for method in [Method::MonteCarlo, Method::ImportanceOneStep, Method::ImportanceTwoStep] {
                let row = BenchRow { preset: &name, method, n: port.n() };
                let (v, s) = clock.time(|| mixed_tail(&port, method, &quad, x as f64, a.runs, a.seed));
                let v = lib(method, v)?;
                table.push(row.cells("tail", x.to_string(), v.mean, s));
                table.push(row.cells("std_error", x.to_string(), v.std_error, s));
            }
        }
    }
    Ok(table)
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("RISK_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::config(format!("RISK_THREADS must be a positive integer, got `{v}`")))?;
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn emit(out: &Output, table: &Table) -> Result<(), CliError> {
    let text = table.render(out.format);
    match &out.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError { code: 1, message: format!("cannot write {}: {e}", path.display()) }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError { code: 1, message: e.to_string() }),
    }
}

/// Parses `args` (including the program name) and runs one command.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                let _ = e.print();
                return Ok(());
            }
            return Err(CliError::config(e.to_string()));
        }
    };
    configure_threads()?;
    let (out, table) = match &cli.command {
        Command::Tail(a) => (&a.out, tail_command(a, &Clock { enabled: !a.out.no_timing })?),
        Command::VarEs(a) => (&a.out, var_es_command(a, &Clock { enabled: !a.out.no_timing })?),
        Command::Cdo(a) => (&a.out, cdo_command(a, &Clock { enabled: !a.out.no_timing })?),
        Command::Bench(a) => (&a.out, bench_command(a, &Clock { enabled: !a.out.no_timing })?),
    };
    emit(out, &table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(120.0), "120");
        assert_eq!(sig12(0.1), "0.1");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(2.0 / 3.0 * 1e-7), "6.66666666667e-8");
        assert_eq!(sig12(-1234.5), "-1234.5");
        assert_eq!(sig12(1e15), "1e15");
    }

    #[test]
    fn csv_rendering() {
        let mut t = Table::new(&["a", "b", "c", "d"]);
        t.push(vec![Cell::Text("x".into()), Cell::Bp(12.345678), Cell::Empty, Cell::Int(3)]);
        assert_eq!(t.render(Format::Csv), "a,b,c,d\nx,12.3457,,3\n");
        let json: serde_json::Value = serde_json::from_str(&t.render(Format::Json)).unwrap();
        assert_eq!(json[0]["d"], 3);
        assert!(json[0]["c"].is_null());
    }

    #[test]
    fn bad_arguments_are_config_errors() {
        let err = run(["modphi-credit", "tail", "--portfolio", "/nonexistent.json", "--x", "3"]).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("portfolio"));
        let err = run(["modphi-credit", "frobnicate"]).unwrap_err();
        assert_eq!(err.code, 2);
    }
}
