//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failed verification or unusable bound,
//! 2 bad input, 3 non-summable envelope, 4 enumeration budget exceeded,
//! 5 I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::classes::Budget;
use crate::envelope::{
    bgg09_upper, exponential_closed_bounds, power_law_closed_bounds, single_letter_interval, Envelope,
    SingleLetterOptions,
};
use crate::error::{Error, Result};
use crate::iid_small::{iid_exact, iid_lower_chain, iid_upper_bound, SmallAlphabetQuery};
use crate::lemma_checks::{run_suite, CheckReport, Suite};
use crate::par;
use crate::poisson_class::{closed_form_bounds_bounded_poisson, shtarkov_bounded_poisson, BoundedPoissonClass};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_NOT_SUMMABLE: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_IO: i32 = 5;

/// Header of `sweep` output.
pub const SWEEP_HEADER: &str = "n,lower_bits,upper_bits,method,truncation_bits";

#[derive(Debug, Parser)]
#[command(name = "shtarkov", version, about = "Worst-case redundancy of distribution classes")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Redundancy of all Poisson distributions with mean at most lambda.
    PoissonClass {
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[command(flatten)]
        fmt: Format,
    },
    /// Redundancy bounds for an envelope class.
    Envelope {
        /// JSON envelope description.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: u64,
        /// Bound to compute; all applicable ones when omitted.
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[command(flatten)]
        fmt: Format,
    },
    /// iid sequences over a k-letter alphabet.
    Iid {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: u64,
        /// Exact value by type enumeration (the default when no flag is given).
        #[arg(long)]
        exact: bool,
        /// Upper and lower chain values.
        #[arg(long)]
        bounds: bool,
        #[command(flatten)]
        fmt: Format,
    },
    /// Run a seeded battery of checks.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Bounds over log-spaced n, written as CSV.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long = "from")]
        n_from: u64,
        #[arg(long = "to")]
        n_to: u64,
        #[arg(long, default_value_t = 9)]
        points: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
struct Format {
    /// Machine-readable output.
    #[arg(long)]
    json: bool,
    /// Report redundancies in nats instead of bits.
    #[arg(long)]
    nats: bool,
}

impl Format {
    fn units(&self) -> Units {
        if self.nats {
            Units::Nats
        } else {
            Units::Bits
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Bits,
    Nats,
}

impl Units {
    fn convert(self, bits: f64) -> f64 {
        match self {
            Units::Bits => bits,
            Units::Nats => bits * std::f64::consts::LN_2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Units::Bits => "bits",
            Units::Nats => "nats",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SingleLetter,
    Bgg09,
    ClosedForm,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::SingleLetter => "single-letter",
            Method::Bgg09 => "bgg09",
            Method::ClosedForm => "closed-form",
        }
    }
}

/// `x` with 7 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..7).contains(&exp) {
        format!("{:.*}", (6 - exp) as usize, x)
    } else {
        format!("{x:.6e}")
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotSummable(_) => EXIT_NOT_SUMMABLE,
        Error::BudgetExceeded { .. } => EXIT_BUDGET,
        Error::Io(_) => EXIT_IO,
        Error::ResidualTooLarge { .. } | Error::CutoffNotFound { .. } => EXIT_FAILED,
        _ => EXIT_PARSE,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let Error::NotSummable(_) = e {
                let _ = writeln!(err, "an envelope class has finite redundancy exactly when the envelope is summable");
            }
            exit_code(&e)
        }
    }
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::PoissonClass { lambda, fmt } => {
            let report = poisson_class_report(lambda, fmt.units())?;
            if fmt.json {
                writeln!(out, "{}", serde_json::to_string(&report).expect("report serializes")).map_err(io)?;
            } else {
                write_poisson_class(out, &report).map_err(io)?;
            }
            Ok(EXIT_OK)
        }
        Command::Envelope { spec, n, method, fmt } => {
            let e = read_envelope(&spec)?;
            let report = envelope_report(&e, n, method, fmt.units())?;
            if fmt.json {
                writeln!(out, "{}", serde_json::to_string(&report).expect("report serializes")).map_err(io)?;
            } else {
                write_envelope(out, &report).map_err(io)?;
            }
            Ok(EXIT_OK)
        }
        Command::Iid { k, n, exact, bounds, fmt } => {
            let budget = Budget::from_env()?;
            let report = iid_report(k, n, exact || !bounds, bounds, budget, fmt.units())?;
            if fmt.json {
                writeln!(out, "{}", serde_json::to_string(&report).expect("report serializes")).map_err(io)?;
            } else {
                write_iid(out, &report).map_err(io)?;
            }
            Ok(EXIT_OK)
        }
        Command::Verify { suite, seed, json } => {
            let reports = run_suite(suite, seed, Budget::from_env()?)?;
            if json {
                writeln!(out, "{}", serde_json::to_string(&reports).expect("reports serialize")).map_err(io)?;
            } else {
                write_verify(out, &reports).map_err(io)?;
            }
            Ok(if reports.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Sweep { spec, n_from, n_to, points, out: path } => {
            let e = read_envelope(&spec)?;
            let rows = sweep_rows(&e, n_from, n_to, points)?;
            write_sweep(&path, &rows)?;
            writeln!(out, "wrote {} rows to {}", rows.len(), path.display()).map_err(io)?;
            Ok(EXIT_OK)
        }
    }
}

fn read_envelope(path: &Path) -> Result<Envelope> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    Envelope::from_json(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonClassReport {
    pub lambda: f64,
    pub units: Units,
    /// Shtarkov sum.
    pub s: f64,
    pub bits: f64,
    /// Closed-form bracket.
    pub lower: f64,
    pub upper: f64,
    /// `Λ·log₂e`, reported for `Λ ≤ 1`.
    pub cap: Option<f64>,
}

pub fn poisson_class_report(lambda: f64, units: Units) -> Result<PoissonClassReport> {
    let c = BoundedPoissonClass::new(lambda)?;
    let v = shtarkov_bounded_poisson(&c);
    let b = closed_form_bounds_bounded_poisson(&c);
    Ok(PoissonClassReport {
        lambda,
        units,
        s: v.shtarkov(),
        bits: units.convert(v.bits()),
        lower: units.convert(b.lower_bits),
        upper: units.convert(b.upper_bits),
        cap: b.cap_bits.map(|x| units.convert(x)),
    })
}

fn write_poisson_class(out: &mut dyn Write, r: &PoissonClassReport) -> std::io::Result<()> {
    let u = r.units.name();
    writeln!(out, "lambda        {}", r.lambda)?;
    writeln!(out, "shtarkov sum  {}", fmt_sig(r.s))?;
    writeln!(out, "redundancy    {} {u}", fmt_sig(r.bits))?;
    writeln!(out, "closed form   [{}, {}] {u}", fmt_sig(r.lower), fmt_sig(r.upper))?;
    if let Some(cap) = r.cap {
        writeln!(out, "linear cap    {} {u}", fmt_sig(cap))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    /// Absent for methods that only give an upper bound.
    pub lower: Option<f64>,
    pub upper: f64,
    pub truncation: f64,
    /// The lower end is asymptotic, not certified at this n.
    pub advisory: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub envelope: serde_json::Value,
    pub n: u64,
    pub units: Units,
    pub l_f: Option<u64>,
    pub results: Vec<MethodResult>,
}

fn applicable_methods(e: &Envelope) -> Vec<Method> {
    match e {
        Envelope::Table { .. } => vec![Method::SingleLetter, Method::Bgg09],
        _ => vec![Method::SingleLetter, Method::Bgg09, Method::ClosedForm],
    }
}

fn method_result(e: &Envelope, n: u64, method: Method) -> Result<(MethodResult, Option<u64>)> {
    Ok(match method {
        Method::SingleLetter => {
            let b = single_letter_interval(e, n, SingleLetterOptions::default())?;
            let iv = b.interval;
            let r = MethodResult { method, lower: Some(iv.lower_bits), upper: iv.upper_bits, truncation: iv.truncation_bits, advisory: false };
            (r, Some(b.l_f))
        }
        Method::Bgg09 => {
            let r = MethodResult { method, lower: None, upper: bgg09_upper(e, n)?, truncation: 0.0, advisory: false };
            (r, None)
        }
        Method::ClosedForm => {
            let b = match *e {
                Envelope::PowerLaw { c, alpha } => power_law_closed_bounds(c, alpha, n)?,
                Envelope::Exponential { c, alpha } => exponential_closed_bounds(c, alpha, n)?,
                Envelope::Table { .. } => {
                    return Err(Error::InvalidParameter("closed-form bounds exist only for power_law and exponential envelopes".into()))
                }
            };
            let r = MethodResult { method, lower: Some(b.lower_bits), upper: b.upper_bits, truncation: 0.0, advisory: b.lower_is_asymptotic };
            (r, None)
        }
    })
}

pub fn envelope_report(e: &Envelope, n: u64, method: Option<Method>, units: Units) -> Result<EnvelopeReport> {
    if !e.is_summable() {
        // Reuse the summability diagnostics for the message.
        e.tail_sum(0)?;
    }
    let methods = method.map_or_else(|| applicable_methods(e), |m| vec![m]);
    let mut l_f = None;
    let mut results = Vec::new();
    for m in methods {
        let (mut r, lf) = method_result(e, n, m)?;
        l_f = l_f.or(lf);
        r.lower = r.lower.map(|x| units.convert(x));
        r.upper = units.convert(r.upper);
        r.truncation = units.convert(r.truncation);
        results.push(r);
    }
    Ok(EnvelopeReport {
        envelope: serde_json::to_value(e).expect("envelope serializes"),
        n,
        units,
        l_f,
        results,
    })
}

fn write_envelope(out: &mut dyn Write, r: &EnvelopeReport) -> std::io::Result<()> {
    let u = r.units.name();
    writeln!(out, "envelope  {}", r.envelope)?;
    writeln!(out, "n         {}", r.n)?;
    if let Some(l) = r.l_f {
        writeln!(out, "l_f       {l}")?;
    }
    writeln!(out, "{:<15}{:>16}{:>16}{:>18}", "method", format!("lower_{u}"), format!("upper_{u}"), format!("truncation_{u}"))?;
    for m in &r.results {
        let lower = m.lower.map_or_else(|| "n/a".to_string(), fmt_sig);
        let mark = if m.advisory { "  (lower is asymptotic)" } else { "" };
        writeln!(out, "{:<15}{:>16}{:>16}{:>18}{mark}", m.method.name(), lower, fmt_sig(m.upper), fmt_sig(m.truncation))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerChainReport {
    pub n_prime: f64,
    pub value: f64,
    /// The same chain evaluated at `Λ = n/(k−1)`.
    pub value_full_length: f64,
    pub advisory: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidReport {
    pub k: usize,
    pub n: u64,
    pub units: Units,
    pub exact: Option<f64>,
    pub upper: Option<f64>,
    pub lower: Option<LowerChainReport>,
}

pub fn iid_report(k: usize, n: u64, exact: bool, bounds: bool, budget: Budget, units: Units) -> Result<IidReport> {
    let q = SmallAlphabetQuery::new(k, n)?;
    let exact = if exact { Some(units.convert(iid_exact(q, budget)?.bits())) } else { None };
    let (upper, lower) = if bounds {
        let lower = iid_lower_chain(q).map(|l| LowerChainReport {
            n_prime: l.n_prime,
            value: units.convert(l.bits),
            value_full_length: units.convert(l.bits_full_length),
            advisory: l.advisory,
        });
        (Some(units.convert(iid_upper_bound(q))), lower)
    } else {
        (None, None)
    };
    Ok(IidReport { k, n, units, exact, upper, lower })
}

fn write_iid(out: &mut dyn Write, r: &IidReport) -> std::io::Result<()> {
    let u = r.units.name();
    writeln!(out, "k={} n={}", r.k, r.n)?;
    if let Some(x) = r.exact {
        writeln!(out, "exact        {} {u}", fmt_sig(x))?;
    }
    if let Some(x) = r.upper {
        writeln!(out, "upper chain  {} {u}", fmt_sig(x))?;
        match &r.lower {
            Some(l) => writeln!(
                out,
                "lower chain  {} {u}  (advisory; n' = {}, with n in place of n': {})",
                fmt_sig(l.value),
                fmt_sig(l.n_prime),
                fmt_sig(l.value_full_length)
            )?,
            None => writeln!(out, "lower chain  n/a (n' <= 0 or k = 1)")?,
        }
    }
    Ok(())
}

fn write_verify(out: &mut dyn Write, reports: &[CheckReport]) -> std::io::Result<()> {
    for r in reports {
        let status = if r.passed { "pass" } else { "FAIL" };
        writeln!(
            out,
            "{status}  {:<36} instances={:<5} worst_violation={:>14} tolerance={:e}",
            r.name,
            r.instances_tested,
            fmt_sig(r.worst_violation),
            r.tolerance
        )?;
        if !r.passed {
            if let Some(o) = &r.offending {
                writeln!(out, "      offending instance: {o}")?;
            }
        }
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    writeln!(out, "{} checks, {failed} failed", reports.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub lower_bits: f64,
    pub upper_bits: f64,
    pub method: String,
    pub truncation_bits: f64,
}

/// `points` values of `n` spaced evenly in `log n` from `from` to `to`, rounded.
pub fn log_spaced(from: u64, to: u64, points: u32) -> Result<Vec<u64>> {
    if from == 0 || from > to {
        return Err(Error::InvalidParameter(format!("need 1 <= from <= to, got from={from}, to={to}")));
    }
    if points == 0 {
        return Err(Error::InvalidParameter("need at least one point".into()));
    }
    if points == 1 {
        return Ok(vec![from]);
    }
    let (a, b) = ((from as f64).ln(), (to as f64).ln());
    Ok((0..points)
        .map(|j| {
            let t = j as f64 / (points - 1) as f64;
            ((a + (b - a) * t).exp().round() as u64).clamp(from, to)
        })
        .collect())
}

/// One row per `(n, method)`, `n` ascending, methods in a fixed order.
/// The only-upper method `bgg09` reports `lower_bits = 0`.
pub fn sweep_rows(e: &Envelope, from: u64, to: u64, points: u32) -> Result<Vec<SweepRow>> {
    if !e.is_summable() {
        e.tail_sum(0)?;
    }
    let ns = log_spaced(from, to, points)?;
    let methods = applicable_methods(e);
    let per_n = par::map_slice(&ns, |&n| {
        methods
            .iter()
            .map(|&m| {
                let (r, _) = method_result(e, n, m)?;
                Ok(SweepRow {
                    n,
                    lower_bits: r.lower.unwrap_or(0.0),
                    upper_bits: r.upper,
                    method: m.name().to_string(),
                    truncation_bits: r.truncation,
                })
            })
            .collect::<Result<Vec<_>>>()
    });
    let mut rows = Vec::new();
    for r in per_n {
        rows.extend(r?);
    }
    Ok(rows)
}

fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(SWEEP_HEADER.split(',')).map_err(io)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            fmt_sig(r.lower_bits),
            fmt_sig(r.upper_bits),
            r.method.clone(),
            fmt_sig(r.truncation_bits),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}
