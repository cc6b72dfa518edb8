//! Command-line front end. Exit codes: 0 pass, 2 scientific failure, 1 usage.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convergence::{
    pointwise_trace, required_exponent, sample_points, sequence_applicable, Requirement, Theorem,
    TimeSequence, DEFAULT_SEED, DEFAULT_TRACE_POINTS, DEFAULT_TRACE_TERMS,
};
use crate::error::{Error, Result};
use crate::multiplier::{certify, MultiplierSpec, ScanPolicy, SweepEntry};
use crate::phase::PhaseLaw;
use crate::propagator::{evaluate, evaluate_shifted, ShiftSpec};
use crate::spectral::{sidecar_path, GridParams, SobolevIndex, SpectralField, DEFAULT_GRID};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "schrodinger-conv",
    version,
    about = "Multiplier envelopes and convergence experiments for e^{it gamma(|xi|)}"
)]
pub struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    #[arg(long, default_value_t = DEFAULT_SEED, global = true)]
    pub seed: u64,
    /// Frequency grid as `n,xi_max,dxi`.
    #[arg(long, value_parser = parse_grid, global = true)]
    pub grid: Option<GridParams>,
    /// Skip parameter range checks. Envelope formulas are unchanged.
    #[arg(long, global = true)]
    pub unsafe_params: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify sup|m| <= C * envelope over a delta sweep.
    BoundCheck(SweepArgs),
    /// Fit the log-log slope of sup|m| against delta.
    RateFit(SweepArgs),
    /// Decide whether a time sequence meets a convergence condition.
    SeqCheck(SeqArgs),
    /// Evaluate the propagated field at points and times.
    Propagate(PropagateArgs),
    /// Partial sums of |h_k(x)|^2 at sample points.
    Trace(TraceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Power,
    PowerShift,
    Gamma,
    GammaShift,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub s: f64,
    #[arg(long)]
    pub a: Option<f64>,
    /// Phase law for the gamma families, e.g. `power:a=0.5`, `quartic`.
    #[arg(long, value_parser = parse_law)]
    pub gamma: Option<PhaseLaw>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Geometric sweep `start:end`.
    #[arg(long, default_value = "1e-2:1e-6")]
    pub deltas: String,
    #[arg(long, default_value_t = 4)]
    pub per_decade: usize,
}

#[derive(Debug, Args)]
pub struct SeqArgs {
    /// power-smooth, power, power-shift-sub, power-shift-super, gamma,
    /// gamma-shift, boussinesq, fourth-order
    #[arg(long)]
    pub theorem: String,
    #[arg(long)]
    pub s: f64,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long, value_parser = parse_law)]
    pub gamma: Option<PhaseLaw>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// `power:p=2`, `geometric:r=0.5` or `explicit:t1,t2,...`
    #[arg(long, value_parser = parse_sequence)]
    pub sequence: TimeSequence,
}

#[derive(Debug, Args)]
pub struct PropagateArgs {
    /// Field CSV (`xi_1,...,xi_n,re,im`); a `.json` sidecar overrides `--grid`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_law)]
    pub law: PhaseLaw,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Comma-separated times.
    #[arg(long, default_value = "0")]
    pub times: String,
    /// Points separated by `;`, coordinates by `,`. Defaults to the origin.
    #[arg(long)]
    pub points: Option<String>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long, value_parser = parse_law)]
    pub law: PhaseLaw,
    #[arg(long)]
    pub s: f64,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_parser = parse_sequence)]
    pub sequence: TimeSequence,
    #[arg(long, default_value_t = DEFAULT_TRACE_TERMS)]
    pub terms: usize,
    /// Number of random sample points in [-pi, pi]^n.
    #[arg(long, default_value_t = DEFAULT_TRACE_POINTS)]
    pub points: usize,
    /// Field CSV; a seeded random field on `--grid` when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

fn parse_grid(s: &str) -> std::result::Result<GridParams, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected n,xi_max,dxi".into());
    }
    let n = parts[0]
        .trim()
        .parse::<usize>()
        .map_err(|e| e.to_string())?;
    let xi_max = parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let dxi = parts[2].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let params = GridParams { n, xi_max, dxi };
    params.build().map_err(|e| e.to_string())?;
    Ok(params)
}

fn parse_law(s: &str) -> std::result::Result<PhaseLaw, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_sequence(s: &str) -> std::result::Result<TimeSequence, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// `start:end` sampled geometrically at `per_decade` points per decade,
/// endpoints included. A single value is a one-point sweep.
pub fn parse_delta_sweep(spec: &str, per_decade: usize) -> Result<Vec<f64>> {
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .ok()
            .filter(|d| d.is_finite() && *d > 0.0)
            .ok_or_else(|| Error::invalid(format!("bad delta {v:?}")))
    };
    let Some((a, b)) = spec.split_once(':') else {
        return Ok(vec![num(spec)?]);
    };
    if per_decade == 0 {
        return Err(Error::invalid("--per-decade must be positive"));
    }
    let (la, lb) = (num(a)?.log10(), num(b)?.log10());
    let steps = ((lb - la).abs() * per_decade as f64).round().max(1.0) as usize;
    Ok((0..=steps)
        .map(|i| 10f64.powf(la + (lb - la) * i as f64 / steps as f64))
        .collect())
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad {what} {v:?}")))
        })
        .collect()
}

struct Output<'a> {
    path: Option<&'a Path>,
    format: Format,
    stdout: &'a mut dyn Write,
}

impl Output<'_> {
    fn emit<T: Serialize>(
        &mut self,
        value: &T,
        csv: impl FnOnce(&mut Vec<u8>) -> Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        match self.format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut buf, value)?;
                buf.push(b'\n');
            }
            Format::Csv => csv(&mut buf)?,
        }
        match self.path {
            Some(p) => crate::io::write_atomic(p, &buf),
            None => Ok(self.stdout.write_all(&buf)?),
        }
    }
}

fn sweep_csv(buf: &mut Vec<u8>, rows: &[SweepEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["delta", "sup", "envelope", "ratio"])?;
    for e in rows {
        w.write_record([
            e.delta.to_string(),
            e.sup.to_string(),
            e.envelope.to_string(),
            e.ratio.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn build_spec(args: &SweepArgs, unsafe_params: bool) -> Result<MultiplierSpec> {
    let shift = matches!(args.family, FamilyArg::PowerShift | FamilyArg::GammaShift);
    let power = matches!(args.family, FamilyArg::Power | FamilyArg::PowerShift);
    if args.beta.is_some() && !shift {
        return Err(Error::invalid(
            "--beta only applies to power-shift and gamma-shift",
        ));
    }
    if args.a.is_some() && !power {
        return Err(Error::invalid("--a only applies to power and power-shift"));
    }
    if args.gamma.is_some() && power {
        return Err(Error::invalid(
            "--gamma only applies to gamma and gamma-shift",
        ));
    }
    let need_a = || {
        args.a
            .ok_or_else(|| Error::invalid("--a is required for this family"))
    };
    let need_beta = || {
        args.beta
            .ok_or_else(|| Error::invalid("--beta is required for this family"))
    };
    let need_law = || {
        args.gamma
            .clone()
            .ok_or_else(|| Error::invalid("--gamma is required for this family"))
    };
    // δ is replaced per sweep point; any admissible value works here
    let delta = 1e-2;
    let spec = match args.family {
        FamilyArg::Power => MultiplierSpec::power(args.s, need_a()?, delta)?,
        FamilyArg::PowerShift => {
            MultiplierSpec::power_shift(args.s, need_a()?, need_beta()?, delta)?
        }
        FamilyArg::Gamma => MultiplierSpec::gamma(args.s, need_law()?, delta)?,
        FamilyArg::GammaShift => {
            MultiplierSpec::gamma_shift(args.s, need_law()?, need_beta()?, delta)?
        }
    }
    .with_unsafe_params(unsafe_params);
    // surfaces hypothesis violations before any scan starts
    spec.envelope()?;
    Ok(spec)
}

fn cmd_bound_check(
    args: &SweepArgs,
    cli: &Cli,
    out: &mut Output,
    err: &mut dyn Write,
) -> Result<bool> {
    let spec = build_spec(args, cli.unsafe_params)?;
    let deltas = parse_delta_sweep(&args.deltas, args.per_decade)?;
    let cert = certify(&spec, &deltas, &ScanPolicy::default())?;
    out.emit(&cert, |buf| sweep_csv(buf, &cert.delta_sweep))?;
    let _ = writeln!(
        err,
        "{}: max ratio {:.4}, drift {:.4} -> {}",
        cert.family,
        cert.max_ratio(),
        cert.drift(),
        if cert.pass { "pass" } else { "FAIL" }
    );
    Ok(cert.pass)
}

fn cmd_rate_fit(
    args: &SweepArgs,
    cli: &Cli,
    out: &mut Output,
    err: &mut dyn Write,
) -> Result<bool> {
    let spec = build_spec(args, cli.unsafe_params)?;
    let deltas = parse_delta_sweep(&args.deltas, args.per_decade)?;
    let report = crate::convergence::rate_fit(&spec, &deltas, &ScanPolicy::default())?;
    out.emit(&report, |buf| sweep_csv(buf, &report.points))?;
    let _ = writeln!(
        err,
        "slope {:.4} (theory {:.4}, residual {:.2e}) -> {}",
        report.fitted_slope,
        report.theoretical_slope,
        report.residual,
        if report.pass { "pass" } else { "FAIL" }
    );
    Ok(report.pass)
}

#[derive(Serialize)]
struct SeqReport {
    theorem: String,
    sequence: String,
    form: &'static str,
    q: Option<f64>,
    decision: crate::convergence::Verdict,
    reason: String,
}

fn cmd_seq_check(args: &SeqArgs, out: &mut Output, err: &mut dyn Write) -> Result<bool> {
    let sel = Theorem::from_parts(&args.theorem, args.s, args.a, args.beta, args.gamma.clone())?;
    let req = required_exponent(&sel)?;
    let (form, q) = match &req {
        Requirement::PowerSum { q } => ("power-sum", Some(*q)),
        Requirement::GammaSum(_) => ("gamma-sum", None),
    };
    let d = sequence_applicable(&args.sequence, &sel);
    let report = SeqReport {
        theorem: sel.name().to_string(),
        sequence: args.sequence.to_string(),
        form,
        q,
        decision: d.decision,
        reason: d.reason,
    };
    out.emit(&report, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["theorem", "sequence", "form", "q", "decision", "reason"])?;
        let decision = serde_json::to_value(report.decision)?;
        w.write_record([
            report.theorem.as_str(),
            report.sequence.as_str(),
            report.form,
            &report.q.map(|q| q.to_string()).unwrap_or_default(),
            decision.as_str().unwrap_or_default(),
            report.reason.as_str(),
        ])?;
        w.flush()?;
        Ok(())
    })?;
    let _ = writeln!(err, "{}: {:?}", report.theorem, report.decision);
    Ok(report.decision.is_yes())
}

fn load_field(path: &Path, grid: Option<GridParams>) -> Result<SpectralField> {
    if sidecar_path(path).exists() {
        SpectralField::load(path)
    } else {
        SpectralField::read_csv(std::fs::File::open(path)?, grid.unwrap_or(DEFAULT_GRID))
    }
}

#[derive(Serialize)]
struct Sample {
    t: f64,
    x: Vec<f64>,
    re: f64,
    im: f64,
}

fn cmd_propagate(args: &PropagateArgs, cli: &Cli, out: &mut Output) -> Result<bool> {
    let times = parse_list(&args.times, "time")?;
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::invalid(format!("time {t} must be finite and >= 0")));
    }
    let f = load_field(&args.input, cli.grid)?;
    let n = f.dim();
    let points = match &args.points {
        Some(p) => p
            .split(';')
            .map(|pt| parse_list(pt, "coordinate"))
            .collect::<Result<Vec<_>>>()?,
        None => vec![vec![0.0; n]],
    };
    if points.iter().any(|p| p.len() != n) {
        return Err(Error::invalid(format!("points must have {n} coordinates")));
    }
    let shift = args
        .beta
        .map(|b| ShiftSpec::along_first_axis(b, n))
        .transpose()?;
    let mut samples = Vec::with_capacity(times.len() * points.len());
    for &t in &times {
        for x in &points {
            let v = match &shift {
                Some(sh) => evaluate_shifted(&f, &args.law, t, sh, x)?,
                None => evaluate(&f, &args.law, t, x)?,
            };
            samples.push(Sample {
                t,
                x: x.clone(),
                re: v.re,
                im: v.im,
            });
        }
    }
    out.emit(&samples, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend(["re".to_string(), "im".to_string()]);
        w.write_record(&header)?;
        for s in &samples {
            let mut row = vec![s.t.to_string()];
            row.extend(s.x.iter().map(f64::to_string));
            row.extend([s.re.to_string(), s.im.to_string()]);
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(true)
}

fn cmd_trace(args: &TraceArgs, cli: &Cli, out: &mut Output, err: &mut dyn Write) -> Result<bool> {
    let s = SobolevIndex::new(args.s)?;
    let f = match &args.input {
        Some(p) => load_field(p, cli.grid)?,
        None => {
            let grid = cli.grid.unwrap_or(DEFAULT_GRID).build()?;
            SpectralField::random(grid, &mut ChaCha8Rng::seed_from_u64(cli.seed))
        }
    };
    let shift = args
        .beta
        .map(|b| ShiftSpec::along_first_axis(b, f.dim()))
        .transpose()?;
    let points = sample_points(f.dim(), args.points, cli.seed.wrapping_add(1));
    let trace = pointwise_trace(
        &f,
        &args.law,
        shift.as_ref(),
        &args.sequence,
        s,
        &points,
        args.terms,
    )?;
    out.emit(&trace, |buf| trace.write_csv(buf))?;
    let tail = trace.max_tail();
    let _ = writeln!(
        err,
        "{}: K = {}, max tail {:.3e}",
        trace.theorem, trace.terms, tail
    );
    Ok(tail.is_finite())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
        }
    };
    let mut out = Output {
        path: cli.out.as_deref(),
        format: cli.format,
        stdout,
    };
    let result = match &cli.command {
        Command::BoundCheck(a) => cmd_bound_check(a, &cli, &mut out, stderr),
        Command::RateFit(a) => cmd_rate_fit(a, &cli, &mut out, stderr),
        Command::SeqCheck(a) => cmd_seq_check(a, &mut out, stderr),
        Command::Propagate(a) => cmd_propagate(a, &cli, &mut out),
        Command::Trace(a) => cmd_trace(a, &cli, &mut out, stderr),
    };
    match result {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}
