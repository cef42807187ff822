//! Command-line surface: `solve`, `verify`, `sweep`, `envelopes`, `constants`
//! and `export`, with JSON, CSV and plain-text output.
//!
//! Exit status is 0 on success, 1 on a usage or input error and 2 when a
//! solve does not converge or a verification check fails.

use crate::banach::norm_weights;
use crate::combinatorics::count_comparison;
use crate::dynamics::{extract_delta_at, residual};
use crate::envelopes::{slot, Coupling, EnvelopeSet, GreenSequence, STABILITY_LAMBDA_MAX};
use crate::error::Error;
use crate::ext::ExtScalar;
use crate::solver::{empirical_contraction, solve, sweep, ClosurePolicy, SolveOptions, StartPolicy, SweepEntry};
use crate::verify::{
    appendix_inequality_functions, contraction_constants, coupling_grid, run_all, terminal_constants,
    ContractionConstants, TerminalConstants, VerifySummary,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Version of the JSON layout.
pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "PHI4_SEED";
/// Exit status on success.
pub const EXIT_OK: i32 = 0;
/// Exit status on usage or input errors.
pub const EXIT_USAGE: i32 = 1;
/// Exit status on non-convergence or failed checks.
pub const EXIT_FAILURE: i32 = 2;

/// Output encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// JSON document with a `schema` field.
    Json,
    /// Comma-separated values with a header line.
    Csv,
    /// Aligned plain text.
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "phi4", version, about = "Fixed point of the zero-dimensional phi^4 equations of motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Iterate the contractive map to the fixed point at one coupling.
    Solve(SolveArgs),
    /// Run every certification check at one coupling.
    Verify(VerifyArgs),
    /// Solve over a grid of couplings.
    Sweep(SweepArgs),
    /// Tabulate splitting envelopes, extremal and fundamental sequences.
    Envelopes(EnvelopeArgs),
    /// Print the contraction constants.
    Constants(ConstantsArgs),
    /// Write plot-ready tables.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args)]
struct SolverFlags {
    /// Odd truncation order N.
    #[arg(long = "n", default_value_t = 41)]
    n_max: usize,
    /// Tolerance on the weighted distance of successive iterates.
    #[arg(long, default_value_t = 1e-12, allow_negative_numbers = true)]
    tol: f64,
    /// Tolerance on the residual of the equations of motion.
    #[arg(long, default_value_t = 1e-10, allow_negative_numbers = true)]
    residual_tol: f64,
    /// Iteration budget.
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Top orders excluded from convergence decisions.
    #[arg(long, default_value_t = 4)]
    buffer: usize,
    /// Truncation closure: strict, zero_tail, envelope_max, envelope_min or bracket.
    #[arg(long, default_value = "bracket")]
    closure: String,
    /// Starting sequence: fundamental, delta_max or delta_min.
    #[arg(long, default_value = "fundamental")]
    start: String,
}

#[derive(Debug, Clone, Args)]
struct OutputFlags {
    /// Output encoding.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file, written atomically; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Coupling constant.
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Coupling constant.
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    /// Print the contraction-constant table.
    #[arg(long)]
    emit_constants: bool,
    /// Let shape claims on the bounding apparatus decide the exit status too.
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Comma-separated couplings.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    lambdas: Vec<f64>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Output encoding.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file, written atomically; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EnvelopeArgs {
    /// Coupling constant.
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    /// Odd truncation order N.
    #[arg(long = "n", default_value_t = 41)]
    n_max: usize,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Debug, Args)]
struct ConstantsArgs {
    /// Coupling constant.
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    /// Last order of the recursion.
    #[arg(long = "n", default_value_t = 41)]
    n_max: usize,
    /// Largest coupling of the grid for the terminal constants.
    #[arg(long, default_value_t = STABILITY_LAMBDA_MAX, allow_negative_numbers = true)]
    grid_max: f64,
    #[command(flatten)]
    out: OutputFlags,
}

/// Tables available to `export`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Table {
    /// `n, f_L, f_B`.
    Figures,
    /// `n, formula, exact` partition counts.
    Partitions,
    /// Sampled contraction ratios.
    Contraction,
    /// Fixed-point sequence.
    Sequence,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Table to write.
    #[arg(long, value_enum)]
    table: Table,
    /// Coupling constant.
    #[arg(long, default_value_t = STABILITY_LAMBDA_MAX, allow_negative_numbers = true)]
    lambda: f64,
    /// First order of the table.
    #[arg(long, default_value_t = 7)]
    n_lo: usize,
    /// Last order of the table.
    #[arg(long, default_value_t = 4001)]
    n_hi: usize,
    /// Sampled pairs for the contraction table.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Seed of the sampler, overridden by the PHI4_SEED environment variable.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    out: OutputFlags,
}

/// Validated run parameters shared by the commands.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Couplings, one for single-point commands.
    pub lambdas: Vec<f64>,
    /// Solver parameters.
    pub solve: SolveOptions,
    /// Seed of random sampling.
    pub seed: u64,
    /// Output encoding.
    pub format: Format,
    /// Output file.
    pub output: Option<PathBuf>,
}

struct Usage(String);

impl From<Error> for Usage {
    fn from(e: Error) -> Self {
        Usage(e.to_string())
    }
}

impl RunConfig {
    fn build(lambdas: Vec<f64>, flags: &SolverFlags, seed: u64, format: Format, output: Option<PathBuf>) -> Result<Self, Usage> {
        for &l in &lambdas {
            if !(l.is_finite() && l > 0.0) {
                return Err(Usage(format!("lambda must be positive, got {l}")));
            }
        }
        if flags.n_max.is_multiple_of(2) || flags.n_max < 11 {
            return Err(Usage(format!("n must be odd and at least 11, got {}", flags.n_max)));
        }
        if !(flags.tol.is_finite() && flags.tol > 0.0) {
            return Err(Usage(format!("tol must be positive, got {}", flags.tol)));
        }
        if !(flags.residual_tol.is_finite() && flags.residual_tol > 0.0) {
            return Err(Usage(format!("residual-tol must be positive, got {}", flags.residual_tol)));
        }
        if flags.max_iter == 0 {
            return Err(Usage("max-iter must be positive".into()));
        }
        if flags.buffer % 2 == 1 || flags.buffer + 3 > flags.n_max {
            return Err(Usage(format!("buffer must be even and smaller than n - 2, got {}", flags.buffer)));
        }
        let closure: ClosurePolicy = flags.closure.parse().map_err(|_| Usage(format!("closure: unknown value '{}'", flags.closure)))?;
        let start: StartPolicy = flags.start.parse().map_err(|_| Usage(format!("start: unknown value '{}'", flags.start)))?;
        let seed = match std::env::var(SEED_ENV) {
            Ok(text) => text
                .trim()
                .parse()
                .map_err(|_| Usage(format!("{SEED_ENV} must be an unsigned integer, got '{text}'")))?,
            Err(_) => seed,
        };
        Ok(RunConfig {
            lambdas,
            solve: SolveOptions {
                n_max: flags.n_max,
                tol: flags.tol,
                residual_tol: flags.residual_tol,
                max_iter: flags.max_iter,
                buffer: flags.buffer,
                closure,
                start,
                ..SolveOptions::default()
            },
            seed,
            format,
            output,
        })
    }

    fn lambda(&self) -> Result<Coupling, Usage> {
        Ok(Coupling::new(self.lambdas[0])?)
    }
}

/// Formats a float with 17 significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// JSON records `{n, sign, ln_abs, log10_abs, value, delta}` for a sequence.
///
/// `ln_abs` carries the natural-log magnitude as 17-digit decimal text,
/// restored exactly by [`sequence_from_json`].
pub fn sequence_to_json(h: &GreenSequence) -> Value {
    let records: Vec<Value> = h
        .iter()
        .map(|(n, v)| {
            json!({
                "n": n,
                "sign": v.sign(),
                "ln_abs": fmt17(v.logmag()),
                "log10_abs": finite_or_null(v.log10mag()),
                "value": v.to_f64_checked().map_or(Value::Null, |x| json!(x)),
                "delta": extract_delta_at(h, n).map_or(Value::Null, finite_or_null),
            })
        })
        .collect();
    json!({
        "lambda": h.lambda().value(),
        "n_max": h.n_max(),
        "closure": h.closure().tag(),
        "values": records,
    })
}

/// Restores a sequence written by [`sequence_to_json`].
pub fn sequence_from_json(v: &Value) -> Result<GreenSequence, Error> {
    let bad = |what: &str| Error::Domain(format!("malformed sequence JSON: {what}"));
    let lambda = Coupling::new(v["lambda"].as_f64().ok_or_else(|| bad("lambda"))?)?;
    let closure: ClosurePolicy = v["closure"].as_str().ok_or_else(|| bad("closure"))?.parse()?;
    let records = v["values"].as_array().ok_or_else(|| bad("values"))?;
    let mut values = vec![ExtScalar::ZERO; records.len()];
    for r in records {
        let n = r["n"].as_u64().ok_or_else(|| bad("n"))? as usize;
        let sign = r["sign"].as_i64().ok_or_else(|| bad("sign"))? as i8;
        let ln_abs: f64 = r["ln_abs"]
            .as_str()
            .ok_or_else(|| bad("ln_abs"))?
            .parse()
            .map_err(|_| bad("ln_abs"))?;
        if n.is_multiple_of(2) || slot(n) >= values.len() {
            return Err(bad("order out of range"));
        }
        values[slot(n)] = ExtScalar::from_parts(sign, ln_abs);
    }
    GreenSequence::new(lambda, values, closure)
}

fn write_output(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), Usage> {
    match path {
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Usage(format!("output: {e}"))),
        Some(p) => write_atomic(p, text).map_err(|e| Usage(format!("output: {}: {e}", p.display()))),
    }
}

/// Writes `text` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = std::fs::File::create(&tmp).and_then(|mut f| {
        f.write_all(text.as_bytes())?;
        f.sync_all()
    });
    match result.and_then(|_| std::fs::rename(&tmp, path)) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

fn to_json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn report_json(report: &impl serde::Serialize) -> Value {
    serde_json::to_value(report).expect("reports always serialize")
}

fn cmd_solve(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, Usage> {
    let lambda = cfg.lambda()?;
    let (h, report) = solve(lambda, &cfg.solve)?;
    let text = match cfg.format {
        Format::Json => to_json_text(&json!({
            "schema": SCHEMA_VERSION,
            "command": "solve",
            "converged": report.converged,
            "report": report_json(&report),
            "sequence": sequence_to_json(&h),
        })),
        Format::Csv => {
            let mut s = String::from("n,sign,ln_abs,log10_abs,delta,residual\n");
            let res = residual(&h)?;
            for (n, v) in h.iter() {
                let delta = extract_delta_at(&h, n).map_or(String::new(), fmt17);
                let _ = writeln!(s, "{n},{},{},{},{delta},{}", v.sign(), fmt17(v.logmag()), fmt17(v.log10mag()), fmt17(res[slot(n)].value));
            }
            s
        }
        Format::Table => {
            let mut s = format!(
                "lambda={} N={} closure={} start={} iterations={} converged={} final_distance={:.3e} residual_max={:.3e}\n",
                lambda.value(), report.n_max, report.closure, report.start, report.iterations, report.converged, report.final_distance, report.residual_max
            );
            if let Some(b) = &report.bracket {
                let _ = writeln!(s, "bracket width={:.3e} tolerance={:.3e} agrees={}", b.width, b.tolerance, b.agrees);
            }
            for w in &report.warnings {
                let _ = writeln!(s, "warning: {w}");
            }
            let _ = writeln!(s, "{:>4} {:>5} {:>24} {:>24}", "n", "sign", "log10|H^{n+1}|", "delta_n");
            for (n, v) in h.iter() {
                let delta = extract_delta_at(&h, n).map_or("-".into(), |d| format!("{d:.16e}"));
                let _ = writeln!(s, "{n:>4} {:>5} {:>24.16e} {:>24}", v.sign(), v.log10mag(), delta);
            }
            s
        }
    };
    write_output(cfg.output.as_deref(), &text, stdout)?;
    Ok(if report.converged { EXIT_OK } else { EXIT_FAILURE })
}

fn constants_table(c: &ContractionConstants, t: &TerminalConstants) -> String {
    let mut s = format!("contraction constants at lambda={}\n", c.lambda);
    for (name, v) in [
        ("M1", c.m1),
        ("H0^2", c.h0_2),
        ("k1", c.k1),
        ("k1_0", c.k1_0),
        ("k3", c.k3),
        ("k3_0", c.k3_0),
        ("k3+k3_0", c.k3 + c.k3_0),
        ("k5", c.k5),
        ("k5_0", c.k5_0),
        ("k5+k5_0", c.k5 + c.k5_0),
        ("k_sup", c.k_sup),
        ("k0_sup", c.k0_sup),
        ("k_limit 1/11+k1/6", c.k_limit),
        ("k0_limit 1/11+k1_0/6", c.k0_limit),
        ("k_recursion_limit", c.k_recursion_limit),
        ("k0_recursion_limit", c.k0_recursion_limit),
    ] {
        let _ = writeln!(s, "  {name:<22} {v:.6}");
    }
    let _ = writeln!(
        s,
        "terminal constants over (0, {}]: k={:.3} k0={:.3} k+k0={:.3} (recursion: k={:.4} k0={:.4})",
        t.lambda_max, t.k, t.k0, t.k + t.k0, t.k_recursion, t.k0_recursion
    );
    s
}

fn cmd_verify(cfg: &RunConfig, emit_constants: bool, strict: bool, stdout: &mut dyn Write) -> Result<i32, Usage> {
    let lambda = cfg.lambda()?;
    let summary: VerifySummary = run_all(lambda, &cfg.solve)?;
    let passed = summary.passed(strict);
    let text = match cfg.format {
        Format::Json => to_json_text(&json!({
            "schema": SCHEMA_VERSION,
            "command": "verify",
            "strict": strict,
            "passed": passed,
            "summary": report_json(&summary),
        })),
        Format::Csv => {
            let mut s = String::from("name,kind,threshold,status,detail\n");
            for c in &summary.checks {
                let kind = serde_json::to_value(c.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                let thr = c.threshold.map_or(String::new(), fmt17);
                let _ = writeln!(s, "{},{kind},{thr},{},\"{}\"", c.name, c.status, c.detail.replace('"', "'"));
            }
            s
        }
        Format::Table => {
            let mut s = format!("verification at lambda={} N={}\n", summary.lambda, summary.n_max);
            for c in &summary.checks {
                let kind = match c.kind {
                    crate::verify::CheckKind::Certification => "cert",
                    crate::verify::CheckKind::Claim => "claim",
                };
                let thr = c.threshold.map_or("-".to_string(), |t| format!("{t}"));
                let _ = writeln!(s, "{:<8} {:<26} {:<6} lambda<={:<6} {}", c.status.to_string(), c.name, kind, thr, c.detail);
            }
            if emit_constants {
                if let (Some(c), Some(t)) = (&summary.constants, &summary.terminal) {
                    s.push_str(&constants_table(c, t));
                }
            }
            let _ = writeln!(s, "summary: {}", if passed { "all gating checks pass" } else { "gating check failed" });
            s
        }
    };
    write_output(cfg.output.as_deref(), &text, stdout)?;
    Ok(if passed { EXIT_OK } else { EXIT_FAILURE })
}

/// Header of the sweep CSV.
pub const SWEEP_HEADER: &str = "lambda,iterations,final_distance,H2,H4,delta3,delta5,delta7,residual_max,status";

/// Renders sweep rows as CSV.
pub fn sweep_csv(rows: &[SweepEntry]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        match &r.summary {
            Some(m) => {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{}",
                    fmt17(r.lambda),
                    m.report.iterations,
                    fmt17(m.report.final_distance),
                    fmt17(m.h2),
                    fmt17(m.h4),
                    fmt17(m.delta3),
                    fmt17(m.delta5),
                    fmt17(m.delta7),
                    fmt17(m.report.residual_max),
                    r.status.tag()
                );
            }
            None => {
                let _ = writeln!(s, "{},,,,,,,,,{}", fmt17(r.lambda), r.status.tag());
            }
        }
    }
    s
}

fn cmd_sweep(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, Usage> {
    let rows = sweep(&cfg.lambdas, &cfg.solve);
    let text = match cfg.format {
        Format::Csv => sweep_csv(&rows),
        Format::Json => to_json_text(&json!({
            "schema": SCHEMA_VERSION,
            "command": "sweep",
            "rows": report_json(&rows),
        })),
        Format::Table => {
            let mut s = format!("{:>10} {:>6} {:>12} {:>20} {:>12} {:>12}  status\n", "lambda", "iter", "distance", "H2", "delta3", "residual");
            for r in &rows {
                match &r.summary {
                    Some(m) => {
                        let _ = writeln!(s, "{:>10} {:>6} {:>12.3e} {:>20.16} {:>12.6e} {:>12.3e}  {}", r.lambda, m.report.iterations, m.report.final_distance, m.h2, m.delta3, m.report.residual_max, r.status.tag());
                    }
                    None => {
                        let _ = writeln!(s, "{:>10} {}  {}", r.lambda, r.status.tag(), r.error.as_deref().unwrap_or(""));
                    }
                }
            }
            s
        }
    };
    write_output(cfg.output.as_deref(), &text, stdout)?;
    Ok(EXIT_OK)
}

fn cmd_envelopes(lambda: f64, n_max: usize, out: &OutputFlags, stdout: &mut dyn Write) -> Result<i32, Usage> {
    let lambda = Coupling::new(lambda)?;
    if n_max.is_multiple_of(2) || n_max < 5 {
        return Err(Usage(format!("n must be odd and at least 5, got {n_max}")));
    }
    let env = EnvelopeSet::build(lambda, n_max)?;
    let w = norm_weights(lambda, n_max)?;
    let text = match out.format {
        Format::Json => to_json_text(&json!({
            "schema": SCHEMA_VERSION,
            "command": "envelopes",
            "lambda": lambda.value(),
            "d0": env.d0,
            "delta_max": env.delta_max.values(),
            "delta_min": env.delta_min.values(),
            "delta_0": env.delta0.values(),
            "h_max": sequence_to_json(&env.h_max),
            "h_min": sequence_to_json(&env.h_min),
            "h_0": sequence_to_json(&env.h0),
            "weights_ln": (1..=n_max).step_by(2).map(|n| fmt17(w.get(n).logmag())).collect::<Vec<_>>(),
        })),
        Format::Csv | Format::Table => {
            let sep = if out.format == Format::Csv { "," } else { " " };
            let cols = ["n", "delta_min", "delta_0", "delta_max", "H_min_log10", "H_0_log10", "H_max_log10", "M_log10"];
            let mut s = cols.join(sep);
            s.push('\n');
            for n in (1..=n_max).step_by(2) {
                let row = [
                    n.to_string(),
                    fmt17(env.delta_min.get(n)),
                    fmt17(env.delta0.get(n)),
                    fmt17(env.delta_max.get(n)),
                    fmt17(env.h_min.get(n).log10mag()),
                    fmt17(env.h0.get(n).log10mag()),
                    fmt17(env.h_max.get(n).log10mag()),
                    fmt17(w.get(n).log10mag()),
                ];
                s.push_str(&row.join(sep));
                s.push('\n');
            }
            s
        }
    };
    write_output(out.output.as_deref(), &text, stdout)?;
    Ok(EXIT_OK)
}

fn cmd_constants(args: &ConstantsArgs, stdout: &mut dyn Write) -> Result<i32, Usage> {
    let lambda = Coupling::new(args.lambda)?;
    if !(args.grid_max.is_finite() && args.grid_max > 0.0) {
        return Err(Usage(format!("grid-max must be positive, got {}", args.grid_max)));
    }
    if args.n_max.is_multiple_of(2) || args.n_max < 7 {
        return Err(Usage(format!("n must be odd and at least 7, got {}", args.n_max)));
    }
    let c = contraction_constants(lambda, args.n_max)?;
    let t = terminal_constants(&coupling_grid(args.grid_max, 50))?;
    let text = match args.out.format {
        Format::Json => to_json_text(&json!({
            "schema": SCHEMA_VERSION,
            "command": "constants",
            "constants": report_json(&c),
            "terminal": report_json(&t),
        })),
        Format::Csv => {
            let mut s = String::from("n,k_n,k0_n\n");
            let _ = writeln!(s, "5,{},{}", fmt17(c.k5), fmt17(c.k5_0));
            for ((n, k), (_, k0)) in c.kn.iter().zip(&c.kn_0) {
                let _ = writeln!(s, "{n},{},{}", fmt17(*k), fmt17(*k0));
            }
            s
        }
        Format::Table => constants_table(&c, &t),
    };
    write_output(args.out.output.as_deref(), &text, stdout)?;
    Ok(EXIT_OK)
}

fn cmd_export(args: &ExportArgs, stdout: &mut dyn Write) -> Result<i32, Usage> {
    let cfg = RunConfig::build(vec![args.lambda], &args.solver, args.seed, args.out.format, args.out.output.clone())?;
    let lambda = cfg.lambda()?;
    let mut code = EXIT_OK;
    let text = match args.table {
        Table::Figures => {
            let fig = appendix_inequality_functions(lambda, args.n_lo, args.n_hi)?;
            let mut s = String::from("n,f_L,f_B\n");
            for (n, fl, fb) in &fig.rows {
                let _ = writeln!(s, "{n},{},{}", fmt17(*fl), fmt17(*fb));
            }
            s
        }
        Table::Partitions => {
            let mut s = String::from("n,formula,exact\n");
            for r in count_comparison(args.n_hi.max(7) | 1)? {
                let _ = writeln!(s, "{},{},{}", r.n, fmt17(r.formula), r.exact);
            }
            s
        }
        Table::Contraction => {
            let stats = empirical_contraction(lambda, cfg.solve.n_max, cfg.solve.buffer, args.trials, cfg.seed)?;
            let mut s = format!("# lambda={} seed={} max={} mean={}\ntrial,ratio\n", fmt17(stats.lambda), stats.seed, fmt17(stats.max_ratio), fmt17(stats.mean_ratio));
            for (i, r) in stats.ratios.iter().enumerate() {
                let _ = writeln!(s, "{i},{}", fmt17(*r));
            }
            s
        }
        Table::Sequence => {
            let (h, report) = solve(lambda, &cfg.solve)?;
            if !report.converged {
                code = EXIT_FAILURE;
            }
            let mut s = String::from("n,sign,ln_abs,log10_abs,delta\n");
            for (n, v) in h.iter() {
                let delta = extract_delta_at(&h, n).map_or(String::new(), fmt17);
                let _ = writeln!(s, "{n},{},{},{},{delta}", v.sign(), fmt17(v.logmag()), fmt17(v.log10mag()));
            }
            s
        }
    };
    write_output(cfg.output.as_deref(), &text, stdout)?;
    Ok(code)
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<i32, Usage> {
    match cli.command {
        Command::Solve(a) => {
            let cfg = RunConfig::build(vec![a.lambda], &a.solver, 0, a.out.format, a.out.output)?;
            cmd_solve(&cfg, stdout)
        }
        Command::Verify(a) => {
            let cfg = RunConfig::build(vec![a.lambda], &a.solver, 0, a.out.format, a.out.output)?;
            cmd_verify(&cfg, a.emit_constants, a.strict, stdout)
        }
        Command::Sweep(a) => {
            let cfg = RunConfig::build(a.lambdas, &a.solver, 0, a.format, a.output)?;
            cmd_sweep(&cfg, stdout)
        }
        Command::Envelopes(a) => cmd_envelopes(a.lambda, a.n_max, &a.out, stdout),
        Command::Constants(a) => cmd_constants(&a, stdout),
        Command::Export(a) => cmd_export(&a, stdout),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match dispatch(cli, stdout) {
        Ok(code) => code,
        Err(Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
    }
}

/// Runs the command line of the current process.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
