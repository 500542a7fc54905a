//! Command-line front end. Exit status: 0 when every invariant holds,
//! 1 on an invariant failure, 2 on a usage or configuration error.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::GeomError;
use crate::gallery;
use crate::immersion::Atlas;
use crate::matspec::{lemma_fuzz, FuzzConfig};
use crate::morse::{tau_by_leaf_formula, tau_by_morse, tau_by_quadrature, LeafOptions, MorseOptions, QuadratureOptions, TypeNumberReport};
use crate::verify::{self, render_table, Check, VerifyOptions};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Schur identity tolerance for `lemma-fuzz`.
const SCHUR_TOL: f64 = 1e-8;
/// Below this ε the switched sphere's flat region makes height functions
/// nearly degenerate, and the Morse average is left out of `--method all`.
const MORSE_EPSILON_MIN: f64 = 0.1;

#[derive(Parser, Debug)]
#[command(name = "codim2", version, about = "Verification of nonnegatively curved immersions in codimension two")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run every invariant suite on an example and print a pass/fail table.
    Verify(VerifyArgs),
    /// Estimate the type numbers τ_k.
    Tau(TauArgs),
    /// Classify sampled points and emit structure rows.
    Classify(ClassifyArgs),
    /// Randomized check of the determinant inequality for PSD pairs.
    LemmaFuzz(FuzzArgs),
    /// Render a JSON report as a table or CSV.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExampleArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(gallery::EXAMPLES))]
    pub example: String,
    /// Collar length for switched-s3, strip half-width for the band examples.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Extra constructor parameters as a JSON object, or @path to a JSON file.
    #[arg(long)]
    pub params: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub example: ExampleArgs,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Directions for the wideness verdict (0 skips it).
    #[arg(long, default_value_t = 64)]
    pub directions: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Method {
    Morse,
    Quadrature,
    Leaf,
    All,
}

#[derive(Args, Debug, Serialize)]
pub struct TauArgs {
    #[command(flatten)]
    pub example: ExampleArgs,
    #[arg(long, value_enum, default_value_t = Method::All)]
    pub method: Method,
    /// Directions for the Morse average.
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    /// Spatial quadrature budget per chart: a node count or `AxB`.
    #[arg(long, default_value = "128x64")]
    pub grid: String,
    /// Gauss–Legendre nodes per constant-index arc of the normal circle.
    #[arg(long, default_value_t = 16)]
    pub theta_nodes: usize,
    /// Nodes per axis for the leaf formula.
    #[arg(long, default_value_t = 12)]
    pub leaf_nodes: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub example: ExampleArgs,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-7)]
    pub rank_tol: f64,
    /// JSON rows.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV projection of the rows.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct FuzzArgs {
    #[arg(long, default_value_t = 2)]
    pub dim_min: usize,
    #[arg(long, default_value_t = 6)]
    pub dim_max: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    /// A JSON file written by verify, tau or classify.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// A failure tagged with the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        match e {
            GeomError::InvalidInput(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `--params`, merges `--epsilon`, and reports JSON errors with line and column.
pub fn example_params(a: &ExampleArgs) -> CliResult<Value> {
    let mut params = match &a.params {
        None => json!({}),
        Some(text) => {
            let (src, body) = match text.strip_prefix('@') {
                Some(path) => (path.to_string(), std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{path}: {e}")))?),
                None => ("--params".to_string(), text.clone()),
            };
            let v: Value = serde_json::from_str(&body).map_err(|e| CliError::Usage(format!("{src}: line {}, column {}: {e}", e.line(), e.column())))?;
            if !v.is_object() {
                return Err(CliError::Usage(format!("{src}: expected a JSON object of parameters")));
            }
            v
        }
    };
    if let Some(eps) = a.epsilon {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(CliError::Usage(format!("--epsilon must be a nonnegative number, got {eps}")));
        }
        params["epsilon"] = json!(eps);
    }
    Ok(params)
}

fn build(a: &ExampleArgs) -> CliResult<(Atlas, Value)> {
    let params = example_params(a)?;
    Ok((gallery::build(&a.example, &params)?, params))
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> CliResult<String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(p) = path {
        std::fs::write(p, &text).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
    }
    Ok(text)
}

fn run_verify(a: &VerifyArgs) -> CliResult<i32> {
    let (atlas, _) = build(&a.example)?;
    let opts = VerifyOptions { samples: a.samples, directions: a.directions, seed: a.seed, ..Default::default() };
    let rep = verify::verify_atlas(&atlas, &opts)?;
    print!("{}", render_table(&rep));
    for (k, v) in &rep.strata {
        println!("  stratum {k}: {v}");
    }
    let text = write_json(&a.out, &rep)?;
    if a.out.is_none() {
        println!("{text}");
    }
    Ok(if rep.passed { EXIT_PASS } else { EXIT_FAIL })
}

/// Parses `N` or `AxB` into a node budget.
pub fn parse_grid(s: &str) -> CliResult<usize> {
    let parts: Vec<&str> = s.split(['x', 'X', '*']).collect();
    let mut total = 1usize;
    for p in &parts {
        let v: usize = p.trim().parse().map_err(|_| CliError::Usage(format!("--grid: `{s}` is not N or AxB")))?;
        if v == 0 {
            return Err(CliError::Usage("--grid entries must be positive".into()));
        }
        total = total.saturating_mul(v);
    }
    Ok(total)
}

/// Invariants every τ report must satisfy, plus agreement between methods.
pub fn tau_checks(atlas: &Atlas, reports: &[TypeNumberReport]) -> Vec<Check> {
    let mut out = Vec::new();
    let n = atlas.n;
    for r in reports {
        let tag = |s: &str| format!("{}:{s}", r.method);
        let bar: f64 = 3.0 * r.stderr.iter().sum::<f64>();
        let sym = (0..=n).map(|k| (r.tau[k] - r.tau[n - k]).abs() - 3.0 * (r.stderr[k] + r.stderr[n - k])).fold(f64::NEG_INFINITY, f64::max);
        out.push(Check::at_most(&tag("symmetry"), sym, 0.0, n + 1).with_detail("max |τ_k − τ_{n−k}| − 3(σ_k + σ_{n−k})"));
        out.push(Check::at_least(&tag("chen_gap"), r.chen_gap, -bar, n + 1));
        let morse = (0..=n).map(|k| r.tau[k] - (atlas.meta.betti[k] as f64 - 3.0 * r.stderr[k])).fold(f64::INFINITY, f64::min);
        out.push(Check::at_least(&tag("morse_inequalities"), morse, 0.0, n + 1).with_detail("min τ_k − (b_k − 3σ_k)"));
        let wide = Check {
            name: tag("wide"),
            measured: r.chen_gap,
            threshold: bar,
            margin: if atlas.meta.expected_wide { bar - r.chen_gap.abs() } else { r.chen_gap.abs() - bar },
            samples: n + 1,
            passed: r.wide == atlas.meta.expected_wide,
            detail: Some(format!("expected wide = {}", atlas.meta.expected_wide)),
        };
        out.push(wide);
    }
    for (i, a) in reports.iter().enumerate() {
        for b in &reports[i + 1..] {
            if a.tau.len() != b.tau.len() {
                continue;
            }
            let worst = (0..a.tau.len()).map(|k| (a.tau[k] - b.tau[k]).abs() - 3.0 * (a.stderr[k] + b.stderr[k])).fold(f64::NEG_INFINITY, f64::max);
            out.push(Check::at_most(&format!("agreement:{}~{}", a.method, b.method), worst, 0.0, a.tau.len()));
        }
    }
    out
}

/// Runs the selected τ estimators and returns their reports.
pub fn tau_reports(atlas: &Atlas, a: &TauArgs, params: &Value) -> CliResult<(Vec<TypeNumberReport>, Vec<String>)> {
    let budget = parse_grid(&a.grid)?;
    let config = json!({ "method": a.method, "samples": a.samples, "grid": a.grid, "budget": budget, "theta_nodes": a.theta_nodes, "leaf_nodes": a.leaf_nodes, "seed": a.seed });
    let target = atlas.meta.tight_target;
    let mut reports = Vec::new();
    let mut notes = Vec::new();
    let near_flat = atlas.name == "switched-s3" && params.get("epsilon").and_then(Value::as_f64).is_some_and(|e| e < MORSE_EPSILON_MIN);
    let want = |m: Method| a.method == m || a.method == Method::All;
    if want(Method::Morse) {
        if a.method == Method::All && near_flat {
            notes.push(format!("Morse average skipped: epsilon below {MORSE_EPSILON_MIN} leaves near-degenerate directions"));
        } else {
            let t = Instant::now();
            let m = tau_by_morse(atlas, a.samples, a.seed, &MorseOptions::default())?;
            notes.push(format!("Morse average: {} pairs, {} rejected directions", m.pairs, m.rejected));
            let cfg = json!({ "common": config.clone(), "pairs": m.pairs, "rejected": m.rejected });
            reports.push(TypeNumberReport::new(&atlas.name, atlas.params.clone(), "MorseAverage", m.tau, m.stderr, target, t.elapsed().as_secs_f64(), cfg));
        }
    }
    if want(Method::Quadrature) {
        let t = Instant::now();
        let q = tau_by_quadrature(atlas, &QuadratureOptions { budget, theta_nodes: a.theta_nodes })?;
        let cfg = json!({ "common": config.clone(), "nodes": q.nodes, "quadrants": q.quadrants });
        reports.push(TypeNumberReport::new(&atlas.name, atlas.params.clone(), "NormalQuadrature", q.tau, q.error, target, t.elapsed().as_secs_f64(), cfg));
    }
    if want(Method::Leaf) {
        let t = Instant::now();
        match tau_by_leaf_formula(atlas, &LeafOptions { nodes: a.leaf_nodes, ..Default::default() }) {
            Ok(l) => {
                let cfg = json!({ "common": config.clone(), "curvature_integrals": l.curvature_integrals, "kappa_range": l.kappa_range, "nodes": l.nodes });
                let n1 = atlas.n + 1;
                reports.push(TypeNumberReport::new(
                    &atlas.name,
                    atlas.params.clone(),
                    "LeafFormula",
                    vec![l.tau; n1],
                    vec![l.error; n1],
                    target,
                    t.elapsed().as_secs_f64(),
                    cfg,
                ));
            }
            Err(GeomError::NotApplicable(why)) if a.method == Method::All => notes.push(format!("leaf formula skipped: {why}")),
            Err(e) => return Err(e.into()),
        }
    }
    Ok((reports, notes))
}

fn run_tau(a: &TauArgs) -> CliResult<i32> {
    let (atlas, params) = build(&a.example)?;
    let (reports, notes) = tau_reports(&atlas, a, &params)?;
    for n in &notes {
        eprintln!("note: {n}");
    }
    let checks = tau_checks(&atlas, &reports);
    for r in &reports {
        let tau: Vec<String> = r.tau.iter().zip(&r.stderr).map(|(t, e)| format!("{t:.4}±{e:.1e}")).collect();
        eprintln!("{:<17} τ = ({}) gap {:+.4} wide {} tight {} [{:.1}s]", r.method, tau.join(", "), r.chen_gap, r.wide, r.tight, r.runtime_s);
    }
    for c in &checks {
        eprintln!("  {:<40} {:>12.4e}  {}", c.name, c.measured, if c.passed { "PASS" } else { "FAIL" });
    }
    let text = if reports.len() == 1 { write_json(&a.out, &reports[0])? } else { write_json(&a.out, &reports)? };
    if a.out.is_none() {
        println!("{text}");
    }
    Ok(if checks.iter().all(|c| c.passed) { EXIT_PASS } else { EXIT_FAIL })
}

/// One row of `classify` output.
#[derive(Clone, Debug, Serialize)]
pub struct ClassRow {
    pub chart: String,
    pub point: Vec<f64>,
    pub stratum: String,
    pub mu: Option<usize>,
    pub nu: Option<usize>,
    #[serde(rename = "C_norm")]
    pub c_norm: Option<f64>,
    #[serde(rename = "wT")]
    pub w_t: Option<f64>,
    pub composition_ok: Option<bool>,
    pub expected: bool,
    pub note: Option<String>,
}

fn run_classify(a: &ClassifyArgs) -> CliResult<i32> {
    let (atlas, _) = build(&a.example)?;
    let samples = verify::sample_points(&atlas, a.samples, a.seed);
    let records = verify::pointwise_records(&atlas, &samples, a.rank_tol);
    let rows = verify::structure_rows(&atlas, &samples, a.rank_tol);
    let mut out = Vec::with_capacity(rows.len());
    for (rec, (s, rep)) in records.iter().zip(rows) {
        let expected = verify::stratum_expected(&atlas, rec);
        let stratum = verify::strata_histogram(std::slice::from_ref(rec)).into_keys().next().unwrap_or_default();
        let chart = atlas.charts[s.chart].label.clone();
        out.push(match rep {
            Ok(r) => ClassRow {
                chart,
                point: s.u,
                stratum,
                mu: Some(r.mu),
                nu: Some(r.nu),
                c_norm: r.c_norm,
                w_t: r.w_t,
                composition_ok: r.composition_ok,
                expected,
                note: (!r.refusals.is_empty()).then(|| r.refusals.join("; ")),
            },
            Err(e) => {
                ClassRow { chart, point: s.u, stratum, mu: None, nu: None, c_norm: None, w_t: None, composition_ok: None, expected, note: Some(e.to_string()) }
            }
        });
    }
    for (k, v) in verify::strata_histogram(&records) {
        eprintln!("{k}: {v}");
    }
    if let Some(p) = &a.csv {
        let rows: Vec<Value> = out.iter().map(|r| json!(r)).collect();
        std::fs::write(p, to_csv(&rows)).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
    }
    let text = write_json(&a.out, &out)?;
    if a.out.is_none() {
        println!("{text}");
    }
    let bad = out.iter().filter(|r| !r.expected).count();
    if bad > 0 {
        eprintln!("{bad} of {} points outside the expected strata ({})", out.len(), atlas.meta.expected_strata);
    }
    Ok(if bad == 0 { EXIT_PASS } else { EXIT_FAIL })
}

fn run_fuzz(a: &FuzzArgs) -> CliResult<i32> {
    if a.dim_min < 1 || a.dim_max < a.dim_min {
        return Err(CliError::Usage(format!("need 1 ≤ --dim-min ≤ --dim-max, got {}..{}", a.dim_min, a.dim_max)));
    }
    if !(a.tol > 0.0) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let cfg = FuzzConfig { trials: a.trials, dim_min: a.dim_min, dim_max: a.dim_max, seed: a.seed, tol: a.tol, ..Default::default() };
    let t = Instant::now();
    let rep = lemma_fuzz(&cfg);
    let mut v = json!(rep);
    v["runtime_s"] = json!(t.elapsed().as_secs_f64());
    v["version"] = json!(crate::VERSION);
    v["config"] = json!(cfg);
    println!("{}", write_json(&a.out, &v)?);
    let ok = rep.failures == 0 && rep.classifier_mismatches == 0 && rep.schur_max_residual <= SCHUR_TOL;
    Ok(if ok { EXIT_PASS } else { EXIT_FAIL })
}

fn csv_cell(v: &Value) -> String {
    let s = match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(a) => a.iter().map(csv_cell).collect::<Vec<_>>().join(" "),
        other => other.to_string(),
    };
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

/// CSV projection of an array of flat JSON objects; columns in first-seen order.
pub fn to_csv(rows: &[Value]) -> String {
    let mut cols: Vec<String> = Vec::new();
    for r in rows {
        if let Some(o) = r.as_object() {
            for k in o.keys() {
                if !cols.contains(k) {
                    cols.push(k.clone());
                }
            }
        }
    }
    let mut out = cols.join(",");
    out.push('\n');
    for r in rows {
        let line: Vec<String> = cols.iter().map(|c| csv_cell(r.get(c).unwrap_or(&Value::Null))).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

/// The tabular part of any report this tool writes.
fn report_rows(v: &Value) -> Vec<Value> {
    if let Some(checks) = v.get("checks").and_then(Value::as_array) {
        return checks.clone();
    }
    match v {
        Value::Array(a) => a.clone(),
        Value::Object(_) => vec![v.clone()],
        _ => Vec::new(),
    }
}

fn run_report(a: &ReportArgs) -> CliResult<i32> {
    let text = std::fs::read_to_string(&a.input).map_err(|e| CliError::Usage(format!("{}: {e}", a.input.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: line {}, column {}: {e}", a.input.display(), e.line(), e.column())))?;
    let rows = report_rows(&v);
    let csv = to_csv(&rows);
    match &a.csv {
        Some(p) => std::fs::write(p, &csv).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?,
        None => print!("{csv}"),
    }
    // A stored verify report remembers its verdict; a tau report is re-checked for basic sanity.
    let passed = match v.get("passed").and_then(Value::as_bool) {
        Some(p) => p,
        None => rows.iter().all(|r| r.get("passed").and_then(Value::as_bool).unwrap_or(true)),
    };
    Ok(if passed { EXIT_PASS } else { EXIT_FAIL })
}

pub fn dispatch(cli: &Cli) -> i32 {
    let r = match &cli.command {
        Command::Verify(a) => run_verify(a),
        Command::Tau(a) => run_tau(a),
        Command::Classify(a) => run_classify(a),
        Command::LemmaFuzz(a) => run_fuzz(a),
        Command::Report(a) => run_report(a),
    };
    match r {
        Ok(code) => code,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_FAIL
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            code
        }
    }
}
