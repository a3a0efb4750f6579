//! Command-line front end.
//!
//! Exit codes: 0 positive verdict or verified representation, 1 negative
//! verdict, 2 input error, 3 numerical failure or inconclusive verdict.

mod input;
mod output;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

pub use input::{
    parse_input, parse_str, BlockMeasure, FiniteSpace, FiniteSpec, Input, MomentSpec, ParseError,
    SchemaError, VerifyTarget,
};
pub use output::to_canonical_json;

use crate::error::Error;
use crate::extend::{hb_extend, verify_positive, Rule};
use crate::funcspace::default_eps_schedule;
use crate::measure::{
    approx_below, integrate, represent_via_adapted, seminorm_rho, BinningSpec, Measure,
    RepresentOptions, SigmaAlgebra,
};
use crate::moments::{
    extend_search, haviland_grid_check, positivity_certificate_with_tol, recover_atoms,
    uniform_grid, verify_truncated, MomentSequence, Support, Verdict,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Relative tolerance for moment matching in `represent` and `verify`.
pub const MOMENT_RESIDUAL_TOL: f64 = 1e-7;
/// Absolute tolerance for `|L(g) - ∫ g dμ|` on finite spaces.
pub const MEASURE_RESIDUAL_TOL: f64 = 1e-7;
/// Atoms may sit this far outside the declared support.
pub const SUPPORT_TOL: f64 = 1e-8;

const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    /// Positivity certificate for a moment sequence
    Check,
    /// Recover an atomic representing measure
    Represent,
    /// Search for the next two moments
    ExtendMoments,
    /// Extend a positive functional to the target functions
    HbExtend,
    /// Build a representing measure on a finite space
    BuildMeasure,
    /// Re-check the output of `represent` or `build-measure`
    Verify,
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "momentkit",
    version,
    about = "Positive extensions and moment problems at desk scale"
)]
pub struct Args {
    #[arg(value_enum)]
    pub verb: Verb,
    /// Input JSON documents
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Band around zero for eigenvalue and positivity verdicts
    #[arg(long, default_value_t = 1e-8, value_parser = positive_f64)]
    pub tol: f64,
    /// Grid size for the grid cross-check in `check` (0 disables it)
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    /// Bins for the simple-function approximation diagnostic
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub bins: u64,
    /// Point of the admissible interval chosen at each extension step
    #[arg(long, default_value = "midpoint", value_parser = parse_rule)]
    pub rule: Rule,
    /// Worker threads for multiple inputs
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
    /// Output file, or directory when several inputs are given
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Only parse and validate the inputs
    #[arg(long)]
    pub schema_check_only: bool,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err("must be a positive number".into())
    }
}

fn parse_rule(s: &str) -> Result<Rule, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Result of one input: the rendered document and its exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub json: String,
    pub code: i32,
}

/// Parses arguments from the process, runs, and returns the exit code.
pub fn main_entry() -> i32 {
    init_logging();
    let args = Args::parse();
    run(&args)
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("MOMENTKIT_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

/// Runs every input and writes the outputs; returns the largest exit code.
pub fn run(args: &Args) -> i32 {
    let outcomes = run_all(args);
    let mut code = outcomes.iter().map(|o| o.code).max().unwrap_or(EXIT_OK);
    if let Err(e) = write_outputs(args, &outcomes) {
        log::error!("{e}");
        code = code.max(EXIT_INPUT);
    }
    code
}

fn run_all(args: &Args) -> Vec<Outcome> {
    let n = args.inputs.len();
    let jobs = (args.jobs as usize).clamp(1, n.max(1));
    if jobs == 1 {
        return args.inputs.iter().map(|p| run_one(args, p)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Outcome>>> = Mutex::new(vec![None; n]);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let outcome = run_one(args, &args.inputs[i]);
                slots
                    .lock()
                    .expect("no worker panics while holding the lock")[i] = Some(outcome);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|o| o.expect("every input was processed"))
        .collect()
}

fn write_outputs(args: &Args, outcomes: &[Outcome]) -> std::io::Result<()> {
    use std::io::Write;
    match (&args.output, outcomes.len()) {
        (Some(path), 1) => std::fs::write(path, &outcomes[0].json),
        (Some(dir), _) => {
            std::fs::create_dir_all(dir)?;
            for (input, outcome) in args.inputs.iter().zip(outcomes) {
                let stem = input
                    .file_stem()
                    .map_or("output".into(), |s| s.to_string_lossy());
                std::fs::write(dir.join(format!("{stem}.json")), &outcome.json)?;
            }
            Ok(())
        }
        (None, _) => {
            let mut out = std::io::stdout().lock();
            for outcome in outcomes {
                out.write_all(outcome.json.as_bytes())?;
            }
            out.flush()
        }
    }
}

/// Settings shared by all verbs.
#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub tol: f64,
    pub grid: usize,
    pub bins: usize,
    pub rule: Rule,
    pub schema_check_only: bool,
}

impl From<&Args> for Options {
    fn from(a: &Args) -> Self {
        Self {
            tol: a.tol,
            grid: a.grid,
            bins: a.bins as usize,
            rule: a.rule,
            schema_check_only: a.schema_check_only,
        }
    }
}

impl Default for Options {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            grid: 200,
            bins: 64,
            rule: Rule::Midpoint,
            schema_check_only: false,
        }
    }
}

fn run_one(args: &Args, path: &Path) -> Outcome {
    log::info!("{:?} {}", args.verb, path.display());
    let (doc, code) = match parse_input(path) {
        Ok(input) => execute(args.verb, input, &Options::from(args)),
        Err(e) => parse_failure(args.verb, e),
    };
    render(doc, code)
}

/// Runs a verb on an already parsed input.
pub fn execute(verb: Verb, input: Input, opts: &Options) -> (Map<String, Value>, i32) {
    let mut doc = Map::new();
    doc.insert("schema".into(), json!(SCHEMA_VERSION));
    doc.insert("verb".into(), to_json(&verb));
    if opts.schema_check_only {
        let kind = match &input {
            Input::Moments(_) => "moments",
            Input::Finite(_) => "finite-space",
            Input::Verify(_) => "verify",
        };
        doc.insert("valid".into(), json!(true));
        doc.insert("kind".into(), json!(kind));
        return (doc, EXIT_OK);
    }
    let result = match (verb, input) {
        (Verb::Check, Input::Moments(m)) => check(&m, opts, &mut doc),
        (Verb::Represent, Input::Moments(m)) => represent(&m, &mut doc),
        (Verb::ExtendMoments, Input::Moments(m)) => extend_moments(&m, &mut doc),
        (Verb::HbExtend, Input::Finite(s)) => hb(&s, opts, &mut doc),
        (Verb::BuildMeasure, Input::Finite(s)) => build(&s, opts, &mut doc),
        (Verb::Verify, Input::Verify(t)) => verify(&t, &mut doc),
        (verb, _) => {
            let expected = match verb {
                Verb::Check | Verb::Represent | Verb::ExtendMoments => "a moment document",
                Verb::HbExtend | Verb::BuildMeasure => "a finite-space document",
                Verb::Verify => "an `input` and `measure` document",
            };
            let err = SchemaError {
                path: ".".into(),
                line: None,
                column: None,
                message: format!("this verb expects {expected}"),
            };
            return error_doc(
                doc,
                "schema",
                &err.message.clone(),
                Some(to_json(&err)),
                EXIT_INPUT,
            );
        }
    };
    match result {
        Ok(code) => (doc, code),
        Err(e) => {
            let code = exit_code(&e);
            log::error!("{e}");
            error_doc(doc, error_kind(&e), &e.to_string(), None, code)
        }
    }
}

fn parse_failure(verb: Verb, e: ParseError) -> (Map<String, Value>, i32) {
    log::error!("{e}");
    let mut doc = Map::new();
    doc.insert("schema".into(), json!(SCHEMA_VERSION));
    doc.insert("verb".into(), to_json(&verb));
    match &e {
        ParseError::Io { .. } => error_doc(doc, "io", &e.to_string(), None, EXIT_INPUT),
        ParseError::Schema(s) => {
            error_doc(doc, "schema", &e.to_string(), Some(to_json(s)), EXIT_INPUT)
        }
    }
}

fn error_doc(
    mut doc: Map<String, Value>,
    kind: &str,
    message: &str,
    detail: Option<Value>,
    code: i32,
) -> (Map<String, Value>, i32) {
    let mut err = Map::new();
    err.insert("kind".into(), json!(kind));
    err.insert("message".into(), json!(message));
    if let Some(d) = detail {
        err.insert("detail".into(), d);
    }
    doc.insert("error".into(), Value::Object(err));
    doc.insert("exit_code".into(), json!(code));
    (doc, code)
}

fn render(mut doc: Map<String, Value>, code: i32) -> Outcome {
    doc.insert("exit_code".into(), json!(code));
    match to_canonical_json(&doc) {
        Ok(json) => Outcome { json, code },
        Err(e) => Outcome {
            json: format!(
                "{{\"error\":{{\"kind\":\"serialization\",\"message\":{:?}}}}}\n",
                e.to_string()
            ),
            code: EXIT_NUMERICAL,
        },
    }
}

/// Renders a verb's result exactly as the binary would.
pub fn execute_to_string(verb: Verb, input: Input, opts: &Options) -> Outcome {
    let (doc, code) = execute(verb, input, opts);
    render(doc, code)
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Maps a library error onto the exit-code contract.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotPsd { .. }
        | Error::NegativeMass { .. }
        | Error::DensityFailed(_)
        | Error::EmptyInterval { .. } => EXIT_NEGATIVE,
        Error::LpFailure(_)
        | Error::LpUnbounded
        | Error::LpInfeasible(_)
        | Error::EigFailure { .. }
        | Error::RankDetectionAmbiguous { .. }
        | Error::BracketExhausted { .. } => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match exit_code(e) {
        EXIT_NEGATIVE => "negative",
        EXIT_NUMERICAL => "numerical",
        _ => "input",
    }
}

fn moment_input(m: &MomentSequence) -> Value {
    json!({ "moments": m.moments(), "support": to_json(&m.support()) })
}

fn check(m: &MomentSequence, opts: &Options, doc: &mut Map<String, Value>) -> crate::Result<i32> {
    let cert = positivity_certificate_with_tol(m, opts.tol)?;
    doc.insert("input".into(), moment_input(m));
    let lambdas: Map<String, Value> = cert
        .witnesses
        .iter()
        .map(|w| (w.name.clone(), json!(w.lambda_min)))
        .collect();
    doc.insert("lambda_min".into(), Value::Object(lambdas));
    if let Some(fail) = cert.failing() {
        doc.insert("witness".into(), to_json(&fail.witness));
    }
    if let (Support::Interval { a, b }, true) = (m.support(), opts.grid > 0) {
        let grid = haviland_grid_check(m, &uniform_grid(a, b, opts.grid), opts.tol)?;
        doc.insert("grid_check".into(), to_json(&grid));
    }
    doc.insert("verdict".into(), to_json(&cert.verdict));
    doc.insert("certificate".into(), to_json(&cert));
    Ok(match cert.verdict {
        Verdict::Representable => EXIT_OK,
        Verdict::NotRepresentable => EXIT_NEGATIVE,
        Verdict::Inconclusive => EXIT_NUMERICAL,
    })
}

fn represent(m: &MomentSequence, doc: &mut Map<String, Value>) -> crate::Result<i32> {
    doc.insert("input".into(), moment_input(m));
    let mu = recover_atoms(m)?;
    let report = verify_truncated(m, &mu, None, MOMENT_RESIDUAL_TOL)?;
    let excess = mu.support_excess(&m.support());
    doc.insert("measure".into(), to_json(&mu));
    doc.insert("verification".into(), to_json(&report));
    doc.insert("support_excess".into(), json!(excess));
    let (verdict, code) = if excess > SUPPORT_TOL {
        ("outside-support", EXIT_NEGATIVE)
    } else if !report.passed {
        ("unverified", EXIT_NUMERICAL)
    } else {
        ("verified", EXIT_OK)
    };
    doc.insert("verdict".into(), json!(verdict));
    Ok(code)
}

fn extend_moments(m: &MomentSequence, doc: &mut Map<String, Value>) -> crate::Result<i32> {
    doc.insert("input".into(), moment_input(m));
    let found = extend_search(m)?;
    let code = match found {
        Some(c) => {
            let mut extended = m.moments().to_vec();
            extended.extend([c.s, c.t]);
            doc.insert("extension".into(), to_json(&c));
            doc.insert("extended_moments".into(), json!(extended));
            doc.insert("verdict".into(), json!("extendable"));
            EXIT_OK
        }
        None => {
            doc.insert("verdict".into(), json!("not-extendable"));
            EXIT_NEGATIVE
        }
    };
    Ok(code)
}

fn hb(space: &FiniteSpace, opts: &Options, doc: &mut Map<String, Value>) -> crate::Result<i32> {
    doc.insert("input".into(), to_json(&space.spec));
    let (ext, trace) = hb_extend(&space.functional, &space.targets, opts.rule)?;
    let positivity = verify_positive(&ext, opts.tol)?;
    let mut restriction = 0.0_f64;
    let mut values = Map::new();
    for (name, g) in space.names.iter().zip(&space.generators) {
        let v = ext.eval(g)?;
        restriction = restriction.max((v - space.functional.eval(g)?).abs());
        values.insert(name.clone(), json!(v));
    }
    let target_values = space
        .targets
        .iter()
        .map(|t| ext.eval(t))
        .collect::<crate::Result<Vec<_>>>()?;
    doc.insert("functional".into(), Value::Object(values));
    doc.insert("target_values".into(), json!(target_values));
    doc.insert("trace".into(), to_json(&trace));
    doc.insert("positivity".into(), to_json(&positivity));
    doc.insert("restriction_error".into(), json!(restriction));
    doc.insert("rule".into(), to_json(&opts.rule));
    let (verdict, code) = if positivity.positive {
        ("positive", EXIT_OK)
    } else {
        ("not-positive", EXIT_NEGATIVE)
    };
    doc.insert("verdict".into(), json!(verdict));
    Ok(code)
}

fn measure_json(alg: &SigmaAlgebra, mu: &Measure) -> Value {
    json!({ "blocks": alg.blocks(), "mass": mu.block_mass })
}

fn build(space: &FiniteSpace, opts: &Options, doc: &mut Map<String, Value>) -> crate::Result<i32> {
    doc.insert("input".into(), to_json(&space.spec));
    let Some(alg) = &space.algebra else {
        return Err(Error::InvalidArgument(
            "`sigma_algebra` is required for build-measure".into(),
        ));
    };
    let b = space.b_or_default(alg)?;
    let ropts = RepresentOptions {
        eps_schedule: space
            .spec
            .eps_schedule
            .clone()
            .unwrap_or_else(default_eps_schedule),
        hull_targets: space.hull_targets.clone(),
        witnesses: space.witnesses.clone(),
        subspace_variant: space.spec.subspace_variant,
        rule: opts.rule,
    };
    let a = space.functional.domain().clone();
    match represent_via_adapted(&a, &b, &space.functional, alg, &ropts) {
        Ok(rep) => {
            doc.insert("measure".into(), measure_json(alg, &rep.measure));
            doc.insert("report".into(), to_json(&rep.report));
            doc.insert("trace".into(), to_json(&rep.trace));
            doc.insert("binning".into(), binning(space, &rep.ltilde, opts.bins));
            let (verdict, code) = if rep.report.max_residual > MEASURE_RESIDUAL_TOL {
                ("residual-too-large", EXIT_NUMERICAL)
            } else if !rep.report.hypotheses_hold {
                ("not-adapted", EXIT_NEGATIVE)
            } else {
                ("certified", EXIT_OK)
            };
            doc.insert("verdict".into(), json!(verdict));
            Ok(code)
        }
        Err(Error::DensityFailed(failure)) => {
            log::warn!(
                "density hypothesis fails (distance {:e})",
                failure.max_distance()
            );
            doc.insert("measure".into(), measure_json(alg, &failure.measure));
            doc.insert("report".into(), to_json(&failure.report));
            doc.insert("density_distance".into(), json!(failure.max_distance()));
            doc.insert("verdict".into(), json!("density-failed"));
            Ok(EXIT_NEGATIVE)
        }
        Err(e) => Err(e),
    }
}

/// `ρ(f - φ)` against `L̄(1)(b - a)/n` for each generator of `A`.
fn binning(space: &FiniteSpace, lbar: &crate::Functional, bins: usize) -> Value {
    let n = space.n();
    let one = crate::FunctionVec::constant(n, 1.0);
    let total = lbar.eval(&one).ok();
    let rows: Vec<Value> = space
        .names
        .iter()
        .zip(&space.generators)
        .map(|(name, f)| {
            let (lo, hi) = (f.min(), f.max());
            let width = if hi > lo { hi - lo } else { 1.0 };
            let top = hi + width / bins as f64;
            let Ok(spec) = BinningSpec::new(lo, top, bins) else {
                return json!({ "basis": name });
            };
            let rho = approx_below(f, &spec)
                .ok()
                .and_then(|approx| seminorm_rho(lbar, &(f - &approx.values())).ok());
            let bound = total.map(|t| t * (top - lo) / bins as f64);
            let holds = match (rho, bound) {
                (Some(r), Some(b)) => Some(r <= b + 1e-12),
                _ => None,
            };
            json!({ "basis": name, "a": lo, "b": top, "bins": bins, "seminorm": rho, "bound": bound, "holds": holds })
        })
        .collect();
    Value::Array(rows)
}

fn verify(target: &VerifyTarget, doc: &mut Map<String, Value>) -> crate::Result<i32> {
    match target {
        VerifyTarget::Moments(m, mu) => {
            doc.insert("input".into(), moment_input(m));
            doc.insert("measure".into(), to_json(mu));
            let report = verify_truncated(m, mu, None, MOMENT_RESIDUAL_TOL)?;
            let excess = mu.support_excess(&m.support());
            doc.insert("verification".into(), to_json(&report));
            doc.insert("support_excess".into(), json!(excess));
            let ok = report.passed && excess <= SUPPORT_TOL;
            doc.insert(
                "verdict".into(),
                json!(if ok { "verified" } else { "mismatch" }),
            );
            Ok(if ok { EXIT_OK } else { EXIT_NEGATIVE })
        }
        VerifyTarget::Finite(space, block) => {
            doc.insert("input".into(), to_json(&space.spec));
            doc.insert("measure".into(), to_json(block));
            let alg = SigmaAlgebra::new(space.n(), block.blocks.clone())?;
            let mu = Measure {
                block_mass: block.mass.clone(),
            };
            let mut residuals = Map::new();
            let mut worst = 0.0_f64;
            for (name, g) in space.names.iter().zip(&space.generators) {
                let r = (space.functional.eval(g)? - integrate(g, &mu, &alg)?).abs();
                worst = worst.max(r);
                residuals.insert(name.clone(), json!(r));
            }
            let negative = block.mass.iter().any(|&m| m < 0.0);
            doc.insert("residuals".into(), Value::Object(residuals));
            doc.insert("max_residual".into(), json!(worst));
            let ok = worst <= MEASURE_RESIDUAL_TOL && !negative;
            doc.insert(
                "verdict".into(),
                json!(if ok { "verified" } else { "mismatch" }),
            );
            Ok(if ok { EXIT_OK } else { EXIT_NEGATIVE })
        }
    }
}
