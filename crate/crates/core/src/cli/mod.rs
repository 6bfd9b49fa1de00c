//! The `nued` command line: loads system descriptions, runs one operation and
//! writes a JSON report (`{manifest, payload}`) or a CSV time series.
//!
//! Exit codes: 0 success or pass, 1 a check failed, 2 usage or I/O error.

mod report;
mod system;

pub use report::{csv_document, input_hash, json_document, RunManifest};
pub use system::{
    load_system_file, parse_description, BindingDesc, Coefficient, EntryDesc, EntryTerm, System, SystemDescription,
    SystemError, TermDesc, LINEAR_FUNCTIONS,
};

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dichotomy::{
    check_uniform_fit, estimate_spectrum, fit_stability_certificate, validate_certificate, FitReport, FitSearch,
    GridSpec, NormSampleGrid, ScanConfig,
};
use crate::injectivity::{
    builtin_family, implication_audit, test_injectivity, Notion, Outcome, ParamFamily, SearchConfig, BUILTIN_FAMILIES,
};
use crate::mycheck::{check_hypotheses, default_omega_suite, reproduce_example, CheckConfig, CheckStatus, EXAMPLE_IDS};
use crate::odeint::{
    integrate, linearize_along, IntegratorConfig, LinearField, PiecewiseSignal, PolyField, SolveOutcome, VectorField,
};
use crate::polyalg::{formal_inverse, ParamPolyMap};

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "NUED_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "nued", version, about = "Nonuniform exponential dichotomies and cubic polynomial automorphisms")]
pub struct Cli {
    /// JSON configuration file
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when absent)
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Seed for randomized searches
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// System description file
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Built-in system id
    #[arg(long, conflicts_with = "system")]
    pub builtin: Option<String>,
    /// Built-in parameter as KEY=P/Q, e.g. lambda0=-4
    #[arg(long = "param", value_name = "KEY=P/Q", requires = "builtin")]
    pub params: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub s_max: Option<f64>,
    #[arg(long)]
    pub s_step: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub tau_step: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OmegaArg {
    /// Constant signal to linearize a polynomial map along
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub omega: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trajectory CSV (t, x1..xn)
    Simulate {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        x0: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        t0: f64,
        #[arg(long)]
        tf: f64,
        /// Sampling step of the output
        #[arg(long, default_value_t = 0.1)]
        step: f64,
    },
    /// Transition-matrix norm grid CSV (t, s, norm)
    Transition {
        #[command(flatten)]
        sys: SystemArgs,
        #[command(flatten)]
        omega: OmegaArg,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Fit a nonuniform exponential stability certificate
    NuedFit {
        #[command(flatten)]
        sys: SystemArgs,
        #[command(flatten)]
        omega: OmegaArg,
        #[command(flatten)]
        grid: GridArgs,
        /// Require eps = 0
        #[arg(long)]
        uniform: bool,
        #[arg(long)]
        k_max: Option<f64>,
    },
    /// Dichotomy spectrum intervals
    Spectrum {
        #[command(flatten)]
        sys: SystemArgs,
        #[command(flatten)]
        omega: OmegaArg,
        #[command(flatten)]
        grid: GridArgs,
        /// Scan range LO,HI
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, num_args = 1)]
        range: Option<Vec<f64>>,
        #[arg(long)]
        coarse_step: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Formal inverse with exact composition check
    Invert {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long)]
        degree_cap: Option<u32>,
    },
    /// Nilpotency of JH (or of J when the map has no linear part)
    Nilpotency {
        #[command(flatten)]
        sys: SystemArgs,
    },
    /// Injectivity verdict for one notion or all four
    Injectivity {
        #[command(flatten)]
        sys: SystemArgs,
        /// partial, pseudo_partial, eventual, pseudo_eventual or all
        #[arg(long)]
        notion: String,
    },
    /// Hypotheses of the bounded nonuniform Markus-Yamabe setting
    CheckBnnmyc {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Reproduce a worked example
    Reproduce {
        #[arg(long)]
        example: String,
    },
}

/// Settings read from the configuration file; every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub integrator: IntegratorConfig,
    /// Sampling grid for `transition`, `nued-fit` and `spectrum`.
    pub grid: Option<GridSpec>,
    pub fit: FitSearch,
    pub scan: ScanConfig,
    pub injectivity: SearchConfig,
    pub check: CheckConfig,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// An emitted artifact and whether the command passed.
struct Artifact {
    body: Body,
    passed: bool,
}

enum Body {
    Json(Value),
    Csv { header: Vec<String>, rows: Vec<Vec<f64>> },
}

impl Artifact {
    fn json(payload: impl Serialize, passed: bool) -> Result<Self, Failure> {
        Ok(Self { body: Body::Json(serde_json::to_value(payload)?), passed })
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let command: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Failure::Usage(msg)) => {
            eprintln!("nued: {msg}");
            2
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_slice(&bytes).map_err(|e| usage(format!("config {}: {e}", p.display())))
        }
    }
}

/// Arguments recorded in the manifest; the output path does not affect results.
fn manifest_command(mut command: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(command.len());
    let mut skip = false;
    for a in command.drain(..) {
        if skip {
            skip = false;
            continue;
        }
        if a == "-o" || a == "--output" {
            skip = true;
        } else if !a.starts_with("--output=") {
            out.push(a);
        }
    }
    out
}

fn execute(cli: &Cli, command: Vec<String>) -> Result<bool, Failure> {
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.injectivity.seed = seed;
        config.check.seed = seed;
    }
    let seed = cli.seed.unwrap_or(config.injectivity.seed);
    let (artifact, input) = dispatch(&cli.command, &mut config)?;
    let manifest = RunManifest {
        command: manifest_command(command),
        config: serde_json::to_value(&config)?,
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input_hash: input_hash(&input),
        timestamp: report::timestamp_now(),
    };
    let out = cli.output.as_deref();
    match artifact.body {
        Body::Json(payload) => report::emit(out, json_document(&manifest, &payload)?.as_bytes())?,
        Body::Csv { header, rows } => {
            report::emit(out, &csv_document(&header, &rows)?)?;
            let doc = json_document(&manifest, &Value::Null)?;
            match out {
                Some(p) => std::fs::write(sidecar(p), doc)?,
                None => eprint!("{doc}"),
            }
        }
    }
    Ok(artifact.passed)
}

/// `<path>.manifest.json`, written next to CSV outputs.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

struct Loaded {
    desc: SystemDescription,
    system: System,
    bytes: Vec<u8>,
}

fn load(args: &SystemArgs) -> Result<Loaded, Failure> {
    let (desc, bytes) = match (&args.system, &args.builtin) {
        (Some(path), _) => load_system_file(path)?,
        (None, Some(id)) => {
            let mut parameters = BTreeMap::new();
            for p in &args.params {
                let (k, v) = p.split_once('=').ok_or_else(|| usage(format!("parameter `{p}` is not KEY=P/Q")))?;
                let c: Coefficient = serde_json::from_value(Value::String(v.to_string()))
                    .map_err(|e| usage(format!("parameter `{k}`: {e}")))?;
                parameters.insert(k.to_string(), c);
            }
            let desc = SystemDescription::Builtin { id: id.clone(), parameters };
            let bytes = serde_json::to_vec(&desc)?;
            (desc, bytes)
        }
        (None, None) => return Err(usage("either --system or --builtin is required")),
    };
    let system = desc.build()?;
    Ok(Loaded { desc, system, bytes })
}

fn poly_map(l: &Loaded) -> Result<&ParamPolyMap, Failure> {
    match &l.system {
        System::Poly { map, .. } => Ok(map),
        other => Err(usage(format!("`{}` is a {}, a polynomial map is required", other.name(), other.kind()))),
    }
}

fn linear(l: &Loaded, omega: &OmegaArg) -> Result<LinearField, Failure> {
    match (&l.system, &omega.omega) {
        (System::Linear { field, .. }, None) => Ok(field.clone()),
        (System::Linear { .. }, Some(_)) => Err(usage("--omega applies to polynomial maps only")),
        (System::Poly { map, .. }, w) => {
            let w = w.clone().unwrap_or_else(|| vec![0.0; map.dimension()]);
            if w.len() != map.dimension() {
                return Err(usage(format!("--omega has {} entries, the map has dimension {}", w.len(), map.dimension())));
            }
            Ok(linearize_along(map, &PiecewiseSignal::constant(w)).map_err(usage)?)
        }
        (System::Family(f), _) => Err(usage(format!("`{}` has no linear form", f.id()))),
    }
}

fn grid_for(l: &Loaded, config: &Config, args: &GridArgs) -> GridSpec {
    let g = match (&config.grid, &l.system) {
        (Some(g), _) => g.clone(),
        (None, System::Linear { oscillating: Some(o), .. }) => o.grid(),
        (None, _) => GridSpec::default(),
    };
    with_overrides(g, args)
}

fn with_overrides(mut g: GridSpec, args: &GridArgs) -> GridSpec {
    g.s_max = args.s_max.unwrap_or(g.s_max);
    g.s_step = args.s_step.unwrap_or(g.s_step);
    g.tau_max = args.tau_max.unwrap_or(g.tau_max);
    g.tau_step = args.tau_step.unwrap_or(g.tau_step);
    g
}

fn family(l: &Loaded) -> Result<ParamFamily, Failure> {
    if let SystemDescription::Builtin { id, .. } = &l.desc {
        if BUILTIN_FAMILIES.contains(&id.as_str()) {
            let params = match &l.system {
                System::Linear { oscillating: Some(o), .. } => {
                    crate::injectivity::FamilyParams { lambda0: o.lambda0, a: o.a, ..Default::default() }
                }
                System::Poly { map, .. } => crate::injectivity::FamilyParams {
                    lambda: map.linear_coefficient().cloned().unwrap_or_else(|| -num_rational::BigRational::from_integer(1.into())),
                    ..Default::default()
                },
                _ => Default::default(),
            };
            return Ok(builtin_family(id, &params)?);
        }
    }
    match &l.system {
        System::Poly { name, map } => Ok(ParamFamily::polynomial(name.clone(), map.clone())),
        System::Family(f) => Ok(f.clone()),
        System::Linear { name, .. } => Err(usage(format!("`{name}` is a linear system, not a family of maps"))),
    }
}

fn dispatch(cmd: &Command, config: &mut Config) -> Result<(Artifact, Vec<u8>), Failure> {
    match cmd {
        Command::Simulate { sys, x0, t0, tf, step } => {
            let l = load(sys)?;
            if !(tf > t0 && *step > 0.0) {
                return Err(usage("need tf > t0 and step > 0"));
            }
            let n_steps = ((tf - t0) / step - 1e-9).ceil() as usize;
            let times: Vec<f64> = (0..=n_steps).map(|k| (t0 + k as f64 * step).min(*tf)).collect();
            let cfg = config.integrator.clone().with_samples(times);
            cfg.validate().map_err(usage)?;
            let outcome = match &l.system {
                System::Poly { map, .. } => {
                    check_dim(x0.len(), map.dimension())?;
                    integrate(&PolyField::new(map.clone()), *t0, x0, *tf, &cfg)
                }
                System::Linear { field, .. } => {
                    check_dim(x0.len(), field.dimension())?;
                    integrate(field, *t0, x0, *tf, &cfg)
                }
                System::Family(f) => return Err(usage(format!("`{}` cannot be simulated", f.id()))),
            };
            let tr = outcome.trajectory();
            let mut header = vec!["t".to_string()];
            header.extend((1..=x0.len()).map(|i| format!("x{i}")));
            let rows = tr.samples.iter().map(|(t, x)| std::iter::once(*t).chain(x.iter().copied()).collect()).collect();
            if !outcome.is_completed() {
                eprintln!("nued: {}", outcome.describe());
            }
            let passed = matches!(outcome, SolveOutcome::Completed(_));
            Ok((Artifact { body: Body::Csv { header, rows }, passed }, l.bytes))
        }
        Command::Transition { sys, omega, grid } => {
            let l = load(sys)?;
            let field = linear(&l, omega)?;
            let spec = grid_for(&l, config, grid);
            config.grid = Some(spec.clone());
            let g = NormSampleGrid::sample(&field, &spec, &config.integrator)?;
            let rows = g.entries.iter().map(|e| vec![e.t, e.s, e.norm()]).collect();
            let header = ["t", "s", "norm"].map(String::from).to_vec();
            Ok((Artifact { body: Body::Csv { header, rows }, passed: true }, l.bytes))
        }
        Command::NuedFit { sys, omega, grid, uniform, k_max } => {
            let l = load(sys)?;
            let field = linear(&l, omega)?;
            let spec = grid_for(&l, config, grid);
            config.grid = Some(spec.clone());
            if let Some(k) = k_max {
                config.fit.k_max = *k;
            }
            let g = NormSampleGrid::sample(&field, &spec, &config.integrator)?;
            let fit = if *uniform {
                check_uniform_fit(&g, &config.fit)
            } else {
                FitReport::from_result(fit_stability_certificate(&g, &config.fit))
            };
            let uniform_fit = check_uniform_fit(&g, &config.fit);
            let slack = fit.certificate().map(|c| validate_certificate(c, &g));
            let lower_bound = match (&l.system, fit.is_feasible()) {
                (System::Linear { oscillating: Some(o), .. }, false) => Some(o.lower_bound(spec.s_max.min(spec.tau_max))),
                _ => None,
            };
            let passed = fit.is_feasible();
            let payload = json!({
                "system": l.system.name(),
                "samples": g.len(),
                "fit": fit,
                "uniform_fit": uniform_fit,
                "validated_slack": slack,
                "lower_bound": lower_bound,
            });
            Ok((Artifact::json(payload, passed)?, l.bytes))
        }
        Command::Spectrum { sys, omega, grid, range, coarse_step, tol } => {
            let l = load(sys)?;
            let field = linear(&l, omega)?;
            let base = config.grid.clone().unwrap_or_else(|| config.scan.grid.clone());
            config.scan.grid = with_overrides(base, grid);
            if let Some(r) = range {
                match r.as_slice() {
                    [lo, hi] => config.scan.range = Some((*lo, *hi)),
                    _ => return Err(usage("--range takes LO,HI")),
                }
            }
            config.scan.coarse_step = coarse_step.unwrap_or(config.scan.coarse_step);
            config.scan.tol = tol.unwrap_or(config.scan.tol);
            let est = estimate_spectrum(&field, &config.scan, &config.integrator)?;
            Ok((Artifact::json(json!({ "system": l.system.name(), "spectrum": est }), true)?, l.bytes))
        }
        Command::Invert { sys, degree_cap } => {
            let l = load(sys)?;
            let map = poly_map(&l)?;
            let name = l.system.name().to_string();
            let (payload, passed) = match formal_inverse(map, *degree_cap) {
                Ok(inv) => {
                    let left = ParamPolyMap::compose(map, &inv)?.is_identity();
                    let right = ParamPolyMap::compose(&inv, map)?.is_identity();
                    let payload = json!({
                        "map": SystemDescription::from_map(&name, map),
                        "inverse": SystemDescription::from_map(&format!("{name}_inverse"), &inv),
                        "inverse_formula": inv.to_string(),
                        "map_after_inverse_is_identity": left,
                        "inverse_after_map_is_identity": right,
                    });
                    (payload, left && right)
                }
                Err(e) => (json!({ "map": SystemDescription::from_map(&name, map), "error": e.to_string() }), false),
            };
            Ok((Artifact::json(payload, passed)?, l.bytes))
        }
        Command::Nilpotency { sys } => {
            let l = load(sys)?;
            let map = poly_map(&l)?;
            let (of, jac) = match map.nonlinear_map() {
                Ok(h) if map.linear_coefficient().is_some() => ("JH", h.jacobian()),
                _ => ("J", map.jacobian()),
            };
            let nil = jac.is_nilpotent();
            let payload = json!({
                "system": l.system.name(),
                "matrix": of,
                "nilpotent": nil.nilpotent,
                "index": nil.index,
                "jacobian": jac.to_string(),
            });
            Ok((Artifact::json(payload, nil.nilpotent)?, l.bytes))
        }
        Command::Injectivity { sys, notion } => {
            let l = load(sys)?;
            let f = family(&l)?;
            let notions: Vec<Notion> = if notion == "all" { Notion::ALL.to_vec() } else { vec![notion.parse()?] };
            let verdicts = notions
                .iter()
                .map(|n| test_injectivity(&f, *n, &config.injectivity))
                .collect::<Result<Vec<_>, _>>()?;
            let audit = implication_audit(&verdicts);
            let passed = audit.consistent
                && verdicts.iter().all(|v| matches!(v.outcome, Outcome::Holds { .. } | Outcome::SupportedBySearch { .. }));
            let payload = json!({ "family": f.id(), "domain": f.domain(), "verdicts": verdicts, "audit": audit });
            Ok((Artifact::json(payload, passed)?, l.bytes))
        }
        Command::CheckBnnmyc { sys, delta, eps } => {
            let l = load(sys)?;
            let map = poly_map(&l)?;
            if delta.is_some() {
                config.check.delta = *delta;
            }
            config.check.eps = eps.unwrap_or(config.check.eps);
            let r = check_hypotheses(map, &default_omega_suite(map.dimension()), &config.check)?;
            let passed = r.overall != CheckStatus::Fail;
            Ok((Artifact::json(&r, passed)?, l.bytes))
        }
        Command::Reproduce { example } => {
            if !EXAMPLE_IDS.contains(&example.as_str()) {
                return Err(usage(format!("unknown example `{example}`; expected one of {EXAMPLE_IDS:?}")));
            }
            let r = reproduce_example(example)?;
            eprint!("{}", r.summary());
            Ok((Artifact::json(&r, r.passed)?, Vec::new()))
        }
    }
}

fn check_dim(got: usize, n: usize) -> Result<(), Failure> {
    if got != n {
        return Err(usage(format!("--x0 has {got} entries, the system has dimension {n}")));
    }
    Ok(())
}
