//! `lrblock` command-line driver.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lrblock::bounds::{
    bound_commutator_aware, bound_strict_local, bound_strict_local_envelope, solve_overlap, BoundKind, BoundQuery,
    Variant,
};
use lrblock::cheb::{degree_for_accuracy, expand, ChebyshevExpansion};
use lrblock::estimate::{estimate, sweep, verify, CostModel, EstimateRequest, SweepConfig};
use lrblock::fit::{fit, read_samples, write_samples, AnalyticModel, BudgetSplit, ErrorModel, FitModel};
use lrblock::lattice::{extract_bound_inputs, heisenberg_benchmark, heisenberg_random, BoundInputs, LatticeHamiltonian};
use lrblock::planner::{plan_recursive_1d, plan_stacks, plan_staircase_1d, DecompositionPlan};
use lrblock::qsp::{
    build_qubiterate, encode_lcu, encode_lcu_gadget, jacobi_anger, JacobiAngerTruncation, PhaseSequence,
};
use lrblock::Error;

/// Tolerance for the encoding and eigenphase checks of `qsp-check`.
const QSP_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "lrblock", version, about = "Lieb-Robinson block decompositions of lattice time evolution")]
struct Cli {
    /// Seed of the random fields of the default Heisenberg chain.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write the result to this file instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Staircase errors over a (t, ℓ, a) grid, as CSV.
    Sweep(SweepArgs),
    /// Fit the error model to sweep CSV.
    Fit(FitArgs),
    /// Build a decomposition plan.
    Plan(PlanArgs),
    /// Compare a plan with the exact evolution.
    Verify(VerifyArgs),
    /// Evaluate the analytic Lieb-Robinson bounds.
    Bounds(BoundsArgs),
    /// Check the LCU encoding, the qubiterate and the Jacobi-Anger truncation.
    QspCheck(QspArgs),
    /// Expand a function in Chebyshev polynomials, or inspect an expansion.
    Cheb(ChebArgs),
    /// Gate estimate for a 1D chain.
    Estimate(EstimateArgs),
}

/// Hamiltonian from a JSON file, or the random-field Heisenberg chain.
#[derive(Args)]
struct HamiltonianSource {
    /// Hamiltonian JSON file.
    #[arg(long)]
    hamiltonian: Option<PathBuf>,

    /// Sites of the default Heisenberg chain.
    #[arg(long, default_value_t = 10)]
    n: usize,

    /// Keep the default chain in Pauli units instead of rescaling it to unit
    /// largest term norm.
    #[arg(long)]
    raw_units: bool,
}

impl HamiltonianSource {
    fn load(&self, seed: Option<u64>) -> Result<LatticeHamiltonian> {
        match &self.hamiltonian {
            Some(path) => Ok(LatticeHamiltonian::from_json(&read(path)?)?),
            None if self.raw_units => Ok(heisenberg_random(self.n, seed.unwrap_or(0))?),
            None => Ok(heisenberg_benchmark(self.n, seed.unwrap_or(0))?),
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep configuration JSON; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    n: Option<usize>,

    /// Overlaps, as `2..7` (inclusive) or `2,3,5`.
    #[arg(long, value_parser = parse_ells)]
    ell: Option<Overlaps>,

    /// Times, comma separated.
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,

    /// Overlap starts `a`, comma separated; every interior cut when absent.
    #[arg(long, value_delimiter = ',')]
    positions: Option<Vec<usize>>,

    /// Sweep the chain in Pauli units instead of unit largest term norm.
    #[arg(long)]
    raw_units: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Sweep CSV (`n,t,a,ell,error`).
    input: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlanKind {
    Staircase,
    Stacks,
    Recursive,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    source: HamiltonianSource,

    #[arg(long, value_enum, default_value = "recursive")]
    kind: PlanKind,

    /// Evolution time: per staircase, or in total for a recursive plan.
    #[arg(long)]
    t: f64,

    /// First overlap site (staircase, stacks).
    #[arg(long)]
    a: Option<usize>,

    /// Last overlap site (staircase, stacks).
    #[arg(long)]
    b: Option<usize>,

    /// Overlap size (recursive).
    #[arg(long)]
    ell: Option<usize>,

    /// Block size (recursive); defaults to 2ℓ.
    #[arg(long)]
    block: Option<usize>,

    /// Staircase repetitions (stacks).
    #[arg(long, default_value_t = 2)]
    reps: usize,

    /// Merge the shared forward blocks of neighbouring stacks.
    #[arg(long)]
    merged: bool,

    /// Fit JSON for predicted errors; the analytic bound otherwise.
    #[arg(long)]
    fit: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    source: HamiltonianSource,

    /// Plan JSON.
    #[arg(long)]
    plan: PathBuf,

    /// Multiplier on the predicted error.
    #[arg(long, default_value_t = 1.0)]
    slack: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Commutator,
    Restriction,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    source: HamiltonianSource,

    #[arg(long)]
    t: f64,

    /// Distance between the supports.
    #[arg(long, default_value_t = 0.0)]
    distance: f64,

    /// Size of the support of `A`.
    #[arg(long, default_value_t = 1)]
    x_size: usize,

    #[arg(long, default_value_t = 1.0)]
    mu: f64,

    #[arg(long, value_enum, default_value = "commutator")]
    variant: VariantArg,

    /// Also report the smallest overlap meeting this error.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
struct QspArgs {
    #[command(flatten)]
    source: HamiltonianSource,

    /// Encode through reflection gadgets instead of a prepared state.
    #[arg(long)]
    gadget: bool,

    /// `αt` of a Jacobi-Anger truncation to report.
    #[arg(long)]
    alpha_t: Option<f64>,

    /// Target error of the truncation.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,

    /// JSON array of QSP angles to compare against `e^{−iαt sinθ}`.
    #[arg(long, requires = "alpha_t")]
    phases: Option<PathBuf>,

    /// Angles sampled for sup errors.
    #[arg(long, default_value_t = 1001)]
    points: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Function {
    Exp,
    Cos,
    Sin,
}

impl Function {
    fn eval(self, x: f64) -> f64 {
        match self {
            Function::Exp => x.exp(),
            Function::Cos => x.cos(),
            Function::Sin => x.sin(),
        }
    }

    /// Largest modulus on the Bernstein ellipse `E_ρ`.
    fn ellipse_bound(self, rho: f64) -> f64 {
        let (semi_major, semi_minor) = ((rho + 1.0 / rho) / 2.0, (rho - 1.0 / rho) / 2.0);
        match self {
            Function::Exp => semi_major.exp(),
            Function::Cos | Function::Sin => semi_minor.cosh(),
        }
    }
}

#[derive(Args)]
struct ChebArgs {
    /// Expansion JSON to inspect instead of expanding a function.
    #[arg(long, conflicts_with = "function")]
    input: Option<PathBuf>,

    #[arg(long, value_enum)]
    function: Option<Function>,

    #[arg(long, default_value_t = 2.0)]
    rho: f64,

    /// `sup |f|` on the ellipse; computed for the built-in functions when absent.
    #[arg(long)]
    bound: Option<f64>,

    /// Target accuracy fixing the degree.
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,

    /// Explicit degree, overriding `--eps`.
    #[arg(long)]
    degree: Option<usize>,

    /// Points at which to evaluate, comma separated.
    #[arg(long, value_delimiter = ',')]
    at: Vec<f64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    source: HamiltonianSource,

    /// Total time; defaults to the number of sites.
    #[arg(long = "T")]
    total_time: Option<f64>,

    #[arg(long, default_value_t = 1e-3)]
    eps: f64,

    #[arg(long, default_value_t = 8)]
    ell: usize,

    #[arg(long)]
    merged: bool,

    /// Fractions `lr,block` of ε per block.
    #[arg(long, value_parser = parse_split)]
    budget_split: Option<BudgetSplit>,

    /// Fit JSON; the analytic bound otherwise.
    #[arg(long)]
    fit: Option<PathBuf>,

    #[arg(long, default_value_t = 1.0)]
    c_o: f64,

    #[arg(long, default_value_t = 1.0)]
    c_g: f64,

    /// Prepare the LCU state with `⌈log₂M⌉` instead of `M` gates.
    #[arg(long)]
    log_prep: bool,
}

#[derive(Clone)]
struct Overlaps(Vec<usize>);

fn parse_ells(s: &str) -> std::result::Result<Overlaps, String> {
    let bad = |_| format!("bad overlap list {s:?}");
    if let Some((lo, hi)) = s.split_once("..") {
        let (lo, hi): (usize, usize) = (lo.trim().parse().map_err(bad)?, hi.trim().parse().map_err(bad)?);
        if lo > hi {
            return Err(format!("empty overlap range {s:?}"));
        }
        return Ok(Overlaps((lo..=hi).collect()));
    }
    s.split(',').map(|p| p.trim().parse().map_err(bad)).collect::<std::result::Result<_, _>>().map(Overlaps)
}

fn parse_split(s: &str) -> std::result::Result<BudgetSplit, String> {
    let (lr, block) = s.split_once(',').ok_or_else(|| format!("expected `lr,block`, got {s:?}"))?;
    let lr: f64 = lr.trim().parse().map_err(|_| format!("bad fraction {lr:?}"))?;
    let block: f64 = block.trim().parse().map_err(|_| format!("bad fraction {block:?}"))?;
    BudgetSplit::new(lr, block).map_err(|e| e.to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(fit: Option<&Path>, h: &LatticeHamiltonian) -> Result<Box<dyn ErrorModel>> {
    match fit {
        Some(path) => {
            let model: FitModel = serde_json::from_str(&read(path)?).map_err(Error::from)?;
            Ok(Box::new(model))
        }
        None => Ok(Box::new(AnalyticModel::from_hamiltonian(h)?)),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value).map_err(Error::from)?)
}

/// Command output plus whether it reports a failed check.
struct Output {
    text: String,
    passed: bool,
}

impl Output {
    fn ok(text: String) -> Self {
        Self { text, passed: true }
    }
}

fn run_sweep(args: &SweepArgs, seed: Option<u64>) -> Result<Output> {
    let mut cfg = match &args.config {
        Some(path) => SweepConfig::from_json(&read(path)?)?,
        None => SweepConfig {
            n: 11,
            seed: 0,
            ells: (2..=7).collect(),
            t_grid: vec![0.5, 1.0, 2.0],
            positions: None,
            unit_norm: true,
        },
    };
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(ells) = &args.ell {
        cfg.ells = ells.0.clone();
    }
    if let Some(t) = &args.t_grid {
        cfg.t_grid = t.clone();
    }
    if let Some(p) = &args.positions {
        cfg.positions = Some(p.clone());
    }
    if args.raw_units {
        cfg.unit_norm = false;
    }
    let samples = sweep(&cfg)?;
    let mut buf = Vec::new();
    write_samples(&mut buf, &samples)?;
    Ok(Output::ok(String::from_utf8(buf)?))
}

fn run_fit(args: &FitArgs) -> Result<Output> {
    let file = fs::File::open(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let samples = read_samples(file)?;
    let report = fit(&samples)?;
    eprintln!(
        "fit: {} samples ({} zero errors excluded), R² = {:.4}",
        report.samples_used, report.zeros_excluded, report.model.r2_log
    );
    Ok(Output::ok(to_json(&report.model)?))
}

fn run_plan(args: &PlanArgs, seed: Option<u64>) -> Result<Output> {
    let h = args.source.load(seed)?;
    let model = load_model(args.fit.as_deref(), &h)?;
    let cut = || -> Result<(usize, usize)> {
        match (args.a, args.b) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => bail!("--a and --b are required for this plan kind"),
        }
    };
    let plan = match args.kind {
        PlanKind::Staircase => {
            let (a, b) = cut()?;
            plan_staircase_1d(&h, args.t, a, b, model.as_ref())?
        }
        PlanKind::Stacks => {
            let (a, b) = cut()?;
            plan_stacks(&h, args.t, a, b, args.reps, args.merged, model.as_ref())?
        }
        PlanKind::Recursive => {
            let ell = args.ell.ok_or_else(|| anyhow!("--ell is required for a recursive plan"))?;
            plan_recursive_1d(&h, args.t, ell, args.block.unwrap_or(2 * ell), model.as_ref())?
        }
    };
    Ok(Output::ok(plan.to_json()?))
}

fn run_verify(args: &VerifyArgs, seed: Option<u64>) -> Result<Output> {
    let h = args.source.load(seed)?;
    let plan = DecompositionPlan::from_json(&read(&args.plan)?)?;
    let report = verify(&plan, &h, args.slack)?;
    Ok(Output {
        text: to_json(&report)?,
        passed: report.passed,
    })
}

#[derive(Serialize)]
struct BoundsReport {
    inputs: BoundInputs,
    t: f64,
    distance: f64,
    x_size: usize,
    strict: f64,
    strict_envelope: f64,
    commutator_aware: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    overlap: Option<OverlapReport>,
}

#[derive(Serialize)]
struct OverlapReport {
    eps: f64,
    strict: usize,
    commutator_aware: usize,
}

fn run_bounds(args: &BoundsArgs, seed: Option<u64>) -> Result<Output> {
    let h = args.source.load(seed)?;
    let inputs = extract_bound_inputs(&h, args.mu)?;
    let variant = match args.variant {
        VariantArg::Commutator => Variant::Commutator,
        VariantArg::Restriction => Variant::Restriction,
    };
    let q = BoundQuery::from_distance(inputs, args.t, args.distance, args.x_size);
    let overlap = match args.eps {
        Some(eps) => Some(OverlapReport {
            eps,
            strict: solve_overlap(eps, &q, BoundKind::Strict, variant)?,
            commutator_aware: solve_overlap(eps, &q, BoundKind::CommutatorAware, variant)?,
        }),
        None => None,
    };
    let report = BoundsReport {
        inputs,
        t: args.t,
        distance: args.distance,
        x_size: args.x_size,
        strict: bound_strict_local(&q, variant),
        strict_envelope: bound_strict_local_envelope(&q, variant),
        commutator_aware: bound_commutator_aware(&q, variant),
        overlap,
    };
    Ok(Output::ok(to_json(&report)?))
}

#[derive(Serialize)]
struct QspReport {
    alpha: f64,
    terms: usize,
    padded_terms: usize,
    ancilla_qubits: usize,
    standard_form_error: f64,
    involution_error: f64,
    max_phase_error: f64,
    max_leakage: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    jacobi_anger: Option<JacobiAngerReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phases_sup_error: Option<f64>,
    passed: bool,
}

#[derive(Serialize)]
struct JacobiAngerReport {
    #[serde(flatten)]
    truncation: JacobiAngerTruncation,
    sup_error: f64,
}

fn run_qsp(args: &QspArgs, seed: Option<u64>) -> Result<Output> {
    let h = args.source.load(seed)?;
    let op = h.operator_at(0, h.t_start(), None)?;
    let enc = if args.gadget { encode_lcu_gadget(&op)? } else { encode_lcu(&op)? };
    let check = enc.check(&op)?;
    let w = build_qubiterate(&enc)?;
    let sectors = w.eigenphase_law(&op)?;
    let max_phase_error = sectors.iter().map(|s| s.phase_error).fold(0.0, f64::max);
    let max_leakage = sectors.iter().map(|s| s.leakage).fold(0.0, f64::max);
    let jacobi_anger = match args.alpha_t {
        Some(at) => {
            let truncation = jacobi_anger(at, args.eps)?;
            let sup_error = truncation.sup_error(args.points);
            Some(JacobiAngerReport { truncation, sup_error })
        }
        None => None,
    };
    let phases_sup_error = match (&args.phases, args.alpha_t) {
        (Some(path), Some(at)) => {
            let phases: PhaseSequence = serde_json::from_str(&read(path)?).map_err(Error::from)?;
            Some(phases.sup_error_against(at, args.points))
        }
        _ => None,
    };
    let passed = check.standard_form_error <= QSP_TOL
        && check.involution_error <= QSP_TOL
        && max_phase_error <= QSP_TOL
        && max_leakage <= QSP_TOL
        && jacobi_anger.as_ref().is_none_or(|j| j.sup_error <= j.truncation.error_bound);
    let report = QspReport {
        alpha: enc.alpha,
        terms: enc.m,
        padded_terms: enc.padded_m,
        ancilla_qubits: enc.ancilla_qubits,
        standard_form_error: check.standard_form_error,
        involution_error: check.involution_error,
        max_phase_error,
        max_leakage,
        jacobi_anger,
        phases_sup_error,
        passed,
    };
    Ok(Output {
        text: to_json(&report)?,
        passed,
    })
}

#[derive(Serialize)]
struct ChebReport {
    degree: usize,
    error_bound: f64,
    abs_sum: f64,
    decay_violations: Vec<usize>,
    values: Vec<[f64; 2]>,
}

fn run_cheb(args: &ChebArgs) -> Result<Output> {
    if let Some(path) = &args.input {
        let e: ChebyshevExpansion = serde_json::from_str(&read(path)?).map_err(Error::from)?;
        let values = args.at.iter().map(|&x| Ok([x, e.evaluate(x)?])).collect::<Result<Vec<_>>>()?;
        let decay_violations = e.decay_violations();
        let passed = decay_violations.is_empty();
        let report = ChebReport {
            degree: e.degree(),
            error_bound: e.error_bound(),
            abs_sum: e.abs_sum(),
            decay_violations,
            values,
        };
        return Ok(Output {
            text: to_json(&report)?,
            passed,
        });
    }
    let f = args.function.ok_or_else(|| anyhow!("either --input or --function is required"))?;
    let m = args.bound.unwrap_or_else(|| f.ellipse_bound(args.rho));
    let degree = match args.degree {
        Some(j) => j,
        None => degree_for_accuracy(args.rho, m, args.eps)?,
    };
    let e = expand(|x| f.eval(x), args.rho, m, degree)?;
    Ok(Output::ok(to_json(&e)?))
}

fn run_estimate(args: &EstimateArgs, seed: Option<u64>) -> Result<Output> {
    let h = args.source.load(seed)?;
    let model = load_model(args.fit.as_deref(), &h)?;
    let mut req = EstimateRequest::new(args.total_time.unwrap_or(h.n_sites() as f64), args.eps, args.ell);
    req.merged = args.merged;
    if let Some(split) = args.budget_split {
        req.split = split;
    }
    req.cost = CostModel {
        c_o: args.c_o,
        c_g: args.c_g,
        arbitrary_prep: !args.log_prep,
    };
    let report = estimate(&h, &req, model.as_ref())?;
    Ok(Output::ok(report.to_json()?))
}

fn run(cli: &Cli) -> Result<bool> {
    let out = match &cli.command {
        Command::Sweep(a) => run_sweep(a, cli.seed)?,
        Command::Fit(a) => run_fit(a)?,
        Command::Plan(a) => run_plan(a, cli.seed)?,
        Command::Verify(a) => run_verify(a, cli.seed)?,
        Command::Bounds(a) => run_bounds(a, cli.seed)?,
        Command::QspCheck(a) => run_qsp(a, cli.seed)?,
        Command::Cheb(a) => run_cheb(a)?,
        Command::Estimate(a) => run_estimate(a, cli.seed)?,
    };
    let mut text = out.text;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &cli.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(out.passed)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Infeasible(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("check failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
