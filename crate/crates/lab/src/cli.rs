//! `rmdp-lab` command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rmdp_core::dominance::{
    check_unique_worst_kernel, check_unique_worst_q, sample_policies, search_s_rect, verify_dominance, verify_rate,
    DominanceConfig, DominanceConstant, JStarOracle, RateConfig, SamplerConfig, DEFAULT_UNIQ_TOL,
};
use rmdp_core::eval::{optimal_by_value_iteration, robust_cost, robust_evaluate, DEFAULT_TOL};
use rmdp_core::hardness::{self, certify, generate_corpus, parse_dimacs, CnfFormula, ReductionVariant};
use rmdp_core::psd::{psd_run, PsdConfig, StepRule, TieBreak};
use rmdp_core::zoo;
use rmdp_core::{Policy, RmdpInstance};
use serde::Serialize;

use crate::error::{LabError, Result, Status};
use crate::format::{instance_hash, instance_to_json, load_instance, load_policy, read_text};
use crate::manifest::Recorder;
use crate::parallel::par_map;

#[derive(Debug, Parser)]
#[command(name = "rmdp-lab", version, about = "Experiments on tabular robust MDPs")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Emit or list the built-in instances.
    #[command(subcommand)]
    Instance(InstanceCmd),
    /// Robust cost, active models, V and Q of one policy.
    Evaluate(EvaluateArgs),
    /// Robust cost over a two-coordinate policy grid (CSV).
    Landscape(LandscapeArgs),
    /// Projected subgradient descent trace (CSV) and summary (JSON).
    Psd(PsdArgs),
    /// 3-SAT reductions.
    #[command(subcommand)]
    Hardness(HardnessCmd),
    /// Subgradient-dominance checks.
    #[command(subcommand)]
    Dominance(DominanceCmd),
}

#[derive(Debug, Args)]
struct InstanceArgs {
    /// Instance JSON file or `builtin:NAME`.
    #[arg(long)]
    instance: String,
    /// Override the discount factor.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output file; a manifest is written to `<out>.manifest.json`. Without it the payload goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct JobsArgs {
    #[arg(long, env = "RMDP_LAB_THREADS", default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Subcommand)]
enum InstanceCmd {
    Emit {
        /// One of the built-in names (see `instance list`).
        name: String,
        #[arg(long)]
        gamma: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    List,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// `uniform`, `pi1`, `pi2`, `det:a0,a1,...` or a JSON file of rows.
    #[arg(long, default_value = "uniform")]
    policy: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct LandscapeArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Grid step; `1 / grid` must be an integer.
    #[arg(long)]
    grid: f64,
    /// Two coordinates `state:action` (indices or labels); required unless the
    /// instance has exactly two free coordinates.
    #[arg(long, value_delimiter = ',')]
    axes: Vec<String>,
    /// Policy supplying the rows not on an axis.
    #[arg(long, default_value = "uniform")]
    base: String,
    #[command(flatten)]
    jobs: JobsArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TieBreakArg {
    First,
    Average,
    Random,
}

#[derive(Debug, Args)]
struct PsdArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value = "uniform")]
    init: String,
    #[arg(long = "T", default_value_t = 1000)]
    iterations: usize,
    /// Constant step size; defaults to `1/sqrt(T)`.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum, default_value = "average")]
    tie_break: TieBreakArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    /// Compute the Moreau-envelope gradient at recorded iterates.
    #[arg(long)]
    moreau: bool,
    /// Report sup-norm distances to this policy.
    #[arg(long)]
    reference: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    FiniteP,
    SaRect,
    Both,
}

impl VariantArg {
    fn variants(self) -> Vec<ReductionVariant> {
        match self {
            VariantArg::FiniteP => vec![ReductionVariant::FiniteP],
            VariantArg::SaRect => vec![ReductionVariant::SaRect],
            VariantArg::Both => vec![ReductionVariant::FiniteP, ReductionVariant::SaRect],
        }
    }
}

#[derive(Debug, Subcommand)]
enum HardnessCmd {
    /// Build the reduction instance of a DIMACS formula.
    Gen {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, default_value_t = zoo::DEFAULT_GAMMA)]
        gamma: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Compare reduction costs with DPLL verdicts.
    Certify {
        /// DIMACS files (repeatable).
        #[arg(long)]
        cnf: Vec<PathBuf>,
        /// Add the seeded 20 + 20 corpus (N <= 8, M <= 15).
        #[arg(long)]
        corpus_seed: Option<u64>,
        #[arg(long, value_enum, default_value = "both")]
        variant: VariantArg,
        #[arg(long, default_value_t = zoo::DEFAULT_GAMMA)]
        gamma: f64,
        /// Random policies per formula.
        #[arg(long, default_value_t = 1000)]
        random: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        jobs: JobsArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// `grid:STEP`, `psd[:STARTS:ITERS]`, `vi` or `explicit:VALUE`.
    #[arg(long, default_value = "psd")]
    oracle: String,
    /// Dirichlet policies sampled per instance.
    #[arg(long, default_value_t = 32)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
}

#[derive(Debug, Subcommand)]
enum DominanceCmd {
    /// Test `J - J* <= D G` on sampled policies of one instance.
    Check {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        oracle: OracleArgs,
        /// Dominance constant; defaults to `((1 - gamma) min mu)^{-1}`.
        #[arg(long)]
        constant: Option<f64>,
        /// Extra policies to check (repeatable).
        #[arg(long)]
        policy: Vec<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Look for violations on random s-rectangular instances.
    Search {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 2)]
        states: usize,
        #[arg(long, default_value_t = 2)]
        actions: usize,
        #[arg(long, default_value_t = 2)]
        choices: usize,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        jobs: JobsArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Best suboptimality of PSD against `C T^{-1/4}`.
    Rate {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long = "T", value_delimiter = ',', default_values_t = [100, 1000, 10000])]
        iterations: Vec<usize>,
        #[arg(long, default_value = "vi")]
        oracle: String,
        #[arg(long, default_value = "uniform")]
        init: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

/// Writes payloads to `--out` (recording them in the manifest) or to stdout.
struct Sink {
    out: Option<PathBuf>,
    rec: Recorder,
}

impl Sink {
    fn new(out: &OutArgs) -> Self {
        Sink {
            out: out.out.clone(),
            rec: Recorder::new(std::env::args().collect()),
        }
    }

    fn primary(&mut self, bytes: &[u8]) -> Result<()> {
        match self.out.clone() {
            Some(path) => self.rec.emit(&path, bytes),
            None => {
                print!("{}", String::from_utf8_lossy(bytes));
                Ok(())
            }
        }
    }

    /// Secondary payload stored at `<out>.<suffix>`.
    fn secondary(&mut self, suffix: &str, bytes: &[u8]) -> Result<()> {
        match self.out.clone() {
            Some(path) => {
                let mut name = path.into_os_string();
                name.push(format!(".{suffix}"));
                self.rec.emit(Path::new(&name), bytes)
            }
            None => {
                print!("{}", String::from_utf8_lossy(bytes));
                Ok(())
            }
        }
    }

    fn instance(&mut self, inst: &RmdpInstance) {
        self.rec.instance_hash = Some(instance_hash(inst));
    }

    fn finish(self) -> Result<()> {
        if let Some(path) = &self.out {
            self.rec.finish(path)?;
        }
        Ok(())
    }
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| LabError::Csv(e.into_error().into()))
}

fn load(args: &InstanceArgs) -> Result<RmdpInstance> {
    let mut inst = load_instance(&args.instance)?;
    if let Some(g) = args.gamma {
        inst.gamma = g;
        inst.validate()?;
    }
    Ok(inst)
}

fn parse_oracle(spec: &str, seed: u64) -> Result<JStarOracle> {
    let bad = || LabError::usage(format!("bad oracle `{spec}`; expected grid:STEP, psd[:STARTS:ITERS], vi or explicit:VALUE"));
    let parts: Vec<&str> = spec.split(':').collect();
    Ok(match parts.as_slice() {
        ["grid", step] => JStarOracle::Grid {
            resolution: step.parse().map_err(|_| bad())?,
        },
        ["psd"] => match JStarOracle::default_psd() {
            JStarOracle::Psd { starts, iterations, .. } => JStarOracle::Psd { starts, iterations, seed },
            other => other,
        },
        ["psd", starts, iterations] => JStarOracle::Psd {
            starts: starts.parse().map_err(|_| bad())?,
            iterations: iterations.parse().map_err(|_| bad())?,
            seed,
        },
        ["vi"] => JStarOracle::ValueIteration,
        ["explicit", v] => JStarOracle::Explicit(v.parse().map_err(|_| bad())?),
        _ => return Err(bad()),
    })
}

fn read_cnf(path: &Path) -> Result<CnfFormula> {
    parse_dimacs(&read_text(path)?).map_err(|source| LabError::Cnf {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses and runs the command line, returning the exit status.
pub fn run() -> Status {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e}");
            e.status()
        }
    }
}

fn dispatch(command: Command) -> Result<Status> {
    match command {
        Command::Instance(InstanceCmd::List) => {
            for name in zoo::BUILTIN_NAMES {
                println!("{name}");
            }
            Ok(Status::Ok)
        }
        Command::Instance(InstanceCmd::Emit { name, gamma, out }) => instance_emit(&name, gamma, &out),
        Command::Evaluate(args) => evaluate(&args),
        Command::Landscape(args) => landscape(&args),
        Command::Psd(args) => psd(&args),
        Command::Hardness(HardnessCmd::Gen {
            cnf,
            variant,
            gamma,
            out,
        }) => hardness_gen(&cnf, variant, gamma, &out),
        Command::Hardness(HardnessCmd::Certify {
            cnf,
            corpus_seed,
            variant,
            gamma,
            random,
            seed,
            jobs,
            out,
        }) => hardness_certify(&cnf, corpus_seed, variant, gamma, random, seed, jobs.jobs, &out),
        Command::Dominance(DominanceCmd::Check {
            instance,
            oracle,
            constant,
            policy,
            out,
        }) => dominance_check(&instance, &oracle, constant, &policy, &out),
        Command::Dominance(DominanceCmd::Search {
            trials,
            states,
            actions,
            choices,
            oracle,
            jobs,
            out,
        }) => dominance_search(trials, (states, actions, choices), &oracle, jobs.jobs, &out),
        Command::Dominance(DominanceCmd::Rate {
            instance,
            iterations,
            oracle,
            init,
            seed,
            out,
        }) => dominance_rate(&instance, iterations, &oracle, &init, seed, &out),
    }
}

fn instance_emit(name: &str, gamma: Option<f64>, out: &OutArgs) -> Result<Status> {
    let mut inst = match (name, gamma) {
        ("counterexample", Some(g)) => zoo::build_counterexample(&zoo::CounterexampleSpec {
            gamma: g,
            ..Default::default()
        })?,
        ("s-rect-two-state", Some(g)) => zoo::build_s_rect_two_state(g)?,
        _ => zoo::builtin(name)?,
    };
    if let Some(g) = gamma {
        inst.gamma = g;
        inst.validate()?;
    }
    let mut sink = Sink::new(out);
    sink.instance(&inst);
    sink.primary(instance_to_json(&inst).as_bytes())?;
    sink.finish()?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct EvaluateOut {
    #[serde(rename = "J")]
    j: f64,
    active_models: Vec<usize>,
    #[serde(rename = "V")]
    v: Vec<f64>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
}

fn evaluate(args: &EvaluateArgs) -> Result<Status> {
    let inst = load(&args.instance)?;
    let policy = load_policy(&args.policy, &inst)?;
    let r = robust_evaluate(&inst, &policy)?;
    let mut sink = Sink::new(&args.out);
    sink.instance(&inst);
    sink.primary(&json(&EvaluateOut {
        j: r.robust_cost,
        active_models: r.active,
        v: r.values,
        q: r.q.to_rows(),
    }))?;
    sink.finish()?;
    Ok(Status::Ok)
}

fn parse_index(token: &str, labels: Option<&Vec<String>>, bound: usize, what: &str) -> Result<usize> {
    let idx = match token.parse::<usize>() {
        Ok(i) => Some(i),
        Err(_) => labels.and_then(|l| l.iter().position(|x| x == token)),
    };
    idx.filter(|&i| i < bound)
        .ok_or_else(|| LabError::usage(format!("unknown {what} `{token}`")))
}

fn parse_axes(args: &LandscapeArgs, inst: &RmdpInstance) -> Result<[(usize, usize); 2]> {
    let (n, m) = (inst.num_states, inst.num_actions);
    if args.axes.is_empty() {
        let free: Vec<(usize, usize)> = (0..n).flat_map(|s| (0..m - 1).map(move |a| (s, a))).collect();
        return match free.as_slice() {
            [x, y] => Ok([*x, *y]),
            _ => Err(LabError::usage(format!(
                "the instance has {} free policy coordinates; name two with --axes s:a,s:a",
                free.len()
            ))),
        };
    }
    if args.axes.len() != 2 {
        return Err(LabError::usage("--axes takes exactly two state:action pairs"));
    }
    let mut out = [(0, 0); 2];
    for (slot, axis) in out.iter_mut().zip(&args.axes) {
        let (s, a) = axis
            .split_once(':')
            .ok_or_else(|| LabError::usage(format!("axis `{axis}` is not state:action")))?;
        *slot = (
            parse_index(s, inst.state_labels.as_ref(), n, "state")?,
            parse_index(a, inst.action_labels.as_ref(), m, "action")?,
        );
    }
    if out[0] == out[1] {
        return Err(LabError::usage("the two axes must differ"));
    }
    Ok(out)
}

/// Sets `row[a] = v` for each `(a, v)` and spreads the remaining mass over
/// the other actions in proportion to `row` (uniformly if `row` has none there).
fn pin_row(row: &[f64], pins: &[(usize, f64)]) -> Option<Vec<f64>> {
    let pinned: f64 = pins.iter().map(|p| p.1).sum();
    if pinned > 1.0 + 1e-12 {
        return None;
    }
    let rest = (1.0 - pinned).max(0.0);
    let free: Vec<usize> = (0..row.len()).filter(|a| pins.iter().all(|p| p.0 != *a)).collect();
    let mass: f64 = free.iter().map(|&a| row[a]).sum();
    let mut out = vec![0.0; row.len()];
    for &(a, v) in pins {
        out[a] = v;
    }
    for &a in &free {
        out[a] = if mass > 0.0 { rest * row[a] / mass } else { rest / free.len() as f64 };
    }
    if free.is_empty() && rest > 1e-12 {
        return None;
    }
    Some(out)
}

fn landscape_policy(base: &Policy, axes: &[(usize, usize); 2], x: f64, y: f64) -> Option<Policy> {
    let mut table = base.table().clone();
    if axes[0].0 == axes[1].0 {
        let row = pin_row(base.row(axes[0].0), &[(axes[0].1, x), (axes[1].1, y)])?;
        table.row_mut(axes[0].0).copy_from_slice(&row);
    } else {
        for (&(s, a), v) in axes.iter().zip([x, y]) {
            let row = pin_row(base.row(s), &[(a, v)])?;
            table.row_mut(s).copy_from_slice(&row);
        }
    }
    Policy::new(table).ok()
}

fn grid_steps(step: f64) -> Result<usize> {
    let n = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0) || (n * step - 1.0).abs() > 1e-9 {
        return Err(LabError::usage(format!("grid step {step} does not divide 1")));
    }
    Ok(n as usize)
}

fn landscape(args: &LandscapeArgs) -> Result<Status> {
    let inst = load(&args.instance)?;
    let axes = parse_axes(args, &inst)?;
    let base = load_policy(&args.base, &inst)?;
    let n = grid_steps(args.grid)?;
    let points: Vec<(f64, f64)> = (0..=n)
        .flat_map(|i| (0..=n).map(move |j| (i as f64 / n as f64, j as f64 / n as f64)))
        .collect();
    let values = par_map(&points, args.jobs.jobs, |&(x, y)| {
        landscape_policy(&base, &axes, x, y).map(|p| robust_cost(&inst, &p))
    });
    let mut rows = Vec::with_capacity(points.len());
    for (&(x, y), v) in points.iter().zip(values) {
        if let Some(j) = v.transpose()? {
            rows.push(vec![x.to_string(), y.to_string(), j.to_string()]);
        }
    }
    let mut sink = Sink::new(&args.out);
    sink.instance(&inst);
    sink.primary(&csv_bytes(&["x".into(), "y".into(), "J_U".into()], &rows)?)?;
    sink.finish()?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct PsdSummary {
    iterations: usize,
    step: f64,
    tie_break: String,
    seed: u64,
    initial_cost: f64,
    final_cost: f64,
    best_cost: f64,
    best_iterate: usize,
    min_moreau_grad_norm: Option<f64>,
    max_distance_to_reference: Option<f64>,
    value_iteration_optimum: Option<f64>,
    final_policy: Vec<Vec<f64>>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn psd(args: &PsdArgs) -> Result<Status> {
    let inst = load(&args.instance)?;
    let init = load_policy(&args.init, &inst)?;
    let reference = args.reference.as_deref().map(|r| load_policy(r, &inst)).transpose()?;
    if args.iterations == 0 || args.record_every == 0 {
        return Err(LabError::usage("--T and --record-every must be positive"));
    }
    let tie_break = match args.tie_break {
        TieBreakArg::First => TieBreak::FirstActive,
        TieBreakArg::Average => TieBreak::Average,
        TieBreakArg::Random => TieBreak::Random(args.seed),
    };
    let config = PsdConfig {
        iterations: args.iterations,
        step_rule: args.eta.map_or(StepRule::InverseSqrtT, StepRule::Constant),
        tie_break,
        record_every: args.record_every,
        track_moreau: args.moreau,
        reference,
        ..PsdConfig::default()
    };
    let trace = psd_run(&inst, &init, &config)?;
    let (n, m) = (inst.num_states, inst.num_actions);
    let mut header: Vec<String> = vec!["t".into(), "J_U".into(), "distance_to_reference".into(), "moreau_grad_norm".into()];
    header.extend((0..n).flat_map(|s| (0..m).map(move |a| format!("pi_{s}_{a}"))));
    let rows: Vec<Vec<String>> = trace
        .records
        .iter()
        .map(|r| {
            let mut row = vec![
                r.t.to_string(),
                r.robust_cost.to_string(),
                fmt_opt(r.distance_to_reference),
                fmt_opt(r.moreau_grad_norm),
            ];
            row.extend(r.policy.table().as_slice().iter().map(f64::to_string));
            row
        })
        .collect();
    let summary = PsdSummary {
        iterations: trace.iterations,
        step: trace.step,
        tie_break: format!("{:?}", args.tie_break).to_lowercase(),
        seed: args.seed,
        initial_cost: trace.costs[0],
        final_cost: *trace.costs.last().expect("at least one iterate"),
        best_cost: trace.best_cost,
        best_iterate: trace.best_iterate,
        min_moreau_grad_norm: trace.min_moreau_grad_norm,
        max_distance_to_reference: trace.max_distance_to_reference,
        value_iteration_optimum: optimal_by_value_iteration(&inst, DEFAULT_TOL).ok().map(|r| r.0),
        final_policy: trace.final_policy.table().to_rows(),
    };
    let mut sink = Sink::new(&args.out);
    sink.rec.seed = Some(args.seed);
    sink.instance(&inst);
    sink.primary(&csv_bytes(&header, &rows)?)?;
    sink.secondary("summary.json", &json(&summary))?;
    sink.finish()?;
    Ok(Status::Ok)
}

fn hardness_gen(cnf: &Path, variant: VariantArg, gamma: f64, out: &OutArgs) -> Result<Status> {
    let formula = read_cnf(cnf)?;
    let variant = match variant {
        VariantArg::FiniteP => ReductionVariant::FiniteP,
        VariantArg::SaRect => ReductionVariant::SaRect,
        VariantArg::Both => return Err(LabError::usage("`hardness gen` builds one variant at a time")),
    };
    let artifact = hardness::build_reduction(&formula, variant, gamma)?;
    eprintln!(
        "{} reduction: {} states, gap threshold {}",
        variant.name(),
        artifact.instance.num_states,
        artifact.gap_threshold
    );
    let mut sink = Sink::new(out);
    sink.instance(&artifact.instance);
    sink.primary(instance_to_json(&artifact.instance).as_bytes())?;
    sink.finish()?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct CertificateOut {
    source: String,
    num_vars: usize,
    num_clauses: usize,
    variant: &'static str,
    satisfiable: bool,
    threshold: f64,
    pi_beta_cost: Option<f64>,
    min_deterministic: f64,
    min_random: f64,
    random_policies: usize,
    rmdp_min_found: f64,
    rmdp_decision: bool,
    consistent: bool,
}

#[allow(clippy::too_many_arguments)]
fn hardness_certify(
    files: &[PathBuf],
    corpus_seed: Option<u64>,
    variant: VariantArg,
    gamma: f64,
    random: usize,
    seed: u64,
    jobs: usize,
    out: &OutArgs,
) -> Result<Status> {
    let mut formulas: Vec<(String, CnfFormula)> = Vec::new();
    for f in files {
        formulas.push((f.display().to_string(), read_cnf(f)?));
    }
    if let Some(cs) = corpus_seed {
        for (i, entry) in generate_corpus(cs, 20, 20, 8, 15).into_iter().enumerate() {
            formulas.push((format!("corpus:{cs}:{i}"), entry.formula));
        }
    }
    if formulas.is_empty() {
        return Err(LabError::usage("give at least one --cnf file or --corpus-seed"));
    }
    let tasks: Vec<(usize, ReductionVariant)> = (0..formulas.len())
        .flat_map(|i| variant.variants().into_iter().map(move |v| (i, v)))
        .collect();
    let results = par_map(&tasks, jobs, |&(i, v)| {
        let (source, f) = &formulas[i];
        certify(f, v, gamma, random, seed.wrapping_add(i as u64)).map(|c| CertificateOut {
            source: source.clone(),
            num_vars: f.num_vars(),
            num_clauses: f.num_clauses(),
            variant: v.name(),
            satisfiable: c.satisfiable,
            threshold: c.threshold,
            pi_beta_cost: c.pi_beta_cost,
            min_deterministic: c.min_deterministic,
            min_random: c.min_random,
            random_policies: c.random_policies,
            rmdp_min_found: c.rmdp_min_found,
            rmdp_decision: c.rmdp_decision,
            consistent: c.consistent,
        })
    });
    let certs = results.into_iter().collect::<std::result::Result<Vec<_>, _>>()?;
    let all_consistent = certs.iter().all(|c| c.consistent);
    let mut sink = Sink::new(out);
    sink.rec.seed = Some(seed);
    sink.primary(&json(&certs))?;
    sink.finish()?;
    Ok(if all_consistent { Status::Ok } else { Status::CheckFailed })
}

#[derive(Serialize)]
struct PolicyCheckOut {
    policy: Vec<Vec<f64>>,
    j: f64,
    g: Option<f64>,
    gap: Option<f64>,
    slack: Option<f64>,
    violation: bool,
    unique_kernel: bool,
    unique_q: bool,
}

#[derive(Serialize)]
struct DominanceOut {
    jstar: Option<f64>,
    oracle: String,
    constant: Option<f64>,
    unique_kernel_holds: bool,
    unique_q_holds: bool,
    max_slack: Option<f64>,
    violations: usize,
    dominance_holds: Option<bool>,
    note: Option<String>,
    checks: Vec<PolicyCheckOut>,
}

fn sampler(oracle: &OracleArgs, extra: Vec<Policy>) -> SamplerConfig {
    SamplerConfig {
        seed: oracle.seed,
        dirichlet_samples: oracle.samples,
        extra,
        ..SamplerConfig::default()
    }
}

fn dominance_check(
    instance: &InstanceArgs,
    oracle: &OracleArgs,
    constant: Option<f64>,
    policies: &[String],
    out: &OutArgs,
) -> Result<Status> {
    let inst = load(instance)?;
    let extra = policies.iter().map(|p| load_policy(p, &inst)).collect::<Result<Vec<_>>>()?;
    let jstar_oracle = parse_oracle(&oracle.oracle, oracle.seed)?;
    let sampler = sampler(oracle, extra);
    let report = if constant.is_none() && !inst.has_full_support() {
        // No dominance constant is defined; report the uniqueness flags only.
        let note = rmdp_core::Error::NotFullSupport {
            state: inst.mu.iter().position(|&m| m <= 0.0).unwrap_or(0),
        }
        .to_string();
        let mut checks = Vec::new();
        for p in sample_policies(&inst, &sampler) {
            checks.push(PolicyCheckOut {
                j: robust_cost(&inst, &p)?,
                unique_kernel: check_unique_worst_kernel(&inst, &p, DEFAULT_UNIQ_TOL)?.holds,
                unique_q: check_unique_worst_q(&inst, &p, DEFAULT_UNIQ_TOL)?.holds,
                policy: p.table().to_rows(),
                g: None,
                gap: None,
                slack: None,
                violation: false,
            });
        }
        DominanceOut {
            jstar: None,
            oracle: jstar_oracle.describe(),
            constant: None,
            unique_kernel_holds: checks.iter().all(|c| c.unique_kernel),
            unique_q_holds: checks.iter().all(|c| c.unique_q),
            max_slack: None,
            violations: 0,
            dominance_holds: None,
            note: Some(format!("dominance not checked: {note}; pass --constant to supply one")),
            checks,
        }
    } else {
        let config = DominanceConfig {
            sampler,
            oracle: jstar_oracle,
            constant: constant.map_or(DominanceConstant::FromInstance, DominanceConstant::Explicit),
            tolerance: oracle.tolerance,
            ..DominanceConfig::default()
        };
        let r = verify_dominance(&inst, &config)?;
        DominanceOut {
            jstar: Some(r.jstar),
            oracle: r.oracle,
            constant: Some(r.constant),
            unique_kernel_holds: r.unique_kernel_holds,
            unique_q_holds: r.unique_q_holds,
            max_slack: Some(r.max_slack),
            violations: r.violations.len(),
            dominance_holds: Some(r.dominance_holds),
            note: None,
            checks: r
                .checks
                .into_iter()
                .map(|c| PolicyCheckOut {
                    policy: c.policy.table().to_rows(),
                    j: c.j,
                    g: Some(c.g),
                    gap: Some(c.gap),
                    slack: Some(c.slack),
                    violation: c.violation,
                    unique_kernel: c.unique_kernel,
                    unique_q: c.unique_q,
                })
                .collect(),
        }
    };
    let failed = report.dominance_holds == Some(false);
    let mut sink = Sink::new(out);
    sink.rec.seed = Some(oracle.seed);
    sink.instance(&inst);
    sink.primary(&json(&report))?;
    sink.finish()?;
    Ok(if failed { Status::CheckFailed } else { Status::Ok })
}

#[derive(Serialize)]
struct ViolationOut {
    seed: u64,
    max_slack: f64,
}

#[derive(Serialize)]
struct SearchOut {
    trials: usize,
    num_states: usize,
    num_actions: usize,
    choices: usize,
    oracle: String,
    max_slack: f64,
    violations: Vec<ViolationOut>,
}

fn dominance_search(
    trials: usize,
    (states, actions, choices): (usize, usize, usize),
    oracle: &OracleArgs,
    jobs: usize,
    out: &OutArgs,
) -> Result<Status> {
    let config = DominanceConfig {
        sampler: sampler(oracle, Vec::new()),
        oracle: parse_oracle(&oracle.oracle, oracle.seed)?,
        tolerance: oracle.tolerance,
        ..DominanceConfig::default()
    };
    let seeds: Vec<u64> = (0..trials as u64).map(|i| oracle.seed.wrapping_add(i)).collect();
    let reports = par_map(&seeds, jobs, |&s| search_s_rect(s, 1, states, actions, choices, &config));
    let mut max_slack = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for r in reports {
        let r = r?;
        max_slack = max_slack.max(r.max_slack);
        violations.extend(r.violations.into_iter().map(|(seed, max_slack)| ViolationOut { seed, max_slack }));
    }
    let failed = !violations.is_empty();
    let mut sink = Sink::new(out);
    sink.rec.seed = Some(oracle.seed);
    sink.primary(&json(&SearchOut {
        trials,
        num_states: states,
        num_actions: actions,
        choices,
        oracle: config.oracle.describe(),
        max_slack,
        violations,
    }))?;
    sink.finish()?;
    Ok(if failed { Status::CheckFailed } else { Status::Ok })
}

#[derive(Serialize)]
struct RateRowOut {
    iterations: usize,
    eta: f64,
    best_cost: f64,
    min_suboptimality: f64,
    bound: f64,
    holds: Option<bool>,
}

#[derive(Serialize)]
struct RateOut {
    jstar: f64,
    rate_c: f64,
    skipped: Option<String>,
    slope: Option<f64>,
    rows: Vec<RateRowOut>,
}

fn dominance_rate(
    instance: &InstanceArgs,
    iterations: Vec<usize>,
    oracle: &str,
    init: &str,
    seed: u64,
    out: &OutArgs,
) -> Result<Status> {
    let inst = load(instance)?;
    let config = RateConfig {
        iterations,
        initial: Some(load_policy(init, &inst)?),
        oracle: parse_oracle(oracle, seed)?,
        seed,
        ..RateConfig::default()
    };
    let r = verify_rate(&inst, &config)?;
    let failed = r.rows.iter().any(|row| row.holds == Some(false));
    let mut sink = Sink::new(out);
    sink.rec.seed = Some(seed);
    sink.instance(&inst);
    sink.primary(&json(&RateOut {
        jstar: r.jstar,
        rate_c: r.rate_c,
        skipped: r.skipped,
        slope: r.slope,
        rows: r
            .rows
            .into_iter()
            .map(|row| RateRowOut {
                iterations: row.iterations,
                eta: row.eta,
                best_cost: row.best_cost,
                min_suboptimality: row.min_suboptimality,
                bound: row.bound,
                holds: row.holds,
            })
            .collect(),
    }))?;
    sink.finish()?;
    Ok(if failed { Status::CheckFailed } else { Status::Ok })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pin_row_spreads_remaining_mass() {
        let close = |got: Vec<f64>, want: &[f64]| got.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15);
        assert!(close(pin_row(&[0.2, 0.3, 0.5], &[(0, 0.5)]).unwrap(), &[0.5, 0.1875, 0.3125]));
        assert!(close(pin_row(&[1.0, 0.0, 0.0], &[(0, 0.4)]).unwrap(), &[0.4, 0.3, 0.3]));
        assert!(pin_row(&[0.5, 0.5], &[(0, 0.7), (1, 0.7)]).is_none());
        assert!(pin_row(&[0.5, 0.5], &[(0, 0.2), (1, 0.3)]).is_none());
    }

    #[test]
    fn grid_steps_must_divide_one() {
        assert_eq!(grid_steps(0.05).unwrap(), 20);
        assert_eq!(grid_steps(1.0).unwrap(), 1);
        assert!(grid_steps(0.3).is_err());
        assert!(grid_steps(0.0).is_err());
    }

    #[test]
    fn oracle_specs() {
        assert_eq!(parse_oracle("grid:0.01", 0).unwrap(), JStarOracle::Grid { resolution: 0.01 });
        assert_eq!(parse_oracle("vi", 0).unwrap(), JStarOracle::ValueIteration);
        assert_eq!(
            parse_oracle("psd:4:50", 9).unwrap(),
            JStarOracle::Psd {
                starts: 4,
                iterations: 50,
                seed: 9
            }
        );
        assert!(parse_oracle("lp", 0).is_err());
    }

    #[test]
    fn counterexample_landscape_corners() {
        let inst = zoo::builtin("counterexample").unwrap();
        let base = zoo::pi_tilde2();
        let axes = [(0, 0), (1, 0)];
        let j = |x, y| robust_cost(&inst, &landscape_policy(&base, &axes, x, y).unwrap()).unwrap();
        assert!((j(0.0, 0.0) - 0.505).abs() < 1e-12);
        assert!((j(1.0, 1.0) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
