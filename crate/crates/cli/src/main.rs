#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ccplan::envmodel::{self, Scenario, SynthSpec};
use ccplan::executive::{self, DEFAULT_ZETA};
use ccplan::oracle::{self, MicroInstance};
use ccplan::recovery::{build_recovery, RecoveryPolicy, StateLattice, SweepMode};
use ccplan::roverdyn;
use ccplan::treeplan::{self, PartialPolicyTree, PlanStatus, Planner, PlannerConfig};

const EXIT_INVALID: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

#[derive(Parser)]
#[command(name = "ccplan", version, about = "Risk-bounded mission planner for solar rovers")]
struct Cli {
    /// Worker threads for recovery builds and campaigns (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic scenario.
    Gen {
        /// JSON synthetic spec; the built-in medium spec when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and save the recovery policy.
    Recovery {
        #[command(flatten)]
        input: ScenarioArgs,
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Policy file to write.
        #[arg(long, alias = "recovery-out")]
        out: PathBuf,
    },
    /// Plan from the scenario start; writes plan.json and two profiles.
    Plan {
        #[command(flatten)]
        common: PlanArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one seeded online trial and write its trace.
    Simulate {
        #[command(flatten)]
        common: PlanArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trial index within the seed's streams.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo campaign and write report.json.
    Montecarlo {
        #[command(flatten)]
        common: PlanArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a plan against the exact oracles and write evaluate.json.
    Evaluate {
        #[command(flatten)]
        common: PlanArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Campaign size used to compare against the micro optimum.
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario manifest, or the directory holding manifest.json.
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Args)]
struct LatticeArgs {
    /// Time resolution of the recovery lattice and of planner time classes, s.
    #[arg(long, default_value_t = 1800.0)]
    time_res: f64,
    /// Energy resolution of the recovery lattice, Wh.
    #[arg(long, default_value_t = 150.0)]
    energy_res: f64,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    input: ScenarioArgs,
    #[command(flatten)]
    lattice: LatticeArgs,
    /// Prebuilt recovery policy; built in memory when omitted.
    #[arg(long, alias = "recovery-in")]
    policy: Option<PathBuf>,
    #[arg(long, default_value_t = 0.02)]
    beta: f64,
}

/// A check on produced artifacts failed.
#[derive(Debug)]
struct InvariantBreach(String);

impl std::fmt::Display for InvariantBreach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invariant breach: {}", self.0)
    }
}

impl std::error::Error for InvariantBreach {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InvariantBreach>().is_some() {
                ExitCode::from(EXIT_INVARIANT)
            } else {
                ExitCode::from(EXIT_INVALID)
            }
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.cmd {
        Cmd::Gen { spec, seed, out } => cmd_gen(spec.as_deref(), seed, &out),
        Cmd::Recovery { input, lattice, out } => cmd_recovery(&input, &lattice, &out),
        Cmd::Plan { common, out } => cmd_plan(&common, &out),
        Cmd::Simulate {
            common,
            seed,
            trial,
            out,
        } => cmd_simulate(&common, seed, trial, &out),
        Cmd::Montecarlo {
            common,
            seed,
            trials,
            out,
        } => cmd_montecarlo(&common, seed, trials, &out),
        Cmd::Evaluate {
            common,
            seed,
            trials,
            out,
        } => cmd_evaluate(&common, seed, trials, &out),
    }
}

fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("manifest.json")
    } else {
        p.to_owned()
    }
}

fn load_scenario(args: &ScenarioArgs) -> Result<Scenario> {
    let path = manifest_path(&args.scenario);
    envmodel::load_scenario(&path).with_context(|| format!("loading scenario {}", path.display()))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        bail!("--beta must lie in (0, 1], got {beta}");
    }
    Ok(())
}

fn cmd_gen(spec: Option<&Path>, seed: u64, out: &Path) -> Result<u8> {
    let spec = match spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<SynthSpec>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthSpec::medium(),
    };
    prepare_dir(out)?;
    let s = envmodel::generate_synthetic(&spec, seed)?;
    let manifest = envmodel::save_scenario(&s, out)?;
    println!("scenario    {}", manifest.display());
    println!("grid        {}x{}", s.terrain().width(), s.terrain().height());
    println!("shadowed    {} cells", s.shadowed_cells().len());
    println!("havens      {}", s.havens().len());
    println!("waypoints   {}", s.waypoints().len());
    println!("hash        {}", s.content_hash());
    Ok(0)
}

fn build_policy(s: &Scenario, lattice: &LatticeArgs) -> Result<RecoveryPolicy> {
    let lat = StateLattice::new(s, lattice.time_res, lattice.energy_res)?;
    let started = Instant::now();
    let pol = build_recovery(s, &lat, SweepMode::Exact)?;
    eprintln!(
        "recovery policy: {} lattice points in {:.2} s",
        pol.values.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(pol)
}

fn cmd_recovery(input: &ScenarioArgs, lattice: &LatticeArgs, out: &Path) -> Result<u8> {
    let s = load_scenario(input)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_dir(dir)?;
    }
    let pol = build_policy(&s, lattice)?;
    pol.save(out)?;
    let x0 = s.start();
    println!("lattice     {} points", pol.values.len());
    println!("start risk  {}", pol.risk(x0, &s));
    println!("policy      {}", out.display());
    Ok(0)
}

/// Scenario and policy shared by the planning subcommands.
struct Loaded {
    scenario: Scenario,
    policy: RecoveryPolicy,
}

fn load(args: &PlanArgs) -> Result<Loaded> {
    check_beta(args.beta)?;
    if let Some(p) = &args.policy {
        if !p.is_file() {
            bail!("policy file {} does not exist", p.display());
        }
    }
    let scenario = load_scenario(&args.input)?;
    let policy = match &args.policy {
        Some(p) => {
            let pol = RecoveryPolicy::load(p).with_context(|| format!("loading policy {}", p.display()))?;
            pol.check_scenario(&scenario)?;
            pol
        }
        None => build_policy(&scenario, &args.lattice)?,
    };
    Ok(Loaded { scenario, policy })
}

fn planner<'a>(l: &'a Loaded, args: &PlanArgs) -> Result<Planner<'a>> {
    let mut cfg = PlannerConfig::new(args.beta);
    cfg.time_class_res = args.lattice.time_res;
    cfg.energy_class_res = args.lattice.energy_res;
    Ok(Planner::new(&l.scenario, &l.policy, cfg)?)
}

/// Pointwise risk bound and fault-free energy feasibility of a returned plan.
fn verify_plan(plan: &PartialPolicyTree, s: &Scenario, beta: f64) -> Result<()> {
    if let Some(n) = plan.nodes.iter().find(|n| n.exec_risk > beta) {
        return Err(InvariantBreach(format!("node at {:?} has risk {} above {beta}", n.cell, n.exec_risk)).into());
    }
    let first = &plan.nodes[0];
    let mut x = roverdyn::RoverState::new(first.cell, first.time, first.min_energy_req, first.next_wp);
    for pair in plan.nodes.windows(2) {
        let Some(a) = pair[0].action else {
            return Err(InvariantBreach("interior node without action".into()).into());
        };
        x = roverdyn::nominal_transition(&x, a, s).map_err(|e| InvariantBreach(e.to_string()))?;
        if x.energy + 1e-6 < pair[1].min_energy_req {
            return Err(InvariantBreach(format!(
                "arrival energy {} below requirement {} at t = {}",
                x.energy, pair[1].min_energy_req, x.time
            ))
            .into());
        }
    }
    if !roverdyn::is_safe(&x, s) {
        return Err(InvariantBreach(format!("plan ends unsafe at {x:?}")).into());
    }
    Ok(())
}

fn status_name(status: PlanStatus) -> &'static str {
    match status {
        PlanStatus::Full => "full",
        PlanStatus::Truncated => "truncated",
        PlanStatus::Infeasible => "infeasible",
    }
}

fn cmd_plan(args: &PlanArgs, out: &Path) -> Result<u8> {
    prepare_dir(out)?;
    let l = load(args)?;
    let p = planner(&l, args)?;
    let x0 = l.scenario.start();
    let started = Instant::now();
    let plan = p.plan_mission(x0);
    eprintln!("planned in {:.2} s", started.elapsed().as_secs_f64());
    let status = p.status_of(x0, plan.as_ref());
    let json = treeplan::plan_to_json(plan.as_ref(), status, x0, args.beta, &l.scenario.content_hash());
    write(&out.join("plan.json"), &json)?;
    println!("status      {}", status_name(status));
    println!("start risk  {}", l.policy.risk(x0, &l.scenario));
    let Some(plan) = plan else {
        return Ok(EXIT_INFEASIBLE);
    };
    treeplan::write_profiles(&plan, out)?;
    println!(
        "waypoints   {} of {}",
        plan.waypoints_covered,
        l.scenario.waypoints().len() - x0.next_wp
    );
    println!("root risk   {}", plan.root_risk);
    println!("min energy  {} Wh", plan.nodes[0].min_energy_req);
    println!("arrival     {} s", plan.terminal().time);
    verify_plan(&plan, &l.scenario, args.beta)?;
    Ok(0)
}

fn cmd_simulate(args: &PlanArgs, seed: u64, trial: u64, out: &Path) -> Result<u8> {
    prepare_dir(out)?;
    let l = load(args)?;
    let p = planner(&l, args)?;
    let r = executive::run_trial(&p, l.scenario.start(), seed, trial, DEFAULT_ZETA);
    write(&out.join("trace.csv"), &r.trace_csv())?;
    write(&out.join("trial.json"), &(serde_json::to_string_pretty(&r)? + "\n"))?;
    println!("status      {:?}", r.status);
    println!("reward      {}", r.reward);
    println!("waypoints   {}", r.waypoints_visited);
    println!("faults      {}", r.faults);
    println!("replans     {}", r.replans);
    Ok(0)
}

fn cmd_montecarlo(args: &PlanArgs, seed: u64, trials: usize, out: &Path) -> Result<u8> {
    if trials == 0 {
        bail!("--trials must be at least 1");
    }
    prepare_dir(out)?;
    let l = load(args)?;
    let p = planner(&l, args)?;
    let started = Instant::now();
    let (stats, _) = executive::run_campaign(&p, l.scenario.start(), trials, seed, DEFAULT_ZETA);
    eprintln!(
        "campaign of {trials} trials in {:.1} s",
        started.elapsed().as_secs_f64()
    );
    write(&out.join("report.json"), &stats.to_json())?;
    println!("trials        {}", stats.n);
    println!("mean reward   {:.4}", stats.mean_reward);
    println!("failure rate  {:.4} +- {:.4} (99 %)", stats.failure_rate, stats.ci);
    println!("bound         {:.4}", stats.bound);
    Ok(0)
}

#[derive(Serialize)]
struct Evaluation {
    beta: f64,
    status: PlanStatus,
    root_risk: Option<f64>,
    exact_tree_risk: Option<f64>,
    start_risk: f64,
    /// `None` when the scenario exceeds the exhaustive oracle's limits.
    micro: Option<MicroEvaluation>,
}

#[derive(Serialize)]
struct MicroEvaluation {
    optimum_reward: Option<f64>,
    optimum_failure: Option<f64>,
    unconstrained_reward: f64,
    campaign_trials: usize,
    campaign_mean_reward: f64,
    campaign_failure_rate: f64,
}

fn cmd_evaluate(args: &PlanArgs, seed: u64, trials: usize, out: &Path) -> Result<u8> {
    if trials == 0 {
        bail!("--trials must be at least 1");
    }
    prepare_dir(out)?;
    let l = load(args)?;
    let p = planner(&l, args)?;
    let s = &l.scenario;
    let x0 = s.start();
    let plan = p.plan_mission(x0);
    let exact = plan.as_ref().map(|t| oracle::exact_tree_risk(t, s, &l.policy));
    let micro = match MicroInstance::new(s.clone(), args.lattice.time_res, args.lattice.energy_res) {
        Ok(mi) => {
            let opt = oracle::exhaustive_cc_optimum(&mi, args.beta)?;
            let (stats, _) = executive::run_campaign(&p, x0, trials, seed, DEFAULT_ZETA);
            Some(MicroEvaluation {
                optimum_reward: opt.as_ref().map(|o| o.reward),
                optimum_failure: opt.as_ref().map(|o| o.failure),
                unconstrained_reward: oracle::unconstrained_optimum(&mi),
                campaign_trials: trials,
                campaign_mean_reward: stats.mean_reward,
                campaign_failure_rate: stats.failure_rate,
            })
        }
        Err(ccplan::Error::NotMicro(why)) => {
            eprintln!("skipping exhaustive oracle: {why}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let eval = Evaluation {
        beta: args.beta,
        status: p.status_of(x0, plan.as_ref()),
        root_risk: plan.as_ref().map(|t| t.root_risk),
        exact_tree_risk: exact,
        start_risk: l.policy.risk(x0, s),
        micro,
    };
    write(
        &out.join("evaluate.json"),
        &(serde_json::to_string_pretty(&eval)? + "\n"),
    )?;
    println!("status      {}", status_name(eval.status));
    if let (Some(r), Some(e)) = (eval.root_risk, exact) {
        println!("root risk   {r}");
        println!("exact risk  {e}");
        if (r - e).abs() > 1e-9 {
            return Err(InvariantBreach(format!("root risk {r} differs from the exact tree risk {e}")).into());
        }
    }
    if let Some(m) = &eval.micro {
        match m.optimum_reward {
            Some(o) => println!("optimum     {o}"),
            None => println!("optimum     infeasible"),
        }
        println!("mc reward   {}", m.campaign_mean_reward);
    }
    if let Some(plan) = &plan {
        verify_plan(plan, s, args.beta)?;
    }
    Ok(if plan.is_some() { 0 } else { EXIT_INFEASIBLE })
}
