use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use llmdp::agent::{run_episode, AgentConfig, ReplanPolicy, DEFAULT_MAX_STEPS};
use llmdp::grounding::ground_problem;
use llmdp::harness::{ablate, default_scripted_backend, run_suite, SuiteConfig};
use llmdp::llm::{ChatBackend, HttpBackend, HttpConfig, ScriptedBackend};
use llmdp::pddl::{parse_domain, parse_problem};
use llmdp::planner::{plan, PlannerKind, SearchBudget, SearchOutcome};
use llmdp::sampling::{SamplerConfig, Strategy};
use llmdp::sim::{generate_scenario, Family, HouseholdEnv};

#[derive(Parser)]
#[command(name = "llmdp", version, about = "Planning agent for a partially observed household world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan for a PDDL domain/problem pair; exit 0 found, 1 unsolvable, 2 budget exhausted.
    Plan {
        domain: PathBuf,
        problem: PathBuf,
        #[arg(long, value_enum, default_value_t = PlannerArg::Bffs)]
        planner: PlannerArg,
        #[arg(long, default_value_t = 100_000)]
        max_nodes: usize,
        #[arg(long, default_value_t = 5.0)]
        max_seconds: f64,
    },
    /// Run a batch of seeded episodes and write the report.
    Run(RunArgs),
    /// Cross n-values with fallback on/off on the same seeds.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "3,5")]
        n_values: Vec<usize>,
    },
    /// Print a generated scenario as JSON.
    Scenario {
        #[arg(long)]
        family: Family,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one episode and print its JSONL trace.
    Episode {
        #[arg(long)]
        family: Family,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    Bffs,
    Optimal,
}

impl From<PlannerArg> for PlannerKind {
    fn from(p: PlannerArg) -> Self {
        match p {
            PlannerArg::Bffs => PlannerKind::Bffs,
            PlannerArg::Optimal => PlannerKind::Optimal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Random,
    Oracle,
    Llm,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum BackendArg {
    Scripted,
    Http,
}

#[derive(Args)]
struct RunArgs {
    /// Comma-separated task families (default: all six).
    #[arg(long, value_delimiter = ',')]
    families: Vec<Family>,
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    #[arg(long, default_value_t = 3)]
    n_samples: usize,
    #[arg(long, value_enum, default_value_t = SamplerArg::Llm)]
    sampler: SamplerArg,
    #[arg(long)]
    no_fallback: bool,
    #[arg(long, value_enum, default_value_t = PlannerArg::Bffs)]
    planner: PlannerArg,
    #[arg(long, value_enum, default_value_t = BackendArg::Scripted)]
    backend: BackendArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Extra scripted fixtures (*.fixture files), consulted before the built-in ones.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Write per-episode JSONL traces under OUT/traces.
    #[arg(long)]
    traces: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: usize,
    /// Resample before every action instead of only on new information.
    #[arg(long)]
    replan_every_step: bool,
}

impl RunArgs {
    fn agent(&self) -> Result<AgentConfig> {
        let strategy = match self.sampler {
            SamplerArg::Random => Strategy::Random,
            SamplerArg::Oracle => Strategy::Oracle,
            SamplerArg::Llm => Strategy::Llm,
        };
        let sampler = SamplerConfig::new(strategy, self.n_samples, self.seed, !self.no_fallback)?;
        let mut cfg = AgentConfig::new(sampler);
        cfg.planner = self.planner.into();
        cfg.max_steps = self.max_steps;
        if self.replan_every_step {
            cfg.replan = ReplanPolicy::EveryStep;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn suite(&self) -> Result<SuiteConfig> {
        let mut cfg = SuiteConfig::new(self.agent()?);
        if !self.families.is_empty() {
            cfg.families = self.families.clone();
        }
        cfg.episodes_per_family = self.episodes;
        cfg.seed = self.seed;
        cfg.workers = self.workers;
        if self.traces {
            cfg.traces = Some(self.out.join("traces"));
        }
        Ok(cfg)
    }

    fn backend(&self) -> Result<Box<dyn ChatBackend>> {
        match self.backend {
            BackendArg::Http => Ok(Box::new(HttpBackend::new(HttpConfig::from_env()?))),
            BackendArg::Scripted => {
                let base = match &self.fixtures {
                    Some(dir) => ScriptedBackend::from_dir(dir)
                        .with_context(|| format!("loading fixtures from {}", dir.display()))?,
                    None => ScriptedBackend::new(),
                };
                Ok(Box::new(base.merge(default_scripted_backend())))
            }
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn plan_files(domain: &Path, problem: &Path, kind: PlannerKind, budget: SearchBudget) -> Result<ExitCode> {
    let d = parse_domain(&read(domain)?)?;
    let p = parse_problem(&read(problem)?, &d)?;
    let g = ground_problem(&d, &p)?;
    match plan(&g, kind, budget) {
        SearchOutcome::Found(plan) => {
            for call in plan.calls(&g) {
                println!("{call}");
            }
            Ok(ExitCode::from(0))
        }
        SearchOutcome::Unsolvable => {
            eprintln!("unsolvable");
            Ok(ExitCode::from(1))
        }
        SearchOutcome::BudgetExhausted { expanded } => {
            eprintln!("budget exhausted after {expanded} expansions");
            Ok(ExitCode::from(2))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Plan {
            domain,
            problem,
            planner,
            max_nodes,
            max_seconds,
        } => {
            if max_seconds.is_nan() || max_seconds <= 0.0 {
                bail!("--max-seconds must be positive");
            }
            let budget = SearchBudget::new(max_nodes, Duration::from_secs_f64(max_seconds))?;
            plan_files(&domain, &problem, planner.into(), budget)
        }
        Command::Run(args) => {
            let cfg = args.suite()?;
            let backend = args.backend()?;
            let report = run_suite(&cfg, backend.as_ref())?;
            report.write(&args.out, "report")?;
            print!("{}", report.to_text());
            Ok(ExitCode::SUCCESS)
        }
        Command::Ablate { run: args, n_values } => {
            let cfg = args.suite()?;
            let backend = args.backend()?;
            let report = ablate(&n_values, &[true, false], &cfg, backend.as_ref())?;
            report.write(&args.out, "ablation")?;
            print!("{}", report.to_text());
            Ok(ExitCode::SUCCESS)
        }
        Command::Scenario { family, seed } => {
            println!("{}", serde_json::to_string_pretty(&generate_scenario(family, seed))?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Episode { family, run: args } => {
            let cfg = args.agent()?;
            let backend = args.backend()?;
            let spec = generate_scenario(family, args.seed);
            let mut env = if cfg.sampler.strategy == Strategy::Oracle {
                HouseholdEnv::with_oracle(spec)
            } else {
                HouseholdEnv::new(spec)
            };
            let trace = run_episode(&mut env, &cfg, backend.as_ref(), 0);
            print!("{}", trace.to_jsonl());
            Ok(ExitCode::SUCCESS)
        }
    }
}
