//! Batch runs over seeded scenarios, with per-family metrics and the
//! sampling-size / fallback ablation.

use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{run_episode, AgentConfig};
use crate::goal::default_goal_fixtures;
use crate::llm::{ChatBackend, Reply, ScriptedBackend, TokenTotals};
use crate::sampling::Strategy;
use crate::sim::{generate_scenario, Family, HouseholdEnv};

/// Report columns, in order.
pub const COLUMNS: [&str; 7] = ["clean", "cool", "examine", "heat", "put", "puttwo", "overall"];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("could not build the worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub families: Vec<Family>,
    pub episodes_per_family: usize,
    pub agent: AgentConfig,
    /// Episode `i` of every family uses scenario seed `seed + i`.
    pub seed: u64,
    pub workers: usize,
    /// Where to write one JSONL trace per episode, if anywhere.
    pub traces: Option<PathBuf>,
}

impl SuiteConfig {
    pub fn new(agent: AgentConfig) -> Self {
        SuiteConfig {
            families: Family::ALL.to_vec(),
            episodes_per_family: 10,
            agent,
            seed: 0,
            workers: 1,
            traces: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub family: Family,
    pub seed: u64,
    pub success: bool,
    pub steps: usize,
    pub rounds: usize,
    pub tokens: TokenTotals,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMetrics {
    pub column: String,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: Option<f64>,
    /// Mean episode length over successful episodes.
    pub mean_length: Option<f64>,
    /// Mean episode length over every episode.
    pub mean_length_all: Option<f64>,
    pub tokens: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn mean(xs: impl Iterator<Item = usize>) -> Option<f64> {
    let (sum, n) = xs.fold((0usize, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| round4(sum as f64 / n as f64))
}

impl ColumnMetrics {
    fn from_results<'a>(column: &str, results: impl Iterator<Item = &'a EpisodeResult> + Clone) -> Self {
        let episodes = results.clone().count();
        let successes = results.clone().filter(|r| r.success).count();
        let tokens = results.clone().fold(TokenTotals::default(), |mut t, r| {
            t.calls += r.tokens.calls;
            t.prompt_tokens += r.tokens.prompt_tokens;
            t.completion_tokens += r.tokens.completion_tokens;
            t
        });
        ColumnMetrics {
            column: column.to_string(),
            episodes,
            successes,
            success_rate: (episodes > 0).then(|| round4(successes as f64 / episodes as f64)),
            mean_length: mean(results.clone().filter(|r| r.success).map(|r| r.steps)),
            mean_length_all: mean(results.map(|r| r.steps)),
            tokens: tokens.total(),
            prompt_tokens: tokens.prompt_tokens,
            completion_tokens: tokens.completion_tokens,
        }
    }
}

type Row = (&'static str, fn(&ColumnMetrics) -> String);

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn csv_cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.4}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub label: String,
    /// How token counts were obtained.
    pub token_source: String,
    pub columns: Vec<ColumnMetrics>,
    pub episodes: Vec<EpisodeResult>,
}

impl SuiteReport {
    pub fn from_results(label: &str, token_source: &str, mut episodes: Vec<EpisodeResult>) -> Self {
        episodes.sort_by_key(|r| (r.family, r.seed));
        let columns = COLUMNS
            .iter()
            .map(|&c| match c.parse::<Family>() {
                Ok(f) => ColumnMetrics::from_results(c, episodes.iter().filter(move |r| r.family == f)),
                Err(_) => ColumnMetrics::from_results(c, episodes.iter()),
            })
            .collect();
        SuiteReport {
            label: label.to_string(),
            token_source: token_source.to_string(),
            columns,
            episodes,
        }
    }

    pub fn column(&self, name: &str) -> Option<&ColumnMetrics> {
        self.columns.iter().find(|c| c.column == name)
    }

    pub fn overall(&self) -> &ColumnMetrics {
        self.column("overall").expect("overall column always present")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.label);
        let _ = writeln!(out, "# episode length: mean over successful episodes (all episodes on its own row)");
        let _ = writeln!(out, "# tokens: {}", self.token_source);
        let _ = write!(out, "{:<22}", "metric");
        for c in &self.columns {
            let _ = write!(out, " {:>10}", c.column);
        }
        out.push('\n');
        let rows: [Row; 5] = [
            ("episodes", |c| c.episodes.to_string()),
            ("success rate", |c| cell(c.success_rate)),
            ("episode length", |c| cell(c.mean_length)),
            ("episode length (all)", |c| cell(c.mean_length_all)),
            ("tokens", |c| c.tokens.to_string()),
        ];
        for (name, f) in rows.iter() {
            let _ = write!(out, "{name:<22}");
            for c in &self.columns {
                let _ = write!(out, " {:>10}", f(c));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record([
            "column",
            "episodes",
            "successes",
            "success_rate",
            "mean_length",
            "mean_length_all",
            "tokens",
            "prompt_tokens",
            "completion_tokens",
        ]);
        for c in &self.columns {
            let _ = w.write_record([
                c.column.clone(),
                c.episodes.to_string(),
                c.successes.to_string(),
                csv_cell(c.success_rate),
                csv_cell(c.mean_length),
                csv_cell(c.mean_length_all),
                c.tokens.to_string(),
                c.prompt_tokens.to_string(),
                c.completion_tokens.to_string(),
            ]);
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
    }

    /// Writes `{stem}.txt`, `{stem}.json` and `{stem}.csv` under `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.txt")), self.to_text())?;
        fs::write(dir.join(format!("{stem}.json")), self.to_json())?;
        fs::write(dir.join(format!("{stem}.csv")), self.to_csv())
    }
}

/// Fixtures for the goal prompts plus a deterministic pseudo-random pick
/// for every sampler question.
pub fn default_scripted_backend() -> ScriptedBackend {
    default_goal_fixtures().merge(ScriptedBackend::new().prefix("Known facts:", Reply::PickOption))
}

fn label_for(cfg: &AgentConfig) -> String {
    let base = match cfg.sampler.strategy {
        Strategy::Llm => "LLM-DP",
        Strategy::Random => "LLM-DP-random",
        Strategy::Oracle => "LLM-DP-oracle",
    };
    let mut s = format!("{base} (n={})", cfg.sampler.n_samples);
    if !cfg.sampler.fallback_to_random {
        s.push_str(" - fallback");
    }
    s
}

fn token_source(backend: &dyn ChatBackend) -> String {
    if backend.name() == "scripted" {
        "estimated as ceil(characters / 4) by the scripted backend".into()
    } else {
        format!("usage reported by the {} backend", backend.name())
    }
}

/// Runs every (family, episode) pair; results are identical for any worker
/// count. Each finished episode is appended to `episodes.jsonl` (and its
/// trace written) immediately, so an interrupted run keeps what it finished.
pub fn run_suite(cfg: &SuiteConfig, backend: &dyn ChatBackend) -> Result<SuiteReport, HarnessError> {
    cfg.agent.validate().map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    if cfg.workers == 0 {
        return Err(HarnessError::InvalidConfig("workers must be at least 1".into()));
    }
    let jobs: Vec<(Family, u64)> = cfg
        .families
        .iter()
        .flat_map(|&f| (0..cfg.episodes_per_family as u64).map(move |i| (f, i)))
        .collect();
    let sink = match &cfg.traces {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let f = OpenOptions::new().create(true).append(true).open(dir.join("episodes.jsonl"))?;
            Some(Mutex::new(f))
        }
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let results: Vec<io::Result<EpisodeResult>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(family, i)| run_one(cfg, backend, family, i, sink.as_ref()))
            .collect()
    });
    let episodes = results.into_iter().collect::<io::Result<Vec<_>>>()?;
    Ok(SuiteReport::from_results(&label_for(&cfg.agent), &token_source(backend), episodes))
}

fn run_one(
    cfg: &SuiteConfig,
    backend: &dyn ChatBackend,
    family: Family,
    index: u64,
    sink: Option<&Mutex<File>>,
) -> io::Result<EpisodeResult> {
    let seed = cfg.seed.wrapping_add(index);
    let spec = generate_scenario(family, seed);
    let mut env = if cfg.agent.sampler.strategy == Strategy::Oracle {
        HouseholdEnv::with_oracle(spec)
    } else {
        HouseholdEnv::new(spec)
    };
    let trace = run_episode(&mut env, &cfg.agent, backend, index);
    let result = EpisodeResult {
        family,
        seed,
        success: trace.success(),
        steps: trace.length(),
        rounds: trace.summary.rounds,
        tokens: trace.summary.tokens,
        failure: trace.summary.failure.clone(),
    };
    log::info!(
        "{family} seed {seed}: {} in {} steps",
        if result.success { "success" } else { "failure" },
        result.steps
    );
    if let (Some(dir), Some(sink)) = (&cfg.traces, sink) {
        fs::write(dir.join(format!("{family}-{seed}.jsonl")), trace.to_jsonl())?;
        let mut f = sink.lock().expect("episode sink poisoned");
        writeln!(f, "{}", serde_json::to_string(&result).expect("result serializes"))?;
        f.flush()?;
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub n_samples: usize,
    pub fallback: bool,
    pub report: SuiteReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, n_samples: usize, fallback: bool) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.n_samples == n_samples && r.fallback == fallback)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# episode length: mean over successful episodes\n");
        let _ = writeln!(out, "{:<28} {:>8} {:>8} {:>10}", "model", "SR", "EL", "tokens");
        for r in &self.rows {
            let o = r.report.overall();
            let _ = writeln!(
                out,
                "{:<28} {:>8} {:>8} {:>10}",
                r.label,
                cell(o.success_rate),
                cell(o.mean_length),
                o.tokens
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(["model", "n_samples", "fallback", "episodes", "success_rate", "mean_length", "tokens"]);
        for r in &self.rows {
            let o = r.report.overall();
            let _ = w.write_record([
                r.label.clone(),
                r.n_samples.to_string(),
                r.fallback.to_string(),
                o.episodes.to_string(),
                csv_cell(o.success_rate),
                csv_cell(o.mean_length),
                o.tokens.to_string(),
            ]);
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
    }

    pub fn write(&self, dir: &Path, stem: &str) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.txt")), self.to_text())?;
        fs::write(dir.join(format!("{stem}.json")), self.to_json())?;
        fs::write(dir.join(format!("{stem}.csv")), self.to_csv())
    }
}

/// One suite per (n, fallback) pair, all on the same seeds.
pub fn ablate(
    n_values: &[usize],
    fallback_flags: &[bool],
    base: &SuiteConfig,
    backend: &dyn ChatBackend,
) -> Result<AblationReport, HarnessError> {
    let mut rows = Vec::new();
    for &n in n_values {
        for &fallback in fallback_flags {
            let mut cfg = base.clone();
            cfg.agent.sampler.n_samples = n;
            cfg.agent.sampler.fallback_to_random = fallback;
            if let Some(dir) = &base.traces {
                cfg.traces = Some(dir.join(format!("n{n}-{}", if fallback { "fallback" } else { "nofallback" })));
            }
            let report = run_suite(&cfg, backend)?;
            rows.push(AblationRow {
                label: report.label.clone(),
                n_samples: n,
                fallback,
                report,
            });
        }
    }
    Ok(AblationReport { rows })
}
