//! Concrete completions of the belief set, one candidate per slot.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{Assignment, Belief, BeliefSlot};
use crate::grounding::GroundGoal;
use crate::llm::{CallLog, ChatBackend, ChatMessage, ChatRequest};
use crate::pddl::Atom;

pub const LOG_ROLE: &str = "sampler";
/// Upper bound on the number of worlds the oracle strategy returns.
pub const ORACLE_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Random,
    Oracle,
    Llm,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Random => "random",
            Strategy::Oracle => "oracle",
            Strategy::Llm => "llm",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Strategy::Random),
            "oracle" => Ok(Strategy::Oracle),
            "llm" => Ok(Strategy::Llm),
            _ => Err(format!("unknown sampler `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SamplingError {
    #[error("n_samples must be at least 1")]
    InvalidConfig,
    #[error("language backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("oracle sampling unavailable: {0}")]
    OracleUnavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub strategy: Strategy,
    pub n_samples: usize,
    pub seed: u64,
    pub fallback_to_random: bool,
}

impl SamplerConfig {
    pub fn new(strategy: Strategy, n_samples: usize, seed: u64, fallback_to_random: bool) -> Result<Self, SamplingError> {
        if n_samples == 0 {
            return Err(SamplingError::InvalidConfig);
        }
        Ok(SamplerConfig {
            strategy,
            n_samples,
            seed,
            fallback_to_random,
        })
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            strategy: Strategy::Llm,
            n_samples: 3,
            seed: 0,
            fallback_to_random: true,
        }
    }
}

/// The simulator's hidden state, for the oracle strategy only.
#[derive(Debug, Clone, Copy)]
pub struct OracleView<'a> {
    pub state: &'a BTreeSet<Atom>,
    pub objects: &'a [(String, String)],
}

/// Everything besides the belief that a sampling call may use.
#[derive(Clone, Copy, Default)]
pub struct SampleContext<'a> {
    /// Distinguishes independent draws: episode, planning round, attempt.
    pub stream: [u64; 3],
    pub backend: Option<&'a dyn ChatBackend>,
    pub log: Option<&'a CallLog>,
    pub oracle: Option<OracleView<'a>>,
}

/// Draws assignments with the configured strategy.
pub fn sample(belief: &Belief, cfg: &SamplerConfig, ctx: &SampleContext<'_>) -> Result<Vec<Assignment>, SamplingError> {
    if cfg.n_samples == 0 {
        return Err(SamplingError::InvalidConfig);
    }
    match cfg.strategy {
        Strategy::Random => Ok(sample_random(belief, cfg.n_samples, cfg.seed, ctx.stream)),
        Strategy::Oracle => {
            let view = ctx
                .oracle
                .ok_or_else(|| SamplingError::OracleUnavailable("no access to the hidden state".into()))?;
            sample_oracle(belief, view)
        }
        Strategy::Llm => {
            let backend = ctx
                .backend
                .ok_or_else(|| SamplingError::BackendUnavailable("no backend configured".into()))?;
            let fallback_log;
            let log = match ctx.log {
                Some(l) => l,
                None => {
                    fallback_log = CallLog::new();
                    &fallback_log
                }
            };
            sample_llm(belief, cfg.n_samples, cfg.seed, ctx.stream, backend, log)
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for sample `i` of a stream; independent of the sample count.
fn sub_rng(seed: u64, stream: [u64; 3], i: usize) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for part in stream.into_iter().chain([i as u64]) {
        h = splitmix(h ^ part);
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn draw(slot: &BeliefSlot, rng: &mut ChaCha8Rng) -> Atom {
    let r = slot.candidates.iter().choose(rng).expect("open slots have candidates");
    slot.atom(r)
}

/// Uniform independent choice per slot; sample `i` uses its own sub-seed.
pub fn sample_random(belief: &Belief, n: usize, seed: u64, stream: [u64; 3]) -> Vec<Assignment> {
    (0..n)
        .map(|i| {
            let mut rng = sub_rng(seed, stream, i);
            belief.beliefs.slots.iter().map(|s| draw(s, &mut rng)).collect()
        })
        .collect()
}

/// Every way of matching the open placeholders to distinct unseen objects
/// of their type, each placed at its true location.
pub fn sample_oracle(belief: &Belief, view: OracleView<'_>) -> Result<Vec<Assignment>, SamplingError> {
    let true_location = |o: &str| {
        view.state
            .iter()
            .find(|a| a.predicate == "inReceptacle" && a.args[0] == o)
            .map(|a| a.args[1].clone())
    };
    let options: Vec<Vec<(String, String)>> = belief
        .beliefs
        .slots
        .iter()
        .map(|slot| {
            view.objects
                .iter()
                .filter(|(name, t)| *t == slot.type_name && belief.world.object(name).is_none())
                .filter_map(|(name, _)| true_location(name).map(|loc| (name.clone(), loc)))
                .filter(|(_, loc)| slot.candidates.contains(loc))
                .collect()
        })
        .collect();
    if let Some(i) = options.iter().position(Vec::is_empty) {
        return Err(SamplingError::OracleUnavailable(format!(
            "no unseen object can stand in for `{}`",
            belief.beliefs.slots[i].object
        )));
    }
    let mut out: Vec<Assignment> = Vec::new();
    let mut used: Vec<&str> = Vec::new();
    let mut current: Vec<Atom> = Vec::new();
    enumerate(&belief.beliefs.slots, &options, &mut used, &mut current, &mut out);
    if out.is_empty() {
        return Err(SamplingError::OracleUnavailable("too few unseen objects".into()));
    }
    Ok(out)
}

fn enumerate<'a>(
    slots: &[BeliefSlot],
    options: &'a [Vec<(String, String)>],
    used: &mut Vec<&'a str>,
    current: &mut Vec<Atom>,
    out: &mut Vec<Assignment>,
) {
    if out.len() >= ORACLE_CAP {
        return;
    }
    let k = current.len();
    if k == slots.len() {
        let a: Assignment = current.iter().cloned().collect();
        if !out.contains(&a) {
            out.push(a);
        }
        return;
    }
    for (name, loc) in &options[k] {
        if used.contains(&name.as_str()) {
            continue;
        }
        used.push(name);
        current.push(slots[k].atom(loc));
        enumerate(slots, options, used, current, out);
        current.pop();
        used.pop();
    }
}

/// The single-turn prompt asking for one slot's value.
pub fn slot_prompt(belief: &Belief, slot: &BeliefSlot, sample_index: usize) -> String {
    let mut p = String::from("Known facts:\n");
    for a in &belief.world.known_true {
        p.push_str(&a.to_string());
        p.push('\n');
    }
    p.push_str(&format!("Predicate: (inReceptacle {} ?r)\n", slot.object));
    p.push_str(&format!("Sample {}\n", sample_index + 1));
    p.push_str("Which receptacle ?r most plausibly makes this predicate true? Options:\n");
    for r in &slot.candidates {
        p.push_str(&format!("- {r}\n"));
    }
    p.push_str("Answer with one option.");
    p
}

/// The first identifier token of `reply` naming one of `options`.
pub fn parse_choice<'o>(reply: &str, options: &'o BTreeSet<String>) -> Option<&'o String> {
    reply
        .split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '_'))
        .find_map(|tok| options.get(tok))
}

/// Asks the backend once per (sample, slot); unparseable replies fall back to
/// a uniform draw for that slot.
pub fn sample_llm(
    belief: &Belief,
    n: usize,
    seed: u64,
    stream: [u64; 3],
    backend: &dyn ChatBackend,
    log: &CallLog,
) -> Result<Vec<Assignment>, SamplingError> {
    let slots = &belief.beliefs.slots;
    let jobs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..slots.len()).map(move |s| (i, s))).collect();
    let replies: Vec<Result<Option<String>, SamplingError>> = jobs
        .par_iter()
        .map(|&(i, s)| {
            let slot = &slots[s];
            let req = ChatRequest::new(vec![ChatMessage::user(slot_prompt(belief, slot, i))]);
            let reply = log
                .complete(backend, LOG_ROLE, &req)
                .map_err(|e| SamplingError::BackendUnavailable(e.to_string()))?;
            Ok(parse_choice(&reply.content, &slot.candidates).cloned())
        })
        .collect();
    let mut chosen: BTreeMap<(usize, usize), Option<String>> = BTreeMap::new();
    for (job, r) in jobs.into_iter().zip(replies) {
        chosen.insert(job, r?);
    }
    Ok((0..n)
        .map(|i| {
            let mut rng = sub_rng(seed, stream, i);
            slots
                .iter()
                .enumerate()
                .map(|(s, slot)| {
                    let fallback = draw(slot, &mut rng);
                    match &chosen[&(i, s)] {
                        Some(r) => slot.atom(r),
                        None => {
                            log::debug!("unparseable choice for {}; drawing at random", slot.object);
                            fallback
                        }
                    }
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screened {
    /// Distinct assignments whose world does not already satisfy the goal,
    /// in first-drawn order.
    pub usable: Vec<Assignment>,
    /// Every drawn world (or the known facts alone) satisfies the goal.
    pub all_satisfied: bool,
}

/// Merges duplicates and drops worlds that already satisfy the goal, since
/// their empty plans carry no information.
pub fn dedupe_and_screen(assignments: Vec<Assignment>, belief: &Belief, goal: &GroundGoal) -> Screened {
    let known = &belief.world.known_true;
    if goal.satisfied_by(known) {
        return Screened {
            usable: Vec::new(),
            all_satisfied: true,
        };
    }
    let mut distinct: Vec<Assignment> = Vec::new();
    for a in assignments {
        if !distinct.contains(&a) {
            distinct.push(a);
        }
    }
    let total = distinct.len();
    let usable: Vec<Assignment> = distinct
        .into_iter()
        .filter(|a| {
            let mut world = known.clone();
            world.extend(a.iter().cloned());
            !goal.satisfied_by(&world)
        })
        .collect();
    Screened {
        all_satisfied: total > 0 && usable.is_empty(),
        usable,
    }
}
