//! The closed loop: translate the goal, keep beliefs, sample worlds, plan in
//! each, act, and replan when observations bring something new.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{Assignment, Belief};
use crate::goal::{goal_text, translate_goal};
use crate::grounding::{ground_goal, ground_problem, ActionCall, GroundGoal};
use crate::llm::{CallLog, CallRecord, ChatBackend, TokenTotals};
use crate::pddl::{alfred_domain, Atom, GoalFormula};
use crate::planner::{plan, PlannerKind, SearchBudget, SearchOutcome};
use crate::sampling::{dedupe_and_screen, sample, OracleView, SampleContext, SamplerConfig, Strategy};
use crate::sim::vocab::START_LOC;
use crate::sim::{Family, HouseholdEnv};

pub const DEFAULT_MAX_STEPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("max_steps must be at least 1")]
    InvalidMaxSteps,
    #[error("n_samples must be at least 1")]
    InvalidSamples,
}

/// When to throw away the current plan and sample again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplanPolicy {
    /// After new information, a failed action, or an exhausted plan.
    #[default]
    OnNewInfo,
    /// Before every action.
    EveryStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub sampler: SamplerConfig,
    pub planner: PlannerKind,
    pub budget: SearchBudget,
    pub max_steps: usize,
    pub replan: ReplanPolicy,
}

impl AgentConfig {
    pub fn new(sampler: SamplerConfig) -> Self {
        AgentConfig {
            sampler,
            planner: PlannerKind::default(),
            budget: SearchBudget::default(),
            max_steps: DEFAULT_MAX_STEPS,
            replan: ReplanPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.max_steps == 0 {
            return Err(AgentError::InvalidMaxSteps);
        }
        if self.sampler.n_samples == 0 {
            return Err(AgentError::InvalidSamples);
        }
        Ok(())
    }
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self::new(SamplerConfig::default())
    }
}

/// Result of planning in one sampled world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PlanOutcome {
    Found { plan: Vec<ActionCall> },
    Unsolvable,
    BudgetExhausted { expanded: usize },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    Plan { sample: usize, plan: Vec<ActionCall> },
    NeedsResample,
    AllSatisfied,
    NoPlan,
}

/// Shortest plan wins, ties to the lower sample index.
pub fn select_action(outcomes: &[PlanOutcome], all_satisfied: bool, fallback_available: bool) -> Selection {
    let best = outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, o)| match o {
            PlanOutcome::Found { plan } => Some((plan.len(), i, plan)),
            _ => None,
        })
        .min_by_key(|(len, i, _)| (*len, *i));
    match best {
        Some((_, sample, plan)) => Selection::Plan {
            sample,
            plan: plan.clone(),
        },
        None if all_satisfied => Selection::AllSatisfied,
        None if fallback_available => Selection::NeedsResample,
        None => Selection::NoPlan,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub strategy: Strategy,
    pub assignments: Vec<Vec<String>>,
    pub all_satisfied: bool,
    pub outcomes: Vec<PlanOutcome>,
    pub selected: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Decision {
    Plan { length: usize },
    Explore { target: String },
    Fail { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub attempts: Vec<AttemptRecord>,
    pub decision: Decision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionSource {
    Plan,
    Explore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub round: usize,
    /// Planning that happened right before this step, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planning: Option<RoundRecord>,
    pub source: ActionSource,
    /// The plan being followed, starting with this step's action.
    pub plan: Vec<ActionCall>,
    pub action: ActionCall,
    pub success: bool,
    pub observation: String,
    pub new_info: bool,
    pub done: bool,
    pub belief: Belief,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub family: Family,
    pub seed: u64,
    pub episode: u64,
    pub task: String,
    pub initial_observation: String,
    pub goal: Option<String>,
    pub success: bool,
    pub steps: usize,
    pub rounds: usize,
    pub failure: Option<String>,
    /// A planning round that ended the episode without producing a step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_round: Option<RoundRecord>,
    pub tokens: TokenTotals,
    pub tokens_by_role: BTreeMap<String, TokenTotals>,
    pub llm_calls: Vec<CallRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<StepRecord>,
    pub summary: EpisodeSummary,
}

impl EpisodeTrace {
    pub fn success(&self) -> bool {
        self.summary.success
    }

    pub fn length(&self) -> usize {
        self.summary.steps
    }

    /// One JSON object per step, then the summary.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            let mut v = serde_json::to_value(s).expect("trace serializes");
            v["record"] = "step".into();
            out.push_str(&v.to_string());
            out.push('\n');
        }
        let mut v = serde_json::to_value(&self.summary).expect("trace serializes");
        v["record"] = "summary".into();
        out.push_str(&v.to_string());
        out.push('\n');
        out
    }
}

fn render(a: &Assignment) -> Vec<String> {
    a.iter().map(Atom::to_string).collect()
}

struct Episode<'a> {
    cfg: &'a AgentConfig,
    backend: &'a dyn ChatBackend,
    log: CallLog,
    episode: u64,
}

impl Episode<'_> {
    fn plan_in(&self, belief: &Belief, goal: &GoalFormula, assignment: &Assignment) -> PlanOutcome {
        let problem = match belief.export_problem(assignment, goal) {
            Ok(p) => p,
            Err(e) => return PlanOutcome::Error { message: e.to_string() },
        };
        let ground = match ground_problem(alfred_domain(), &problem) {
            Ok(g) => g,
            Err(e) => return PlanOutcome::Error { message: e.to_string() },
        };
        match plan(&ground, self.cfg.planner, self.cfg.budget) {
            SearchOutcome::Found(p) => PlanOutcome::Found { plan: p.calls(&ground) },
            SearchOutcome::Unsolvable => PlanOutcome::Unsolvable,
            SearchOutcome::BudgetExhausted { expanded } => PlanOutcome::BudgetExhausted { expanded },
        }
    }

    fn attempt(
        &self,
        env: &HouseholdEnv,
        belief: &Belief,
        goal: &GoalFormula,
        strategy: Strategy,
        stream: [u64; 3],
        fallback_available: bool,
    ) -> (AttemptRecord, Selection) {
        let mut record = AttemptRecord {
            strategy,
            assignments: Vec::new(),
            all_satisfied: false,
            outcomes: Vec::new(),
            selected: None,
            error: None,
        };
        let unusable = if fallback_available {
            Selection::NeedsResample
        } else {
            Selection::NoPlan
        };
        let scfg = SamplerConfig {
            strategy,
            ..self.cfg.sampler
        };
        let oracle = match (env.oracle_state(), env.oracle_objects()) {
            (Ok(state), Ok(objects)) if strategy == Strategy::Oracle => Some(OracleView { state, objects }),
            _ => None,
        };
        let ctx = SampleContext {
            stream,
            backend: Some(self.backend),
            log: Some(&self.log),
            oracle,
        };
        let samples = match sample(belief, &scfg, &ctx) {
            Ok(s) => s,
            Err(e) => {
                record.error = Some(e.to_string());
                return (record, unusable);
            }
        };
        let objects: Vec<(String, String)> = belief
            .world
            .objects
            .iter()
            .map(|o| (o.name.clone(), o.type_name.clone()))
            .collect();
        let ground: GroundGoal = match ground_goal(goal, &objects) {
            Ok(g) => g,
            Err(e) => {
                record.assignments = samples.iter().map(render).collect();
                record.error = Some(e.to_string());
                return (record, unusable);
            }
        };
        let screened = dedupe_and_screen(samples, belief, &ground);
        record.all_satisfied = screened.all_satisfied;
        record.assignments = screened.usable.iter().map(render).collect();
        record.outcomes = screened
            .usable
            .par_iter()
            .map(|a| self.plan_in(belief, goal, a))
            .collect();
        let selection = select_action(&record.outcomes, screened.all_satisfied, fallback_available);
        if let Selection::Plan { sample, .. } = &selection {
            record.selected = Some(*sample);
        }
        (record, selection)
    }
}

/// The receptacle visited longest ago (never-visited first), other than the
/// current location.
fn exploration_target(belief: &Belief, last_visit: &BTreeMap<String, usize>) -> Option<String> {
    let here = belief.world.location().unwrap_or(START_LOC);
    belief
        .world
        .receptacles()
        .filter(|r| r.name != here)
        .min_by_key(|r| (last_visit.get(&r.name).map_or(0, |s| s + 1), r.name.clone()))
        .map(|r| r.name.clone())
}

/// Runs one episode to success, failure, or the step budget.
pub fn run_episode(env: &mut HouseholdEnv, cfg: &AgentConfig, backend: &dyn ChatBackend, episode: u64) -> EpisodeTrace {
    let ep = Episode {
        cfg,
        backend,
        log: CallLog::new(),
        episode,
    };
    let (obs0, task) = env.reset();
    let mut summary = EpisodeSummary {
        family: env.spec().task.family,
        seed: env.spec().seed,
        episode,
        task: task.clone(),
        initial_observation: obs0.to_text(),
        goal: None,
        success: false,
        steps: 0,
        rounds: 0,
        failure: None,
        final_round: None,
        tokens: TokenTotals::default(),
        tokens_by_role: BTreeMap::new(),
        llm_calls: Vec::new(),
    };
    let mut steps: Vec<StepRecord> = Vec::new();
    let failure = run_loop(env, &ep, &task, &obs0, &mut summary, &mut steps).err();

    summary.success = env.done();
    summary.steps = env.steps();
    summary.failure = if summary.success { None } else { failure };
    summary.tokens = ep.log.totals();
    summary.tokens_by_role = ep.log.per_role();
    summary.llm_calls = ep.log.records();
    EpisodeTrace { steps, summary }
}

fn run_loop(
    env: &mut HouseholdEnv,
    ep: &Episode<'_>,
    task: &str,
    obs0: &crate::belief::Observation,
    summary: &mut EpisodeSummary,
    steps: &mut Vec<StepRecord>,
) -> Result<(), String> {
    let cfg = ep.cfg;
    cfg.validate().map_err(|e| e.to_string())?;
    let translation = translate_goal(task, alfred_domain(), ep.backend, &ep.log).map_err(|e| e.to_string())?;
    let goal = translation.goal;
    summary.goal = Some(goal_text(&goal));
    let mut belief = Belief::init_from_scene(&goal.type_multiplicities(), &obs0.scene).map_err(|e| e.to_string())?;
    belief.observe(None, obs0).map_err(|e| e.to_string())?;

    let mut current: VecDeque<ActionCall> = VecDeque::new();
    let mut source = ActionSource::Plan;
    let mut round = 0usize;
    let mut pending_round: Option<RoundRecord> = None;
    let mut last_visit: BTreeMap<String, usize> = BTreeMap::new();
    let mut visited: BTreeSet<String> = BTreeSet::new();

    while !env.done() {
        if env.steps() >= cfg.max_steps {
            return Err(format!("step budget of {} exhausted", cfg.max_steps));
        }
        if current.is_empty() {
            round += 1;
            summary.rounds = round;
            let stream = |attempt: u64| [ep.episode, round as u64, attempt];
            let fallback = cfg.sampler.fallback_to_random;
            let (first, selection) = ep.attempt(env, &belief, &goal, cfg.sampler.strategy, stream(0), fallback);
            let mut attempts = vec![first];
            let selection = match selection {
                Selection::NeedsResample | Selection::AllSatisfied if fallback => {
                    let (second, s) = ep.attempt(env, &belief, &goal, Strategy::Random, stream(1), false);
                    attempts.push(second);
                    s
                }
                s => s,
            };
            let decision = match selection {
                Selection::Plan { plan, .. } => {
                    source = ActionSource::Plan;
                    let length = plan.len();
                    current.extend(plan);
                    Decision::Plan { length }
                }
                _ if fallback => match exploration_target(&belief, &last_visit) {
                    Some(target) => {
                        source = ActionSource::Explore;
                        let here = belief.world.location().unwrap_or(START_LOC).to_string();
                        current.push_back(ActionCall::new("gotoReceptacle", [here, target.clone()]));
                        Decision::Explore { target }
                    }
                    None => Decision::Fail {
                        reason: "nowhere left to explore".into(),
                    },
                },
                Selection::AllSatisfied => Decision::Fail {
                    reason: "every sampled world already satisfies the goal".into(),
                },
                _ => Decision::Fail {
                    reason: "no plan in any sampled world".into(),
                },
            };
            let record = RoundRecord {
                round,
                attempts,
                decision: decision.clone(),
            };
            if let Decision::Fail { reason } = decision {
                summary.final_round = Some(record);
                return Err(reason);
            }
            pending_round = Some(record);
        }

        let plan_view: Vec<ActionCall> = current.iter().cloned().collect();
        let action = current.pop_front().expect("a round leaves a non-empty plan");
        let (obs, done) = env.step(&action).map_err(|e| e.to_string())?;
        let observed = belief.observe(Some(&action), &obs);
        if visited.insert(obs.location.clone()) || obs.receptacle.is_some() {
            last_visit.insert(obs.location.clone(), env.steps());
        }
        let new_info = match observed {
            Ok(n) => n,
            Err(e) => {
                steps.push(step_record(env, round, &mut pending_round, source, plan_view, action, &obs, false, done, &belief));
                return Err(e.to_string());
            }
        };
        steps.push(step_record(env, round, &mut pending_round, source, plan_view, action, &obs, new_info, done, &belief));
        if new_info || !obs.success || cfg.replan == ReplanPolicy::EveryStep {
            current.clear();
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn step_record(
    env: &HouseholdEnv,
    round: usize,
    pending: &mut Option<RoundRecord>,
    source: ActionSource,
    plan: Vec<ActionCall>,
    action: ActionCall,
    obs: &crate::belief::Observation,
    new_info: bool,
    done: bool,
    belief: &Belief,
) -> StepRecord {
    StepRecord {
        step: env.steps(),
        round,
        planning: pending.take(),
        source,
        plan,
        action,
        success: obs.success,
        observation: obs.to_text(),
        new_info,
        done,
        belief: belief.clone(),
    }
}

#[cfg(test)]
mod tests;
