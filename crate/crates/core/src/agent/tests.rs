use super::*;
use crate::goal::default_goal_fixtures;
use crate::grounding::ground_problem;
use crate::llm::{Reply, ScriptedBackend};
use crate::planner::plan_optimal;
use crate::sim::generate_scenario;

fn found(n: usize) -> PlanOutcome {
    PlanOutcome::Found {
        plan: (0..n).map(|i| ActionCall::new("gotoReceptacle", ["a".to_string(), format!("r{i}")])).collect(),
    }
}

fn config(strategy: Strategy, fallback: bool) -> AgentConfig {
    let mut cfg = AgentConfig::new(SamplerConfig::new(strategy, 3, 0, fallback).unwrap());
    cfg.planner = PlannerKind::Optimal;
    cfg
}

fn optimal_length(spec: &crate::sim::ScenarioSpec) -> usize {
    let g = ground_problem(alfred_domain(), &spec.oracle_problem()).unwrap();
    plan_optimal(&g, SearchBudget::default()).plan().unwrap().len()
}

#[test]
fn shortest_plan_wins_and_ties_go_to_the_first() {
    let sel = select_action(&[found(5), PlanOutcome::Unsolvable, found(3), found(3)], false, true);
    match sel {
        Selection::Plan { sample, plan } => {
            assert_eq!(sample, 2);
            assert_eq!(plan.len(), 3);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn no_plan_depends_on_fallback() {
    let none = [PlanOutcome::Unsolvable, PlanOutcome::Unsolvable, PlanOutcome::Unsolvable];
    assert_eq!(select_action(&none, false, true), Selection::NeedsResample);
    assert_eq!(select_action(&none, false, false), Selection::NoPlan);
    assert_eq!(select_action(&[], true, true), Selection::AllSatisfied);
}

#[test]
fn zero_step_budget_is_rejected() {
    let mut cfg = config(Strategy::Random, true);
    cfg.max_steps = 0;
    assert_eq!(cfg.validate(), Err(AgentError::InvalidMaxSteps));
}

#[test]
fn oracle_agent_walks_the_optimal_path() {
    for (i, family) in Family::ALL.into_iter().enumerate() {
        for seed in 0..3 {
            let spec = generate_scenario(family, seed);
            let best = optimal_length(&spec);
            let mut env = HouseholdEnv::with_oracle(spec);
            let trace = run_episode(&mut env, &config(Strategy::Oracle, true), &default_goal_fixtures(), i as u64);
            assert!(trace.success(), "{family} {seed}: {:?}", trace.summary.failure);
            assert_eq!(trace.length(), best, "{family} {seed}");
        }
    }
}

#[test]
fn random_agent_solves_and_executes_plan_heads() {
    let spec = generate_scenario(Family::Put, 11);
    let mut env = HouseholdEnv::new(spec);
    let trace = run_episode(&mut env, &config(Strategy::Random, true), &default_goal_fixtures(), 0);
    assert!(trace.success(), "{:?}", trace.summary.failure);
    assert_eq!(trace.steps.len(), trace.length());
    for s in &trace.steps {
        assert_eq!(s.plan[0], s.action);
    }
    assert!(trace.steps[0].planning.is_some());
    assert!(trace.steps.last().unwrap().done);
}

#[test]
fn step_budget_ends_the_episode() {
    let spec = generate_scenario(Family::Heat, 2);
    assert!(optimal_length(&spec) > 1);
    let mut env = HouseholdEnv::with_oracle(spec);
    let mut cfg = config(Strategy::Oracle, true);
    cfg.max_steps = 1;
    let trace = run_episode(&mut env, &cfg, &default_goal_fixtures(), 0);
    assert!(!trace.success());
    assert_eq!(trace.length(), 1);
    assert!(trace.summary.failure.as_deref().unwrap().contains("budget"));
}

#[test]
fn oracle_without_access_fails_without_fallback() {
    let spec = generate_scenario(Family::Put, 3);
    let mut env = HouseholdEnv::new(spec);
    let trace = run_episode(&mut env, &config(Strategy::Oracle, false), &default_goal_fixtures(), 0);
    assert!(!trace.success());
    assert_eq!(trace.length(), 0);
    let round = trace.summary.final_round.as_ref().unwrap();
    assert!(round.attempts[0].error.is_some());
}

#[test]
fn unusable_goal_is_recorded() {
    let backend = ScriptedBackend::new().prefix("", Reply::Text("no idea".into()));
    let mut env = HouseholdEnv::new(generate_scenario(Family::Put, 0));
    let trace = run_episode(&mut env, &config(Strategy::Random, true), &backend, 0);
    assert!(!trace.success());
    assert!(trace.summary.goal.is_none());
    assert!(trace.summary.failure.unwrap().contains("translation failed"));
    assert_eq!(trace.summary.tokens_by_role["goal"].calls, 2);
}

#[test]
fn llm_sampler_tokens_are_accounted_per_role() {
    let backend = default_goal_fixtures().merge(ScriptedBackend::new().prefix("Known facts:", Reply::PickOption));
    let mut env = HouseholdEnv::new(generate_scenario(Family::Cool, 5));
    let trace = run_episode(&mut env, &config(Strategy::Llm, true), &backend, 0);
    let s = &trace.summary;
    let sum: u64 = s.tokens_by_role.values().map(TokenTotals::total).sum();
    assert_eq!(sum, s.tokens.total());
    let from_records: u64 = s.llm_calls.iter().filter_map(|c| c.response.as_ref()).map(|r| r.total_tokens()).sum();
    assert_eq!(from_records, s.tokens.total());
    assert!(s.tokens_by_role.contains_key("goal"));
}

#[test]
fn trace_is_line_delimited_json() {
    let mut env = HouseholdEnv::new(generate_scenario(Family::Examine, 4));
    let trace = run_episode(&mut env, &config(Strategy::Random, true), &default_goal_fixtures(), 0);
    let text = trace.to_jsonl();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), trace.steps.len() + 1);
    assert_eq!(lines.last().unwrap()["record"], "summary");
    let back: EpisodeSummary = serde_json::from_value(lines.last().unwrap().clone()).unwrap();
    assert_eq!(back, trace.summary);
}

#[test]
fn target_in_first_visited_receptacle_needs_one_replan() {
    use crate::sim::vocab::Special;
    use crate::sim::{ObjectSpec, ReceptacleSpec, ScenarioSpec, TaskSpec};
    let rec = |name: &str, t: &str| ReceptacleSpec {
        name: name.into(),
        type_name: t.into(),
        openable: false,
        special: Special::None,
    };
    let spec = ScenarioSpec {
        seed: 0,
        receptacles: vec![rec("countertop-1", "countertop"), rec("shelf-1", "shelf")],
        objects: vec![ObjectSpec {
            name: "mug-1".into(),
            type_name: "mug".into(),
            location: "shelf-1".into(),
            clean: false,
            hot: false,
            cool: false,
        }],
        task: TaskSpec::new(Family::Put, "mug", Some("countertop"), None),
    };
    let mut env = HouseholdEnv::new(spec);
    let trace = run_episode(&mut env, &config(Strategy::Random, false), &default_goal_fixtures(), 0);
    assert!(trace.success(), "{:?}", trace.summary.failure);
    assert!(trace.summary.rounds <= 2, "{} rounds", trace.summary.rounds);
    assert_eq!(trace.length(), 4);
}
