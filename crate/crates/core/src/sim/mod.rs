//! Seeded household environment with hidden object placements and perfect
//! local observations.
//!
//! The hidden state is a set of atoms over the shared household domain, so a
//! valid action transforms it exactly like the planner's transition model.

pub mod vocab;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{Observation, ReceptacleAttrs, ReceptacleInfo, SeenObject};
use crate::grounding::{ground_goal, ground_problem, instantiate_action, ActionCall, GroundGoal};
use crate::pddl::{alfred_domain, parse_goal, Atom, GoalFormula, ProblemDef};
use crate::planner::{plan_optimal, SearchBudget, SearchOutcome};
use vocab::{Special, START_LOC, START_LOC_TYPE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("oracle access is disabled for this environment")]
    OracleDisabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Clean,
    Cool,
    Examine,
    Heat,
    Put,
    PutTwo,
}

impl Family {
    /// Report column order.
    pub const ALL: [Family; 6] = [
        Family::Clean,
        Family::Cool,
        Family::Examine,
        Family::Heat,
        Family::Put,
        Family::PutTwo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Clean => "clean",
            Family::Cool => "cool",
            Family::Examine => "examine",
            Family::Heat => "heat",
            Family::Put => "put",
            Family::PutTwo => "puttwo",
        }
    }

    fn index(self) -> u64 {
        Family::ALL.iter().position(|f| *f == self).unwrap() as u64
    }

    fn target_pool(self) -> &'static [&'static str] {
        match self {
            Family::Clean => vocab::WASHABLE,
            Family::Cool | Family::Heat => vocab::THERMAL,
            Family::Examine => vocab::EXAMINABLE,
            Family::Put => vocab::OBJECT_TYPES,
            Family::PutTwo => vocab::PAIRABLE,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown task family `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptacleSpec {
    pub name: String,
    pub type_name: String,
    pub openable: bool,
    pub special: Special,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub type_name: String,
    pub location: String,
    pub clean: bool,
    pub hot: bool,
    pub cool: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub family: Family,
    pub target_type: String,
    /// Destination receptacle type; `None` for examine tasks.
    pub target_receptacle: Option<String>,
    /// Light source type for examine tasks.
    pub light_type: Option<String>,
    pub nl_instruction: String,
}

impl TaskSpec {
    pub fn new(family: Family, target_type: &str, dest: Option<&str>, light: Option<&str>) -> Self {
        let t = target_type;
        let r = dest.unwrap_or_default();
        let nl_instruction = match family {
            Family::Put => format!("put some {t} on {r}."),
            Family::Clean => format!("put a clean {t} in {r}."),
            Family::Heat => format!("heat some {t} and put it in {r}."),
            Family::Cool => format!("cool some {t} and put it in {r}."),
            Family::PutTwo => format!("put two {t} in {r}."),
            Family::Examine => format!("examine a {t} with the {}.", light.unwrap_or_default()),
        };
        TaskSpec {
            family,
            target_type: t.to_string(),
            target_receptacle: dest.map(str::to_string),
            light_type: light.map(str::to_string),
            nl_instruction,
        }
    }

    /// The reference goal in the same layout the goal translator produces.
    pub fn goal_text(&self) -> String {
        let t = &self.target_type;
        let r = self.target_receptacle.as_deref().unwrap_or_default();
        match self.family {
            Family::Put => format!("(:goal\n(exists (?t - {t} ?r - {r})\n(inReceptacle ?t ?r)\n))"),
            Family::Clean | Family::Heat | Family::Cool => {
                let attr = match self.family {
                    Family::Clean => "isClean",
                    Family::Heat => "isHot",
                    _ => "isCool",
                };
                format!("(:goal\n(exists (?t - {t} ?r - {r})\n(and (inReceptacle ?t ?r)\n({attr} ?t)\n)))")
            }
            Family::Examine => {
                let l = self.light_type.as_deref().unwrap_or_default();
                format!("(:goal\n(exists (?t - {t} ?l - {l})\n(and (examined ?t ?l) (holds ?t)\n)))")
            }
            Family::PutTwo => format!(
                "(:goal\n(exists (?t1 - {t} ?t2 - {t} ?r - {r})\n(and (inReceptacle ?t1 ?r)\n(inReceptacle ?t2 ?r)\n(not (= ?t1 ?t2))\n)))"
            ),
        }
    }

    pub fn goal(&self) -> GoalFormula {
        parse_goal(&self.goal_text(), alfred_domain()).expect("task goals are well formed")
    }
}

/// A complete, seeded episode definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub receptacles: Vec<ReceptacleSpec>,
    pub objects: Vec<ObjectSpec>,
    pub task: TaskSpec,
}

impl ScenarioSpec {
    /// Every object with its type, the start pseudo-location first.
    pub fn typed_objects(&self) -> Vec<(String, String)> {
        let mut out = vec![(START_LOC.to_string(), START_LOC_TYPE.to_string())];
        out.extend(self.receptacles.iter().map(|r| (r.name.clone(), r.type_name.clone())));
        out.extend(self.objects.iter().map(|o| (o.name.clone(), o.type_name.clone())));
        out
    }

    /// The hidden initial state.
    pub fn initial_atoms(&self) -> BTreeSet<Atom> {
        let mut s = BTreeSet::new();
        s.insert(Atom::new("atReceptacleLocation", [START_LOC]));
        s.insert(Atom::new::<&str>("handEmpty", []));
        for r in &self.receptacles {
            s.extend(receptacle_atoms(&r.name, r.openable, r.special));
        }
        for o in &self.objects {
            s.insert(Atom::new("inReceptacle", [&o.name, &o.location]));
            for (flag, pred) in [(o.clean, "isClean"), (o.hot, "isHot"), (o.cool, "isCool")] {
                if flag {
                    s.insert(Atom::new(pred, [&o.name]));
                }
            }
            if vocab::is_light_type(&o.type_name) {
                s.insert(Atom::new("isLight", [&o.name]));
            }
        }
        s
    }

    /// The fully observed planning problem for this scenario.
    pub fn oracle_problem(&self) -> ProblemDef {
        ProblemDef {
            name: format!("{}-{}", self.task.family, self.seed),
            domain_name: alfred_domain().name.clone(),
            objects: self.typed_objects(),
            init: self.initial_atoms(),
            goal: self.task.goal(),
        }
    }

    pub fn receptacle(&self, name: &str) -> Option<&ReceptacleSpec> {
        self.receptacles.iter().find(|r| r.name == name)
    }

    pub fn scene(&self) -> Vec<ReceptacleInfo> {
        self.receptacles
            .iter()
            .map(|r| ReceptacleInfo {
                name: r.name.clone(),
                type_name: r.type_name.clone(),
                openable: r.openable,
                special: r.special,
            })
            .collect()
    }
}

/// Intrinsic atoms of a fixed receptacle.
pub fn receptacle_atoms(name: &str, openable: bool, special: Special) -> Vec<Atom> {
    let mut out = vec![Atom::new("isReceptacle", [name])];
    if openable {
        out.push(Atom::new("openable", [name]));
    }
    if let Some(p) = special.predicate() {
        out.push(Atom::new(p, [name]));
    }
    out
}

fn scenario_rng(family: Family, seed: u64) -> ChaCha8Rng {
    let mixed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(family.index().wrapping_mul(0xD1B5_4A32_D192_ED03));
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Draws a solvable scenario. The same `(family, seed)` always yields the
/// same scenario.
pub fn generate_scenario(family: Family, seed: u64) -> ScenarioSpec {
    let mut rng = scenario_rng(family, seed);
    loop {
        let spec = draw_scenario(family, seed, &mut rng);
        if is_solvable(&spec) {
            return spec;
        }
        log::debug!("discarding unsolvable draw for {family} seed {seed}");
    }
}

/// Checks the scenario with the optimal planner from its full hidden state.
pub fn is_solvable(spec: &ScenarioSpec) -> bool {
    let problem = spec.oracle_problem();
    let Ok(ground) = ground_problem(alfred_domain(), &problem) else {
        return false;
    };
    matches!(plan_optimal(&ground, SearchBudget::default()), SearchOutcome::Found(_))
}

const MAX_PER_TYPE: usize = 4;

fn draw_scenario(family: Family, seed: u64, rng: &mut ChaCha8Rng) -> ScenarioSpec {
    let target_type = *family.target_pool().choose(rng).unwrap();
    let light = (family == Family::Examine).then(|| *vocab::LIGHT_TYPES.choose(rng).unwrap());
    let dest = (family != Family::Examine).then(|| *vocab::DESTINATIONS.choose(rng).unwrap());

    let mut types: Vec<&'static str> = Vec::new();
    types.extend(dest);
    match family {
        Family::Clean => types.push("sinkbasin"),
        Family::Heat => types.push("microwave"),
        Family::Cool => types.push("fridge"),
        Family::Examine => types.push(*["sidetable", "desk", "dresser"].choose(rng).unwrap()),
        Family::Put | Family::PutTwo => {}
    }
    let n_rec = rng.gen_range(6..=12);
    while types.len() < n_rec {
        let k = vocab::RECEPTACLE_KINDS.choose(rng).unwrap();
        if types.iter().filter(|t| **t == k.type_name).count() < MAX_PER_TYPE {
            types.push(k.type_name);
        }
    }
    types.shuffle(rng);
    let receptacles: Vec<ReceptacleSpec> = number(&types)
        .into_iter()
        .map(|(name, t)| {
            let kind = vocab::receptacle_kind(t).unwrap();
            ReceptacleSpec {
                name,
                type_name: t.to_string(),
                openable: kind.openable,
                special: kind.special,
            }
        })
        .collect();

    let n_obj = rng.gen_range(5..=15);
    let n_target = match family {
        Family::PutTwo => rng.gen_range(2..=3),
        _ => rng.gen_range(1..=2),
    };
    let mut obj_types: Vec<&'static str> = vec![target_type; n_target];
    obj_types.extend(light);
    while obj_types.len() < n_obj {
        let t = *vocab::OBJECT_TYPES.choose(rng).unwrap();
        if t != target_type {
            obj_types.push(t);
        }
    }
    let lamp_holders: Vec<&ReceptacleSpec> = receptacles
        .iter()
        .filter(|r| r.special == Special::LampHolder)
        .collect();
    let away_from_dest: Vec<&ReceptacleSpec> = receptacles
        .iter()
        .filter(|r| Some(r.type_name.as_str()) != dest)
        .collect();
    let objects = number(&obj_types)
        .into_iter()
        .map(|(name, t)| {
            let (location, clean, hot, cool) = if t == target_type {
                (away_from_dest.choose(rng).unwrap().name.clone(), false, false, false)
            } else if vocab::is_light_type(t) {
                (lamp_holders.choose(rng).unwrap().name.clone(), false, false, false)
            } else {
                let thermal = rng.gen_range(0..4);
                (
                    receptacles.choose(rng).unwrap().name.clone(),
                    rng.gen_bool(0.3),
                    thermal == 1,
                    thermal == 2,
                )
            };
            ObjectSpec {
                name,
                type_name: t.to_string(),
                location,
                clean,
                hot,
                cool,
            }
        })
        .collect();

    ScenarioSpec {
        seed,
        receptacles,
        objects,
        task: TaskSpec::new(family, target_type, dest, light),
    }
}

/// Names items `{type}-{k}` with `k` counting from 1 per type.
fn number(types: &[&'static str]) -> Vec<(String, &'static str)> {
    let mut seen: Vec<(&str, usize)> = Vec::new();
    types
        .iter()
        .map(|t| {
            let k = match seen.iter_mut().find(|(s, _)| s == t) {
                Some((_, n)) => {
                    *n += 1;
                    *n
                }
                None => {
                    seen.push((t, 1));
                    1
                }
            };
            (format!("{t}-{k}"), *t)
        })
        .collect()
}

/// One episode of the household environment.
#[derive(Debug, Clone)]
pub struct HouseholdEnv {
    spec: ScenarioSpec,
    objects: Vec<(String, String)>,
    state: BTreeSet<Atom>,
    goal: GroundGoal,
    location: String,
    steps: usize,
    done: bool,
    oracle_access: bool,
}

impl HouseholdEnv {
    /// An environment whose hidden state cannot be read.
    pub fn new(spec: ScenarioSpec) -> Self {
        Self::build(spec, false)
    }

    /// An environment that exposes its hidden state through
    /// [`HouseholdEnv::oracle_state`]. For tests and the oracle sampler.
    pub fn with_oracle(spec: ScenarioSpec) -> Self {
        Self::build(spec, true)
    }

    fn build(spec: ScenarioSpec, oracle_access: bool) -> Self {
        let objects = spec.typed_objects();
        let goal = ground_goal(&spec.task.goal(), &objects).expect("scenario holds the task types");
        let state = spec.initial_atoms();
        let done = goal.satisfied_by(&state);
        HouseholdEnv {
            spec,
            objects,
            state,
            goal,
            location: START_LOC.to_string(),
            steps: 0,
            done,
            oracle_access,
        }
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn oracle_enabled(&self) -> bool {
        self.oracle_access
    }

    /// Restores the initial state and returns the opening observation and
    /// the task instruction. Object locations are not revealed.
    pub fn reset(&mut self) -> (Observation, String) {
        *self = Self::build(self.spec.clone(), self.oracle_access);
        let names: Vec<String> = self.spec.receptacles.iter().map(|r| format!("a {}", r.name)).collect();
        let obs = Observation {
            location: START_LOC.to_string(),
            receptacle: None,
            contents: Vec::new(),
            feedback: format!(
                "You are in the middle of a room. Looking quickly around you, you see {}.",
                names.join(", ")
            ),
            success: true,
            scene: self.spec.scene(),
        };
        (obs, self.spec.task.nl_instruction.clone())
    }

    /// Attempts one action. Every attempt counts as a step; invalid actions
    /// leave the state untouched and report "Nothing happens."
    pub fn step(&mut self, call: &ActionCall) -> Result<(Observation, bool), SimError> {
        if self.done {
            return Err(SimError::EpisodeFinished);
        }
        self.steps += 1;
        let known = call.args.iter().all(|a| self.objects.iter().any(|(n, _)| n == a));
        let action = instantiate_action(alfred_domain(), call)
            .ok()
            .filter(|a| known && a.applicable(&self.state));
        let Some(action) = action else {
            return Ok((self.view("Nothing happens.".to_string(), false), false));
        };
        action.apply_to(&mut self.state);
        if call.name == "gotoReceptacle" {
            self.location = call.args[1].clone();
        }
        self.done = self.goal.satisfied_by(&self.state);
        Ok((self.view(success_feedback(call), true), self.done))
    }

    fn view(&self, feedback: String, success: bool) -> Observation {
        let receptacle = self.spec.receptacle(&self.location).map(|r| ReceptacleAttrs {
            openable: r.openable,
            opened: self.state.contains(&Atom::new("opened", [&r.name])),
        });
        let visible = receptacle.is_some_and(ReceptacleAttrs::contents_visible);
        let contents = if visible {
            self.spec
                .objects
                .iter()
                .filter(|o| self.state.contains(&Atom::new("inReceptacle", [&o.name, &self.location])))
                .map(|o| self.seen(&o.name, &o.type_name))
                .collect()
        } else {
            Vec::new()
        };
        Observation {
            location: self.location.clone(),
            receptacle,
            contents,
            feedback,
            success,
            scene: Vec::new(),
        }
    }

    fn seen(&self, name: &str, type_name: &str) -> SeenObject {
        let has = |p: &str| self.state.contains(&Atom::new(p, [name]));
        SeenObject {
            name: name.to_string(),
            type_name: type_name.to_string(),
            clean: has("isClean"),
            hot: has("isHot"),
            cool: has("isCool"),
            light: has("isLight"),
        }
    }

    /// The complete hidden state.
    pub fn oracle_state(&self) -> Result<&BTreeSet<Atom>, SimError> {
        if self.oracle_access {
            Ok(&self.state)
        } else {
            Err(SimError::OracleDisabled)
        }
    }

    /// Every object in the scenario with its type.
    pub fn oracle_objects(&self) -> Result<&[(String, String)], SimError> {
        if self.oracle_access {
            Ok(&self.objects)
        } else {
            Err(SimError::OracleDisabled)
        }
    }
}

fn success_feedback(call: &ActionCall) -> String {
    let a = &call.args;
    match call.name.as_str() {
        "gotoReceptacle" => format!("You arrive at {}.", a[1]),
        "openReceptacle" => format!("You open the {}.", a[0]),
        "closeReceptacle" => format!("You close the {}.", a[0]),
        "pickupFromSurface" | "pickupFromOpen" => format!("You pick up the {} from the {}.", a[0], a[1]),
        "putObject" | "putObjectInOpen" => format!("You put the {} in/on the {}.", a[0], a[1]),
        "cleanObject" => format!("You clean the {} using the {}.", a[0], a[1]),
        "heatObject" => format!("You heat the {} using the {}.", a[0], a[1]),
        "coolObject" => format!("You cool the {} using the {}.", a[0], a[1]),
        "examineObjectInLight" => format!("You examine the {} under the {}.", a[0], a[1]),
        _ => format!("You {call}."),
    }
}
