//! Known world state and beliefs about unseen object locations.
//!
//! Facts the agent has observed or caused live in [`WorldModel`]. Goal
//! objects that have not been seen yet are represented by typed
//! hypothetical placeholders whose location is one of a shrinking set of
//! candidate receptacles ([`BeliefSet`]).

mod observation;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grounding::{instantiate_action, ActionCall};
use crate::pddl::{alfred_domain, Atom, GoalFormula, ProblemDef};
use crate::sim::receptacle_atoms;
use crate::sim::vocab::{self, START_LOC, START_LOC_TYPE};

pub use observation::{Observation, ReceptacleAttrs, ReceptacleInfo, SeenObject};

/// One sampled completion of the belief set: an `inReceptacle` atom per slot.
pub type Assignment = BTreeSet<Atom>;

const IN: &str = "inReceptacle";
const AT: &str = "atReceptacleLocation";
const HYP_PREFIX: &str = "hyp-";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BeliefError {
    #[error("scene lists no receptacles")]
    EmptyScene,
    #[error("contradictory observation: {0}")]
    ContradictoryObservation(String),
    #[error("sample leaves the location of `{0}` open")]
    IncompleteSample(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub name: String,
    pub type_name: String,
    pub receptacle: bool,
    pub hypothetical: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldModel {
    pub known_true: BTreeSet<Atom>,
    pub known_false: BTreeSet<Atom>,
    pub objects: Vec<ObjectRecord>,
}

impl WorldModel {
    fn set(&mut self, atom: Atom, value: bool) {
        if value {
            self.known_false.remove(&atom);
            self.known_true.insert(atom);
        } else {
            self.known_true.remove(&atom);
            self.known_false.insert(atom);
        }
    }

    pub fn object(&self, name: &str) -> Option<&ObjectRecord> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn receptacles(&self) -> impl Iterator<Item = &ObjectRecord> {
        self.objects.iter().filter(|o| o.receptacle)
    }

    /// Where the agent currently stands.
    pub fn location(&self) -> Option<&str> {
        self.known_true
            .iter()
            .find(|a| a.predicate == AT)
            .map(|a| a.args[0].as_str())
    }

    /// The receptacle a registered object is known to be in.
    pub fn location_of(&self, object: &str) -> Option<&str> {
        self.known_true
            .iter()
            .find(|a| a.predicate == IN && a.args[0] == object)
            .map(|a| a.args[1].as_str())
    }

    fn register(&mut self, record: ObjectRecord) {
        if self.object(&record.name).is_none() {
            self.objects.push(record);
        }
    }

    fn forget(&mut self, name: &str) {
        self.objects.retain(|o| o.name != name);
        self.known_true.retain(|a| !a.mentions(name));
        self.known_false.retain(|a| !a.mentions(name));
    }
}

/// Candidate locations of one hypothetical object; exactly one is true.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefSlot {
    pub object: String,
    pub type_name: String,
    pub candidates: BTreeSet<String>,
}

impl BeliefSlot {
    pub fn atom(&self, receptacle: &str) -> Atom {
        Atom::new(IN, [self.object.as_str(), receptacle])
    }

    pub fn candidate_atoms(&self) -> impl Iterator<Item = Atom> + '_ {
        self.candidates.iter().map(|r| self.atom(r))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefSet {
    pub slots: Vec<BeliefSlot>,
}

impl BeliefSet {
    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, object: &str) -> Option<&BeliefSlot> {
        self.slots.iter().find(|s| s.object == object)
    }
}

/// The agent's full epistemic state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Belief {
    pub world: WorldModel,
    pub beliefs: BeliefSet,
}

impl Belief {
    /// Builds the initial state from the scene listing, adding hypothetical
    /// placeholders for every movable object type the goal needs.
    pub fn init_from_scene(
        goal_types: &[(String, usize)],
        scene: &[ReceptacleInfo],
    ) -> Result<Belief, BeliefError> {
        if scene.is_empty() {
            return Err(BeliefError::EmptyScene);
        }
        let mut w = WorldModel::default();
        w.register(ObjectRecord {
            name: START_LOC.to_string(),
            type_name: START_LOC_TYPE.to_string(),
            receptacle: false,
            hypothetical: false,
        });
        w.set(Atom::new(AT, [START_LOC]), true);
        w.set(Atom::new("isReceptacle", [START_LOC]), false);
        w.set(Atom::new::<&str>("handEmpty", []), true);
        for r in scene {
            w.register(ObjectRecord {
                name: r.name.clone(),
                type_name: r.type_name.clone(),
                receptacle: true,
                hypothetical: false,
            });
            let present = receptacle_atoms(&r.name, r.openable, r.special);
            for p in ["isReceptacle", "openable", "isSink", "isMicrowave", "isFridge"] {
                let atom = Atom::new(p, [&r.name]);
                let value = present.contains(&atom);
                w.set(atom, value);
            }
            // Receptacles start closed.
            w.set(Atom::new("opened", [&r.name]), false);
        }

        let mut b = BeliefSet::default();
        for (type_name, count) in goal_types {
            let fixed = scene.iter().any(|r| &r.type_name == type_name)
                || vocab::receptacle_kind(type_name).is_some();
            if fixed {
                continue;
            }
            for k in 1..=*count {
                let name = format!("{HYP_PREFIX}{type_name}-{k}");
                w.register(ObjectRecord {
                    name: name.clone(),
                    type_name: type_name.clone(),
                    receptacle: false,
                    hypothetical: true,
                });
                if vocab::is_light_type(type_name) {
                    w.set(Atom::new("isLight", [&name]), true);
                }
                b.slots.push(BeliefSlot {
                    object: name,
                    type_name: type_name.clone(),
                    candidates: scene.iter().map(|r| r.name.clone()).collect(),
                });
            }
        }
        let mut belief = Belief { world: w, beliefs: b };
        belief.promote()?;
        Ok(belief)
    }

    pub fn is_hypothetical(&self, name: &str) -> bool {
        self.world.object(name).is_some_and(|o| o.hypothetical)
    }

    /// Merges the outcome of `action` and the observation that followed it.
    /// Returns whether anything changed beyond the action's own effects.
    pub fn observe(
        &mut self,
        action: Option<&ActionCall>,
        obs: &Observation,
    ) -> Result<bool, BeliefError> {
        if let (Some(call), true) = (action, obs.success) {
            if let Ok(inst) = instantiate_action(alfred_domain(), call) {
                for a in inst.del {
                    self.world.set(a, false);
                }
                for a in inst.add {
                    self.world.set(a, true);
                }
            }
        }
        let predicted = self.clone();
        if let (Some(call), false) = (action, obs.success) {
            self.learn_from_failure(call);
        }
        self.merge(obs)?;
        self.promote()?;
        Ok(*self != predicted)
    }

    fn merge(&mut self, obs: &Observation) -> Result<(), BeliefError> {
        let loc = obs.location.as_str();
        if self.world.location() != Some(loc) {
            if let Some(old) = self.world.location().map(str::to_string) {
                self.world.set(Atom::new(AT, [old]), false);
            }
            self.world.set(Atom::new(AT, [loc]), true);
        }
        let Some(attrs) = obs.receptacle else {
            return Ok(());
        };
        if attrs.openable {
            self.world.set(Atom::new("opened", [loc]), attrs.opened);
        }
        if !attrs.contents_visible() {
            return Ok(());
        }

        let mut seen_here: BTreeSet<&str> = BTreeSet::new();
        for o in &obs.contents {
            seen_here.insert(&o.name);
            if self.world.object(&o.name).is_none() {
                if let Some(hyp) = self.unification_target(&o.type_name, loc) {
                    self.beliefs.slots.retain(|s| s.object != hyp);
                    self.world.forget(&hyp);
                    log::debug!("unified {hyp} with {}", o.name);
                }
                self.world.register(ObjectRecord {
                    name: o.name.clone(),
                    type_name: o.type_name.clone(),
                    receptacle: false,
                    hypothetical: false,
                });
                self.world.set(Atom::new("isReceptacle", [&o.name]), false);
            }
            let stale: Vec<Atom> = self
                .world
                .known_true
                .iter()
                .filter(|a| a.predicate == IN && a.args[0] == o.name && a.args[1] != loc)
                .cloned()
                .collect();
            for a in stale {
                self.world.set(a, false);
            }
            self.world.set(Atom::new(IN, [o.name.as_str(), loc]), true);
            for (flag, p) in [(o.clean, "isClean"), (o.hot, "isHot"), (o.cool, "isCool"), (o.light, "isLight")] {
                self.world.set(Atom::new(p, [&o.name]), flag);
            }
        }

        let missing: Vec<String> = self
            .world
            .known_true
            .iter()
            .filter(|a| a.predicate == IN && a.args[1] == loc && !seen_here.contains(a.args[0].as_str()))
            .map(|a| a.args[0].clone())
            .collect();
        if let Some(m) = missing.first() {
            return Err(BeliefError::ContradictoryObservation(format!(
                "`{m}` expected in {loc} but not observed there"
            )));
        }
        for slot in &mut self.beliefs.slots {
            if slot.candidates.remove(loc) {
                let atom = slot.atom(loc);
                self.world.known_false.insert(atom);
            }
        }
        Ok(())
    }

    /// A rejected action had some false precondition. When the only one not
    /// already known to hold is a candidate location, that candidate goes.
    fn learn_from_failure(&mut self, call: &ActionCall) {
        let Ok(inst) = instantiate_action(alfred_domain(), call) else {
            return;
        };
        if !inst.equalities_hold {
            return;
        }
        let unknown_pos = inst.pre_pos.iter().filter(|a| !self.world.known_true.contains(*a));
        let unknown_neg = inst.pre_neg.iter().filter(|a| !self.world.known_false.contains(*a));
        let unknown: Vec<&Atom> = unknown_pos.chain(unknown_neg).collect();
        let [atom] = unknown[..] else {
            return;
        };
        if atom.predicate != IN || inst.pre_neg.contains(atom) {
            return;
        }
        if let Some(slot) = self.beliefs.slots.iter_mut().find(|s| s.object == atom.args[0]) {
            if slot.candidates.remove(&atom.args[1]) {
                log::debug!("{} failed, so {atom} is false", call);
                self.world.known_false.insert(atom.clone());
            }
        }
    }

    /// The hypothetical a newly seen real object at `loc` should replace.
    /// Placeholders already pinned to `loc` come first.
    fn unification_target(&self, type_name: &str, loc: &str) -> Option<String> {
        let pinned = self
            .world
            .objects
            .iter()
            .filter(|o| o.hypothetical && o.type_name == type_name)
            .find(|o| self.world.location_of(&o.name) == Some(loc))
            .map(|o| o.name.clone());
        pinned.or_else(|| {
            self.beliefs
                .slots
                .iter()
                .find(|s| s.type_name == type_name && s.candidates.contains(loc))
                .map(|s| s.object.clone())
        })
    }

    fn promote(&mut self) -> Result<(), BeliefError> {
        let mut i = 0;
        while i < self.beliefs.slots.len() {
            let slot = &self.beliefs.slots[i];
            match slot.candidates.len() {
                0 => {
                    return Err(BeliefError::ContradictoryObservation(format!(
                        "no location left for `{}`",
                        slot.object
                    )))
                }
                1 => {
                    let slot = self.beliefs.slots.remove(i);
                    let r = slot.candidates.first().unwrap();
                    self.world.set(slot.atom(r), true);
                }
                _ => i += 1,
            }
        }
        Ok(())
    }

    /// Whether `assignment` picks exactly one listed candidate for every slot.
    pub fn is_consistent(&self, assignment: &Assignment) -> bool {
        assignment.len() == self.beliefs.slots.len()
            && self.beliefs.slots.iter().all(|s| s.candidate_atoms().any(|c| assignment.contains(&c)))
    }

    /// Known facts plus one sampled completion, as a planning problem.
    pub fn export_problem(
        &self,
        sample: &Assignment,
        goal: &GoalFormula,
    ) -> Result<ProblemDef, BeliefError> {
        for slot in &self.beliefs.slots {
            let chosen = sample
                .iter()
                .filter(|a| a.predicate == IN && a.args[0] == slot.object && slot.candidates.contains(&a.args[1]))
                .count();
            if chosen != 1 {
                return Err(BeliefError::IncompleteSample(slot.object.clone()));
            }
        }
        let mut init = self.world.known_true.clone();
        init.extend(sample.iter().cloned());
        Ok(ProblemDef {
            name: "belief".to_string(),
            domain_name: alfred_domain().name.clone(),
            objects: self
                .world
                .objects
                .iter()
                .map(|o| (o.name.clone(), o.type_name.clone()))
                .collect(),
            init,
            goal: goal.clone(),
        })
    }

    /// Receptacle records with their roles, for prompts and exploration.
    pub fn receptacle_names(&self) -> Vec<String> {
        self.world.receptacles().map(|r| r.name.clone()).collect()
    }
}

#[cfg(test)]
mod tests;
