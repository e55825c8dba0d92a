use super::*;
use crate::grounding::ground_problem;
use crate::pddl::{parse_goal, parse_problem, print_problem};
use crate::sim::vocab::Special;

fn info(name: &str, openable: bool) -> ReceptacleInfo {
    let type_name = name.split('-').next().unwrap().to_string();
    let special = vocab::receptacle_kind(&type_name).map_or(Special::None, |k| k.special);
    ReceptacleInfo {
        name: name.into(),
        type_name,
        openable,
        special,
    }
}

fn seen(name: &str) -> SeenObject {
    SeenObject {
        name: name.into(),
        type_name: name.split('-').next().unwrap().into(),
        clean: false,
        hot: false,
        cool: false,
        light: false,
    }
}

fn at(location: &str, openable: bool, opened: bool, contents: Vec<SeenObject>) -> Observation {
    Observation {
        location: location.into(),
        receptacle: Some(ReceptacleAttrs { openable, opened }),
        contents,
        feedback: String::new(),
        success: true,
        scene: Vec::new(),
    }
}

fn goto(from: &str, to: &str) -> ActionCall {
    ActionCall::new("gotoReceptacle", [from, to])
}

fn tomato_between_fridge_and_cabinet() -> Belief {
    let scene = [info("fridge-1", true), info("cabinet-1", true)];
    Belief::init_from_scene(&[("tomato".into(), 1)], &scene).unwrap()
}

fn disjoint(b: &Belief) -> bool {
    b.world.known_true.is_disjoint(&b.world.known_false)
}

#[test]
fn one_plate_eight_receptacles() {
    let scene: Vec<_> = (1..=8).map(|k| info(&format!("cabinet-{k}"), true)).collect();
    let b = Belief::init_from_scene(&[("plate".into(), 1), ("cabinet".into(), 1)], &scene).unwrap();
    assert_eq!(b.beliefs.slots.len(), 1);
    assert_eq!(b.beliefs.slots[0].candidates.len(), 8);
    assert!(b.is_hypothetical("hyp-plate-1"));
    assert!(b.world.known_true.contains(&Atom::new("openable", ["cabinet-3"])));
    assert!(b.world.known_false.contains(&Atom::new("isSink", ["cabinet-3"])));
    assert!(disjoint(&b));
}

#[test]
fn two_cellphones_make_two_slots() {
    let scene = [info("bed-1", false), info("desk-1", false), info("drawer-1", true)];
    let b = Belief::init_from_scene(&[("cellphone".into(), 2), ("bed".into(), 1)], &scene).unwrap();
    let names: Vec<&str> = b.beliefs.slots.iter().map(|s| s.object.as_str()).collect();
    assert_eq!(names, ["hyp-cellphone-1", "hyp-cellphone-2"]);
}

#[test]
fn single_receptacle_promotes_immediately() {
    let b = Belief::init_from_scene(&[("apple".into(), 1)], &[info("countertop-1", false)]).unwrap();
    assert!(b.beliefs.is_empty());
    assert!(b
        .world
        .known_true
        .contains(&Atom::new("inReceptacle", ["hyp-apple-1", "countertop-1"])));
}

#[test]
fn empty_scene_is_rejected() {
    assert_eq!(Belief::init_from_scene(&[], &[]), Err(BeliefError::EmptyScene));
}

#[test]
fn sighting_collapses_the_slot() {
    let mut b = tomato_between_fridge_and_cabinet();
    b.observe(Some(&goto(START_LOC, "fridge-1")), &at("fridge-1", true, false, vec![]))
        .unwrap();
    let new = b
        .observe(
            Some(&ActionCall::new("openReceptacle", ["fridge-1"])),
            &at("fridge-1", true, true, vec![seen("tomato-1")]),
        )
        .unwrap();
    assert!(new);
    assert!(b.beliefs.is_empty());
    assert!(b.world.object("hyp-tomato-1").is_none());
    assert!(b.world.known_true.contains(&Atom::new("inReceptacle", ["tomato-1", "fridge-1"])));
    assert!(b.world.known_false.contains(&Atom::new("isClean", ["tomato-1"])));
    assert!(disjoint(&b));
}

#[test]
fn empty_open_fridge_leaves_the_cabinet() {
    let mut b = tomato_between_fridge_and_cabinet();
    b.observe(Some(&goto(START_LOC, "fridge-1")), &at("fridge-1", true, false, vec![]))
        .unwrap();
    let new = b
        .observe(Some(&ActionCall::new("openReceptacle", ["fridge-1"])), &at("fridge-1", true, true, vec![]))
        .unwrap();
    assert!(new);
    assert!(b.beliefs.is_empty());
    assert!(b
        .world
        .known_true
        .contains(&Atom::new("inReceptacle", ["hyp-tomato-1", "cabinet-1"])));
}

#[test]
fn closed_drawer_eliminates_nothing() {
    let scene = [info("drawer-1", true), info("shelf-1", false), info("safe-1", true)];
    let mut b = Belief::init_from_scene(&[("cd".into(), 1)], &scene).unwrap();
    let before = b.beliefs.clone();
    let new = b
        .observe(Some(&goto(START_LOC, "drawer-1")), &at("drawer-1", true, false, vec![]))
        .unwrap();
    assert!(!new);
    assert_eq!(b.beliefs, before);
    assert_eq!(b.world.location(), Some("drawer-1"));
}

#[test]
fn revisiting_known_contents_is_not_news() {
    let scene = [info("shelf-1", false), info("desk-1", false), info("bed-1", false)];
    let mut b = Belief::init_from_scene(&[("cd".into(), 1)], &scene).unwrap();
    let new = b
        .observe(Some(&goto(START_LOC, "shelf-1")), &at("shelf-1", false, false, vec![seen("pen-1")]))
        .unwrap();
    assert!(new);
    b.observe(Some(&goto("shelf-1", "desk-1")), &at("desk-1", false, false, vec![]))
        .unwrap();
    let new = b
        .observe(Some(&goto("desk-1", "shelf-1")), &at("shelf-1", false, false, vec![seen("pen-1")]))
        .unwrap();
    assert!(!new);
}

#[test]
fn action_effects_are_applied_before_merging() {
    let scene = [info("shelf-1", false), info("desk-1", false)];
    let mut b = Belief::init_from_scene(&[], &scene).unwrap();
    b.observe(Some(&goto(START_LOC, "shelf-1")), &at("shelf-1", false, false, vec![seen("pen-1")]))
        .unwrap();
    let new = b
        .observe(
            Some(&ActionCall::new("pickupFromSurface", ["pen-1", "shelf-1"])),
            &at("shelf-1", false, false, vec![]),
        )
        .unwrap();
    assert!(!new, "picking up the pen was predicted");
    assert!(b.world.known_true.contains(&Atom::new("holds", ["pen-1"])));
    assert!(b.world.known_false.contains(&Atom::new::<&str>("handEmpty", [])));
    assert!(disjoint(&b));
}

#[test]
fn failed_actions_have_no_effect() {
    let scene = [info("shelf-1", false), info("desk-1", false)];
    let mut b = Belief::init_from_scene(&[], &scene).unwrap();
    let mut obs = at("shelf-1", false, false, vec![]);
    obs.location = START_LOC.into();
    obs.receptacle = None;
    obs.success = false;
    let before = b.clone();
    let new = b.observe(Some(&goto(START_LOC, "shelf-1")), &obs).unwrap();
    assert!(!new);
    assert_eq!(b, before);
}

#[test]
fn missing_pinned_object_is_a_contradiction() {
    let mut b = Belief::init_from_scene(&[("apple".into(), 1)], &[info("countertop-1", false)]).unwrap();
    let err = b
        .observe(Some(&goto(START_LOC, "countertop-1")), &at("countertop-1", false, false, vec![]))
        .unwrap_err();
    assert!(matches!(err, BeliefError::ContradictoryObservation(_)));
}

#[test]
fn unseen_type_everywhere_is_a_contradiction() {
    let scene = [info("shelf-1", false), info("desk-1", false)];
    let mut b = Belief::init_from_scene(&[("cd".into(), 1)], &scene).unwrap();
    let err = b
        .observe(Some(&goto(START_LOC, "shelf-1")), &at("shelf-1", false, false, vec![]))
        .and_then(|_| b.observe(Some(&goto("shelf-1", "desk-1")), &at("desk-1", false, false, vec![])));
    // The first elimination already pins the cd to the desk; the second
    // visit finds it missing.
    assert!(matches!(err, Err(BeliefError::ContradictoryObservation(_))));
}

#[test]
fn surplus_objects_register_fresh() {
    let scene = [info("shelf-1", false), info("desk-1", false), info("bed-1", false)];
    let mut b = Belief::init_from_scene(&[("cd".into(), 1)], &scene).unwrap();
    b.observe(
        Some(&goto(START_LOC, "shelf-1")),
        &at("shelf-1", false, false, vec![seen("cd-1"), seen("cd-2")]),
    )
    .unwrap();
    let hyps = b.world.objects.iter().filter(|o| o.hypothetical).count();
    assert_eq!(hyps, 0);
    assert!(b.world.object("cd-1").is_some() && b.world.object("cd-2").is_some());
}

#[test]
fn export_requires_one_choice_per_slot() {
    let b = tomato_between_fridge_and_cabinet();
    let goal = parse_goal(
        "(:goal (exists (?t - tomato ?r - cabinet) (inReceptacle ?t ?r)))",
        alfred_domain(),
    )
    .unwrap();
    assert_eq!(
        b.export_problem(&Assignment::new(), &goal),
        Err(BeliefError::IncompleteSample("hyp-tomato-1".into()))
    );
    let pick = Atom::new("inReceptacle", ["hyp-tomato-1", "fridge-1"]);
    let sample: Assignment = [pick.clone()].into();
    assert!(b.is_consistent(&sample));
    let p = b.export_problem(&sample, &goal).unwrap();
    assert!(p.init.contains(&pick));
    assert_eq!(p.init.len(), b.world.known_true.len() + 1);

    let text = print_problem(&p);
    assert_eq!(parse_problem(&text, alfred_domain()).unwrap(), p);
    ground_problem(alfred_domain(), &p).unwrap();

    let wrong: Assignment = [Atom::new("inReceptacle", ["hyp-tomato-1", "nowhere"])].into();
    assert!(!b.is_consistent(&wrong));
    assert!(b.export_problem(&wrong, &goal).is_err());
}

#[test]
fn no_slots_export_known_facts() {
    let b = Belief::init_from_scene(&[], &[info("shelf-1", false)]).unwrap();
    let p = b.export_problem(&Assignment::new(), &GoalFormula::default()).unwrap();
    assert_eq!(p.init, b.world.known_true);
}

#[test]
fn snapshot_serializes() {
    let b = tomato_between_fridge_and_cabinet();
    let json = serde_json::to_string(&b).unwrap();
    let back: Belief = serde_json::from_str(&json).unwrap();
    assert_eq!(back, b);
}

#[test]
fn a_failed_action_rules_out_its_only_uncertain_precondition() {
    let scene = [info("desk-1", false), info("drawer-1", true), info("shelf-1", false)];
    let mut b = Belief::init_from_scene(&[("book".into(), 1), ("desklamp".into(), 1)], &scene).unwrap();
    b.observe(Some(&goto(START_LOC, "shelf-1")), &at("shelf-1", false, false, vec![seen("book-1")]))
        .unwrap();
    b.observe(Some(&ActionCall::new("pickupFromSurface", ["book-1", "shelf-1"])), &at("shelf-1", false, false, vec![]))
        .unwrap();
    b.observe(Some(&goto("shelf-1", "drawer-1")), &at("drawer-1", true, false, vec![]))
        .unwrap();
    let lamp = b.beliefs.slots[0].clone();
    assert!(lamp.candidates.contains("drawer-1"));
    let mut failed = at("drawer-1", true, false, vec![]);
    failed.success = false;
    let new = b
        .observe(Some(&ActionCall::new("examineObjectInLight", ["book-1", &lamp.object, "drawer-1"])), &failed)
        .unwrap();
    assert!(new);
    assert!(b.beliefs.is_empty(), "only the desk is left for the lamp");
    assert!(b.world.known_false.contains(&lamp.atom("drawer-1")));
    assert!(disjoint(&b));
}
