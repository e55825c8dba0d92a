//! The household (`alfred`) domain.

use std::sync::OnceLock;

use super::{parse_domain, DomainDef};

/// Predicate block shown to the language model when it writes goals.
pub const ALFRED_PREDICATES: &str = "(define (domain alfred)
(:predicates
    (isReceptacle ?o - object) ; true if the object is a receptacle
    (atReceptacleLocation ?r - object) ; true if the robot is at the receptacle location
    (inReceptacle ?o - object ?r - object) ; true if object ?o is in receptacle ?r
    (openable ?r - object) ; true if a receptacle is openable
    (opened ?r - object) ; true if a receptacle is opened
    (isLight ?o - object) ; true if an object is light source
    (examined ?o - object ?l - object) ; whether the object has been looked at with light
    (holds ?o - object) ; object ?o is held by robot
    (isClean ?o - object) ; true if the object has been cleaned in sink
    (isHot ?o - object) ; true if the object has been heated up
    (isCool ?o - object) ; true if the object has been cooled
    (isSink ?o - object) ; true if the object is a sink
    (isMicrowave ?o - object) ; true if the object is a microwave
    (isFridge ?o - object) ; true if the object is a fridge
))
";

/// Full planning domain: the predicate block above plus `handEmpty` and the
/// action schemas the agent and the simulator share.
pub const ALFRED_DOMAIN: &str = "(define (domain alfred)
(:requirements :strips :typing :negative-preconditions :equality)
(:predicates
    (isReceptacle ?o - object) ; true if the object is a receptacle
    (atReceptacleLocation ?r - object) ; true if the robot is at the receptacle location
    (inReceptacle ?o - object ?r - object) ; true if object ?o is in receptacle ?r
    (openable ?r - object) ; true if a receptacle is openable
    (opened ?r - object) ; true if a receptacle is opened
    (isLight ?o - object) ; true if an object is light source
    (examined ?o - object ?l - object) ; whether the object has been looked at with light
    (holds ?o - object) ; object ?o is held by robot
    (isClean ?o - object) ; true if the object has been cleaned in sink
    (isHot ?o - object) ; true if the object has been heated up
    (isCool ?o - object) ; true if the object has been cooled
    (isSink ?o - object) ; true if the object is a sink
    (isMicrowave ?o - object) ; true if the object is a microwave
    (isFridge ?o - object) ; true if the object is a fridge
    (handEmpty) ; the robot carries nothing
)

(:action gotoReceptacle
    :parameters (?from - object ?to - object)
    :precondition (and (atReceptacleLocation ?from) (isReceptacle ?to) (not (= ?from ?to)))
    :effect (and (atReceptacleLocation ?to) (not (atReceptacleLocation ?from))))

(:action openReceptacle
    :parameters (?r - object)
    :precondition (and (atReceptacleLocation ?r) (openable ?r) (not (opened ?r)))
    :effect (opened ?r))

(:action closeReceptacle
    :parameters (?r - object)
    :precondition (and (atReceptacleLocation ?r) (openable ?r) (opened ?r))
    :effect (not (opened ?r)))

(:action pickupFromSurface
    :parameters (?o - object ?r - object)
    :precondition (and (atReceptacleLocation ?r) (isReceptacle ?r) (inReceptacle ?o ?r)
                       (not (openable ?r)) (handEmpty))
    :effect (and (holds ?o) (not (inReceptacle ?o ?r)) (not (handEmpty))))

(:action pickupFromOpen
    :parameters (?o - object ?r - object)
    :precondition (and (atReceptacleLocation ?r) (isReceptacle ?r) (inReceptacle ?o ?r)
                       (openable ?r) (opened ?r) (handEmpty))
    :effect (and (holds ?o) (not (inReceptacle ?o ?r)) (not (handEmpty))))

(:action putObject
    :parameters (?o - object ?r - object)
    :precondition (and (atReceptacleLocation ?r) (isReceptacle ?r) (holds ?o) (not (openable ?r)))
    :effect (and (inReceptacle ?o ?r) (handEmpty) (not (holds ?o))))

(:action putObjectInOpen
    :parameters (?o - object ?r - object)
    :precondition (and (atReceptacleLocation ?r) (isReceptacle ?r) (holds ?o) (openable ?r) (opened ?r))
    :effect (and (inReceptacle ?o ?r) (handEmpty) (not (holds ?o))))

(:action cleanObject
    :parameters (?o - object ?s - object)
    :precondition (and (holds ?o) (atReceptacleLocation ?s) (isSink ?s))
    :effect (isClean ?o))

(:action heatObject
    :parameters (?o - object ?m - object)
    :precondition (and (holds ?o) (atReceptacleLocation ?m) (isMicrowave ?m))
    :effect (and (isHot ?o) (not (isCool ?o))))

(:action coolObject
    :parameters (?o - object ?f - object)
    :precondition (and (holds ?o) (atReceptacleLocation ?f) (isFridge ?f))
    :effect (and (isCool ?o) (not (isHot ?o))))

(:action examineObjectInLight
    :parameters (?o - object ?l - object ?r - object)
    :precondition (and (holds ?o) (isLight ?l) (inReceptacle ?l ?r) (atReceptacleLocation ?r))
    :effect (examined ?o ?l))
)
";

/// The parsed household domain, shared process-wide.
pub fn alfred_domain() -> &'static DomainDef {
    static DOMAIN: OnceLock<DomainDef> = OnceLock::new();
    DOMAIN.get_or_init(|| parse_domain(ALFRED_DOMAIN).expect("built-in domain parses"))
}
