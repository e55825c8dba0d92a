//! Household vocabulary: receptacle and object types with their intrinsic
//! attributes.

use serde::{Deserialize, Serialize};

/// Name of the pseudo-receptacle holding the agent before its first move.
pub const START_LOC: &str = "start-loc";
pub const START_LOC_TYPE: &str = "location";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Special {
    Sink,
    Microwave,
    Fridge,
    LampHolder,
    None,
}

impl Special {
    /// The intrinsic predicate marking a receptacle with this role.
    pub fn predicate(self) -> Option<&'static str> {
        match self {
            Special::Sink => Some("isSink"),
            Special::Microwave => Some("isMicrowave"),
            Special::Fridge => Some("isFridge"),
            Special::LampHolder | Special::None => None,
        }
    }
}

pub struct ReceptacleKind {
    pub type_name: &'static str,
    pub openable: bool,
    pub special: Special,
}

const fn kind(type_name: &'static str, openable: bool, special: Special) -> ReceptacleKind {
    ReceptacleKind {
        type_name,
        openable,
        special,
    }
}

pub const RECEPTACLE_KINDS: &[ReceptacleKind] = &[
    kind("countertop", false, Special::None),
    kind("cabinet", true, Special::None),
    kind("drawer", true, Special::None),
    kind("fridge", true, Special::Fridge),
    kind("microwave", true, Special::Microwave),
    kind("sinkbasin", false, Special::Sink),
    kind("shelf", false, Special::None),
    kind("sidetable", false, Special::LampHolder),
    kind("desk", false, Special::LampHolder),
    kind("dresser", false, Special::LampHolder),
    kind("diningtable", false, Special::None),
    kind("coffeemachine", false, Special::None),
    kind("safe", true, Special::None),
    kind("bed", false, Special::None),
    kind("garbagecan", false, Special::None),
    kind("stoveburner", false, Special::None),
];

pub fn receptacle_kind(type_name: &str) -> Option<&'static ReceptacleKind> {
    RECEPTACLE_KINDS.iter().find(|k| k.type_name == type_name)
}

pub const LIGHT_TYPES: &[&str] = &["desklamp"];

pub fn is_light_type(type_name: &str) -> bool {
    LIGHT_TYPES.contains(&type_name)
}

pub const OBJECT_TYPES: &[&str] = &[
    "plate", "mug", "apple", "tomato", "potato", "egg", "bowl", "cup", "cellphone", "cd", "book",
    "pen", "pencil", "keychain", "peppershaker", "alarmclock", "creditcard", "vase", "spoon",
    "knife",
];

pub const WASHABLE: &[&str] = &[
    "plate", "mug", "bowl", "cup", "apple", "tomato", "spoon", "knife", "egg", "potato",
];
pub const THERMAL: &[&str] = &["mug", "plate", "apple", "tomato", "potato", "egg", "bowl", "cup"];
pub const EXAMINABLE: &[&str] = &[
    "alarmclock", "book", "cd", "pen", "pencil", "cellphone", "keychain", "creditcard", "vase",
];
pub const PAIRABLE: &[&str] = &[
    "cellphone", "cd", "book", "pen", "pencil", "keychain", "creditcard", "peppershaker", "mug",
    "apple",
];

/// Receptacle types a task may name as its destination.
pub const DESTINATIONS: &[&str] = &[
    "countertop", "cabinet", "drawer", "shelf", "sidetable", "diningtable", "safe", "bed",
    "dresser", "desk", "garbagecan", "coffeemachine", "fridge", "microwave",
];
