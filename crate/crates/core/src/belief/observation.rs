use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::sim::vocab::Special;

/// Intrinsic attributes of a fixed receptacle, known from the scene listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptacleInfo {
    pub name: String,
    pub type_name: String,
    pub openable: bool,
    pub special: Special,
}

/// A movable object seen at the current location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeenObject {
    pub name: String,
    pub type_name: String,
    pub clean: bool,
    pub hot: bool,
    pub cool: bool,
    pub light: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptacleAttrs {
    pub openable: bool,
    pub opened: bool,
}

impl ReceptacleAttrs {
    pub fn contents_visible(self) -> bool {
        !self.openable || self.opened
    }
}

/// What the agent perceives after reset or after one action.
///
/// `contents` lists every object at `location` when the location's contents
/// are visible and is empty otherwise. `scene` is only filled on reset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub location: String,
    pub receptacle: Option<ReceptacleAttrs>,
    pub contents: Vec<SeenObject>,
    pub feedback: String,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scene: Vec<ReceptacleInfo>,
}

impl Observation {
    pub fn contents_visible(&self) -> bool {
        self.receptacle.is_some_and(ReceptacleAttrs::contents_visible)
    }

    /// Renders the observation as text.
    ///
    /// ```text
    /// text     := feedback [ "\n" view ]
    /// view     := "The " loc " is closed."
    ///           | ("On" | "In") " the " loc ", you see " items "."
    /// items    := "nothing" | "a " obj { ", a " obj }
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = self.feedback.clone();
        let Some(attrs) = self.receptacle else {
            return out;
        };
        if !attrs.contents_visible() {
            let _ = write!(out, "\nThe {} is closed.", self.location);
            return out;
        }
        let prep = if attrs.openable { "In" } else { "On" };
        let _ = write!(out, "\n{prep} the {}, you see ", self.location);
        if self.contents.is_empty() {
            out.push_str("nothing");
        } else {
            let items: Vec<String> = self.contents.iter().map(|o| format!("a {}", o.name)).collect();
            out.push_str(&items.join(", "));
        }
        out.push('.');
        out
    }
}
