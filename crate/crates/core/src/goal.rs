//! Natural-language task to PDDL goal, via a fixed few-shot chat prompt.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{CallLog, ChatBackend, ChatMessage, ChatRequest, LlmError, Reply, ScriptedBackend};
use crate::pddl::{parse_goal, print_goal, DomainDef, GoalFormula, ALFRED_PREDICATES};

pub const TASK_PREFIX: &str = "Your task is to: ";
pub const LOG_ROLE: &str = "goal";

/// The three fixed in-context examples: task line and goal.
pub const FEW_SHOT: [(&str, &str); 3] = [
    (
        "Your task is to: put a clean plate in microwave.",
        "(:goal
(exists (?t - plate ?r - microwave)
(and (inReceptacle ?t ?r)
(isClean ?t)
)))",
    ),
    (
        "Your task is to: examine an alarmclock with the desklamp",
        "(:goal
(exists (?t - alarmclock ?l - desklamp)
(and (examined ?t ?l) (holds ?t)
)))",
    ),
    (
        "Your task is to: put two cellphone in bed",
        "(:goal
(exists (?t1 - cellphone ?t2 - cellphone ?r - bed)
(and (inReceptacle ?t1 ?r)
(inReceptacle ?t2 ?r)
(not (= ?t1 ?t2))
)))",
    ),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("goal translation failed after {attempts} attempts: {last_error}")]
    TranslationFailed { attempts: u32, last_error: String },
    #[error("language backend unavailable: {0}")]
    BackendUnavailable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Translation {
    pub goal: GoalFormula,
    pub attempts: u32,
    pub reply: String,
}

/// The prompt for one task: predicate block, few-shot pairs, task line.
pub fn goal_request(task: &str) -> ChatRequest {
    let mut messages = vec![ChatMessage::system(ALFRED_PREDICATES)];
    for (t, g) in FEW_SHOT {
        messages.push(ChatMessage::user(t));
        messages.push(ChatMessage::assistant(g));
    }
    messages.push(ChatMessage::user(format!("{TASK_PREFIX}{}", task.trim())));
    ChatRequest::new(messages)
}

/// Text of the follow-up turn asking for a corrected goal.
pub fn retry_message(error: &str, task: &str) -> String {
    format!("That goal cannot be used ({error}). {TASK_PREFIX}{}", task.trim())
}

/// Asks the backend for a goal, retrying once with the error on failure.
pub fn translate_goal(
    task: &str,
    domain: &DomainDef,
    backend: &dyn ChatBackend,
    log: &CallLog,
) -> Result<Translation, TranslateError> {
    let mut req = goal_request(task);
    let mut last_error = String::new();
    for attempt in 1..=2 {
        let reply = match log.complete(backend, LOG_ROLE, &req) {
            Ok(r) => r.content,
            Err(LlmError::BackendUnavailable(m)) => return Err(TranslateError::BackendUnavailable(m)),
            Err(e) => return Err(TranslateError::BackendUnavailable(e.to_string())),
        };
        match extract_goal(&reply, domain) {
            Ok(goal) => {
                return Ok(Translation {
                    goal,
                    attempts: attempt,
                    reply,
                })
            }
            Err(e) => {
                log::debug!("goal attempt {attempt} rejected: {e}");
                req.messages.push(ChatMessage::assistant(reply));
                req.messages.push(ChatMessage::user(retry_message(&e, task)));
                last_error = e;
            }
        }
    }
    Err(TranslateError::TranslationFailed {
        attempts: 2,
        last_error,
    })
}

/// Parses the first `(:goal ...)` expression found in free text.
pub fn extract_goal(reply: &str, domain: &DomainDef) -> Result<GoalFormula, String> {
    let start = reply
        .to_ascii_lowercase()
        .find("(:goal")
        .ok_or_else(|| "no (:goal ...) expression in reply".to_string())?;
    let mut depth = 0usize;
    let mut end = None;
    for (i, c) in reply[start..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    end = Some(start + i + 1);
                    break;
                }
            }
            _ => {}
        }
    }
    let end = end.ok_or_else(|| "unbalanced parentheses in goal".to_string())?;
    parse_goal(&reply[start..end], domain).map_err(|e| e.to_string())
}

fn fill(template: &str, caps: &[&str]) -> String {
    let mut out = template.to_string();
    for (i, c) in caps.iter().enumerate() {
        out = out.replace(&format!("{{{i}}}"), c);
    }
    out
}

/// Fixtures answering the few-shot tasks, the reference generated goals and
/// every templated task family.
pub fn default_goal_fixtures() -> ScriptedBackend {
    let mut b = ScriptedBackend::new();
    for (task, goal) in FEW_SHOT {
        b = b.exact(task, Reply::Text(goal.to_string()));
    }
    let reference = [
        (
            "put some peppershaker on drawer.",
            "(:goal
    (exists (?t - peppershaker ?r - drawer)
        (inReceptacle ?t ?r)
))",
        ),
        (
            "put a clean mug in coffeemachine.",
            "(:goal
    (exists (?t - mug ?r - coffeemachine)
        (and (inReceptacle ?t ?r)
             (isClean ?t)
)))",
        ),
        (
            "put two cd in safe.",
            "(:goal
    (exists (?t1 - cd ?t2 - cd ?r - safe)
        (and (inReceptacle ?t1 ?r)
             (inReceptacle ?t2 ?r)
             (not (= ?t1 ?t2))
)))",
        ),
    ];
    for (task, goal) in reference {
        b = b.exact(format!("{TASK_PREFIX}{task}"), Reply::Text(goal.to_string()));
    }
    let attr_goal = |attr: &str| {
        format!("(:goal\n(exists (?t - {{0}} ?r - {{1}})\n(and (inReceptacle ?t ?r)\n({attr} ?t)\n)))")
    };
    let families = [
        ("put a clean * in *.", attr_goal("isClean")),
        ("heat some * and put it in *.", attr_goal("isHot")),
        ("cool some * and put it in *.", attr_goal("isCool")),
        (
            "put two * in *.",
            "(:goal\n(exists (?t1 - {0} ?t2 - {0} ?r - {1})\n(and (inReceptacle ?t1 ?r)\n(inReceptacle ?t2 ?r)\n(not (= ?t1 ?t2))\n)))".to_string(),
        ),
        (
            "examine a * with the *.",
            "(:goal\n(exists (?t - {0} ?l - {1})\n(and (examined ?t ?l) (holds ?t)\n)))".to_string(),
        ),
        ("put some * on *.", "(:goal\n(exists (?t - {0} ?r - {1})\n(inReceptacle ?t ?r)\n))".to_string()),
    ];
    for (pattern, goal) in families {
        b = b.wildcard(format!("{TASK_PREFIX}{pattern}"), Reply::Text(fill(&goal, &["$1", "$2"])));
    }
    b
}

/// Canonical text of a goal, for traces and reports.
pub fn goal_text(goal: &GoalFormula) -> String {
    print_goal(goal)
}
