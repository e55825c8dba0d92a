use std::fs;
use std::path::Path;

use super::{ChatBackend, ChatRequest, ChatResponse, LlmError};

/// What a fixture answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    /// Literal text; `$1`, `$2`, ... expand to wildcard captures.
    Text(String),
    /// Picks one of the prompt's `- option` lines by hashing the request.
    PickOption,
}

const PICK_OPTION: &str = "@pick-option";

#[derive(Debug, Clone)]
enum Pattern {
    Exact(String),
    Prefix(String),
    Wildcard(String),
}

/// Deterministic backend answering from a fixture table.
///
/// The last user message is matched against exact patterns first, then
/// prefixes, then `*` wildcards, each in registration order. Token counts
/// estimate one token per four characters of the whole exchange.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    fixtures: Vec<(Pattern, Reply)>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn exact(mut self, pattern: impl Into<String>, reply: Reply) -> Self {
        self.fixtures.push((Pattern::Exact(pattern.into()), reply));
        self
    }

    pub fn prefix(mut self, pattern: impl Into<String>, reply: Reply) -> Self {
        self.fixtures.push((Pattern::Prefix(pattern.into()), reply));
        self
    }

    pub fn wildcard(mut self, pattern: impl Into<String>, reply: Reply) -> Self {
        self.fixtures.push((Pattern::Wildcard(pattern.into()), reply));
        self
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }

    /// Appends every fixture of `other` after this backend's own.
    pub fn merge(mut self, other: ScriptedBackend) -> Self {
        self.fixtures.extend(other.fixtures);
        self
    }

    /// Loads `*.fixture` files from a directory in file-name order.
    ///
    /// ```text
    /// exact|prefix|wildcard
    /// <pattern lines>
    /// ---
    /// <reply lines, or @pick-option>
    /// ```
    pub fn from_dir(dir: &Path) -> Result<Self, LlmError> {
        let bad = |e: std::io::Error| LlmError::BadFixture(format!("{}: {e}", dir.display()));
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(bad)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "fixture"))
            .collect();
        paths.sort();
        let mut out = Self::new();
        for p in paths {
            let text = fs::read_to_string(&p).map_err(bad)?;
            out = out.parse_fixture(&text).map_err(|e| match e {
                LlmError::BadFixture(m) => LlmError::BadFixture(format!("{}: {m}", p.display())),
                other => other,
            })?;
        }
        Ok(out)
    }

    fn parse_fixture(self, text: &str) -> Result<Self, LlmError> {
        let text = text.replace("\r\n", "\n");
        let (head, reply) = text
            .split_once("\n---\n")
            .ok_or_else(|| LlmError::BadFixture("missing `---` separator".into()))?;
        let (kind, pattern) = head.split_once('\n').unwrap_or((head, ""));
        let reply = reply.strip_suffix('\n').unwrap_or(reply);
        let reply = if reply.trim() == PICK_OPTION {
            Reply::PickOption
        } else {
            Reply::Text(reply.to_string())
        };
        Ok(match kind.trim() {
            "exact" => self.exact(pattern, reply),
            "prefix" => self.prefix(pattern, reply),
            "wildcard" => self.wildcard(pattern, reply),
            other => return Err(LlmError::BadFixture(format!("unknown match kind `{other}`"))),
        })
    }

    /// Writes each fixture as a numbered file, the inverse of [`Self::from_dir`].
    pub fn save_dir(&self, dir: &Path) -> Result<(), LlmError> {
        let bad = |e: std::io::Error| LlmError::BadFixture(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(bad)?;
        for (i, (pattern, reply)) in self.fixtures.iter().enumerate() {
            let (kind, p) = match pattern {
                Pattern::Exact(p) => ("exact", p),
                Pattern::Prefix(p) => ("prefix", p),
                Pattern::Wildcard(p) => ("wildcard", p),
            };
            let r = match reply {
                Reply::Text(t) => t.as_str(),
                Reply::PickOption => PICK_OPTION,
            };
            fs::write(dir.join(format!("{i:04}.fixture")), format!("{kind}\n{p}\n---\n{r}\n")).map_err(bad)?;
        }
        Ok(())
    }

    fn lookup<'p>(&self, prompt: &'p str) -> Option<(&Reply, Vec<&'p str>)> {
        let exact = self.fixtures.iter().find_map(|(p, r)| match p {
            Pattern::Exact(s) if s == prompt => Some((r, Vec::new())),
            _ => None,
        });
        let prefix = || {
            self.fixtures.iter().find_map(|(p, r)| match p {
                Pattern::Prefix(s) if prompt.starts_with(s.as_str()) => Some((r, Vec::new())),
                _ => None,
            })
        };
        let wildcard = || {
            self.fixtures.iter().find_map(|(p, r)| match p {
                Pattern::Wildcard(s) => wildcard_match(s, prompt).map(|caps| (r, caps)),
                _ => None,
            })
        };
        exact.or_else(prefix).or_else(wildcard)
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let prompt = req.last_user().ok_or(LlmError::EmptyRequest)?;
        let (reply, caps) = self
            .lookup(prompt)
            .ok_or_else(|| LlmError::FixtureMiss(prompt.chars().take(120).collect()))?;
        let content = match reply {
            Reply::Text(t) => expand(t, &caps),
            Reply::PickOption => pick_option(req),
        };
        let prompt_chars: usize = req.messages.iter().map(|m| m.content.chars().count()).sum();
        let completion_chars = content.chars().count();
        let total = estimate_tokens(prompt_chars + completion_chars);
        let completion_tokens = estimate_tokens(completion_chars).min(total);
        Ok(ChatResponse {
            content,
            prompt_tokens: total - completion_tokens,
            completion_tokens,
        })
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

/// One token per four characters, rounded up.
pub fn estimate_tokens(chars: usize) -> u64 {
    chars.div_ceil(4) as u64
}

/// Matches `text` against a pattern where each `*` captures any (possibly
/// empty) substring. Earlier stars take as little as possible.
fn wildcard_match<'t>(pattern: &str, text: &'t str) -> Option<Vec<&'t str>> {
    let parts: Vec<&str> = pattern.split('*').collect();
    let mut caps = Vec::with_capacity(parts.len() - 1);
    if match_parts(&parts, text, &mut caps) {
        Some(caps)
    } else {
        None
    }
}

fn match_parts<'t>(parts: &[&str], text: &'t str, caps: &mut Vec<&'t str>) -> bool {
    let Some(rest) = text.strip_prefix(parts[0]) else {
        return false;
    };
    if parts.len() == 1 {
        return rest.is_empty();
    }
    let mut cut = 0;
    loop {
        caps.push(&rest[..cut]);
        if match_parts(&parts[1..], &rest[cut..], caps) {
            return true;
        }
        caps.pop();
        match rest[cut..].chars().next() {
            Some(c) => cut += c.len_utf8(),
            None => return false,
        }
    }
}

fn expand(template: &str, caps: &[&str]) -> String {
    let mut out = template.to_string();
    // Highest index first so `$1` does not clobber `$10`.
    for (i, c) in caps.iter().enumerate().rev() {
        out = out.replace(&format!("${}", i + 1), c);
    }
    out
}

fn fnv1a(bytes: impl Iterator<Item = u8>) -> u64 {
    bytes.fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn pick_option(req: &ChatRequest) -> String {
    let prompt = req.last_user().unwrap_or_default();
    let options: Vec<&str> = prompt.lines().filter_map(|l| l.strip_prefix("- ")).collect();
    if options.is_empty() {
        return String::new();
    }
    let h = fnv1a(req.messages.iter().flat_map(|m| m.content.bytes()));
    options[(h % options.len() as u64) as usize].trim().to_string()
}
