//! Prompt templates for the two agents and parsing of the intent detector's answer.
//!
//! Templates are plain text with `{{slot}}` placeholders, split into chat
//! messages by `[system]`, `[user]` and `[assistant]` header lines. The built-in
//! set is compiled in from `assets/templates/`; [`TemplateSet::load_dir`]
//! replaces any of them with a file of the same name.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::function_calls::{ApiResult, KnowledgeDatabase};
use crate::graph::{ActionId, ActionTransitionGraph, NodeId};
use crate::persona::Persona;
use crate::simulation::DialogueHistory;

/// Number of knowledge entries embedded verbatim in a prompt.
pub const KNOWLEDGE_WINDOW: usize = 5;

/// Literal the intent detector answers when no candidate fits.
pub const UNRECOGNIZED: &str = "UNRECOGNIZED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TemplateId {
    #[serde(rename = "P1_INTENT")]
    P1Intent,
    #[serde(rename = "P2_UNRECOGNIZED")]
    P2Unrecognized,
    #[serde(rename = "P3_END")]
    P3End,
    #[serde(rename = "P4_CONTINUE")]
    P4Continue,
    #[serde(rename = "P5_USER")]
    P5User,
    #[serde(rename = "P6_PREFS")]
    P6Prefs,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] = [
        TemplateId::P1Intent,
        TemplateId::P2Unrecognized,
        TemplateId::P3End,
        TemplateId::P4Continue,
        TemplateId::P5User,
        TemplateId::P6Prefs,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            TemplateId::P1Intent => "P1_INTENT",
            TemplateId::P2Unrecognized => "P2_UNRECOGNIZED",
            TemplateId::P3End => "P3_END",
            TemplateId::P4Continue => "P4_CONTINUE",
            TemplateId::P5User => "P5_USER",
            TemplateId::P6Prefs => "P6_PREFS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.as_str() == s)
    }

    pub const fn file_name(self) -> &'static str {
        match self {
            TemplateId::P1Intent => "p1_intent.txt",
            TemplateId::P2Unrecognized => "p2_unrecognized.txt",
            TemplateId::P3End => "p3_end.txt",
            TemplateId::P4Continue => "p4_continue.txt",
            TemplateId::P5User => "p5_user.txt",
            TemplateId::P6Prefs => "p6_prefs.txt",
        }
    }

    /// Slots the call site binds for this template.
    pub const fn slots(self) -> &'static [&'static str] {
        match self {
            TemplateId::P1Intent => &["history", "user_utterance", "knowledge", "candidates"],
            TemplateId::P2Unrecognized => &["history"],
            TemplateId::P3End => &["history", "knowledge"],
            TemplateId::P4Continue => &[
                "history",
                "knowledge",
                "next_step",
                "next_options",
                "fresh_results",
            ],
            TemplateId::P5User => &[
                "scenario",
                "persona_name",
                "persona_age",
                "persona_gender",
                "persona_prefs",
                "action_description",
                "history",
            ],
            TemplateId::P6Prefs => &["scenario", "actions"],
        }
    }

    /// Generation temperature; intent detection runs greedy.
    pub const fn default_temperature(self) -> f32 {
        match self {
            TemplateId::P1Intent => 0.0,
            _ => 0.7,
        }
    }

    fn builtin_body(self) -> &'static str {
        match self {
            TemplateId::P1Intent => include_str!("../assets/templates/p1_intent.txt"),
            TemplateId::P2Unrecognized => include_str!("../assets/templates/p2_unrecognized.txt"),
            TemplateId::P3End => include_str!("../assets/templates/p3_end.txt"),
            TemplateId::P4Continue => include_str!("../assets/templates/p4_continue.txt"),
            TemplateId::P5User => include_str!("../assets/templates/p5_user.txt"),
            TemplateId::P6Prefs => include_str!("../assets/templates/p6_prefs.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

/// A fully instantiated template. Never empty; the first message is `system`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub messages: Vec<Message>,
}

impl RenderedPrompt {
    /// All message texts joined, for digests and assertions.
    pub fn text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("candidate action set is empty")]
    EmptyCandidates,
    #[error("cannot continue into the final node {0}")]
    FinalNodeContinue(NodeId),
    #[error("unknown action {0}")]
    UnknownAction(ActionId),
    #[error("template {id}: {reason}")]
    InvalidTemplate { id: TemplateId, reason: String },
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A parsed template: message sections with `{{slot}}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub slots: Vec<&'static str>,
    sections: Vec<(Role, String)>,
}

impl PromptTemplate {
    pub fn parse(id: TemplateId, body: &str) -> Result<Self, PromptError> {
        let invalid = |reason: String| PromptError::InvalidTemplate { id, reason };
        let mut sections: Vec<(Role, String)> = Vec::new();
        for line in body.lines() {
            let header = match line.trim() {
                "[system]" => Some(Role::System),
                "[user]" => Some(Role::User),
                "[assistant]" => Some(Role::Assistant),
                _ => None,
            };
            match (header, sections.last_mut()) {
                (Some(role), _) => sections.push((role, String::new())),
                (None, Some((_, text))) => {
                    text.push_str(line);
                    text.push('\n');
                }
                (None, None) if line.trim().is_empty() => {}
                (None, None) => {
                    return Err(invalid("text before the first [system] header".into()))
                }
            }
        }
        if sections.first().map(|(r, _)| *r) != Some(Role::System) {
            return Err(invalid("must start with a [system] section".into()));
        }
        for (_, text) in &mut sections {
            *text = text.trim().to_string();
        }
        let slots = id.slots();
        for (_, text) in &sections {
            for placeholder in placeholders(text) {
                if !slots.contains(&placeholder) {
                    return Err(invalid(format!(
                        "placeholder {{{{{placeholder}}}}} is not a slot"
                    )));
                }
            }
        }
        Ok(Self {
            id,
            slots: slots.to_vec(),
            sections,
        })
    }

    /// Expand every placeholder. Values are inserted literally, never re-expanded.
    pub fn render(&self, bindings: &BTreeMap<&str, String>) -> Result<RenderedPrompt, PromptError> {
        let messages = self
            .sections
            .iter()
            .map(|(role, text)| {
                let mut out = String::with_capacity(text.len());
                let mut rest = text.as_str();
                while let Some(open) = rest.find("{{") {
                    let Some(close) = rest[open..].find("}}") else {
                        break;
                    };
                    let name = &rest[open + 2..open + close];
                    let value = bindings
                        .get(name)
                        .ok_or_else(|| PromptError::InvalidTemplate {
                            id: self.id,
                            reason: format!("slot {name} is unbound"),
                        })?;
                    out.push_str(&rest[..open]);
                    out.push_str(value);
                    rest = &rest[open + close + 2..];
                }
                out.push_str(rest);
                Ok(Message {
                    role: *role,
                    content: out,
                })
            })
            .collect::<Result<_, PromptError>>()?;
        Ok(RenderedPrompt { messages })
    }
}

fn placeholders(text: &str) -> Vec<&str> {
    let mut found = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        let Some(close) = rest[open..].find("}}") else {
            break;
        };
        found.push(&rest[open + 2..open + close]);
        rest = &rest[open + close + 2..];
    }
    found
}

/// The six templates, checked at construction so rendering cannot hit an
/// unbound slot.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let templates = TemplateId::ALL
            .into_iter()
            .map(|id| {
                let t = PromptTemplate::parse(id, id.builtin_body())
                    .unwrap_or_else(|e| panic!("built-in template is invalid: {e}"));
                (id, t)
            })
            .collect();
        Self { templates }
    }

    /// Built-in templates, overridden by any `pN_*.txt` file found in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let mut set = Self::builtin();
        for id in TemplateId::ALL {
            let path = dir.as_ref().join(id.file_name());
            if !path.exists() {
                continue;
            }
            let body = std::fs::read_to_string(&path).map_err(|source| PromptError::Io {
                path: path.display().to_string(),
                source,
            })?;
            set.templates.insert(id, PromptTemplate::parse(id, &body)?);
        }
        Ok(set)
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    fn render(&self, id: TemplateId, bindings: BTreeMap<&str, String>) -> RenderedPrompt {
        self.get(id)
            .render(&bindings)
            .unwrap_or_else(|e| panic!("call site left a slot unbound: {e}"))
    }

    /// Intent detection over the actions available at the current node.
    pub fn render_intent_prompt(
        &self,
        history: &DialogueHistory,
        user_utterance: &str,
        knowledge: &KnowledgeDatabase,
        candidates: &BTreeSet<ActionId>,
    ) -> Result<RenderedPrompt, PromptError> {
        if candidates.is_empty() {
            return Err(PromptError::EmptyCandidates);
        }
        let candidates = candidates
            .iter()
            .map(|a| format!("- {a}"))
            .collect::<Vec<_>>()
            .join("\n");
        Ok(self.render(
            TemplateId::P1Intent,
            BTreeMap::from([
                ("history", format_history(history)),
                ("user_utterance", user_utterance.to_string()),
                ("knowledge", format_knowledge(knowledge)),
                ("candidates", candidates),
            ]),
        ))
    }

    pub fn render_unrecognized_prompt(&self, history: &DialogueHistory) -> RenderedPrompt {
        self.render(
            TemplateId::P2Unrecognized,
            BTreeMap::from([("history", format_history(history))]),
        )
    }

    pub fn render_end_prompt(
        &self,
        history: &DialogueHistory,
        knowledge: &KnowledgeDatabase,
    ) -> RenderedPrompt {
        self.render(
            TemplateId::P3End,
            BTreeMap::from([
                ("history", format_history(history)),
                ("knowledge", format_knowledge(knowledge)),
            ]),
        )
    }

    pub fn render_continue_prompt(
        &self,
        g: &ActionTransitionGraph,
        history: &DialogueHistory,
        knowledge: &KnowledgeDatabase,
        next_node: &NodeId,
        fresh_results: &[ApiResult],
    ) -> Result<RenderedPrompt, PromptError> {
        if next_node == g.final_node() {
            return Err(PromptError::FinalNodeContinue(next_node.clone()));
        }
        let options = g
            .available_actions(next_node.as_str())
            .unwrap_or_default()
            .iter()
            .map(|a| humanize(a.as_str()))
            .collect::<Vec<_>>()
            .join(", ");
        let fresh = if fresh_results.is_empty() {
            "(none)".to_string()
        } else {
            fresh_results
                .iter()
                .map(format_result)
                .collect::<Vec<_>>()
                .join("\n")
        };
        Ok(self.render(
            TemplateId::P4Continue,
            BTreeMap::from([
                ("history", format_history(history)),
                ("knowledge", format_knowledge(knowledge)),
                ("next_step", humanize(next_node.as_str())),
                ("next_options", options),
                ("fresh_results", fresh),
            ]),
        ))
    }

    /// The user agent's prompt for expressing `action`. The identifier itself
    /// is replaced by a plain-words description.
    pub fn render_user_prompt(
        &self,
        action: &ActionId,
        g: &ActionTransitionGraph,
        history: &DialogueHistory,
        persona: &Persona,
    ) -> Result<RenderedPrompt, PromptError> {
        if !g.actions().contains(action) {
            return Err(PromptError::UnknownAction(action.clone()));
        }
        let prefs = persona
            .prefs
            .iter()
            .map(|p| format!("- {p}"))
            .collect::<Vec<_>>()
            .join("\n");
        Ok(self.render(
            TemplateId::P5User,
            BTreeMap::from([
                ("scenario", humanize(g.name())),
                ("persona_name", persona.name.clone()),
                ("persona_age", persona.age.to_string()),
                ("persona_gender", persona.gender.to_string()),
                ("persona_prefs", prefs),
                ("action_description", humanize(action.as_str())),
                ("history", format_history(history)),
            ]),
        ))
    }

    pub fn render_prefs_prompt(&self, g: &ActionTransitionGraph) -> RenderedPrompt {
        let actions = g
            .actions()
            .iter()
            .map(|a| humanize(a.as_str()))
            .collect::<Vec<_>>()
            .join(", ");
        self.render(
            TemplateId::P6Prefs,
            BTreeMap::from([("scenario", humanize(g.name())), ("actions", actions)]),
        )
    }
}

/// `SearchList` -> `search list`, `car_rental` -> `car rental`.
pub fn humanize(identifier: &str) -> String {
    let mut words: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut prev: Option<char> = None;
    for c in identifier.chars() {
        if c == '_' || c == '-' || c.is_whitespace() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
        } else {
            let boundary =
                c.is_uppercase() && prev.is_some_and(|p| p.is_lowercase() || p.is_ascii_digit());
            if boundary && !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            current.extend(c.to_lowercase());
        }
        prev = Some(c);
    }
    if !current.is_empty() {
        words.push(current);
    }
    words.join(" ")
}

fn format_history(history: &DialogueHistory) -> String {
    history
        .utterances()
        .iter()
        .map(|u| format!("{}: {}", u.speaker.label(), u.text))
        .collect::<Vec<_>>()
        .join("\n")
}

fn format_result(r: &ApiResult) -> String {
    format!(
        "[turn {}] {} -> {}",
        r.turn_index,
        r.request_summary,
        serde_json::to_string(&r.payload).expect("payload serializes")
    )
}

/// The last [`KNOWLEDGE_WINDOW`] results verbatim, older ones by count.
fn format_knowledge(k: &KnowledgeDatabase) -> String {
    if k.is_empty() {
        return "(nothing yet)".to_string();
    }
    let recent = k.recent(KNOWLEDGE_WINDOW);
    let mut lines = Vec::with_capacity(recent.len() + 1);
    let older = k.len() - recent.len();
    if older > 0 {
        lines.push(format!("({older} earlier result(s) not shown)"));
    }
    lines.extend(recent.iter().map(format_result));
    lines.join("\n")
}

/// The intent detector's decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum IntentResult {
    Recognized { action: ActionId, raw: String },
    Unrecognized { raw: String },
}

impl IntentResult {
    pub fn action(&self) -> Option<&ActionId> {
        match self {
            IntentResult::Recognized { action, .. } => Some(action),
            IntentResult::Unrecognized { .. } => None,
        }
    }

    pub fn is_recognized(&self) -> bool {
        self.action().is_some()
    }

    pub fn raw(&self) -> &str {
        match self {
            IntentResult::Recognized { raw, .. } | IntentResult::Unrecognized { raw } => raw,
        }
    }
}

/// Map raw detector output onto one of `candidates`. Total: anything that is
/// not a candidate (exactly, or up to case when unambiguous) is Unrecognized.
pub fn parse_intent(raw: &str, candidates: &BTreeSet<ActionId>) -> IntentResult {
    let quotes: &[char] = &['"', '\'', '`'];
    let text = raw.trim().trim_matches(quotes).trim();
    if let Some(action) = candidates.get(text) {
        return IntentResult::Recognized {
            action: action.clone(),
            raw: raw.to_string(),
        };
    }
    let mut folded = candidates.iter().filter(|a| {
        a.as_str().eq_ignore_ascii_case(text) || a.as_str().to_lowercase() == text.to_lowercase()
    });
    if let (Some(action), None) = (folded.next(), folded.next()) {
        return IntentResult::Recognized {
            action: action.clone(),
            raw: raw.to_string(),
        };
    }
    IntentResult::Unrecognized {
        raw: raw.to_string(),
    }
}
