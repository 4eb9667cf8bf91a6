//! User personas: age, name, gender and preferences.

use std::fmt;
use std::sync::OnceLock;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{ActionTransitionGraph, FixtureData, FunctionHandler};
use crate::llm::{BackendError, CompletionRequest, LlmBackend, RequestTag};
use crate::prompts::{humanize, TemplateId, TemplateSet};

pub const MIN_AGE: u8 = 18;
pub const MAX_AGE: u8 = 80;
pub const MAX_PREFS: usize = 5;
pub const MAX_PREF_CHARS: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "male",
            Gender::Female => "female",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub age: u8,
    pub name: String,
    pub gender: Gender,
    pub prefs: Vec<String>,
}

/// Bundled first names for one gender.
pub fn names(gender: Gender) -> &'static [&'static str] {
    static FEMALE: OnceLock<Vec<&'static str>> = OnceLock::new();
    static MALE: OnceLock<Vec<&'static str>> = OnceLock::new();
    let (cell, text) = match gender {
        Gender::Female => (&FEMALE, include_str!("../assets/names/female.txt")),
        Gender::Male => (&MALE, include_str!("../assets/names/male.txt")),
    };
    cell.get_or_init(|| {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

/// Where preferences come from.
#[derive(Clone, Copy)]
pub enum PrefSource<'a> {
    /// Templated from the graph's fixture values and actions. Offline and pure.
    Derived,
    /// Asked from the language model with the P6 template.
    Llm {
        backend: &'a dyn LlmBackend,
        templates: &'a TemplateSet,
    },
}

const STYLES: &[&str] = &[
    "short answers",
    "detailed explanations",
    "a friendly tone",
    "clear options",
    "step-by-step guidance",
];

fn plural(word: &str) -> String {
    if word.ends_with('s') || word.ends_with('x') || word.ends_with("ch") || word.ends_with("sh") {
        format!("{word}es")
    } else if word.ends_with('y') && !word.ends_with("ay") && !word.ends_with("ey") {
        format!("{}ies", &word[..word.len() - 1])
    } else {
        format!("{word}s")
    }
}

fn clip(text: &str) -> String {
    text.chars().take(MAX_PREF_CHARS).collect()
}

/// Candidate preference phrases for `g`.
///
/// Each fixture filter value becomes `prefers <value> <topic>`, where the topic is
/// the first word of the handler name in plural (`doctor_directory` + `female`
/// gives `prefers female doctors`). Each action gives `likes <style> when it
/// comes to <action words>`.
fn preference_pool(
    g: &ActionTransitionGraph,
    styles: &mut impl FnMut() -> &'static str,
) -> Vec<String> {
    let mut pool: Vec<String> = Vec::new();
    for spec in g.function_calls().values() {
        let FunctionHandler::Fixture {
            filter,
            data: FixtureData::Loaded(records),
            ..
        } = &spec.handler
        else {
            continue;
        };
        let topic = plural(spec.name.split('_').next().unwrap_or(&spec.name));
        for field in filter {
            let mut values: Vec<&str> = records
                .iter()
                .filter_map(|r| r.get(field).and_then(|v| v.as_str()))
                .collect();
            values.sort_unstable();
            values.dedup();
            pool.extend(
                values
                    .iter()
                    .map(|v| format!("prefers {} {topic}", v.to_lowercase())),
            );
        }
    }
    pool.sort();
    pool.dedup();
    for action in g.actions() {
        pool.push(format!(
            "likes {} when it comes to {}",
            styles(),
            humanize(action.as_str())
        ));
    }
    pool
}

fn derived_prefs(g: &ActionTransitionGraph, rng: &mut ChaCha8Rng) -> Vec<String> {
    let style_seed: u64 = rng.random();
    let mut style_rng = ChaCha8Rng::seed_from_u64(style_seed);
    let pool = preference_pool(g, &mut || STYLES[style_rng.random_range(0..STYLES.len())]);
    let k = rng.random_range(1..=3usize).min(pool.len());
    pool.choose_multiple(rng, k).map(|p| clip(p)).collect()
}

/// One preference per non-empty line, list markers removed.
pub fn parse_pref_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(|line| {
            line.trim()
                .trim_start_matches(|c: char| {
                    c.is_ascii_digit() || matches!(c, '-' | '*' | '•' | '.' | ')')
                })
                .trim()
        })
        .filter(|line| !line.is_empty())
        .take(MAX_PREFS)
        .map(clip)
        .collect()
}

/// Draw a persona. Age, gender and name come from the seeded generator; with
/// [`PrefSource::Derived`] the whole persona is a pure function of `(g, seed)`.
/// An empty model answer falls back to derived preferences.
pub fn generate_persona(
    g: &ActionTransitionGraph,
    seed: u64,
    source: PrefSource<'_>,
) -> Result<Persona, BackendError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let age = rng.random_range(MIN_AGE..=MAX_AGE);
    let gender = if rng.random_bool(0.5) {
        Gender::Female
    } else {
        Gender::Male
    };
    let pool = names(gender);
    let name = pool[rng.random_range(0..pool.len())].to_string();
    let prefs = match source {
        PrefSource::Derived => derived_prefs(g, &mut rng),
        PrefSource::Llm { backend, templates } => {
            let prompt = templates.render_prefs_prompt(g);
            let request = CompletionRequest::new(prompt, RequestTag::new(TemplateId::P6Prefs, 0));
            let prefs = parse_pref_lines(&backend.complete(&request)?);
            if prefs.is_empty() {
                derived_prefs(g, &mut rng)
            } else {
                prefs
            }
        }
    };
    Ok(Persona {
        age,
        name,
        gender,
        prefs,
    })
}
