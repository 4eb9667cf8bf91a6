//! The two-agent turn loop and corpus generation.
//!
//! One turn: the user agent samples an available action and voices it (P5);
//! the system agent detects the intent (P1), runs the bound function call if
//! any, moves along the graph and answers with P2 (not understood), P3 (final
//! node reached) or P4 (continue). The graph advances on the detected action;
//! disagreements with the sampled action are recorded as mismatches.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::function_calls::{InvocationContext, Invoker, KnowledgeDatabase};
use crate::graph::{ActionId, ActionTransitionGraph, NodeId, TraceStep};
use crate::llm::{BackendError, CompletionRequest, LlmBackend, RequestTag};
use crate::persona::{generate_persona, Persona, PrefSource};
use crate::prompts::{parse_intent, IntentResult, TemplateSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    System,
    User,
}

impl Speaker {
    pub fn label(self) -> &'static str {
        match self {
            Speaker::System => "System",
            Speaker::User => "User",
        }
    }
}

/// Odd indices belong to the system, even ones to the user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub index: u32,
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimulationError {
    #[error("utterance {index} by {speaker:?} breaks the system/user alternation")]
    OutOfTurn { index: u32, speaker: Speaker },
    #[error("no candidate actions to choose from")]
    EmptyCandidates,
    #[error("the system cannot act at the final node {0}")]
    AtFinalNode(NodeId),
    #[error("the last utterance must be the user's")]
    NoUserUtterance,
}

/// Alternating system/user utterances, starting with the system's opener.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DialogueHistory {
    utterances: Vec<Utterance>,
}

impl DialogueHistory {
    pub fn new(starting_utterance: impl Into<String>) -> Self {
        Self {
            utterances: vec![Utterance {
                index: 1,
                speaker: Speaker::System,
                text: starting_utterance.into(),
            }],
        }
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn last(&self) -> Option<&Utterance> {
        self.utterances.last()
    }

    pub fn next_index(&self) -> u32 {
        self.utterances.len() as u32 + 1
    }

    pub fn next_speaker(&self) -> Speaker {
        if self.next_index() % 2 == 1 {
            Speaker::System
        } else {
            Speaker::User
        }
    }

    /// The utterance that would be appended next by `speaker`.
    pub fn draft(&self, speaker: Speaker, text: impl Into<String>) -> Utterance {
        Utterance {
            index: self.next_index(),
            speaker,
            text: text.into(),
        }
    }

    pub fn push(
        &mut self,
        speaker: Speaker,
        text: impl Into<String>,
    ) -> Result<(), SimulationError> {
        let u = self.draft(speaker, text);
        self.append(u)
    }

    pub fn append(&mut self, u: Utterance) -> Result<(), SimulationError> {
        if u.index != self.next_index() || u.speaker != self.next_speaker() {
            return Err(SimulationError::OutOfTurn {
                index: u.index,
                speaker: u.speaker,
            });
        }
        self.utterances.push(u);
        Ok(())
    }

    /// History without its last utterance.
    fn before_last(&self) -> DialogueHistory {
        DialogueHistory {
            utterances: self.utterances[..self.utterances.len().saturating_sub(1)].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: u32,
    pub node_before: NodeId,
    /// The action the user agent sampled; `None` when a human typed the turn.
    pub ground_truth_action: Option<ActionId>,
    pub detected: IntentResult,
    pub node_after: NodeId,
    /// Indices into the dialogue's knowledge database.
    pub api_results: Vec<usize>,
    pub mismatch: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Truncated,
    FailedIntent,
    BackendError,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [
        Outcome::Completed,
        Outcome::Truncated,
        Outcome::FailedIntent,
        Outcome::BackendError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Truncated => "truncated",
            Outcome::FailedIntent => "failed_intent",
            Outcome::BackendError => "backend_error",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendMeta {
    pub kind: String,
    pub model: Option<String>,
}

impl BackendMeta {
    pub fn of(backend: &dyn LlmBackend) -> Self {
        Self {
            kind: backend.kind().to_string(),
            model: backend.model().map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub turns: u32,
    pub mismatches: u32,
    pub unrecognized: u32,
}

/// One generated conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueRecord {
    pub graph_name: String,
    pub seed: u64,
    pub persona: Persona,
    pub utterances: DialogueHistory,
    pub turns: Vec<TurnRecord>,
    pub knowledge: KnowledgeDatabase,
    pub outcome: Outcome,
    pub backend: BackendMeta,
    pub counts: Counts,
}

impl DialogueRecord {
    /// The walk through the graph: one step per recognized turn.
    pub fn trace(&self) -> Vec<TraceStep> {
        trace_of(
            self.turns
                .iter()
                .map(|t| (&t.node_before, t.detected.action(), &t.node_after)),
        )
    }

    pub fn to_line(&self) -> CorpusLine {
        CorpusLine {
            graph_name: self.graph_name.clone(),
            seed: self.seed,
            persona: self.persona.clone(),
            utterances: self.utterances.utterances().to_vec(),
            turns: self
                .turns
                .iter()
                .map(|t| CorpusTurn {
                    turn: t.turn,
                    node_before: t.node_before.clone(),
                    ground_truth_action: t.ground_truth_action.clone(),
                    detected_action: t.detected.action().cloned(),
                    node_after: t.node_after.clone(),
                    mismatch: t.mismatch,
                    api_result_count: t.api_results.len(),
                })
                .collect(),
            outcome: self.outcome,
            counts: self.counts,
            backend: self.backend.clone(),
        }
    }

    pub fn to_json_line(&self) -> String {
        self.to_line().to_json()
    }
}

fn trace_of<'a>(
    turns: impl Iterator<Item = (&'a NodeId, Option<&'a ActionId>, &'a NodeId)>,
) -> Vec<TraceStep> {
    turns
        .filter_map(|(from, action, to)| {
            action.map(|a| TraceStep {
                from: from.clone(),
                action: a.clone(),
                to: to.clone(),
            })
        })
        .collect()
}

/// Per-turn fields of a corpus line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusTurn {
    pub turn: u32,
    pub node_before: NodeId,
    pub ground_truth_action: Option<ActionId>,
    pub detected_action: Option<ActionId>,
    pub node_after: NodeId,
    pub mismatch: bool,
    pub api_result_count: usize,
}

/// One JSONL corpus line. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusLine {
    pub graph_name: String,
    pub seed: u64,
    pub persona: Persona,
    pub utterances: Vec<Utterance>,
    pub turns: Vec<CorpusTurn>,
    pub outcome: Outcome,
    pub counts: Counts,
    pub backend: BackendMeta,
}

impl CorpusLine {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("corpus line serializes")
    }

    pub fn from_json(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }

    pub fn trace(&self) -> Vec<TraceStep> {
        trace_of(
            self.turns
                .iter()
                .map(|t| (&t.node_before, t.detected_action.as_ref(), &t.node_after)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PrefMode {
    #[default]
    Derived,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Upper bound on utterances per dialogue.
    pub max_turns: usize,
    pub max_consecutive_unrecognized: u32,
    pub pref_mode: PrefMode,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            max_turns: 30,
            max_consecutive_unrecognized: 3,
            pref_mode: PrefMode::Derived,
        }
    }
}

/// Uniform draw from the candidates in lexicographic order.
pub fn select_action(
    candidates: &BTreeSet<ActionId>,
    rng: &mut impl Rng,
) -> Result<ActionId, SimulationError> {
    if candidates.is_empty() {
        return Err(SimulationError::EmptyCandidates);
    }
    let i = rng.random_range(0..candidates.len());
    Ok(candidates.iter().nth(i).cloned().expect("index in range"))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of dialogue `index` in a corpus.
pub fn stable_hash(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

/// Mutable state of the system agent within one dialogue.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub node: NodeId,
    pub knowledge: KnowledgeDatabase,
}

impl SystemState {
    pub fn start(g: &ActionTransitionGraph) -> Self {
        Self {
            node: g.start().clone(),
            knowledge: KnowledgeDatabase::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemReply {
    pub utterance: Utterance,
    pub node_after: NodeId,
    pub intent: IntentResult,
    pub api_results: Vec<usize>,
    pub terminal: bool,
}

/// Shared, read-only resources of a generation run.
#[derive(Clone, Copy)]
pub struct Pipeline<'a> {
    pub templates: &'a TemplateSet,
    pub backend: &'a dyn LlmBackend,
    pub invoker: &'a Invoker,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        templates: &'a TemplateSet,
        backend: &'a dyn LlmBackend,
        invoker: &'a Invoker,
    ) -> Self {
        Self {
            templates,
            backend,
            invoker,
        }
    }

    fn ask(
        &self,
        prompt: crate::prompts::RenderedPrompt,
        tag: RequestTag,
    ) -> Result<String, BackendError> {
        self.backend.complete(&CompletionRequest::new(prompt, tag))
    }

    /// Voice `action` as the next (even-indexed) user utterance.
    pub fn user_step(
        &self,
        g: &ActionTransitionGraph,
        persona: &Persona,
        action: &ActionId,
        history: &DialogueHistory,
        node: &NodeId,
        turn: u32,
    ) -> Result<Utterance, BackendError> {
        let prompt = self
            .templates
            .render_user_prompt(action, g, history, persona)
            .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let tag = RequestTag::new(crate::prompts::TemplateId::P5User, turn)
            .at(node)
            .action(Some(action));
        let text = self.ask(prompt, tag)?;
        Ok(history.draft(Speaker::User, text.trim()))
    }

    /// The system agent's two-step reaction to the user utterance that ends
    /// `history`. Updates `state` (node and knowledge) in place.
    /// `ground_truth` only routes the scripted backend; it never steers the graph.
    #[allow(clippy::too_many_arguments)]
    pub fn system_step(
        &self,
        g: &ActionTransitionGraph,
        state: &mut SystemState,
        history: &DialogueHistory,
        persona: &Persona,
        turn: u32,
        ground_truth: Option<&ActionId>,
    ) -> Result<SystemReply, StepError> {
        use crate::prompts::TemplateId::*;

        let node = state.node.clone();
        let candidates = g
            .available_actions(node.as_str())
            .map_err(|_| SimulationError::AtFinalNode(node.clone()))?;
        let user = match history.last() {
            Some(u) if u.speaker == Speaker::User => u.text.clone(),
            _ => return Err(SimulationError::NoUserUtterance.into()),
        };
        let before = history.before_last();

        let prompt = self
            .templates
            .render_intent_prompt(&before, &user, &state.knowledge, &candidates)
            .map_err(|_| SimulationError::EmptyCandidates)?;
        let tag = RequestTag::new(P1Intent, turn)
            .at(&node)
            .action(ground_truth)
            .candidates(&candidates)
            .user_text(&user);
        let intent = parse_intent(&self.ask(prompt, tag)?, &candidates);

        let Some(action) = intent.action().cloned() else {
            let prompt = self.templates.render_unrecognized_prompt(history);
            let text = self.ask(prompt, RequestTag::new(P2Unrecognized, turn).at(&node))?;
            return Ok(SystemReply {
                utterance: history.draft(Speaker::System, text.trim()),
                node_after: node,
                intent,
                api_results: Vec::new(),
                terminal: false,
            });
        };

        let mut api_results = Vec::new();
        if let Some(spec) = g.function_call(action.as_str()) {
            let ctx = InvocationContext {
                node: &node,
                persona,
                user_utterance: &user,
                turn,
            };
            match self.invoker.invoke(spec, &action, &ctx) {
                Ok(result) => {
                    let index = state
                        .knowledge
                        .append(result)
                        .map_err(|e| StepError::Knowledge(e.to_string()))?;
                    api_results.push(index);
                }
                Err(e) => log::warn!("turn {turn}: function call for {action} failed: {e}"),
            }
        }
        let next = g
            .transition_step(node.as_str(), action.as_str())
            .expect("recognized actions are available at the node");
        let fresh: Vec<_> = api_results
            .iter()
            .filter_map(|&i| state.knowledge.get(i).cloned())
            .collect();

        let terminal = next == *g.final_node();
        let (prompt, template) = if terminal {
            (
                self.templates.render_end_prompt(history, &state.knowledge),
                P3End,
            )
        } else {
            let prompt = self
                .templates
                .render_continue_prompt(g, history, &state.knowledge, &next, &fresh)
                .expect("next node is not final");
            (prompt, P4Continue)
        };
        let text = self.ask(
            prompt,
            RequestTag::new(template, turn).at(&node).next(&next),
        )?;
        state.node = next.clone();
        Ok(SystemReply {
            utterance: history.draft(Speaker::System, text.trim()),
            node_after: next,
            intent,
            api_results,
            terminal,
        })
    }

    /// Simulate one dialogue. Failures end up in the record's outcome.
    pub fn generate_dialogue(
        &self,
        g: &ActionTransitionGraph,
        config: &SimulationConfig,
        seed: u64,
    ) -> DialogueRecord {
        let source = match config.pref_mode {
            PrefMode::Derived => PrefSource::Derived,
            PrefMode::Llm => PrefSource::Llm {
                backend: self.backend,
                templates: self.templates,
            },
        };
        let (persona, persona_failed) = match generate_persona(g, seed, source) {
            Ok(p) => (p, false),
            Err(e) => {
                log::warn!("persona generation failed: {e}");
                let p = generate_persona(g, seed, PrefSource::Derived)
                    .expect("derived personas never fail");
                (p, true)
            }
        };
        let mut record = DialogueRecord {
            graph_name: g.name().to_string(),
            seed,
            persona,
            utterances: DialogueHistory::new(g.starting_utterance()),
            turns: Vec::new(),
            knowledge: KnowledgeDatabase::new(),
            outcome: Outcome::BackendError,
            backend: BackendMeta::of(self.backend),
            counts: Counts::default(),
        };
        if !persona_failed {
            record.outcome = self.run_turns(g, config, seed, &mut record);
        }
        record.counts = Counts {
            turns: record.turns.len() as u32,
            mismatches: record.turns.iter().filter(|t| t.mismatch).count() as u32,
            unrecognized: record
                .turns
                .iter()
                .filter(|t| !t.detected.is_recognized())
                .count() as u32,
        };
        record
    }

    fn run_turns(
        &self,
        g: &ActionTransitionGraph,
        config: &SimulationConfig,
        seed: u64,
        record: &mut DialogueRecord,
    ) -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut state = SystemState::start(g);
        let mut consecutive_unrecognized = 0;
        let mut turn = 0u32;
        loop {
            if record.utterances.len() + 2 > config.max_turns {
                break Outcome::Truncated;
            }
            turn += 1;
            let candidates = g
                .available_actions(state.node.as_str())
                .expect("dialogue never rests on the final node");
            let Ok(action) = select_action(&candidates, &mut rng) else {
                // Dead end: only possible on graphs that failed validation.
                break Outcome::Truncated;
            };
            let user = match self.user_step(
                g,
                &record.persona,
                &action,
                &record.utterances,
                &state.node,
                turn,
            ) {
                Ok(u) => u,
                Err(e) => {
                    log::warn!("turn {turn}: user agent failed: {e}");
                    break Outcome::BackendError;
                }
            };
            record
                .utterances
                .append(user)
                .expect("user speaks on even indices");

            let node_before = state.node.clone();
            let reply = match self.system_step(
                g,
                &mut state,
                &record.utterances,
                &record.persona,
                turn,
                Some(&action),
            ) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("turn {turn}: system agent failed: {e}");
                    break Outcome::BackendError;
                }
            };
            record
                .utterances
                .append(reply.utterance)
                .expect("system speaks on odd indices");
            record.turns.push(TurnRecord {
                turn,
                node_before,
                mismatch: reply.intent.action() != Some(&action),
                ground_truth_action: Some(action),
                detected: reply.intent.clone(),
                node_after: reply.node_after,
                api_results: reply.api_results,
            });
            record.knowledge = state.knowledge.clone();

            if reply.terminal {
                break Outcome::Completed;
            }
            if reply.intent.is_recognized() {
                consecutive_unrecognized = 0;
            } else {
                consecutive_unrecognized += 1;
                if consecutive_unrecognized >= config.max_consecutive_unrecognized {
                    break Outcome::FailedIntent;
                }
            }
        }
    }

    /// `n` dialogues over `graphs` (dialogue `i` runs on `graphs[i % len]`
    /// with seed `stable_hash(master_seed, i)`), computed by up to `workers`
    /// threads and handed to `sink` in index order.
    pub fn generate_corpus_with<F>(
        &self,
        graphs: &[&ActionTransitionGraph],
        n: usize,
        config: &SimulationConfig,
        master_seed: u64,
        workers: usize,
        mut sink: F,
    ) where
        F: FnMut(usize, DialogueRecord),
    {
        assert!(!graphs.is_empty(), "at least one graph is required");
        let workers = workers.clamp(1, n.max(1));
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<(usize, DialogueRecord)>();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let next = &next;
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let g = graphs[i % graphs.len()];
                    let record =
                        self.generate_dialogue(g, config, stable_hash(master_seed, i as u64));
                    if tx.send((i, record)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            let mut pending = BTreeMap::new();
            let mut emit = 0;
            for (i, record) in rx {
                pending.insert(i, record);
                while let Some(record) = pending.remove(&emit) {
                    sink(emit, record);
                    emit += 1;
                }
            }
        });
    }

    pub fn generate_corpus(
        &self,
        graphs: &[&ActionTransitionGraph],
        n: usize,
        config: &SimulationConfig,
        master_seed: u64,
        workers: usize,
    ) -> Vec<DialogueRecord> {
        let mut out = Vec::with_capacity(n);
        self.generate_corpus_with(graphs, n, config, master_seed, workers, |_, r| out.push(r));
        out
    }
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("knowledge database rejected a result: {0}")]
    Knowledge(String),
}

/// Aggregate statistics over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub dialogues: usize,
    pub mean_turns: f64,
    pub node_coverage: f64,
    pub action_coverage: f64,
    pub unrecognized_rate: f64,
    pub mismatch_rate: f64,
    pub outcome_histogram: BTreeMap<Outcome, usize>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Statistics over `lines`. Coverage is measured against the reachable nodes
/// and actions of those `graphs` that the corpus mentions by name.
pub fn corpus_stats(lines: &[CorpusLine], graphs: &[&ActionTransitionGraph]) -> CorpusStats {
    let total_turns: usize = lines.iter().map(|l| l.counts.turns as usize).sum();
    let unrecognized: usize = lines.iter().map(|l| l.counts.unrecognized as usize).sum();
    let mismatches: usize = lines.iter().map(|l| l.counts.mismatches as usize).sum();
    let mut histogram: BTreeMap<Outcome, usize> = Outcome::ALL.iter().map(|o| (*o, 0)).collect();
    for line in lines {
        *histogram.entry(line.outcome).or_default() += 1;
    }

    let (mut nodes_hit, mut nodes_all, mut actions_hit, mut actions_all) = (0, 0, 0, 0);
    let used: BTreeSet<&str> = lines.iter().map(|l| l.graph_name.as_str()).collect();
    for g in graphs.iter().filter(|g| used.contains(g.name())) {
        let reachable = g.reachable_nodes();
        let reachable_actions = g.reachable_actions();
        let mut seen_nodes = BTreeSet::new();
        let mut seen_actions = BTreeSet::new();
        for line in lines.iter().filter(|l| l.graph_name == g.name()) {
            seen_nodes.insert(g.start().clone());
            for step in line.trace() {
                seen_nodes.insert(step.from);
                seen_nodes.insert(step.to);
                seen_actions.insert(step.action);
            }
        }
        nodes_hit += seen_nodes.intersection(&reachable).count();
        nodes_all += reachable.len();
        actions_hit += seen_actions.intersection(&reachable_actions).count();
        actions_all += reachable_actions.len();
    }

    CorpusStats {
        dialogues: lines.len(),
        mean_turns: ratio(total_turns, lines.len()),
        node_coverage: ratio(nodes_hit, nodes_all),
        action_coverage: ratio(actions_hit, actions_all),
        unrecognized_rate: ratio(unrecognized, total_turns),
        mismatch_rate: ratio(mismatches, total_turns),
        outcome_histogram: histogram,
    }
}
