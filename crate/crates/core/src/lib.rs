//! Synthetic task-oriented dialogues from action transition graphs.
//!
//! A graph describes which user actions are possible at each step of a
//! conversation and where they lead. Two language-model agents walk it: a user
//! agent that voices a randomly chosen action in the voice of a persona, and a
//! system agent that detects the intent, calls the bound API and answers.
//!
//! ```
//! use graphtod::{scenarios, Invoker, Pipeline, ScriptedBackend, SimulationConfig, TemplateSet};
//!
//! let graph = scenarios::doctor();
//! let templates = TemplateSet::builtin();
//! let backend = ScriptedBackend::default();
//! let invoker = Invoker::new();
//! let pipeline = Pipeline::new(&templates, &backend, &invoker);
//! let record = pipeline.generate_dialogue(&graph, &SimulationConfig::default(), 7);
//! assert!(graph.is_valid_trace(&record.trace()));
//! ```

pub mod cli;
pub mod function_calls;
pub mod graph;
pub mod llm;
pub mod persona;
pub mod prompts;
pub mod scenarios;
pub mod simulation;

pub use function_calls::{ApiResult, Invoker, KnowledgeDatabase};
pub use graph::{
    load_graph, parse_graph, validate_graph, ActionId, ActionTransitionGraph, NodeId, TraceStep,
};
pub use llm::{BackendError, HttpBackend, HttpConfig, LlmBackend, ScriptTable, ScriptedBackend};
pub use persona::{generate_persona, Gender, Persona, PrefSource};
pub use prompts::{parse_intent, IntentResult, TemplateId, TemplateSet};
pub use simulation::{
    corpus_stats, CorpusLine, CorpusStats, DialogueHistory, DialogueRecord, Outcome, Pipeline,
    PrefMode, SimulationConfig,
};
