//! Force specific branches with a script table: a user the system never
//! understands, and a language model that is down.
//!
//! cargo run --example scripted_overrides

use graphtod::llm::{BackendError, CompletionRequest};
use graphtod::prompts::UNRECOGNIZED;
use graphtod::{
    scenarios, Invoker, LlmBackend, Pipeline, ScriptTable, ScriptedBackend, SimulationConfig,
    TemplateSet,
};

struct Offline;

impl LlmBackend for Offline {
    fn complete(&self, _: &CompletionRequest) -> Result<String, BackendError> {
        Err(BackendError::Unavailable("connection refused".into()))
    }

    fn kind(&self) -> &'static str {
        "offline"
    }
}

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let g = scenarios::hotel();
    let templates = TemplateSet::builtin();
    let invoker = Invoker::new();
    let config = SimulationConfig::default();

    // Every intent-detection call answers UNRECOGNIZED, on every node.
    let table = ScriptTable::from_json(&format!(r#"{{"P1_INTENT": "{UNRECOGNIZED}"}}"#))?;
    let confused = ScriptedBackend::new(table, 0);
    let record = Pipeline::new(&templates, &confused, &invoker).generate_dialogue(&g, &config, 3);
    println!(
        "confused system: {} after {} turns",
        record.outcome,
        record.turns.len()
    );
    for t in &record.turns {
        println!("  turn {}: {} -> {}", t.turn, t.node_before, t.node_after);
    }

    // A canned reply for one node and turn; everything else uses the defaults.
    let table =
        ScriptTable::new().with("P4_CONTINUE:Welcome:1", "Great, let's find you a hotel.")?;
    let scripted = ScriptedBackend::new(table, 0);
    let record = Pipeline::new(&templates, &scripted, &invoker).generate_dialogue(&g, &config, 3);
    println!("\ncanned reply: {}", record.utterances.utterances()[2].text);

    let record = Pipeline::new(&templates, &Offline, &invoker).generate_dialogue(&g, &config, 3);
    println!("\nbackend down: {}", record.outcome);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
