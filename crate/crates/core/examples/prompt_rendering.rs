//! Render the intent-detection and continuation prompts for a point in the
//! doctor scenario.
//!
//! cargo run --example prompt_rendering

use graphtod::simulation::{DialogueHistory, Speaker};
use graphtod::{scenarios, KnowledgeDatabase, NodeId, TemplateSet};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let g = scenarios::doctor();
    let templates = TemplateSet::builtin();
    let mut history = DialogueHistory::new(g.starting_utterance());
    history.push(Speaker::User, "I'd like to book an appointment.")?;
    history.push(Speaker::System, "Sure. Which doctor would you like to see?")?;

    let node = NodeId::from("AskDocName");
    let candidates = g.available_actions(node.as_str())?;
    let knowledge = KnowledgeDatabase::new();
    let intent = templates.render_intent_prompt(
        &history,
        "Could you provide the list of female doctors?",
        &knowledge,
        &candidates,
    )?;
    println!("--- intent detection ---\n{}", intent.text());

    history.push(
        Speaker::User,
        "Could you provide the list of female doctors?",
    )?;
    let next = g.transition_step(node.as_str(), "SearchList")?;
    let reply = templates.render_continue_prompt(&g, &history, &knowledge, &next, &[])?;
    println!("--- continuation ---\n{}", reply.text());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
