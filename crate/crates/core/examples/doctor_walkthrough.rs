//! Drive the system agent by hand through the doctor scenario: the user asks
//! for a list of female doctors, the agent detects `SearchList`, queries the
//! directory and moves on to `ShowList`.
//!
//! cargo run --example doctor_walkthrough

use graphtod::simulation::{DialogueHistory, Speaker, SystemState};
use graphtod::{
    generate_persona, scenarios, ActionId, Invoker, Pipeline, PrefSource, ScriptedBackend,
    TemplateSet,
};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let g = scenarios::doctor();
    let templates = TemplateSet::builtin();
    let backend = ScriptedBackend::default();
    let invoker = Invoker::new();
    let pipeline = Pipeline::new(&templates, &backend, &invoker);
    let mut persona = generate_persona(&g, 11, PrefSource::Derived)?;
    persona.prefs.clear();

    let mut history = DialogueHistory::new(g.starting_utterance());
    let mut state = SystemState::start(&g);
    // The second element is what the user means. The offline backend answers
    // intent detection with it, the way a capable model would.
    let user_turns = [
        (
            "Hi, I'd like to book an appointment with a doctor.",
            "BookAppointment",
        ),
        (
            "Could you provide the list of female doctors?",
            "SearchList",
        ),
    ];
    for (i, (text, meant)) in user_turns.into_iter().enumerate() {
        history.push(Speaker::User, text)?;
        let before = state.node.clone();
        let meant = ActionId::from(meant);
        let reply = pipeline.system_step(
            &g,
            &mut state,
            &history,
            &persona,
            i as u32 + 1,
            Some(&meant),
        )?;
        println!("user:   {text}");
        println!(
            "intent: {:?}   {} -> {}",
            reply.intent.action().map(|a| a.as_str()),
            before,
            reply.node_after
        );
        for &k in &reply.api_results {
            let result = &state.knowledge.entries()[k];
            println!("api:    {}", result.request_summary);
            for doctor in result.payload.as_array().into_iter().flatten() {
                println!("        {}", doctor["name"]);
            }
        }
        history.append(reply.utterance)?;
    }
    assert_eq!(state.node, "ShowList");
    assert_eq!(state.knowledge.len(), 1);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
