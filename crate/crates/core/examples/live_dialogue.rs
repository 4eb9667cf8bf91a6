//! One dialogue against a real chat-completions endpoint.
//!
//! GRAPHTOD_API_KEY=... cargo run --example live_dialogue -- [SCENARIO]
//!
//! GRAPHTOD_BASE_URL and GRAPHTOD_MODEL override the endpoint and model.

use graphtod::llm::API_KEY_ENV;
use graphtod::{
    scenarios, HttpBackend, HttpConfig, Invoker, Pipeline, SimulationConfig, TemplateSet,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let Ok(api_key) = std::env::var(API_KEY_ENV) else {
        eprintln!("set {API_KEY_ENV} to run this example");
        return Ok(());
    };
    let scenario = std::env::args().nth(1).unwrap_or_else(|| "doctor".into());
    let g =
        scenarios::by_name(&scenario).ok_or_else(|| format!("no bundled scenario {scenario}"))?;

    let mut config = HttpConfig {
        api_key: Some(api_key),
        ..HttpConfig::default()
    };
    if let Ok(url) = std::env::var("GRAPHTOD_BASE_URL") {
        config.base_url = url;
    }
    if let Ok(model) = std::env::var("GRAPHTOD_MODEL") {
        config.model = model;
    }
    let backend = HttpBackend::new(config)?;
    let templates = TemplateSet::builtin();
    let invoker = Invoker::new();
    let record = Pipeline::new(&templates, &backend, &invoker).generate_dialogue(
        &g,
        &SimulationConfig::default(),
        rand::random(),
    );

    let p = &record.persona;
    println!(
        "{} ({}, {}), prefers: {}",
        p.name,
        p.age,
        p.gender,
        p.prefs.join("; ")
    );
    for u in record.utterances.utterances() {
        println!("{:>6}: {}", u.speaker.label(), u.text);
    }
    for t in &record.turns {
        println!(
            "turn {}: {} --{:?}--> {} ({} api results)",
            t.turn,
            t.node_before,
            t.detected.action().map(|a| a.as_str()),
            t.node_after,
            t.api_results.len()
        );
    }
    println!("outcome: {}", record.outcome);
    Ok(())
}
