//! Generate a small corpus over all four scenarios with the offline backend
//! and summarize it.
//!
//! cargo run --example scripted_corpus -- [COUNT] [SEED]

use graphtod::{
    corpus_stats, scenarios, Invoker, Pipeline, ScriptedBackend, SimulationConfig, TemplateSet,
};

pub fn run_with(count: usize, seed: u64) -> Result<(), Box<dyn std::error::Error>> {
    let graphs = scenarios::all();
    let refs: Vec<_> = graphs.iter().collect();
    let templates = TemplateSet::builtin();
    let backend = ScriptedBackend::default();
    let invoker = Invoker::new();
    let pipeline = Pipeline::new(&templates, &backend, &invoker);

    let corpus = pipeline.generate_corpus(&refs, count, &SimulationConfig::default(), seed, 4);
    let first = &corpus[0];
    println!(
        "first dialogue ({}, seed {}):",
        first.graph_name, first.seed
    );
    for u in first.utterances.utterances() {
        println!("  {:>2} {:<6} {}", u.index, u.speaker.label(), u.text);
    }

    let lines: Vec<_> = corpus.iter().map(|r| r.to_line()).collect();
    let stats = corpus_stats(&lines, &refs);
    println!("\n{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    run_with(20, 7)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let count = args.next().map(|s| s.parse()).transpose()?.unwrap_or(150);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    run_with(count, seed)
}
