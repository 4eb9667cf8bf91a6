//! Validate the bundled scenarios and a graph with a few mistakes in it.
//!
//! cargo run --example validate_graph

use graphtod::{parse_graph, scenarios, validate_graph};

const BROKEN: &str = r#"{
  "name": "broken",
  "start_node": "Start",
  "final_node": "End",
  "starting_utterance": "Hi",
  "edges": {
    "Start": {"Ask": "Loop", "Lookup": "End"},
    "Loop": {"Again": "Loop"},
    "Orphan": {"Go": "Nowhere"}
  },
  "function_calls": {
    "Missing": {"handler": "fixture", "name": "lookup", "data_ref": "lookup.json"}
  }
}"#;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    for g in scenarios::all() {
        let report = validate_graph(&g);
        println!(
            "{:<10} nodes={:<3} actions={:<3} {}",
            g.name(),
            g.nodes().len(),
            g.actions().len(),
            if report.is_ok() { "ok" } else { "INVALID" }
        );
        assert!(report.is_ok());
    }

    let broken = parse_graph(BROKEN)?;
    let report = validate_graph(&broken);
    println!("\nbroken graph:\n{report}");
    assert!(!report.is_ok());

    // Decoding problems are reported the same way, before any graph exists.
    let err = parse_graph(r#"{"name": "x", "start_node": 3}"#).unwrap_err();
    println!("\nundecodable graph:");
    for d in &err.diagnostics {
        println!("  {d}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
