//! How raw model answers map onto the candidate actions of a node.
//!
//! cargo run --example intent_parsing

use std::collections::BTreeSet;

use graphtod::{parse_intent, ActionId};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let candidates: BTreeSet<ActionId> = ["SearchList", "GiveName"]
        .into_iter()
        .map(ActionId::from)
        .collect();
    let answers = [
        "SearchList",
        "  searchlist\n",
        "GiveName.",
        "UNRECOGNIZED",
        "BookAppointment",
        "I think the user wants SearchList",
        "",
    ];
    for raw in answers {
        let intent = parse_intent(raw, &candidates);
        println!(
            "{:<40} -> {:?}",
            format!("{raw:?}"),
            intent.action().map(|a| a.as_str())
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
