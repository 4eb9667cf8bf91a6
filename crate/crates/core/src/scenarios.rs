//! The four bundled scenario graphs with their fixture data compiled in.

use crate::graph::{parse_graph, ActionTransitionGraph};

const DATA: &[(&str, &str)] = &[
    (
        "data/cars.json",
        include_str!("../scenarios/data/cars.json"),
    ),
    (
        "data/doctors.json",
        include_str!("../scenarios/data/doctors.json"),
    ),
    (
        "data/hotels.json",
        include_str!("../scenarios/data/hotels.json"),
    ),
    (
        "data/hours.json",
        include_str!("../scenarios/data/hours.json"),
    ),
    (
        "data/policies.json",
        include_str!("../scenarios/data/policies.json"),
    ),
    (
        "data/quotes.json",
        include_str!("../scenarios/data/quotes.json"),
    ),
    (
        "data/recipes.json",
        include_str!("../scenarios/data/recipes.json"),
    ),
    (
        "data/requirements.json",
        include_str!("../scenarios/data/requirements.json"),
    ),
    (
        "data/rooms.json",
        include_str!("../scenarios/data/rooms.json"),
    ),
    (
        "data/slots.json",
        include_str!("../scenarios/data/slots.json"),
    ),
    (
        "data/substitutions.json",
        include_str!("../scenarios/data/substitutions.json"),
    ),
];

/// Graph document of each scenario, keyed by its file stem.
pub const SOURCES: &[(&str, &str)] = &[
    ("recipe", include_str!("../scenarios/recipe.json")),
    ("hotel", include_str!("../scenarios/hotel.json")),
    ("rentcar", include_str!("../scenarios/rentcar.json")),
    ("doctor", include_str!("../scenarios/doctor.json")),
];

fn build(source: &str) -> ActionTransitionGraph {
    let mut g = parse_graph(source).expect("bundled scenario parses");
    g.resolve_fixtures(|data_ref| {
        DATA.iter()
            .find(|(name, _)| *name == data_ref)
            .map(|(_, text)| text.to_string())
            .ok_or_else(|| format!("no bundled data named {data_ref}"))
    });
    g
}

/// Look a scenario up by file stem (`rentcar`) or graph name (`car_rental`).
pub fn by_name(name: &str) -> Option<ActionTransitionGraph> {
    SOURCES.iter().find_map(|(stem, source)| {
        let g = build(source);
        (*stem == name || g.name() == name).then_some(g)
    })
}

pub fn doctor() -> ActionTransitionGraph {
    build(SOURCES[3].1)
}

pub fn recipe() -> ActionTransitionGraph {
    build(SOURCES[0].1)
}

pub fn hotel() -> ActionTransitionGraph {
    build(SOURCES[1].1)
}

pub fn rentcar() -> ActionTransitionGraph {
    build(SOURCES[2].1)
}

/// Recipe, hotel, car rental and doctor, in that order.
pub fn all() -> Vec<ActionTransitionGraph> {
    SOURCES.iter().map(|(_, s)| build(s)).collect()
}
