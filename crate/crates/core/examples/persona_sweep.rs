//! Draw many personas for one scenario and look at what comes out.
//!
//! cargo run --example persona_sweep -- [SCENARIO] [COUNT]

use std::collections::BTreeMap;

use graphtod::{generate_persona, scenarios, Gender, PrefSource};

pub fn run_with(scenario: &str, count: u64) -> Result<(), Box<dyn std::error::Error>> {
    let g =
        scenarios::by_name(scenario).ok_or_else(|| format!("no bundled scenario {scenario}"))?;
    let mut genders: BTreeMap<Gender, usize> = BTreeMap::new();
    let mut prefs: BTreeMap<String, usize> = BTreeMap::new();
    let (mut youngest, mut oldest) = (u8::MAX, 0);
    for seed in 0..count {
        let p = generate_persona(&g, seed, PrefSource::Derived)?;
        if seed < 3 {
            println!("{seed}: {} ({}, {}) {:?}", p.name, p.age, p.gender, p.prefs);
        }
        *genders.entry(p.gender).or_default() += 1;
        youngest = youngest.min(p.age);
        oldest = oldest.max(p.age);
        for pref in p.prefs {
            *prefs.entry(pref).or_default() += 1;
        }
    }
    println!("\n{count} personas, ages {youngest}..={oldest}, genders {genders:?}");
    let mut common: Vec<_> = prefs.into_iter().collect();
    common.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    println!("most common preferences:");
    for (pref, n) in common.iter().take(8) {
        println!("  {n:>5}  {pref}");
    }
    Ok(())
}

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    run_with("doctor", 500)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let scenario = args.next().unwrap_or_else(|| "doctor".into());
    let count = args
        .next()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(10_000);
    run_with(&scenario, count)
}
