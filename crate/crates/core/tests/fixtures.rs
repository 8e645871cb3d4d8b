use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use serde::Deserialize;

use pricing_audit::market::{exact_payoff_matrix, DiscreteValuationTable};
use pricing_audit::oracles::{sample_transcript, true_calibrated_regret, true_pessimistic_regret, IndistinguishablePair};
use pricing_audit::rational::{int, ratio};
use pricing_audit::transcript::{read_transcript, PriceGrid};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

#[test]
fn table_fixture_matches_the_builtin_game() {
    let text = fs::read_to_string(fixture("table3.json")).unwrap();
    let table = DiscreteValuationTable::from_json(&text).unwrap();
    assert_eq!(table, DiscreteValuationTable::table3(ratio(1, 100)).unwrap());
    let prices: Vec<_> = (1..=3).map(int).collect();
    let m = exact_payoff_matrix(&table, &prices, [&int(0), &int(0)]).unwrap();
    // (2, 3) entry: 1.7 + ε, 0.45 − 3ε/2 at ε = 1/100.
    assert_eq!(m.get(1, 2), &[ratio(171, 100), ratio(435, 1000)]);
}

#[derive(Deserialize)]
struct PairFixture {
    grid: Vec<f64>,
    lower_probs: Vec<f64>,
    a: f64,
    rounds: usize,
    seed: u64,
    transcript: String,
}

#[test]
fn indistinguishable_fixture_reproduces() {
    let spec: PairFixture = serde_json::from_str(&fs::read_to_string(fixture("indistinguishable.json")).unwrap()).unwrap();
    let grid = PriceGrid::new(spec.grid, None).unwrap();
    let pair = IndistinguishablePair::new(grid, &spec.lower_probs, spec.a, spec.rounds).unwrap();
    let stored = read_transcript(BufReader::new(fs::File::open(fixture(&spec.transcript)).unwrap())).unwrap();
    assert_eq!(stored, sample_transcript(&pair.grid, &pair.dists, &pair.x, spec.seed).unwrap());
    assert_eq!(stored, sample_transcript(&pair.grid, &pair.dists, &pair.z, spec.seed).unwrap());

    let rx = true_calibrated_regret(&pair.grid, &pair.dists, &pair.x, 0.0).unwrap();
    let rz = true_calibrated_regret(&pair.grid, &pair.dists, &pair.z, 0.0).unwrap();
    assert!((rz - rx - pair.regret_gap()).abs() < 1e-12);
    assert_eq!(true_pessimistic_regret(&pair.grid, &pair.dists, &pair.x, 0.0).unwrap(), rz);
}
