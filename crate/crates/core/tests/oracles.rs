use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pricing_audit::market::{DiscreteValuationTable, TableDemand};
use pricing_audit::oracles::{
    best_in_hindsight_regret, swap_map_regret, true_calibrated_regret, true_pessimistic_regret, GroundTruth,
    IndistinguishablePair, SwapMap,
};
use pricing_audit::rational::int;
use pricing_audit::transcript::{PriceDistribution, PriceGrid};

fn random_instance(rng: &mut ChaCha8Rng, k: usize, rounds: usize, full_support: bool) -> (PriceGrid, Vec<PriceDistribution>, GroundTruth) {
    let mut levels: Vec<f64> = (0..k).map(|i| 0.1 + i as f64 * 0.3 + rng.gen_range(0.0..0.2)).collect();
    levels.sort_by(f64::total_cmp);
    let grid = PriceGrid::new(levels, None).unwrap();
    let dists = (0..rounds)
        .map(|_| {
            let dense: Vec<f64> = (0..k)
                .map(|_| if full_support || rng.gen_bool(0.5) { rng.gen_range(0.05..1.0) } else { 0.0 })
                .collect();
            let total: f64 = dense.iter().sum();
            if total == 0.0 {
                PriceDistribution::point_mass(rng.gen_range(0..k))
            } else {
                PriceDistribution::from_dense(&dense.iter().map(|v| v / total).collect::<Vec<_>>()).unwrap()
            }
        })
        .collect();
    let truth = GroundTruth::new(
        (0..rounds)
            .map(|_| {
                let mut row: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
                row.sort_by(|a, b| b.total_cmp(a));
                row
            })
            .collect(),
    )
    .unwrap();
    (grid, dists, truth)
}

#[test]
fn decomposition_equals_maximum_over_all_swap_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let (grid, dists, truth) = random_instance(&mut rng, 3, 3, false);
        let cost = rng.gen_range(0.0..1.0);
        let maps: Vec<SwapMap> = SwapMap::all(3).collect();
        assert_eq!(maps.len(), 27);
        let best = maps.iter().map(|s| swap_map_regret(&grid, &dists, &truth, s, cost)).fold(f64::NEG_INFINITY, f64::max);
        let decomposed = true_calibrated_regret(&grid, &dists, &truth, cost).unwrap();
        assert!((best - decomposed).abs() < 1e-12, "{best} vs {decomposed}");
    }
}

#[test]
fn fixed_at_price_one_in_the_table_game() {
    let table = DiscreteValuationTable::table3(int(0)).unwrap();
    let oracle = TableDemand::new(&table);
    let grid = table.price_grid();
    let rounds = 10;
    let truth = GroundTruth::from_oracle(&oracle, 0, &vec![1; rounds]);
    let dists = vec![PriceDistribution::point_mass(1); rounds];
    let regret = true_calibrated_regret(&grid, &dists, &truth, 0.0).unwrap();
    assert!((regret - (0.77 - 0.615)).abs() < 1e-12, "{regret}");
}

#[test]
fn pessimistic_regret_dominates_true_regret() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let k = rng.gen_range(1..=5);
        let rounds = rng.gen_range(1..=8);
        let (grid, dists, truth) = random_instance(&mut rng, k, rounds, false);
        // The upward fill is the worst case only while every swap target is priced at or above cost.
        let cost = rng.gen_range(0.0..=grid.level(0));
        let pess = true_pessimistic_regret(&grid, &dists, &truth, cost).unwrap();
        let real = true_calibrated_regret(&grid, &dists, &truth, cost).unwrap();
        assert!(pess >= real - 1e-12, "{pess} < {real}");
    }
}

#[test]
fn pessimistic_regret_dominates_every_compatible_completion() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (grid, dists, truth) = random_instance(&mut rng, 4, 6, false);
    let cost = grid.level(0);
    let pess = true_pessimistic_regret(&grid, &dists, &truth, cost).unwrap();
    for _ in 0..200 {
        // Redraw unsupported entries anywhere consistent with monotonicity.
        let rows = truth
            .rows()
            .iter()
            .zip(&dists)
            .map(|(row, d)| {
                let mut out = row.clone();
                let mut upper = 1.0;
                for p in 0..row.len() {
                    if d.contains(p) {
                        upper = row[p];
                    } else {
                        let floor = (p + 1..row.len()).find(|&q| d.contains(q)).map_or(0.0, |q| row[q]);
                        out[p] = rng.gen_range(floor..=upper);
                        upper = out[p];
                    }
                }
                out
            })
            .collect();
        let other = GroundTruth::new(rows).unwrap();
        assert!(pess >= true_calibrated_regret(&grid, &dists, &other, cost).unwrap() - 1e-12);
    }
}

#[test]
fn upward_fill_is_not_the_worst_case_below_cost() {
    // Point mass on 0.1 with x = 1; 0.3 is unsupported and filled with 1. At c = 0.5,
    // switching to 0.3 gains most when nothing sells there.
    let grid = PriceGrid::new(vec![0.1, 0.3], None).unwrap();
    let dists = vec![PriceDistribution::point_mass(0)];
    let truth = GroundTruth::new(vec![vec![1.0, 0.0]]).unwrap();
    let real = true_calibrated_regret(&grid, &dists, &truth, 0.5).unwrap();
    let pess = true_pessimistic_regret(&grid, &dists, &truth, 0.5).unwrap();
    assert!((real - 0.4).abs() < 1e-12);
    assert!((pess - 0.2).abs() < 1e-12);
}

#[test]
fn hindsight_regret_never_exceeds_calibrated_regret() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let k = rng.gen_range(1..=5);
        let rounds = rng.gen_range(1..=10);
        let (grid, dists, truth) = random_instance(&mut rng, k, rounds, false);
        let cost = rng.gen_range(0.0..1.0);
        let utilities = truth.utilities(&grid, cost);
        let expected: Vec<f64> = dists.iter().zip(&utilities).map(|(d, u)| d.iter().map(|(p, w)| w * u[p]).sum()).collect();
        let bih = best_in_hindsight_regret(&utilities, &expected).unwrap();
        let cal = true_calibrated_regret(&grid, &dists, &truth, cost).unwrap();
        assert!(bih <= cal + 1e-12, "{bih} > {cal}");
    }
}

#[test]
fn indistinguishable_pair_has_strictly_higher_pessimistic_regret() {
    let grid = PriceGrid::new(vec![1.0, 2.0, 3.0], None).unwrap();
    let pair = IndistinguishablePair::new(grid, &[0.5, 0.5], 1.0, 20).unwrap();
    let pess = true_pessimistic_regret(&pair.grid, &pair.dists, &pair.x, 0.0).unwrap();
    let real = true_calibrated_regret(&pair.grid, &pair.dists, &pair.x, 0.0).unwrap();
    let upper = true_calibrated_regret(&pair.grid, &pair.dists, &pair.z, 0.0).unwrap();
    assert!(pess > real);
    assert!((pess - upper).abs() < 1e-12);
    assert!((upper - real - pair.regret_gap()).abs() < 1e-12);
}
