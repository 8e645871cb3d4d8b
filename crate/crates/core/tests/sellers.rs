use rayon::prelude::*;

use pricing_audit::market::{DiscreteValuationTable, TableDemand, UniformDemand, UniformDuopoly};
use pricing_audit::rational::ratio;
use pricing_audit::sellers::{simulate, FeedbackMode, QConfig, SimulationConfig, SimulationOutput, StrategySpec};
use pricing_audit::transcript::PriceGrid;

fn max_step(out: &SimulationOutput, seller: usize) -> f64 {
    let tr = &out.transcripts[seller];
    let dense: Vec<Vec<f64>> = tr.records.iter().map(|r| r.distribution.to_dense(tr.k())).collect();
    dense
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

#[test]
fn q_learning_explores_every_price_every_round() {
    let env = UniformDuopoly::new(0.1, 0.2).unwrap();
    let oracle = UniformDemand::new(&env, PriceGrid::twentieths()).unwrap();
    let config = QConfig::default();
    let q = StrategySpec::Q(config.clone());
    let out = simulate([&q, &q], &oracle, env.costs(), SimulationConfig { rounds: 5000, feedback: FeedbackMode::Realized, seed: 8 })
        .unwrap();
    let floor = config.explore_eps / 19.0;
    for tr in &out.transcripts {
        for rec in &tr.records {
            assert_eq!(rec.distribution.support().len(), 19);
            assert!(rec.distribution.min_prob() >= floor * (1.0 - 1e-12));
        }
    }
}

#[test]
fn hedge_drift_is_bounded_by_its_step_size() {
    let table = DiscreteValuationTable::table3(ratio(1, 100)).unwrap();
    let discrete = TableDemand::new(&table);
    let env = UniformDuopoly::new(0.1, 0.2).unwrap();
    let uniform = UniformDemand::new(&env, PriceGrid::twentieths()).unwrap();
    for eta in [1e-3, 0.05, 0.5] {
        let mwu = StrategySpec::Mwu { eta };
        for feedback in [FeedbackMode::Expected, FeedbackMode::Realized] {
            let cfg = SimulationConfig { rounds: 3000, feedback, seed: 2 };
            let a = simulate([&mwu, &mwu], &discrete, [0.0, 0.0], cfg).unwrap();
            let b = simulate([&mwu, &mwu], &uniform, env.costs(), cfg).unwrap();
            for s in 0..2 {
                assert!(max_step(&a, s) <= eta, "η = {eta}: {}", max_step(&a, s));
                assert!(max_step(&b, s) <= eta, "η = {eta}: {}", max_step(&b, s));
            }
        }
    }
}

#[test]
fn runs_do_not_depend_on_thread_count() {
    let env = UniformDuopoly::new(0.1, 0.2).unwrap();
    let oracle = UniformDemand::new(&env, PriceGrid::twentieths()).unwrap();
    let q = StrategySpec::Q(QConfig::default());
    let mwu = StrategySpec::Mwu { eta: 0.05 };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            (0..8u64)
                .into_par_iter()
                .map(|seed| {
                    let cfg = SimulationConfig { rounds: 2000, feedback: FeedbackMode::Realized, seed };
                    simulate([&q, &mwu], &oracle, env.costs(), cfg).unwrap()
                })
                .collect::<Vec<_>>()
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn manipulator_schedule() {
    let table = DiscreteValuationTable::table3(ratio(1, 100)).unwrap();
    let oracle = TableDemand::new(&table);
    let m = StrategySpec::Manipulator { phase1_rounds: 100, phase1_price: 1.0, phase2_price: 3.0, phase2_rounds: None };
    let fixed = StrategySpec::Fixed { price: 2.0 };
    let rounds = m.total_rounds().unwrap();
    assert_eq!(rounds, 210);
    let out = simulate([&m, &fixed], &oracle, [0.0, 0.0], SimulationConfig { rounds, feedback: FeedbackMode::Expected, seed: 0 })
        .unwrap();
    let posted = out.posted(0);
    assert_eq!(posted[99], 1);
    assert_eq!(posted[100], 3);
    assert_eq!(posted[209], 3);
    assert!(out.transcripts[1].records.iter().all(|r| r.distribution.support() == [2]));
}
