//! Pricing strategies and the two-seller market simulator.
//!
//! Every round each seller announces a price distribution, a price is drawn from
//! it, the demand oracle allocates the buyer, and learners update on their
//! feedback. The simulator records one [`Transcript`] per seller plus the
//! per-round payoffs.
//!
//! Randomness for round `t` of seller `i` comes from a ChaCha stream keyed by
//! `(seed, i)` and positioned at `t`, so a run is a pure function of its seed
//! regardless of how replications are scheduled.

mod manipulator;
mod mwu;
mod q_learning;

pub use manipulator::ManipulatorSchedule;
pub use mwu::{implied_gamma, MwuLearner};
pub use q_learning::{QConfig, QLearner};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{expected_payoff_matrix, DemandOracle};
use crate::transcript::{PriceDistribution, PriceGrid, Transcript, TranscriptRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SellerError {
    #[error("invalid strategy: {0}")]
    Config(String),
    #[error("normalized reward {reward} for price index {index} is outside [0, 1]")]
    RewardOutOfRange { index: usize, reward: f64 },
    #[error("round {round} is outside the schedule's horizon 1..={horizon}")]
    RoundOutOfHorizon { round: usize, horizon: usize },
}

/// How a seller learns the outcome of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    /// Utility is the expected payoff `(p − c)·x`; the transcript records `x`.
    #[default]
    Expected,
    /// A sale is drawn with probability `x`; utility is `(p − c)` on a sale.
    Realized,
}

/// JSON description of a strategy, e.g. `{"kind": "q", "explore_eps": 0.01}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StrategySpec {
    Q(QConfig),
    Mwu {
        eta: f64,
    },
    Fixed {
        price: f64,
    },
    Manipulator {
        phase1_rounds: usize,
        phase1_price: f64,
        phase2_price: f64,
        #[serde(default)]
        phase2_rounds: Option<usize>,
    },
}

impl StrategySpec {
    /// `manipulator` schedule sized for `phase1_rounds`; `None` for other kinds.
    pub fn total_rounds(&self) -> Option<usize> {
        match self {
            StrategySpec::Manipulator { phase1_rounds, phase2_rounds, .. } => {
                Some(phase1_rounds + phase2_rounds.unwrap_or((11 * phase1_rounds).div_ceil(10)))
            }
            _ => None,
        }
    }
}

/// Affine map of payoffs onto `[0, 1]` for multiplicative weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardScale {
    pub lo: f64,
    pub hi: f64,
}

impl RewardScale {
    pub fn normalize(&self, payoff: f64) -> f64 {
        ((payoff - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Seller {
    Fixed(usize),
    Q(QLearner),
    Mwu { learner: MwuLearner, scale: RewardScale },
    Manipulator(ManipulatorSchedule),
}

fn resolve_price(grid: &PriceGrid, price: f64) -> Result<usize, SellerError> {
    grid.index_of(price, 1e-9)
        .ok_or_else(|| SellerError::Config(format!("price {price} is not a grid level")))
}

impl Seller {
    /// Builds seller `index` (0 or 1) from its spec for the given market.
    ///
    /// Multiplicative-weights payoffs are divided by the seller's largest payoff
    /// (after shifting by the smallest, if negative); with realized feedback the
    /// largest possible single-sale margin is used instead.
    pub fn from_spec(
        spec: &StrategySpec,
        index: usize,
        oracle: &dyn DemandOracle,
        costs: [f64; 2],
        feedback: FeedbackMode,
    ) -> Result<Seller, SellerError> {
        let grid = oracle.grid();
        let cost = costs[index];
        Ok(match spec {
            StrategySpec::Fixed { price } => Seller::Fixed(resolve_price(grid, *price)?),
            StrategySpec::Q(cfg) => Seller::Q(QLearner::new(*cfg, grid.len(), grid.max_price(), cost)?),
            StrategySpec::Mwu { eta } => {
                let (lo, hi) = match feedback {
                    FeedbackMode::Expected => {
                        let m = expected_payoff_matrix(oracle, costs);
                        m.payoffs_of(index).fold((0.0f64, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
                    }
                    FeedbackMode::Realized => {
                        let margins = grid.levels().iter().map(|p| p - cost);
                        margins.fold((0.0f64, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
                    }
                };
                if !(hi > lo) {
                    return Err(SellerError::Config("payoffs are constant; rewards cannot be normalized".into()));
                }
                Seller::Mwu { learner: MwuLearner::new(grid.len(), *eta)?, scale: RewardScale { lo, hi } }
            }
            StrategySpec::Manipulator { phase1_rounds, phase1_price, phase2_price, phase2_rounds } => {
                let mut s = ManipulatorSchedule::for_horizon(
                    *phase1_rounds,
                    resolve_price(grid, *phase1_price)?,
                    resolve_price(grid, *phase2_price)?,
                )?;
                if let Some(r) = phase2_rounds {
                    s.phase2_rounds = *r;
                }
                Seller::Manipulator(s)
            }
        })
    }

    /// Distribution for 1-based `round`.
    pub fn distribution(&self, round: usize) -> Result<PriceDistribution, SellerError> {
        Ok(match self {
            Seller::Fixed(i) => PriceDistribution::point_mass(*i),
            Seller::Q(q) => q.distribution(),
            Seller::Mwu { learner, .. } => learner.distribution(),
            Seller::Manipulator(s) => PriceDistribution::point_mass(s.next(round)?),
        })
    }

    /// `utility` is the realized utility of the posted price; `counterfactual`
    /// the utility every grid price would have earned this round.
    fn observe(&mut self, posted: usize, utility: f64, counterfactual: &[f64]) -> Result<(), SellerError> {
        match self {
            Seller::Q(q) => {
                q.step(posted, utility);
            }
            Seller::Mwu { learner, scale } => {
                let rewards: Vec<f64> = counterfactual.iter().map(|&u| scale.normalize(u)).collect();
                learner.step(&rewards)?;
            }
            Seller::Fixed(_) | Seller::Manipulator(_) => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub rounds: usize,
    pub feedback: FeedbackMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub transcripts: [Transcript; 2],
    /// Realized per-round utility of each seller.
    pub payoffs: [Vec<f64>; 2],
}

impl SimulationOutput {
    pub fn posted(&self, seller: usize) -> Vec<usize> {
        self.transcripts[seller].posted()
    }
}

/// What an observer sees at the start of a round, after prices are drawn and
/// before anyone learns from the outcome.
pub struct RoundView<'a> {
    pub round: usize,
    pub sellers: &'a [Seller; 2],
    pub distributions: &'a [PriceDistribution; 2],
    pub posted: [usize; 2],
}

/// Uniform draws for round `round` of seller `seller`: price draw, sale draw.
pub fn round_uniforms(seed: u64, round: usize, seller: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(seller as u64);
    rng.set_word_pos(round as u128 * 8);
    (rng.gen(), rng.gen())
}

pub fn simulate(
    specs: [&StrategySpec; 2],
    oracle: &dyn DemandOracle,
    costs: [f64; 2],
    config: SimulationConfig,
) -> Result<SimulationOutput, SellerError> {
    let sellers = [
        Seller::from_spec(specs[0], 0, oracle, costs, config.feedback)?,
        Seller::from_spec(specs[1], 1, oracle, costs, config.feedback)?,
    ];
    simulate_sellers(sellers, oracle, costs, config, |_| {})
}

/// Runs prebuilt sellers, calling `observer` once per round.
pub fn simulate_sellers(
    mut sellers: [Seller; 2],
    oracle: &dyn DemandOracle,
    costs: [f64; 2],
    config: SimulationConfig,
    mut observer: impl FnMut(RoundView<'_>),
) -> Result<SimulationOutput, SellerError> {
    let grid = oracle.grid().clone();
    let k = grid.len();
    let mut records: [Vec<TranscriptRecord>; 2] = [Vec::with_capacity(config.rounds), Vec::with_capacity(config.rounds)];
    let mut payoffs: [Vec<f64>; 2] = [Vec::with_capacity(config.rounds), Vec::with_capacity(config.rounds)];
    let mut counterfactual = vec![0.0; k];

    for round in 1..=config.rounds {
        let dists = [sellers[0].distribution(round)?, sellers[1].distribution(round)?];
        let draws = [round_uniforms(config.seed, round, 0), round_uniforms(config.seed, round, 1)];
        let posted = [dists[0].sample(draws[0].0), dists[1].sample(draws[1].0)];
        observer(RoundView { round, sellers: &sellers, distributions: &dists, posted });

        for i in 0..2 {
            let (own, other) = (posted[i], posted[1 - i]);
            let sale_u = draws[i].1;
            let outcome = |price: usize| {
                let x = oracle.allocation_for(i, price, other);
                match config.feedback {
                    FeedbackMode::Expected => x,
                    FeedbackMode::Realized => f64::from(u8::from(sale_u < x)),
                }
            };
            let allocation = outcome(own);
            let utility = (grid.level(own) - costs[i]) * allocation;
            if matches!(sellers[i], Seller::Mwu { .. }) {
                for (q, slot) in counterfactual.iter_mut().enumerate() {
                    *slot = (grid.level(q) - costs[i]) * outcome(q);
                }
            }
            sellers[i].observe(own, utility, &counterfactual)?;
            records[i].push(TranscriptRecord {
                round: round as u64,
                posted: own,
                allocation,
                distribution: dists[i].clone(),
            });
            payoffs[i].push(utility);
        }
    }

    let [r0, r1] = records;
    Ok(SimulationOutput {
        transcripts: [Transcript::new(grid.clone(), r0), Transcript::new(grid, r1)],
        payoffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{DiscreteValuationTable, TableDemand, UniformDemand, UniformDuopoly};
    use crate::rational::ratio;
    use crate::transcript::validate;

    fn uniform_market() -> (UniformDemand, [f64; 2]) {
        let env = UniformDuopoly::new(0.1, 0.2).unwrap();
        (UniformDemand::new(&env, PriceGrid::twentieths()).unwrap(), env.costs())
    }

    #[test]
    fn fixed_prices_give_point_masses() {
        let (oracle, costs) = uniform_market();
        let a = StrategySpec::Fixed { price: 0.5 };
        let b = StrategySpec::Fixed { price: 0.55 };
        let cfg = SimulationConfig { rounds: 3, feedback: FeedbackMode::Expected, seed: 1 };
        let out = simulate([&a, &b], &oracle, costs, cfg).unwrap();
        for t in &out.transcripts {
            assert_eq!(t.len(), 3);
            assert!(validate(t).is_empty());
            assert!(t.records.iter().all(|r| r.distribution.support().len() == 1));
        }
        assert!((out.payoffs[0][0] - 0.1595).abs() < 1e-12);
        assert_eq!(out.transcripts[1].records[2].posted, 10);
    }

    #[test]
    fn same_seed_same_run_different_seed_different_run() {
        let (oracle, costs) = uniform_market();
        let q = StrategySpec::Q(QConfig::default());
        let run = |seed| {
            simulate([&q, &q], &oracle, costs, SimulationConfig { rounds: 2000, feedback: FeedbackMode::Expected, seed })
                .unwrap()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7).transcripts[0], run(8).transcripts[0]);
    }

    #[test]
    fn q_learning_distributions_are_fully_supported() {
        let (oracle, costs) = uniform_market();
        let q = StrategySpec::Q(QConfig::default());
        let cfg = SimulationConfig { rounds: 500, feedback: FeedbackMode::Realized, seed: 3 };
        let out = simulate([&q, &q], &oracle, costs, cfg).unwrap();
        for t in &out.transcripts {
            assert!(validate(t).is_empty());
            for r in &t.records {
                assert_eq!(r.distribution.support().len(), 19);
                assert!(r.distribution.min_prob() >= 0.01 / 19.0 - 1e-18);
                assert!(r.allocation == 0.0 || r.allocation == 1.0);
            }
        }
    }

    #[test]
    fn strategy_json() {
        let q: StrategySpec = serde_json::from_str(r#"{"kind": "q"}"#).unwrap();
        assert_eq!(q, StrategySpec::Q(QConfig::default()));
        let m: StrategySpec =
            serde_json::from_str(r#"{"kind": "manipulator", "phase1_rounds": 10, "phase1_price": 1, "phase2_price": 3}"#)
                .unwrap();
        assert_eq!(m.total_rounds(), Some(21));
        assert!(serde_json::from_str::<StrategySpec>(r#"{"kind": "sarsa"}"#).is_err());
    }

    #[test]
    fn off_grid_fixed_price_is_rejected() {
        let (oracle, costs) = uniform_market();
        let err = Seller::from_spec(&StrategySpec::Fixed { price: 0.52 }, 0, &oracle, costs, FeedbackMode::Expected);
        assert!(err.is_err());
    }

    #[test]
    fn hedge_against_manipulator_has_no_mean_based_violations() {
        let table = DiscreteValuationTable::table3(ratio(1, 100)).unwrap();
        let oracle = TableDemand::new(&table);
        let t = 2_000;
        let manip = StrategySpec::Manipulator { phase1_rounds: t, phase1_price: 1.0, phase2_price: 3.0, phase2_rounds: None };
        let hedge = StrategySpec::Mwu { eta: 0.2 };
        let costs = [0.0, 0.0];
        let feedback = FeedbackMode::Expected;
        let sellers = [
            Seller::from_spec(&manip, 0, &oracle, costs, feedback).unwrap(),
            Seller::from_spec(&hedge, 1, &oracle, costs, feedback).unwrap(),
        ];
        let horizon = manip.total_rounds().unwrap();
        let gamma = implied_gamma(0.2, horizon);
        let mut violations = 0;
        let mut max_drift: f64 = 0.0;
        let mut previous: Option<Vec<f64>> = None;
        let cfg = SimulationConfig { rounds: horizon, feedback, seed: 11 };
        simulate_sellers(sellers, &oracle, costs, cfg, |view| {
            if let Seller::Mwu { learner, .. } = &view.sellers[1] {
                if learner.is_mean_based_violation(view.posted[1], gamma, horizon) {
                    violations += 1;
                }
            }
            let dense = view.distributions[1].to_dense(4);
            if let Some(prev) = &previous {
                let d = prev.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                max_drift = max_drift.max(d);
            }
            previous = Some(dense);
        })
        .unwrap();
        assert_eq!(violations, 0);
        assert!(max_drift <= 0.2);
    }

    #[test]
    fn round_streams_are_independent_of_order() {
        let a = round_uniforms(5, 100, 1);
        let _ = round_uniforms(5, 3, 0);
        assert_eq!(a, round_uniforms(5, 100, 1));
        assert_ne!(a, round_uniforms(5, 100, 0));
        assert_ne!(a, round_uniforms(5, 101, 1));
    }
}
