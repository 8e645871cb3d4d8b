use serde::{Deserialize, Serialize};

use super::SellerError;
use crate::transcript::PriceDistribution;

/// Hyperparameters of stateless ε-greedy Q-learning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QConfig {
    #[serde(default = "QConfig::default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "QConfig::default_discount")]
    pub discount: f64,
    #[serde(default = "QConfig::default_explore_eps")]
    pub explore_eps: f64,
    /// Initial Q value for every price; `None` means `(p̄ − c) / (1 − discount)`.
    #[serde(default)]
    pub initial_q: Option<f64>,
}

impl QConfig {
    fn default_learning_rate() -> f64 {
        0.05
    }
    fn default_discount() -> f64 {
        0.99
    }
    fn default_explore_eps() -> f64 {
        0.01
    }

    pub fn validate(&self) -> Result<(), SellerError> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(SellerError::Config(format!("learning_rate {} must lie in (0, 1]", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(SellerError::Config(format!("discount {} must lie in [0, 1)", self.discount)));
        }
        if !(0.0..=1.0).contains(&self.explore_eps) {
            return Err(SellerError::Config(format!("explore_eps {} must lie in [0, 1]", self.explore_eps)));
        }
        Ok(())
    }
}

impl Default for QConfig {
    fn default() -> Self {
        QConfig {
            learning_rate: Self::default_learning_rate(),
            discount: Self::default_discount(),
            explore_eps: Self::default_explore_eps(),
            initial_q: None,
        }
    }
}

/// One continuation-payoff estimate per grid price; no state beyond the table.
#[derive(Debug, Clone, PartialEq)]
pub struct QLearner {
    q: Vec<f64>,
    config: QConfig,
}

impl QLearner {
    /// Optimistic start: unless overridden, every entry is the largest
    /// discounted payoff the seller could ever collect, `(p̄ − c) / (1 − γ)`.
    pub fn new(config: QConfig, k: usize, max_price: f64, cost: f64) -> Result<Self, SellerError> {
        config.validate()?;
        if k == 0 {
            return Err(SellerError::Config("empty price grid".into()));
        }
        let init = config.initial_q.unwrap_or((max_price - cost) / (1.0 - config.discount));
        Ok(QLearner { q: vec![init; k], config })
    }

    pub fn from_values(config: QConfig, q: Vec<f64>) -> Result<Self, SellerError> {
        config.validate()?;
        if q.is_empty() {
            return Err(SellerError::Config("empty price grid".into()));
        }
        Ok(QLearner { q, config })
    }

    pub fn q_values(&self) -> &[f64] {
        &self.q
    }

    pub fn config(&self) -> &QConfig {
        &self.config
    }

    /// Greedy price, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.q.iter().enumerate() {
            if v > self.q[best] {
                best = i;
            }
        }
        best
    }

    /// ε-greedy distribution: `1 − ε + ε/k` on the greedy price, `ε/k` elsewhere.
    pub fn distribution(&self) -> PriceDistribution {
        let k = self.q.len();
        let eps = self.config.explore_eps;
        let greedy = self.argmax();
        let explore = eps / k as f64;
        let dense: Vec<f64> = (0..k).map(|i| if i == greedy { 1.0 - eps + explore } else { explore }).collect();
        PriceDistribution::from_dense(&dense).expect("ε-greedy weights form a distribution")
    }

    /// Bandit update of the posted price only:
    /// `Q(p) ← (1 − α) Q(p) + α (u + γ max_q Q(q))`, right-hand side from the previous step.
    pub fn step(&mut self, posted: usize, utility: f64) -> PriceDistribution {
        debug_assert!(utility.is_finite());
        let best = self.q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let a = self.config.learning_rate;
        self.q[posted] = (1.0 - a) * self.q[posted] + a * (utility + self.config.discount * best);
        self.distribution()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(a: f64, g: f64, e: f64) -> QConfig {
        QConfig { learning_rate: a, discount: g, explore_eps: e, initial_q: None }
    }

    #[test]
    fn full_overwrite() {
        let mut q = QLearner::from_values(cfg(1.0, 0.0, 0.0), vec![5.0, 5.0]).unwrap();
        q.step(0, 2.0);
        assert_eq!(q.q_values(), &[2.0, 5.0]);
    }

    #[test]
    fn uses_previous_values_on_the_right() {
        // Independent recomputation: 0.5·1 + 0.5·(1 + 0.5·max(1, 3)).
        let expected = 0.5 * 1.0 + 0.5 * (1.0 + 0.5 * 3.0);
        let mut q = QLearner::from_values(cfg(0.5, 0.5, 0.1), vec![1.0, 3.0]).unwrap();
        q.step(0, 1.0);
        assert_eq!(q.q_values()[0], 1.75);
        assert_eq!(q.q_values()[0], expected);
        assert_eq!(q.q_values()[1], 3.0);
    }

    #[test]
    fn epsilon_greedy_masses() {
        let mut values = vec![0.0; 19];
        values[7] = 1.0;
        let q = QLearner::from_values(cfg(0.05, 0.99, 0.01), values).unwrap();
        let d = q.distribution();
        assert_eq!(d.support().len(), 19);
        assert!((d.prob(7) - (0.99 + 0.01 / 19.0)).abs() < 1e-15);
        assert!((d.prob(0) - 0.01 / 19.0).abs() < 1e-18);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let q = QLearner::from_values(cfg(0.05, 0.99, 0.0), vec![1.0, 3.0, 3.0]).unwrap();
        assert_eq!(q.argmax(), 1);
        assert_eq!(q.distribution(), PriceDistribution::point_mass(1));
    }

    #[test]
    fn optimistic_initialization() {
        let q = QLearner::new(QConfig::default(), 19, 0.95, 0.1).unwrap();
        assert!(q.q_values().iter().all(|&v| (v - 85.0).abs() < 1e-9));
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(QLearner::new(cfg(0.0, 0.5, 0.1), 3, 1.0, 0.0).is_err());
        assert!(QLearner::new(cfg(0.5, 1.0, 0.1), 3, 1.0, 0.0).is_err());
        assert!(QLearner::new(cfg(0.5, 0.5, 1.5), 3, 1.0, 0.0).is_err());
    }
}
