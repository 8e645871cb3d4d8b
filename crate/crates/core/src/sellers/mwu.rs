use super::SellerError;
use crate::transcript::{PriceDistribution, MIN_SUPPORT_PROB};

/// Multiplicative weights over grid prices with full feedback.
///
/// Weights are `(1 + η)^{σ_p}` where `σ_p` is the cumulative (normalized)
/// reward of price `p`. Probabilities that fall below the transcript format's
/// floor are set to zero and the rest renormalized, so the recorded
/// distribution is exactly the one sampled from.
#[derive(Debug, Clone, PartialEq)]
pub struct MwuLearner {
    cumulative: Vec<f64>,
    eta: f64,
}

impl MwuLearner {
    pub fn new(k: usize, eta: f64) -> Result<Self, SellerError> {
        Self::with_cumulative(vec![0.0; k], eta)
    }

    pub fn with_cumulative(cumulative: Vec<f64>, eta: f64) -> Result<Self, SellerError> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(SellerError::Config(format!("step size eta = {eta} must be positive")));
        }
        if cumulative.is_empty() {
            return Err(SellerError::Config("empty price grid".into()));
        }
        Ok(MwuLearner { cumulative, eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `σ_{p,t}` for every price.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Dense probabilities before the support floor is applied.
    pub fn raw_probs(&self) -> Vec<f64> {
        let lead = self.cumulative.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rate = self.eta.ln_1p();
        let w: Vec<f64> = self.cumulative.iter().map(|&s| ((s - lead) * rate).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    pub fn distribution(&self) -> PriceDistribution {
        let mut p = self.raw_probs();
        for v in p.iter_mut() {
            if *v < MIN_SUPPORT_PROB {
                *v = 0.0;
            }
        }
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= total);
        PriceDistribution::from_dense(&p).expect("normalized weights form a distribution")
    }

    /// Adds one round of rewards (each in `[0, 1]`) and returns the next distribution.
    pub fn step(&mut self, rewards: &[f64]) -> Result<PriceDistribution, SellerError> {
        if rewards.len() != self.cumulative.len() {
            return Err(SellerError::Config(format!(
                "expected {} rewards, got {}",
                self.cumulative.len(),
                rewards.len()
            )));
        }
        if let Some((i, &r)) = rewards.iter().enumerate().find(|(_, r)| !(0.0..=1.0).contains(*r)) {
            return Err(SellerError::RewardOutOfRange { index: i, reward: r });
        }
        for (s, r) in self.cumulative.iter_mut().zip(rewards) {
            *s += r;
        }
        Ok(self.distribution())
    }

    /// Whether posting `posted` now breaks the γ-mean-based property: some price
    /// leads it by more than `γ·horizon` in cumulative reward, yet it is posted
    /// with probability above `γ`.
    pub fn is_mean_based_violation(&self, posted: usize, gamma: f64, horizon: usize) -> bool {
        let lead = self.cumulative.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let trails = lead > self.cumulative[posted] + gamma * horizon as f64;
        trails && self.distribution().prob(posted) > gamma
    }

    /// Smallest `γ` for which this learner is γ-mean-based over `horizon` rounds:
    /// any price trailing by more than `γ·horizon` has weight ratio below
    /// `(1 + η)^{−γ·horizon} ≤ γ`.
    pub fn implied_mean_based_gamma(&self, horizon: usize) -> f64 {
        implied_gamma(self.eta, horizon)
    }
}

pub fn implied_gamma(eta: f64, horizon: usize) -> f64 {
    let rate = eta.ln_1p() * horizon as f64;
    // γ·rate + ln γ is increasing in γ; find its root in (0, 1].
    let slack = |g: f64| g * rate + g.ln();
    if slack(1.0) <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slack(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_cumulative_gives_uniform_distribution() {
        let m = MwuLearner::new(4, 0.1).unwrap();
        assert_eq!(m.distribution().probs(), &[0.25; 4]);
    }

    #[test]
    fn probability_ratio_is_weight_ratio() {
        let m = MwuLearner::with_cumulative(vec![3.0, 0.5], 0.2).unwrap();
        let d = m.distribution();
        assert!((d.prob(0) / d.prob(1) - 1.2f64.powf(2.5)).abs() < 1e-12);
    }

    #[test]
    fn rewards_outside_unit_interval_fail() {
        let mut m = MwuLearner::new(2, 0.1).unwrap();
        assert!(matches!(m.step(&[0.5, 1.5]), Err(SellerError::RewardOutOfRange { index: 1, .. })));
        assert!(m.step(&[0.5]).is_err());
        assert!(MwuLearner::new(2, 0.0).is_err());
    }

    #[test]
    fn vanishing_weights_leave_the_support() {
        let m = MwuLearner::with_cumulative(vec![0.0, 1000.0], 0.5).unwrap();
        assert_eq!(m.distribution(), PriceDistribution::point_mass(1));
    }

    #[test]
    fn mean_based_violation_definition() {
        // Laggard trails by 2γT and still has probability 0.5 > γ.
        let (gamma, horizon) = (0.01, 100);
        let m = MwuLearner::with_cumulative(vec![0.0, 2.0], 1e-6).unwrap();
        assert!(m.distribution().prob(0) > gamma);
        assert!(m.is_mean_based_violation(0, gamma, horizon));
        assert!(!m.is_mean_based_violation(1, gamma, horizon));
        let tied = MwuLearner::with_cumulative(vec![1.0, 1.0], 1e-6).unwrap();
        assert!(!tied.is_mean_based_violation(0, gamma, horizon));
    }

    #[test]
    fn implied_gamma_solves_its_equation() {
        let g = implied_gamma(0.2, 21_000);
        assert!((1.2f64.powf(-g * 21_000.0) - g).abs() < 1e-12);
        assert!((implied_gamma(1e-9, 1) - (1.0 - 1e-9)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn drift_is_bounded_by_eta(
            eta in 1e-4f64..0.5,
            start in proptest::collection::vec(0.0f64..50.0, 2..8),
            seed_rewards in proptest::collection::vec(0.0f64..=1.0, 8),
        ) {
            let k = start.len();
            let mut m = MwuLearner::with_cumulative(start, eta).unwrap();
            let before = m.distribution().to_dense(k);
            let after = m.step(&seed_rewards[..k]).unwrap().to_dense(k);
            let drift = before.iter().zip(&after).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(drift <= eta + 1e-12, "drift {drift} > eta {eta}");
        }
    }
}
