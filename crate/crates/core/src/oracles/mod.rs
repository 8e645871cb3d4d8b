//! Quantities that need the full ground truth `x^t(p)` at every grid price.
//!
//! Nothing here is reachable from the audit; the simulator and the test suites
//! use these as references.

mod exact;
mod fixtures;

use rand::Rng;
use thiserror::Error;

pub use exact::{
    brute_force_estimator_expectation, brute_force_pairwise_expectation, exact_calibrated_regret,
    exact_pessimistic_allocation, exact_pessimistic_regret, ExactInstance, MAX_BRUTE_FORCE_PRICES,
    MAX_BRUTE_FORCE_ROUNDS,
};
pub use fixtures::{sample_transcript, IndistinguishablePair};

use crate::market::DemandOracle;
use crate::transcript::{PriceDistribution, PriceGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("ground truth round {round}: {message}")]
    Truth { round: usize, message: String },
    #[error("{what} has {got} rounds, expected {expected}")]
    Misaligned { what: &'static str, got: usize, expected: usize },
    #[error("instance too large to enumerate: k = {k}, T = {rounds}")]
    TooLarge { k: usize, rounds: usize },
    #[error("invalid instance: {0}")]
    Instance(String),
}

/// Full allocation vectors `x^t(·)` over the grid, one per round.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    rows: Vec<Vec<f64>>,
}

impl GroundTruth {
    /// Checks values lie in `[0, 1]` and are non-increasing in price.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, OracleError> {
        for (t, row) in rows.iter().enumerate() {
            if let Some(x) = row.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(OracleError::Truth { round: t + 1, message: format!("allocation {x} outside [0, 1]") });
            }
            if row.windows(2).any(|w| w[1] > w[0]) {
                return Err(OracleError::Truth { round: t + 1, message: "allocation increases with price".into() });
            }
        }
        Ok(GroundTruth { rows })
    }

    /// Rows without the monotonicity check, e.g. for arbitrary completions.
    pub fn unchecked(rows: Vec<Vec<f64>>) -> Self {
        GroundTruth { rows }
    }

    /// `x^t(p)` for `seller` facing the opponent's realized price indices.
    pub fn from_oracle(oracle: &dyn DemandOracle, seller: usize, opponent_posted: &[usize]) -> Self {
        let k = oracle.grid().len();
        let rows = opponent_posted
            .iter()
            .map(|&other| (0..k).map(|p| oracle.allocation_for(seller, p, other)).collect())
            .collect();
        GroundTruth { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Counterfactual utility `(p − c) x^t(p)` for every round and price.
    pub fn utilities(&self, grid: &PriceGrid, cost: f64) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| row.iter().zip(grid.levels()).map(|(x, p)| (p - cost) * x).collect())
            .collect()
    }
}

/// A total map on grid indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SwapMap(pub Vec<usize>);

impl SwapMap {
    pub fn identity(k: usize) -> Self {
        SwapMap((0..k).collect())
    }

    /// All `k^k` maps in lexicographic order.
    pub fn all(k: usize) -> impl Iterator<Item = SwapMap> {
        let total = k.checked_pow(k as u32).expect("k^k fits in usize");
        (0..total).map(move |mut n| {
            let mut m = vec![0; k];
            for slot in m.iter_mut().rev() {
                *slot = n % k;
                n /= k;
            }
            SwapMap(m)
        })
    }
}

fn check_aligned(dists: &[PriceDistribution], truth: &GroundTruth) -> Result<(), OracleError> {
    if dists.len() != truth.len() {
        return Err(OracleError::Misaligned { what: "ground truth", got: truth.len(), expected: dists.len() });
    }
    Ok(())
}

/// `(1/T) Σ_t E_{p∼π^t}[u^t(σ(p)) − u^t(p)]` for one swap map.
pub fn swap_map_regret(grid: &PriceGrid, dists: &[PriceDistribution], truth: &GroundTruth, sigma: &SwapMap, cost: f64) -> f64 {
    let u = |row: &[f64], p: usize| (grid.level(p) - cost) * row[p];
    let total: f64 = dists
        .iter()
        .zip(truth.rows())
        .map(|(d, row)| d.iter().map(|(p, w)| w * (u(row, sigma.0[p]) - u(row, p))).sum::<f64>())
        .sum();
    total / dists.len() as f64
}

/// Calibrated regret via the per-price decomposition `Σ_p max_q R_{p,q}(c)`.
pub fn true_calibrated_regret(
    grid: &PriceGrid,
    dists: &[PriceDistribution],
    truth: &GroundTruth,
    cost: f64,
) -> Result<f64, OracleError> {
    check_aligned(dists, truth)?;
    let k = grid.len();
    // gain[p][q] = Σ_t π^t(p) [u^t(q) − u^t(p)]
    let mut gain = vec![vec![0.0; k]; k];
    for (d, row) in dists.iter().zip(truth.rows()) {
        for (p, w) in d.iter() {
            let own = (grid.level(p) - cost) * row[p];
            for (q, g) in gain[p].iter_mut().enumerate() {
                *g += w * ((grid.level(q) - cost) * row[q] - own);
            }
        }
    }
    let t = dists.len().max(1) as f64;
    Ok(gain.iter().map(|g| g.iter().copied().fold(0.0, f64::max)).sum::<f64>() / t)
}

/// `z*`: `x` on the support, the largest supported lower price's value off it, else 1.
pub fn pessimistic_allocation(truth: &GroundTruth, dists: &[PriceDistribution]) -> Result<GroundTruth, OracleError> {
    check_aligned(dists, truth)?;
    let rows = truth
        .rows()
        .iter()
        .zip(dists)
        .map(|(row, d)| {
            let mut carry = 1.0;
            row.iter()
                .enumerate()
                .map(|(p, &x)| {
                    if d.contains(p) {
                        carry = x;
                    }
                    carry
                })
                .collect()
        })
        .collect();
    Ok(GroundTruth { rows })
}

pub fn true_pessimistic_regret(
    grid: &PriceGrid,
    dists: &[PriceDistribution],
    truth: &GroundTruth,
    cost: f64,
) -> Result<f64, OracleError> {
    true_calibrated_regret(grid, dists, &pessimistic_allocation(truth, dists)?, cost)
}

/// `max_p (1/T) Σ_t u^t(p) − (1/T) Σ_t realized^t`.
pub fn best_in_hindsight_regret(counterfactual: &[Vec<f64>], realized: &[f64]) -> Result<f64, OracleError> {
    if counterfactual.len() != realized.len() {
        return Err(OracleError::Misaligned { what: "realized utilities", got: realized.len(), expected: counterfactual.len() });
    }
    let k = counterfactual.first().map_or(0, Vec::len);
    let mut per_price = vec![0.0; k];
    for row in counterfactual {
        for (acc, u) in per_price.iter_mut().zip(row) {
            *acc += u;
        }
    }
    let best = per_price.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let t = realized.len().max(1) as f64;
    Ok((best - realized.iter().sum::<f64>()) / t)
}

/// Answer of a threshold audit: regret at most `r` (S) or at least `r + ε` (G).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditAnswer {
    Smaller,
    Greater,
}

/// Regret estimate from threshold audits at `r = ε, 2ε, …, p̄`.
///
/// `S` at `r` restricts the regret to `[0, r]`, `G` to `[r + ε, p̄]`. If the
/// intersection has length at most `ε` its midpoint is returned; otherwise
/// (including an empty intersection) a uniform guess in `[0, p̄]`.
pub fn reduction_estimate<F, R>(mut auditor: F, eps: f64, max_price: f64, rng: &mut R) -> f64
where
    F: FnMut(f64) -> AuditAnswer,
    R: Rng + ?Sized,
{
    assert!(eps > 0.0 && max_price > 0.0, "eps and max_price must be positive");
    let audits = (max_price / eps - 1e-9).ceil() as usize;
    // Bounds in units of ε, so that touching intervals stay touching.
    let (mut lo, mut hi) = (0usize, audits);
    for i in 1..=audits {
        match auditor((i as f64 * eps).min(max_price)) {
            AuditAnswer::Smaller => hi = hi.min(i),
            AuditAnswer::Greater => lo = lo.max(i + 1),
        }
    }
    if lo <= hi && hi - lo <= 1 {
        0.5 * ((lo as f64 * eps).min(max_price) + (hi as f64 * eps).min(max_price))
    } else {
        rng.gen_range(0.0..=max_price)
    }
}
