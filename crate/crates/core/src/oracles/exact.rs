//! Rational-arithmetic references for small instances.

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{GroundTruth, OracleError};
use crate::rational::from_f64;
use crate::transcript::{PriceDistribution, PriceGrid};

pub const MAX_BRUTE_FORCE_PRICES: usize = 3;
pub const MAX_BRUTE_FORCE_ROUNDS: usize = 4;

/// Grid, per-round distributions and ground truth, all exact.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactInstance {
    pub levels: Vec<BigRational>,
    /// Sparse `(index, probability)` per round, sorted by index.
    pub dists: Vec<Vec<(usize, BigRational)>>,
    pub truth: Vec<Vec<BigRational>>,
}

impl ExactInstance {
    pub fn new(
        levels: Vec<BigRational>,
        dists: Vec<Vec<(usize, BigRational)>>,
        truth: Vec<Vec<BigRational>>,
    ) -> Result<Self, OracleError> {
        let k = levels.len();
        if k == 0 {
            return Err(OracleError::Instance("empty grid".into()));
        }
        if truth.len() != dists.len() {
            return Err(OracleError::Misaligned { what: "ground truth", got: truth.len(), expected: dists.len() });
        }
        for (t, (d, row)) in dists.iter().zip(&truth).enumerate() {
            if row.len() != k {
                return Err(OracleError::Instance(format!("round {}: truth has {} prices, grid has {k}", t + 1, row.len())));
            }
            if d.is_empty() || d.windows(2).any(|w| w[0].0 >= w[1].0) || d.iter().any(|(p, _)| *p >= k) {
                return Err(OracleError::Instance(format!("round {}: support must be non-empty, sorted, on the grid", t + 1)));
            }
            if d.iter().any(|(_, w)| *w <= BigRational::zero()) {
                return Err(OracleError::Instance(format!("round {}: probabilities must be positive", t + 1)));
            }
            if d.iter().map(|(_, w)| w.clone()).sum::<BigRational>() != BigRational::one() {
                return Err(OracleError::Instance(format!("round {}: probabilities must sum to exactly 1", t + 1)));
            }
        }
        Ok(ExactInstance { levels, dists, truth })
    }

    /// Exact conversion of a floating-point instance.
    pub fn from_floats(grid: &PriceGrid, dists: &[PriceDistribution], truth: &GroundTruth) -> Result<Self, OracleError> {
        let levels = grid.levels().iter().map(|&p| from_f64(p)).collect();
        let dists = dists.iter().map(|d| d.iter().map(|(p, w)| (p, from_f64(w))).collect()).collect();
        let truth = truth.rows().iter().map(|row| row.iter().map(|&x| from_f64(x)).collect()).collect();
        Self::new(levels, dists, truth)
    }

    pub fn k(&self) -> usize {
        self.levels.len()
    }

    pub fn rounds(&self) -> usize {
        self.dists.len()
    }

    fn prob(&self, t: usize, p: usize) -> BigRational {
        self.dists[t].iter().find(|(i, _)| *i == p).map_or_else(BigRational::zero, |(_, w)| w.clone())
    }
}

/// `Σ_p max_q (1/T) Σ_t π^t(p) [(q − c) y^t(q) − (p − c) y^t(p)]` for allocations `y`.
fn decomposed_regret(inst: &ExactInstance, alloc: &[Vec<BigRational>], c: &BigRational) -> BigRational {
    let k = inst.k();
    let t = BigRational::from_integer(inst.rounds().into());
    let mut total = BigRational::zero();
    for p in 0..k {
        let best = (0..k)
            .map(|q| pair_term(inst, alloc, p, q, c))
            .fold(BigRational::zero(), |a, b| if b > a { b } else { a });
        total += best;
    }
    total / t
}

/// `Σ_t π^t(p) [(q − c) y^t(q) − (p − c) y^t(p)]` (not yet divided by `T`).
fn pair_term(inst: &ExactInstance, alloc: &[Vec<BigRational>], p: usize, q: usize, c: &BigRational) -> BigRational {
    let (pp, qq) = (&inst.levels[p], &inst.levels[q]);
    (0..inst.rounds())
        .map(|t| inst.prob(t, p) * ((qq - c) * &alloc[t][q] - (pp - c) * &alloc[t][p]))
        .sum()
}

pub fn exact_calibrated_regret(inst: &ExactInstance, c: &BigRational) -> BigRational {
    decomposed_regret(inst, &inst.truth, c)
}

pub fn exact_pessimistic_allocation(inst: &ExactInstance) -> Vec<Vec<BigRational>> {
    (0..inst.rounds())
        .map(|t| {
            let mut out = Vec::with_capacity(inst.k());
            let mut carry = BigRational::one();
            for p in 0..inst.k() {
                if inst.dists[t].iter().any(|(i, _)| *i == p) {
                    carry = inst.truth[t][p].clone();
                }
                out.push(carry.clone());
            }
            out
        })
        .collect()
}

pub fn exact_pessimistic_regret(inst: &ExactInstance, c: &BigRational) -> BigRational {
    decomposed_regret(inst, &exact_pessimistic_allocation(inst), c)
}

/// Estimates for one realized path: `x/π` at the posted price, zero elsewhere on
/// the support, pessimistic fill off it.
fn path_estimates(inst: &ExactInstance, path: &[usize]) -> Vec<Vec<BigRational>> {
    path.iter()
        .enumerate()
        .map(|(t, &posted)| {
            let support: Vec<usize> = inst.dists[t].iter().map(|(i, _)| *i).collect();
            (0..inst.k())
                .map(|p| match support.iter().rev().find(|&&s| s <= p) {
                    None => BigRational::one(),
                    Some(&s) if s == posted => &inst.truth[t][posted] / inst.prob(t, posted),
                    Some(_) => BigRational::zero(),
                })
                .collect()
        })
        .collect()
}

/// Calls `f(path, probability)` for every realization of posted prices.
fn for_each_path(inst: &ExactInstance, mut f: impl FnMut(&[usize], &BigRational)) -> Result<(), OracleError> {
    if inst.k() > MAX_BRUTE_FORCE_PRICES || inst.rounds() > MAX_BRUTE_FORCE_ROUNDS || inst.rounds() == 0 {
        return Err(OracleError::TooLarge { k: inst.k(), rounds: inst.rounds() });
    }
    let mut cursor = vec![0usize; inst.rounds()];
    loop {
        let path: Vec<usize> = cursor.iter().enumerate().map(|(t, &j)| inst.dists[t][j].0).collect();
        let prob: BigRational = cursor.iter().enumerate().map(|(t, &j)| inst.dists[t][j].1.clone()).product();
        f(&path, &prob);
        // Odometer over per-round supports.
        let mut t = 0;
        loop {
            if t == cursor.len() {
                return Ok(());
            }
            cursor[t] += 1;
            if cursor[t] < inst.dists[t].len() {
                break;
            }
            cursor[t] = 0;
            t += 1;
        }
    }
}

/// `E[R̃(c)]` over every path of posted prices, weighted by path probability.
pub fn brute_force_estimator_expectation(inst: &ExactInstance, c: &BigRational) -> Result<BigRational, OracleError> {
    let mut total = BigRational::zero();
    for_each_path(inst, |path, prob| total += prob * decomposed_regret(inst, &path_estimates(inst, path), c))?;
    Ok(total)
}

/// `E[R̃_{p,q}(c)]` over every path.
pub fn brute_force_pairwise_expectation(
    inst: &ExactInstance,
    p: usize,
    q: usize,
    c: &BigRational,
) -> Result<BigRational, OracleError> {
    let t = BigRational::from_integer(inst.rounds().into());
    let mut total = BigRational::zero();
    for_each_path(inst, |path, prob| total += prob * pair_term(inst, &path_estimates(inst, path), p, q, c) / &t)?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn two_price(pi: (i64, i64), x: (i64, i64), rounds: usize) -> ExactInstance {
        ExactInstance::new(
            vec![ratio(1, 1), ratio(2, 1)],
            vec![vec![(0, ratio(pi.0, 2)), (1, ratio(pi.1, 2))]; rounds],
            vec![vec![ratio(x.0, 2), ratio(x.1, 2)]; rounds],
        )
        .unwrap()
    }

    #[test]
    fn single_path_is_deterministic() {
        let inst = ExactInstance::new(vec![ratio(1, 2), ratio(1, 1)], vec![vec![(0, ratio(1, 1))]], vec![vec![ratio(3, 5), ratio(1, 5)]])
            .unwrap();
        let c = ratio(1, 10);
        // x̂ = (3/5, 3/5); swapping 1/2 → 1 gains (1 − 1/10)(3/5) − (1/2 − 1/10)(3/5) = 3/10.
        assert_eq!(brute_force_estimator_expectation(&inst, &c).unwrap(), ratio(3, 10));
    }

    #[test]
    fn path_probabilities_multiply() {
        let inst = two_price((1, 1), (2, 1), 2);
        let mut probs = Vec::new();
        for_each_path(&inst, |_, w| probs.push(w.clone())).unwrap();
        assert_eq!(probs, vec![ratio(1, 4); 4]);
    }

    #[test]
    fn pairwise_terms_are_unbiased() {
        let inst = two_price((1, 1), (2, 1), 3);
        let pess = exact_pessimistic_allocation(&inst);
        let t = BigRational::from_integer(3.into());
        for c in [ratio(0, 1), ratio(1, 3), ratio(3, 2)] {
            for p in 0..2 {
                for q in 0..2 {
                    let target = pair_term(&inst, &pess, p, q, &c) / &t;
                    assert_eq!(brute_force_pairwise_expectation(&inst, p, q, &c).unwrap(), target);
                }
            }
        }
    }

    #[test]
    fn expectation_of_the_max_exceeds_the_max_of_expectations() {
        // Both prices supported with x = (1, 1/2): pessimistic regret at c = 0 is 0,
        // the estimator's expectation is 1.
        let inst = two_price((1, 1), (2, 1), 1);
        let c = ratio(0, 1);
        assert_eq!(exact_pessimistic_regret(&inst, &c), ratio(0, 1));
        assert_eq!(brute_force_estimator_expectation(&inst, &c).unwrap(), ratio(1, 1));
    }

    #[test]
    fn size_limits() {
        let inst = two_price((1, 1), (2, 1), 5);
        assert!(matches!(
            brute_force_estimator_expectation(&inst, &ratio(0, 1)),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn rejects_unnormalized() {
        let bad = ExactInstance::new(vec![ratio(1, 1)], vec![vec![(0, ratio(1, 2))]], vec![vec![ratio(1, 2)]]);
        assert!(bad.is_err());
    }
}
