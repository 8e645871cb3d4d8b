//! Ground-truth demand for two-seller markets.
//!
//! Two environments are provided. [`DiscreteValuationTable`] is a finite joint
//! distribution of buyer valuations whose entries may depend affinely on a
//! parameter `ε`; demand is computed in exact rational arithmetic.
//! [`UniformDuopoly`] draws both valuations uniformly from `[0, 1]` and has a
//! closed-form demand.
//!
//! Both are exposed to the simulator through the [`DemandOracle`] trait, which
//! works on grid indices. The audit never touches these types.

use std::ops::Add;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Deserialize;
use thiserror::Error;

use crate::rational;
use crate::transcript::PriceGrid;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("price {0} is not on the valuation table's grid")]
    PriceOffGrid(String),
    #[error("prices ({0}, {1}) must lie in [0, 1]")]
    PriceOutOfRange(f64, f64),
    #[error("cost {0} must lie in [0, 1)")]
    BadCost(f64),
    #[error("valuation table: {0}")]
    BadTable(String),
}

/// A table entry `constant + eps_coef · ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsAffine {
    pub constant: BigRational,
    pub eps_coef: BigRational,
}

impl EpsAffine {
    pub fn constant(c: BigRational) -> Self {
        EpsAffine { constant: c, eps_coef: BigRational::zero() }
    }

    pub fn new(constant: BigRational, eps_coef: BigRational) -> Self {
        EpsAffine { constant, eps_coef }
    }

    pub fn at(&self, eps: &BigRational) -> BigRational {
        &self.constant + &self.eps_coef * eps
    }
}

/// Joint distribution of `(v1, v2)` over a finite grid of valuations.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteValuationTable {
    v1_levels: Vec<BigRational>,
    v2_levels: Vec<BigRational>,
    entries: Vec<Vec<EpsAffine>>,
    epsilon: BigRational,
    /// Entries evaluated at `epsilon`.
    probs: Vec<Vec<BigRational>>,
}

impl DiscreteValuationTable {
    /// Builds and checks a table: entries non-negative at `epsilon`, summing to one
    /// exactly, and every supported valuation pair has some valuation at least the
    /// highest price so the buyer never abstains.
    pub fn new(
        v1_levels: Vec<BigRational>,
        v2_levels: Vec<BigRational>,
        entries: Vec<Vec<EpsAffine>>,
        epsilon: BigRational,
    ) -> Result<Self, MarketError> {
        if entries.len() != v1_levels.len() || entries.iter().any(|row| row.len() != v2_levels.len()) {
            return Err(MarketError::BadTable("probability matrix shape does not match the level lists".into()));
        }
        if epsilon.is_negative() {
            return Err(MarketError::BadTable("epsilon must be non-negative".into()));
        }
        let probs: Vec<Vec<BigRational>> =
            entries.iter().map(|row| row.iter().map(|e| e.at(&epsilon)).collect()).collect();
        let mut total = BigRational::zero();
        for row in &probs {
            for p in row {
                if p.is_negative() {
                    return Err(MarketError::BadTable(format!("negative probability {p} at epsilon {epsilon}")));
                }
                total += p;
            }
        }
        if !total.is_one() {
            return Err(MarketError::BadTable(format!("probabilities sum to {total}, not 1")));
        }
        let table = DiscreteValuationTable { v1_levels, v2_levels, entries, epsilon, probs };
        let top = table.price_levels().last().cloned().unwrap_or_else(BigRational::zero);
        for (i, row) in table.probs.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                if p.is_positive() && table.v1_levels[i] < top && table.v2_levels[j] < top {
                    return Err(MarketError::BadTable(format!(
                        "buyer with valuations ({}, {}) could abstain at price {top}",
                        table.v1_levels[i], table.v2_levels[j]
                    )));
                }
            }
        }
        Ok(table)
    }

    /// The manipulation construction: valuations and prices in `{0,1,2,3}`, zero costs.
    pub fn table3(epsilon: BigRational) -> Result<Self, MarketError> {
        let r = rational::ratio;
        let z = || EpsAffine::constant(BigRational::zero());
        let c = |n, d| EpsAffine::constant(r(n, d));
        let entries = vec![
            vec![z(), z(), z(), EpsAffine::new(r(67, 600), r(1, 3))],
            vec![z(), z(), z(), EpsAffine::new(r(1, 30), r(-4, 3))],
            vec![z(), z(), z(), EpsAffine::new(r(1, 100), r(1, 1))],
            vec![c(1, 40), c(9, 25), z(), c(23, 50)],
        ];
        let levels: Vec<BigRational> = (0..4).map(rational::int).collect();
        Self::new(levels.clone(), levels, entries, epsilon)
    }

    /// Parses `{"v1_levels": [...], "v2_levels": [...], "probs": [[...]], "epsilon": e}`.
    ///
    /// Entries are numbers, exact strings (`"67/600"`, `"0.385"`), or
    /// `{"const": "67/600", "eps": "1/3"}` for entries that move with `ε`.
    pub fn from_json(text: &str) -> Result<Self, MarketError> {
        let raw: RawTable = serde_json::from_str(text).map_err(|e| MarketError::BadTable(e.to_string()))?;
        let levels = |v: Vec<RawScalar>| v.into_iter().map(RawScalar::exact).collect::<Result<Vec<_>, _>>();
        let entries = raw
            .probs
            .into_iter()
            .map(|row| row.into_iter().map(RawEntry::exact).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(levels(raw.v1_levels)?, levels(raw.v2_levels)?, entries, raw.epsilon.exact()?)
    }

    pub fn epsilon(&self) -> &BigRational {
        &self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: BigRational) -> Result<Self, MarketError> {
        Self::new(self.v1_levels.clone(), self.v2_levels.clone(), self.entries.clone(), epsilon)
    }

    pub fn prob(&self, i: usize, j: usize) -> &BigRational {
        &self.probs[i][j]
    }

    /// Prices a seller may post: the union of both valuation grids.
    pub fn price_levels(&self) -> Vec<BigRational> {
        let mut out: Vec<BigRational> = self.v1_levels.iter().chain(&self.v2_levels).cloned().collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn price_grid(&self) -> PriceGrid {
        PriceGrid::new(self.price_levels().iter().map(rational::to_f64).collect(), None)
            .expect("valuation levels form a valid grid")
    }
}

#[derive(Deserialize)]
struct RawTable {
    v1_levels: Vec<RawScalar>,
    v2_levels: Vec<RawScalar>,
    probs: Vec<Vec<RawEntry>>,
    epsilon: RawScalar,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawScalar {
    Number(f64),
    Text(String),
}

impl RawScalar {
    fn exact(self) -> Result<BigRational, MarketError> {
        match self {
            RawScalar::Number(x) => rational::from_decimal_f64(x),
            RawScalar::Text(ref s) => rational::parse(s),
        }
        .ok_or_else(|| MarketError::BadTable("unreadable number".into()))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Affine {
        #[serde(rename = "const")]
        constant: RawScalar,
        eps: RawScalar,
    },
    Scalar(RawScalar),
}

impl RawEntry {
    fn exact(self) -> Result<EpsAffine, MarketError> {
        match self {
            RawEntry::Affine { constant, eps } => Ok(EpsAffine::new(constant.exact()?, eps.exact()?)),
            RawEntry::Scalar(s) => Ok(EpsAffine::constant(s.exact()?)),
        }
    }
}

/// Exact demand `(x1, x2)` at prices `(p1, p2)` for a buyer who always buys.
///
/// Good 1 sells when `v1 − v2 > p1 − p2`; ties `v1 − v2 = p1 − p2` split evenly.
pub fn discrete_demand(
    table: &DiscreteValuationTable,
    p1: &BigRational,
    p2: &BigRational,
) -> Result<(BigRational, BigRational), MarketError> {
    let levels = table.price_levels();
    for p in [p1, p2] {
        if !levels.contains(p) {
            return Err(MarketError::PriceOffGrid(p.to_string()));
        }
    }
    let gap = p1 - p2;
    let half = rational::ratio(1, 2);
    let mut x1 = BigRational::zero();
    for (i, v1) in table.v1_levels.iter().enumerate() {
        for (j, v2) in table.v2_levels.iter().enumerate() {
            let diff = v1 - v2;
            let p = &table.probs[i][j];
            if diff > gap {
                x1 += p;
            } else if diff == gap {
                x1 += &half * p;
            }
        }
    }
    let x2 = BigRational::one() - &x1;
    Ok((x1, x2))
}

/// Two sellers facing a buyer with `(v1, v2) ~ U[0,1]²` who buys the good with the
/// larger non-negative surplus `v_i − p_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformDuopoly {
    pub cost1: f64,
    pub cost2: f64,
}

impl UniformDuopoly {
    pub fn new(cost1: f64, cost2: f64) -> Result<Self, MarketError> {
        for c in [cost1, cost2] {
            if !(0.0..1.0).contains(&c) {
                return Err(MarketError::BadCost(c));
            }
        }
        Ok(UniformDuopoly { cost1, cost2 })
    }

    pub fn costs(&self) -> [f64; 2] {
        [self.cost1, self.cost2]
    }
}

/// `∫_0^u clamp(s, 0, 1) ds`.
fn clamped_ramp_integral(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u <= 1.0 {
        0.5 * u * u
    } else {
        0.5 + (u - 1.0)
    }
}

/// Closed-form demand in the uniform duopoly.
///
/// `x1 = ∫_{p1}^{1} clamp(v − p1 + p2, 0, 1) dv`, and symmetrically for `x2`.
pub fn uniform_demand(_env: &UniformDuopoly, p1: f64, p2: f64) -> Result<(f64, f64), MarketError> {
    if !((0.0..=1.0).contains(&p1) && (0.0..=1.0).contains(&p2)) {
        return Err(MarketError::PriceOutOfRange(p1, p2));
    }
    let share = |own: f64, other: f64| clamped_ramp_integral(1.0 + other - own) - clamped_ramp_integral(other);
    Ok((share(p1, p2), share(p2, p1)))
}

/// Allocation function on a shared price grid, indexed by grid positions.
pub trait DemandOracle: Send + Sync {
    fn grid(&self) -> &PriceGrid;

    /// `(x1, x2)` when seller 1 posts level `i1` and seller 2 posts level `i2`.
    fn allocations(&self, i1: usize, i2: usize) -> (f64, f64);

    /// Allocation of `seller` (0 or 1) posting `own` against an opponent posting `other`.
    fn allocation_for(&self, seller: usize, own: usize, other: usize) -> f64 {
        if seller == 0 {
            self.allocations(own, other).0
        } else {
            self.allocations(other, own).1
        }
    }
}

/// The uniform duopoly restricted to a grid, with demand precomputed.
#[derive(Debug, Clone)]
pub struct UniformDemand {
    grid: PriceGrid,
    table: Vec<(f64, f64)>,
}

impl UniformDemand {
    pub fn new(env: &UniformDuopoly, grid: PriceGrid) -> Result<Self, MarketError> {
        let k = grid.len();
        let mut table = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                table.push(uniform_demand(env, grid.level(i), grid.level(j))?);
            }
        }
        Ok(UniformDemand { grid, table })
    }
}

impl DemandOracle for UniformDemand {
    fn grid(&self) -> &PriceGrid {
        &self.grid
    }

    fn allocations(&self, i1: usize, i2: usize) -> (f64, f64) {
        self.table[i1 * self.grid.len() + i2]
    }
}

/// A valuation table on its own price grid, with exact demand rounded once to `f64`.
#[derive(Debug, Clone)]
pub struct TableDemand {
    grid: PriceGrid,
    table: Vec<(f64, f64)>,
}

impl TableDemand {
    pub fn new(valuations: &DiscreteValuationTable) -> Self {
        let levels = valuations.price_levels();
        let mut table = Vec::with_capacity(levels.len() * levels.len());
        for p1 in &levels {
            for p2 in &levels {
                let (x1, x2) = discrete_demand(valuations, p1, p2).expect("prices come from the table grid");
                table.push((rational::to_f64(&x1), rational::to_f64(&x2)));
            }
        }
        TableDemand { grid: valuations.price_grid(), table }
    }
}

impl DemandOracle for TableDemand {
    fn grid(&self) -> &PriceGrid {
        &self.grid
    }

    fn allocations(&self, i1: usize, i2: usize) -> (f64, f64) {
        self.table[i1 * self.grid.len() + i2]
    }
}

/// Payoffs `[payoff1, payoff2]` for every price pair, indexed `[i1][i2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix<T> {
    pub entries: Vec<Vec<[T; 2]>>,
}

impl<T: Clone> PayoffMatrix<T> {
    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.entries.first().map_or(0, Vec::len)
    }

    pub fn get(&self, i1: usize, i2: usize) -> &[T; 2] {
        &self.entries[i1][i2]
    }

    /// Every payoff of `seller` across the matrix.
    pub fn payoffs_of(&self, seller: usize) -> impl Iterator<Item = &T> + '_ {
        self.entries.iter().flatten().map(move |e| &e[seller])
    }
}

/// `payoff_i(p1, p2) = (p_i − c_i) · x_i(p1, p2)` over the oracle's grid.
pub fn expected_payoff_matrix(oracle: &dyn DemandOracle, costs: [f64; 2]) -> PayoffMatrix<f64> {
    let grid = oracle.grid();
    let k = grid.len();
    let entries = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let (x1, x2) = oracle.allocations(i, j);
                    [(grid.level(i) - costs[0]) * x1, (grid.level(j) - costs[1]) * x2]
                })
                .collect()
        })
        .collect();
    PayoffMatrix { entries }
}

/// Exact payoff matrix of a valuation table over the given price levels.
pub fn exact_payoff_matrix(
    table: &DiscreteValuationTable,
    prices: &[BigRational],
    costs: [&BigRational; 2],
) -> Result<PayoffMatrix<BigRational>, MarketError> {
    let mut entries = Vec::with_capacity(prices.len());
    for p1 in prices {
        let mut row = Vec::with_capacity(prices.len());
        for p2 in prices {
            let (x1, x2) = discrete_demand(table, p1, p2)?;
            row.push([(p1 - costs[0]) * x1, (p2 - costs[1]) * x2]);
        }
        entries.push(row);
    }
    Ok(PayoffMatrix { entries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium<T> {
    pub prices: (usize, usize),
    pub payoffs: [T; 2],
}

/// Whether neither seller gains by a unilateral deviation from `(i1, i2)`.
pub fn is_pure_equilibrium<T: PartialOrd + Clone>(m: &PayoffMatrix<T>, i1: usize, i2: usize) -> bool {
    let here = m.get(i1, i2);
    (0..m.rows()).all(|j| m.get(j, i2)[0] <= here[0]) && (0..m.cols()).all(|j| m.get(i1, j)[1] <= here[1])
}

/// Pure Nash equilibrium with the highest total payoff; ties go to the
/// lexicographically smallest index pair. `None` if no pure equilibrium exists.
pub fn best_pure_equilibrium<T>(m: &PayoffMatrix<T>) -> Option<Equilibrium<T>>
where
    T: PartialOrd + Clone + Add<Output = T>,
{
    let mut best: Option<(T, Equilibrium<T>)> = None;
    for i1 in 0..m.rows() {
        for i2 in 0..m.cols() {
            if !is_pure_equilibrium(m, i1, i2) {
                continue;
            }
            let payoffs = m.get(i1, i2).clone();
            let total = payoffs[0].clone() + payoffs[1].clone();
            if best.as_ref().map_or(true, |(b, _)| total > *b) {
                best = Some((total, Equilibrium { prices: (i1, i2), payoffs }));
            }
        }
    }
    best.map(|(_, e)| e)
}
