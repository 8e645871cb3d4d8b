//! The pessimistic calibrated-regret audit.
//!
//! Pipeline: propensity estimates `x̂^t(p)` with a pessimistic fill off the
//! support, pairwise substitution terms `R̃_{p,q}(c)` (affine in the cost), the
//! convex curve `R̃(c) = Σ_p max_q R̃_{p,q}(c)`, its exact minimum over the
//! plausible cost range, and the threshold test with an error margin.

mod pwl;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pwl::{AffineInCost, PwlInCost};

use crate::transcript::{validate, AuditConfig, ConfigError, CostRange, PriceDistribution, PriceGrid, Transcript, Violation};

/// Number of evenly spaced cost samples stored in a report's curve.
pub const CURVE_SAMPLES: usize = 101;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuditError {
    #[error("transcript has no rounds")]
    EmptyTranscript,
    #[error("invalid transcript: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("endogenous audit needs the continuum upper bound h in the grid header")]
    MissingContinuumUpper,
    #[error("rounds disagree in length: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Whether the report used recorded price distributions or windowed estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Aggregated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Estimated plausible cost `c̃`.
    pub c_tilde: f64,
    /// `R̃(c̃)`.
    pub regret: f64,
    /// Error margin.
    pub delta: f64,
    /// Discretization loss, zero for an exogenous grid.
    pub d: f64,
    pub verdict: Verdict,
    /// `[c, R̃(c)]` samples over the cost range.
    pub curve: Vec<[f64; 2]>,
    pub provenance: Provenance,
}

impl AuditReport {
    /// `R̃(c̃) + δ + d`, the quantity compared against `2r`.
    pub fn statistic(&self) -> f64 {
        self.regret + self.delta + self.d
    }
}

/// Per-round estimated allocations `x̂^t(p)`, `T` rows of `k` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationEstimate {
    rows: Vec<Vec<f64>>,
}

impl AllocationEstimate {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn round(&self, t: usize) -> &[f64] {
        &self.rows[t]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// One round of the estimate: `x/π` at the posted price, `0` at the other
/// supported prices, and off the support a copy of the largest supported lower
/// price (or `1` if none).
pub fn estimate_round(k: usize, dist: &PriceDistribution, posted: usize, allocation: f64) -> Vec<f64> {
    let mut row = vec![0.0; k];
    let mut carry = 1.0;
    for (p, slot) in row.iter_mut().enumerate() {
        if dist.contains(p) {
            carry = if p == posted { allocation / dist.prob(p) } else { 0.0 };
        }
        *slot = carry;
    }
    row
}

pub fn estimate_allocations(transcript: &Transcript) -> AllocationEstimate {
    let k = transcript.k();
    let rows = transcript
        .records
        .iter()
        .map(|r| estimate_round(k, &r.distribution, r.posted, r.allocation))
        .collect();
    AllocationEstimate { rows }
}

/// All `k × k` affine terms `R̃_{p,q}(c)`, indexed `[p][q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTable {
    terms: Vec<Vec<AffineInCost>>,
}

impl PairwiseTable {
    pub fn get(&self, p: usize, q: usize) -> AffineInCost {
        self.terms[p][q]
    }

    pub fn terms(&self) -> &[Vec<AffineInCost>] {
        &self.terms
    }

    pub fn into_curve(self) -> PwlInCost {
        PwlInCost::new(self.terms)
    }
}

/// `R̃_{p,q}(c) = (1/T) Σ_t π^t(p) [(q − c) x̂^t(q) − (p − c) x̂^t(p)]` for one pair.
pub fn pairwise_regret(estimate: &AllocationEstimate, transcript: &Transcript, p: usize, q: usize) -> AffineInCost {
    let (pp, qq) = (transcript.grid.level(p), transcript.grid.level(q));
    let (mut slope, mut intercept) = (0.0, 0.0);
    for (row, rec) in estimate.rows.iter().zip(&transcript.records) {
        let w = rec.distribution.prob(p);
        if w == 0.0 {
            continue;
        }
        slope += w * (row[p] - row[q]);
        intercept += w * (qq * row[q] - pp * row[p]);
    }
    let t = transcript.len() as f64;
    AffineInCost::new(slope / t, intercept / t)
}

/// Every pairwise term from per-round `(distribution, estimate row)` pairs.
pub fn pairwise_table<'a, I>(grid: &PriceGrid, rounds: I) -> PairwiseTable
where
    I: IntoIterator<Item = (&'a PriceDistribution, &'a [f64])>,
{
    let k = grid.len();
    let levels = grid.levels();
    let mut slope = vec![vec![0.0; k]; k];
    let mut intercept = vec![vec![0.0; k]; k];
    let mut t = 0usize;
    for (dist, row) in rounds {
        t += 1;
        for (p, w) in dist.iter() {
            let own = levels[p] * row[p];
            for q in 0..k {
                slope[p][q] += w * (row[p] - row[q]);
                intercept[p][q] += w * (levels[q] * row[q] - own);
            }
        }
    }
    let t = t.max(1) as f64;
    let terms = slope
        .iter()
        .zip(&intercept)
        .map(|(s, i)| s.iter().zip(i).map(|(&s, &i)| AffineInCost::new(s / t, i / t)).collect())
        .collect();
    PairwiseTable { terms }
}

/// `R̃(c) = Σ_p max_q R̃_{p,q}(c)` as an exact piecewise-linear function.
pub fn regret_curve(transcript: &Transcript) -> PwlInCost {
    let est = estimate_allocations(transcript);
    let rounds = transcript.records.iter().zip(&est.rows).map(|(r, row)| (&r.distribution, row.as_slice()));
    pairwise_table(&transcript.grid, rounds).into_curve()
}

/// `(c̃, R̃(c̃))`; the smallest minimizing cost wins ties.
pub fn minimize_over_cost(curve: &PwlInCost, range: CostRange) -> (f64, f64) {
    curve.minimize(range.lo(), range.hi())
}

/// `δ = (k p̄ / T) √(2 ln(2k²/α) Σ_s (1/m_s + 1)²)` where `m_s` is the
/// smallest supported probability in round `s`.
pub fn error_margin_from_minima<I>(k: usize, max_price: f64, minima: I, alpha: f64) -> Result<f64, AuditError>
where
    I: IntoIterator<Item = f64>,
{
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ConfigError::Alpha(alpha).into());
    }
    let (mut t, mut sum) = (0usize, 0.0);
    for m in minima {
        t += 1;
        sum += (1.0 / m + 1.0).powi(2);
    }
    if t == 0 {
        return Err(AuditError::EmptyTranscript);
    }
    let k = k as f64;
    let log_term = (2.0 * k * k / alpha).ln();
    Ok(k * max_price / t as f64 * (2.0 * log_term * sum).sqrt())
}

pub fn error_margin(transcript: &Transcript, alpha: f64) -> Result<f64, AuditError> {
    error_margin_from_minima(
        transcript.k(),
        transcript.grid.max_price(),
        transcript.records.iter().map(|r| r.distribution.min_prob()),
        alpha,
    )
}

/// Largest gap in `0 = q₀ ≤ q₁ < … < q_k ≤ q_{k+1} = h`.
pub fn discretization_loss(grid: &PriceGrid) -> Result<f64, AuditError> {
    let h = grid.continuum_upper().ok_or(AuditError::MissingContinuumUpper)?;
    let mut edges = Vec::with_capacity(grid.len() + 2);
    edges.push(0.0);
    edges.extend_from_slice(grid.levels());
    edges.push(h);
    Ok(edges.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max))
}

fn curve_samples(curve: &PwlInCost, range: CostRange) -> Vec<[f64; 2]> {
    let (lo, hi) = (range.lo(), range.hi());
    if hi == lo {
        return vec![[lo, curve.eval(lo)]];
    }
    let step = (hi - lo) / (CURVE_SAMPLES - 1) as f64;
    let mut cs: Vec<f64> = (0..CURVE_SAMPLES).map(|i| if i + 1 == CURVE_SAMPLES { hi } else { lo + step * i as f64 }).collect();
    cs.extend(curve.breakpoints().iter().copied().filter(|&b| b > lo && b < hi));
    cs.sort_by(f64::total_cmp);
    cs.dedup();
    cs.into_iter().map(|c| [c, curve.eval(c)]).collect()
}

/// Assembles a report from a curve and precomputed margin.
pub(crate) fn finish_report(
    curve: &PwlInCost,
    config: &AuditConfig,
    delta: f64,
    grid: &PriceGrid,
    provenance: Provenance,
) -> Result<AuditReport, AuditError> {
    let d = if config.endogenous { discretization_loss(grid)? } else { 0.0 };
    let (c_tilde, regret) = minimize_over_cost(curve, config.cost_range);
    let verdict = if regret + delta + d <= 2.0 * config.threshold_r { Verdict::Pass } else { Verdict::Fail };
    Ok(AuditReport { c_tilde, regret, delta, d, verdict, curve: curve_samples(curve, config.cost_range), provenance })
}

pub fn audit(transcript: &Transcript, config: &AuditConfig) -> Result<AuditReport, AuditError> {
    if transcript.is_empty() {
        return Err(AuditError::EmptyTranscript);
    }
    let violations = validate(transcript);
    if !violations.is_empty() {
        return Err(AuditError::Invalid(violations));
    }
    let curve = regret_curve(transcript);
    let delta = error_margin(transcript, config.confidence_alpha)?;
    finish_report(&curve, config, delta, &transcript.grid, Provenance::Exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcript::TranscriptRecord;

    fn grid(levels: &[f64]) -> PriceGrid {
        PriceGrid::new(levels.to_vec(), None).unwrap()
    }

    fn rec(t: u64, posted: usize, x: f64, d: PriceDistribution) -> TranscriptRecord {
        TranscriptRecord { round: t, posted, allocation: x, distribution: d }
    }

    #[test]
    fn point_mass_fill() {
        let d = PriceDistribution::point_mass(2);
        let row = estimate_round(5, &d, 2, 0.4);
        assert_eq!(row, vec![1.0, 1.0, 0.4, 0.4, 0.4]);
    }

    #[test]
    fn fill_copies_lower_supported_price() {
        let d = PriceDistribution::point_mass(1);
        assert_eq!(estimate_round(3, &d, 1, 0.6), vec![1.0, 0.6, 0.6]);
        // Non-posted supported prices estimate 0, and so do unsupported prices above them.
        let d = PriceDistribution::new(vec![0, 2], vec![0.5, 0.5]).unwrap();
        assert_eq!(estimate_round(4, &d, 2, 0.3), vec![0.0, 0.0, 0.6, 0.6]);
        assert_eq!(estimate_round(4, &d, 0, 0.3), vec![0.6, 0.6, 0.0, 0.0]);
    }

    #[test]
    fn trivial_pairs() {
        let g = grid(&[0.25, 0.5, 1.0]);
        let tr = Transcript::new(g, vec![rec(1, 0, 1.0, PriceDistribution::point_mass(0))]);
        let est = estimate_allocations(&tr);
        assert_eq!(pairwise_regret(&est, &tr, 0, 0), AffineInCost::new(0.0, 0.0));
        // x̂ = 1 everywhere at and above the posted price.
        assert_eq!(pairwise_regret(&est, &tr, 0, 2), AffineInCost::new(0.0, 0.75));
    }

    #[test]
    fn single_level_grid_is_zero() {
        let tr = Transcript::new(grid(&[0.5]), vec![rec(1, 0, 0.7, PriceDistribution::point_mass(0))]);
        let curve = regret_curve(&tr);
        for c in [0.0, 0.3, 2.0] {
            assert_eq!(curve.eval(c), 0.0);
        }
    }

    #[test]
    fn margin_scales_with_support_minimum() {
        let uniform = PriceDistribution::new(vec![0, 1], vec![0.5, 0.5]).unwrap();
        let skewed = PriceDistribution::new(vec![0, 1], vec![0.25, 0.75]).unwrap();
        let make = |d: &PriceDistribution, t: usize| {
            Transcript::new(grid(&[0.5, 1.0]), (1..=t).map(|i| rec(i as u64, 0, 0.5, d.clone())).collect())
        };
        let a = error_margin(&make(&uniform, 100), 0.05).unwrap();
        let b = error_margin(&make(&skewed, 100), 0.05).unwrap();
        assert!((b / a - 5.0 / 3.0).abs() < 1e-12);
        let c = error_margin(&make(&uniform, 400), 0.05).unwrap();
        assert!((a / c - 2.0).abs() < 1e-12);
        assert!(error_margin(&make(&uniform, 10), 1.0).is_err());
        assert!(error_margin(&make(&uniform, 10), 0.0).is_err());
    }

    #[test]
    fn discretization_gap_includes_boundaries() {
        let g = PriceGrid::new(vec![0.3, 0.5, 0.6], Some(1.0)).unwrap();
        assert!((discretization_loss(&g).unwrap() - 0.4).abs() < 1e-15);
        let g = PriceGrid::new(vec![0.5, 0.6], Some(0.7)).unwrap();
        assert_eq!(discretization_loss(&g).unwrap(), 0.5);
        assert!(discretization_loss(&grid(&[0.5])).is_err());
    }

    #[test]
    fn audit_rejects_empty_and_invalid() {
        let cfg = AuditConfig::new(CostRange::new(0.0, 0.5).unwrap(), 0.1, 0.05, false).unwrap();
        assert_eq!(audit(&Transcript::new(grid(&[0.5]), vec![]), &cfg), Err(AuditError::EmptyTranscript));
        let bad = Transcript::new(grid(&[0.5, 1.0]), vec![rec(1, 1, 0.5, PriceDistribution::point_mass(0))]);
        assert!(matches!(audit(&bad, &cfg), Err(AuditError::Invalid(_))));
    }

    #[test]
    fn report_json_shape() {
        let tr = Transcript::new(grid(&[0.5, 1.0]), vec![rec(1, 0, 0.5, PriceDistribution::point_mass(0))]);
        let cfg = AuditConfig::new(CostRange::new(0.0, 0.5).unwrap(), 100.0, 0.05, false).unwrap();
        let r = audit(&tr, &cfg).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["verdict"], "PASS");
        assert_eq!(v["provenance"], "exact");
        assert!(v["curve"].as_array().unwrap().len() >= CURVE_SAMPLES);
        for key in ["c_tilde", "regret", "delta", "d"] {
            assert!(v[key].is_number(), "{key}");
        }
    }
}
