//! Auditing when only posted prices and allocations are recorded.
//!
//! Price distributions are replaced by empirical frequencies over a sliding
//! window of posted prices. This is sound when the seller's distribution drifts
//! slowly, e.g. multiplicative weights with a small step size.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{estimate_round, finish_report, pairwise_table, AuditError, AuditReport, Provenance};
use crate::transcript::{AuditConfig, PriceDistribution, PriceGrid, ReducedTranscript};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AggregateError {
    #[error("invalid drift assumption: {0}")]
    Drift(String),
    #[error("window length {window} exceeds the {rounds} recorded rounds")]
    WindowTooLong { window: usize, rounds: usize },
    #[error("posted and allocation sequences differ in length ({posted} vs {allocations})")]
    Shape { posted: usize, allocations: usize },
    #[error("posted index {index} at round {round} is outside the {k}-level grid")]
    OffGrid { round: usize, index: usize, k: usize },
    #[error("confidence parameter {0} must lie in (0, 1)")]
    Delta(f64),
    #[error(transparent)]
    Audit(#[from] AuditError),
}

/// How fast the seller's price distribution may move per round (ℓ∞).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum DriftMode {
    /// Drift at most `eps` per round.
    Explicit { eps: f64 },
    /// Drift at most `T^{−gamma}` per round.
    Rate { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftAssumption {
    #[serde(flatten)]
    pub mode: DriftMode,
    /// Claimed smallest positive probability `π̲` of any supported price.
    pub floor: f64,
}

impl DriftAssumption {
    pub fn new(mode: DriftMode, floor: f64) -> Result<Self, AggregateError> {
        let rate = match mode {
            DriftMode::Explicit { eps } => eps,
            DriftMode::Rate { gamma } => gamma,
        };
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(AggregateError::Drift(format!("drift parameter {rate} must be positive")));
        }
        if !(floor > 0.0 && floor <= 1.0) {
            return Err(AggregateError::Drift(format!("support floor {floor} must lie in (0, 1]")));
        }
        Ok(DriftAssumption { mode, floor })
    }

    /// Per-round drift bound at horizon `t`.
    pub fn per_round(&self, t: usize) -> f64 {
        match self.mode {
            DriftMode::Explicit { eps } => eps,
            DriftMode::Rate { gamma } => (t as f64).powf(-gamma),
        }
    }
}

/// Windowed empirical distributions, dense over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionEstimate {
    pub frequencies: Vec<Vec<f64>>,
    pub window: usize,
    /// Guaranteed ℓ∞ error `(4 ε ln(2Tk/δ))^{1/3}`.
    pub rho: f64,
}

/// Window length `⌈ln(2Tk/δ) / (2t²)⌉` with `t = (ε ln(2Tk/δ) / 2)^{1/3}`, and the error bound.
pub fn window_length(rounds: usize, k: usize, eps: f64, delta: f64) -> (usize, f64) {
    let log = (2.0 * rounds as f64 * k as f64 / delta).ln();
    let t = (eps * log / 2.0).cbrt();
    let window = (log / (2.0 * t * t)).ceil().max(1.0) as usize;
    let rho = (4.0 * eps * log).cbrt();
    (window, rho)
}

/// Start of the length-`window` window centered on round `i`, shifted to stay inside `[0, rounds)`.
pub fn window_start(i: usize, window: usize, rounds: usize) -> usize {
    i.saturating_sub(window / 2).min(rounds - window)
}

pub fn estimate_distributions(
    posted: &[usize],
    k: usize,
    drift: &DriftAssumption,
    delta: f64,
) -> Result<DistributionEstimate, AggregateError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AggregateError::Delta(delta));
    }
    let rounds = posted.len();
    if let Some((round, &index)) = posted.iter().enumerate().find(|(_, &p)| p >= k) {
        return Err(AggregateError::OffGrid { round: round + 1, index, k });
    }
    let (window, rho) = window_length(rounds, k, drift.per_round(rounds), delta);
    if window > rounds {
        return Err(AggregateError::WindowTooLong { window, rounds });
    }
    // prefix[i][p] = number of posts of p in rounds [0, i).
    let mut prefix = vec![vec![0u32; k]; rounds + 1];
    for (i, &p) in posted.iter().enumerate() {
        prefix[i + 1] = prefix[i].clone();
        prefix[i + 1][p] += 1;
    }
    let frequencies = (0..rounds)
        .map(|i| {
            let s = window_start(i, window, rounds);
            (0..k).map(|p| f64::from(prefix[s + window][p] - prefix[s][p]) / window as f64).collect()
        })
        .collect();
    Ok(DistributionEstimate { frequencies, window, rho })
}

/// `ρ'` from the drift mode: `(T^{−γ} ln(8Tk³/δ))^{1/3}` for the rate form and
/// the windowed estimate's own bound for the explicit form.
pub fn support_error(drift: &DriftAssumption, rounds: usize, k: usize, delta: f64) -> f64 {
    match drift.mode {
        DriftMode::Rate { gamma } => {
            let t = rounds as f64;
            (t.powf(-gamma) * (8.0 * t * (k as f64).powi(3) / delta).ln()).cbrt()
        }
        DriftMode::Explicit { eps } => window_length(rounds, k, eps, delta).1,
    }
}

/// `δ' = k (p̄ ρ'/π̲)(1/(π̲ − ρ') + 1) + √(ln(8k²/δ) · 2 (1/π̲ + 1)² p̄² / T)`.
pub fn aggregated_margin(k: usize, max_price: f64, rho_prime: f64, floor: f64, rounds: usize, delta: f64) -> f64 {
    let k = k as f64;
    let bias = k * (max_price * rho_prime / floor) * (1.0 / (floor - rho_prime) + 1.0);
    let noise = ((8.0 * k * k / delta).ln() * 2.0 * (1.0 / floor + 1.0).powi(2) * max_price * max_price / rounds as f64).sqrt();
    bias + noise
}

/// Largest `t` with `t^{γ/2} ≤ ln(8tk³/δ)`, returned as `ln t` since it overflows
/// `f64` for small `γ`.
pub fn log_min_horizon(gamma: f64, k: usize, delta: f64) -> f64 {
    let c = (8.0 * (k as f64).powi(3) / delta).ln();
    // g(u) = e^{uγ/2} − c − u is convex in u = ln t with g(0) < 0 whenever c > 1.
    let g = |u: f64| (u * gamma / 2.0).exp() - c - u;
    if g(0.0) >= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AggregatedOutcome {
    Report(AuditReport),
    /// `ρ' ≥ π̲`: supports cannot be recovered reliably, so no verdict is given.
    InsufficientData { rho_prime: f64, floor: f64, rounds: usize },
}

impl AggregatedOutcome {
    pub fn report(&self) -> Option<&AuditReport> {
        match self {
            AggregatedOutcome::Report(r) => Some(r),
            AggregatedOutcome::InsufficientData { .. } => None,
        }
    }
}

/// Estimated support: frequency at least `threshold`, plus the posted price; renormalized.
fn estimated_distribution(freq: &[f64], posted: usize, threshold: f64) -> PriceDistribution {
    let mut dense: Vec<f64> =
        freq.iter().enumerate().map(|(p, &f)| if f >= threshold || p == posted { f } else { 0.0 }).collect();
    let total: f64 = dense.iter().sum();
    dense.iter_mut().for_each(|v| *v /= total);
    PriceDistribution::from_dense(&dense).expect("window frequencies of posted prices are positive")
}

/// The audit with windowed distribution estimates in place of recorded ones.
/// The confidence parameter is `config.confidence_alpha`.
pub fn audit_aggregated(
    posted: &[usize],
    allocations: &[f64],
    grid: &PriceGrid,
    drift: &DriftAssumption,
    config: &AuditConfig,
) -> Result<AggregatedOutcome, AggregateError> {
    if posted.len() != allocations.len() {
        return Err(AggregateError::Shape { posted: posted.len(), allocations: allocations.len() });
    }
    if posted.is_empty() {
        return Err(AuditError::EmptyTranscript.into());
    }
    let (k, rounds, delta) = (grid.len(), posted.len(), config.confidence_alpha);
    let rho_prime = support_error(drift, rounds, k, delta);
    if rho_prime >= drift.floor {
        return Ok(AggregatedOutcome::InsufficientData { rho_prime, floor: drift.floor, rounds });
    }
    let est = estimate_distributions(posted, k, drift, delta)?;
    let dists: Vec<PriceDistribution> =
        est.frequencies.iter().zip(posted).map(|(f, &p)| estimated_distribution(f, p, rho_prime)).collect();
    let rows: Vec<Vec<f64>> =
        dists.iter().zip(posted).zip(allocations).map(|((d, &p), &x)| estimate_round(k, d, p, x)).collect();
    let curve = pairwise_table(grid, dists.iter().zip(rows.iter().map(Vec::as_slice))).into_curve();
    let margin = aggregated_margin(k, grid.max_price(), rho_prime, drift.floor, rounds, delta);
    Ok(AggregatedOutcome::Report(finish_report(&curve, config, margin, grid, Provenance::Aggregated)?))
}

pub fn audit_reduced(
    transcript: &ReducedTranscript,
    drift: &DriftAssumption,
    config: &AuditConfig,
) -> Result<AggregatedOutcome, AggregateError> {
    audit_aggregated(&transcript.posted, &transcript.allocations, &transcript.grid, drift, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcript::CostRange;

    #[test]
    fn windows_keep_their_length() {
        let (window, rounds) = (7, 20);
        for i in 0..rounds {
            let s = window_start(i, window, rounds);
            assert!(s + window <= rounds);
            if i >= window / 2 && i + window / 2 < rounds {
                assert_eq!(s, i - window / 2);
            }
        }
        assert_eq!(window_start(0, 20, 20), 0);
        assert_eq!(window_start(19, 20, 20), 0);
    }

    #[test]
    fn constant_posting_gives_point_masses() {
        let drift = DriftAssumption::new(DriftMode::Explicit { eps: 0.01 }, 0.5).unwrap();
        let est = estimate_distributions(&vec![2; 5000], 4, &drift, 0.05).unwrap();
        assert!(est.frequencies.iter().all(|f| f == &vec![0.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn window_length_formula() {
        let (l, rho) = window_length(20_000, 4, 1e-3, 0.05);
        let log = (2.0f64 * 20_000.0 * 4.0 / 0.05).ln();
        let t = (1e-3 * log / 2.0).powf(1.0 / 3.0);
        assert_eq!(l, (log / (2.0 * t * t)).ceil() as usize);
        assert!((rho - (4e-3 * log).powf(1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn large_drift_rejected() {
        let drift = DriftAssumption::new(DriftMode::Explicit { eps: 1e-9 }, 0.5).unwrap();
        assert!(matches!(
            estimate_distributions(&[0; 100], 2, &drift, 0.05),
            Err(AggregateError::WindowTooLong { .. })
        ));
        assert!(DriftAssumption::new(DriftMode::Rate { gamma: 0.0 }, 0.5).is_err());
        assert!(DriftAssumption::new(DriftMode::Rate { gamma: 0.5 }, 0.0).is_err());
    }

    #[test]
    fn min_horizon_solves_its_equation() {
        let (gamma, k, delta) = (0.5, 4, 0.05);
        let u = log_min_horizon(gamma, k, delta);
        let lhs = (u * gamma / 2.0).exp();
        let rhs = (8.0 * (k as f64).powi(3) / delta).ln() + u;
        assert!((lhs - rhs).abs() < 1e-9 * rhs);
    }

    #[test]
    fn short_transcript_is_insufficient() {
        let grid = PriceGrid::new(vec![0.5, 1.0], None).unwrap();
        let drift = DriftAssumption::new(DriftMode::Rate { gamma: 0.5 }, 0.3).unwrap();
        let cfg = AuditConfig::new(CostRange::new(0.0, 0.5).unwrap(), 0.1, 0.05, false).unwrap();
        let out = audit_aggregated(&[0; 50], &[0.5; 50], &grid, &drift, &cfg).unwrap();
        assert!(matches!(out, AggregatedOutcome::InsufficientData { .. }));
        let json = serde_json::to_value(&out).unwrap();
        assert_eq!(json["status"], "insufficient_data");
    }
}
