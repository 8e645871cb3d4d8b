use super::{GroundTruth, OracleError};
use crate::sellers::round_uniforms;
use crate::transcript::{PriceDistribution, PriceGrid, Transcript, TranscriptRecord};

/// Draws posted prices from `dists` with the simulator's seeded streams and
/// records the ground truth's allocation at each posted price.
pub fn sample_transcript(
    grid: &PriceGrid,
    dists: &[PriceDistribution],
    truth: &GroundTruth,
    seed: u64,
) -> Result<Transcript, OracleError> {
    if dists.len() != truth.len() {
        return Err(OracleError::Misaligned { what: "ground truth", got: truth.len(), expected: dists.len() });
    }
    let records = dists
        .iter()
        .zip(truth.rows())
        .enumerate()
        .map(|(t, (d, row))| {
            let posted = d.sample(round_uniforms(seed, t + 1, 0).0);
            TranscriptRecord { round: t as u64 + 1, posted, allocation: row[posted], distribution: d.clone() }
        })
        .collect();
    Ok(Transcript::new(grid.clone(), records))
}

/// Two ground truths that agree wherever the seller ever posts.
///
/// Every distribution puts zero mass on the top price `p_k` and positive mass
/// on `p_{k−1}`. `x` sells `a` below the top price and nothing at it; `z`
/// equals `x` except `z(p_k) = a`. Transcripts are identical, yet `z`'s regret
/// exceeds `x`'s by exactly `a (p_k − p_{k−1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndistinguishablePair {
    pub grid: PriceGrid,
    pub dists: Vec<PriceDistribution>,
    pub x: GroundTruth,
    pub z: GroundTruth,
    pub a: f64,
}

impl IndistinguishablePair {
    /// `lower_probs` is the distribution over `p_1 … p_{k−1}`, repeated every round.
    pub fn new(grid: PriceGrid, lower_probs: &[f64], a: f64, rounds: usize) -> Result<Self, OracleError> {
        let k = grid.len();
        if k < 2 || lower_probs.len() != k - 1 {
            return Err(OracleError::Instance(format!("need k ≥ 2 and k − 1 = {} lower probabilities", k.saturating_sub(1))));
        }
        if !(a > 0.0 && a <= 1.0) {
            return Err(OracleError::Instance(format!("allocation level a = {a} must lie in (0, 1]")));
        }
        if lower_probs[k - 2] <= 0.0 {
            return Err(OracleError::Instance("p_{k-1} must carry positive probability".into()));
        }
        let mut dense = lower_probs.to_vec();
        dense.push(0.0);
        let dist = PriceDistribution::from_dense(&dense).map_err(|e| OracleError::Instance(e.to_string()))?;
        let mut x_row = vec![a; k];
        x_row[k - 1] = 0.0;
        let z_row = vec![a; k];
        Ok(IndistinguishablePair {
            grid,
            dists: vec![dist; rounds],
            x: GroundTruth::new(vec![x_row; rounds])?,
            z: GroundTruth::new(vec![z_row; rounds])?,
            a,
        })
    }

    /// `a (p_k − p_{k−1})`.
    pub fn regret_gap(&self) -> f64 {
        let k = self.grid.len();
        self.a * (self.grid.level(k - 1) - self.grid.level(k - 2))
    }
}
