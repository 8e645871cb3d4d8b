use serde::{Deserialize, Serialize};

use super::SellerError;

/// Posts `phase1_price` for `phase1_rounds` rounds, then `phase2_price` for `phase2_rounds`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManipulatorSchedule {
    pub phase1_rounds: usize,
    pub phase1_price: usize,
    pub phase2_rounds: usize,
    pub phase2_price: usize,
}

impl ManipulatorSchedule {
    /// Phase one lasts `t` rounds and phase two `⌈1.1 t⌉`.
    pub fn for_horizon(t: usize, phase1_price: usize, phase2_price: usize) -> Result<Self, SellerError> {
        if t == 0 {
            return Err(SellerError::Config("manipulation horizon must be positive".into()));
        }
        Ok(ManipulatorSchedule { phase1_rounds: t, phase1_price, phase2_rounds: (11 * t).div_ceil(10), phase2_price })
    }

    pub fn total_rounds(&self) -> usize {
        self.phase1_rounds + self.phase2_rounds
    }

    /// Price index for 1-based `round`.
    pub fn next(&self, round: usize) -> Result<usize, SellerError> {
        match round {
            0 => Err(SellerError::RoundOutOfHorizon { round, horizon: self.total_rounds() }),
            r if r <= self.phase1_rounds => Ok(self.phase1_price),
            r if r <= self.total_rounds() => Ok(self.phase2_price),
            _ => Err(SellerError::RoundOutOfHorizon { round, horizon: self.total_rounds() }),
        }
    }
}
