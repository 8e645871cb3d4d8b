use std::io::Write;

use anyhow::{bail, Result};
use serde::Serialize;

use pricing_audit::oracles::{best_in_hindsight_regret, true_calibrated_regret, GroundTruth};
use pricing_audit::sellers::{simulate, SimulationConfig, StrategySpec};
use pricing_audit::transcript::write_transcript;

use crate::commands::create;
use crate::config::ExperimentConfig;

/// Outcome of a manipulator-versus-learner run.
#[derive(Debug, Serialize)]
pub struct DemoSummary {
    pub phase1_rounds: usize,
    pub rounds: usize,
    /// First round of the window in which the learner should post the high price.
    pub window_start: usize,
    pub high_price: f64,
    pub learner_high_price_frequency: f64,
    /// Cumulative payoff divided by the phase-one length.
    pub payoff_per_phase1_round: [f64; 2],
    pub hindsight_regret: [f64; 2],
    pub calibrated_regret: [f64; 2],
}

/// `window_eps` sets the start of the checked window, `T + ⌈3 ε T⌉`.
pub fn cmd_manipulate_demo(cfg: &ExperimentConfig, window_eps: f64, write_files: bool) -> Result<DemoSummary> {
    cfg.validate()?;
    let (m, learner) = match (&cfg.sellers[0], &cfg.sellers[1]) {
        (StrategySpec::Manipulator { .. }, _) => (0, 1),
        (_, StrategySpec::Manipulator { .. }) => (1, 0),
        _ => bail!("manipulate-demo needs one seller of kind \"manipulator\""),
    };
    let StrategySpec::Manipulator { phase1_rounds, phase2_price, .. } = cfg.sellers[m] else { unreachable!() };
    let market = cfg.environment.build()?;
    let rounds = cfg.rounds();
    let sim = SimulationConfig { rounds, feedback: cfg.feedback, seed: cfg.seed };
    let out = simulate([&cfg.sellers[0], &cfg.sellers[1]], market.oracle.as_ref(), market.costs, sim)?;

    let grid = market.oracle.grid();
    let Some(high) = grid.index_of(phase2_price, 1e-9) else { bail!("phase-two price {phase2_price} is off the grid") };
    let window_start = phase1_rounds + (3.0 * window_eps * phase1_rounds as f64).ceil() as usize;
    let window = out.transcripts[learner].records.get(window_start.saturating_sub(1)..).unwrap_or(&[]);
    let frequency = window.iter().filter(|r| r.posted == high).count() as f64 / window.len().max(1) as f64;

    let mut summary = DemoSummary {
        phase1_rounds,
        rounds,
        window_start,
        high_price: phase2_price,
        learner_high_price_frequency: frequency,
        payoff_per_phase1_round: [0.0; 2],
        hindsight_regret: [0.0; 2],
        calibrated_regret: [0.0; 2],
    };
    for s in 0..2 {
        let truth = GroundTruth::from_oracle(market.oracle.as_ref(), s, &out.posted(1 - s));
        let tr = &out.transcripts[s];
        summary.payoff_per_phase1_round[s] = out.payoffs[s].iter().sum::<f64>() / phase1_rounds as f64;
        summary.hindsight_regret[s] = best_in_hindsight_regret(&truth.utilities(&tr.grid, market.costs[s]), &out.payoffs[s])?;
        summary.calibrated_regret[s] = true_calibrated_regret(&tr.grid, &tr.distributions(), &truth, market.costs[s])?;
    }

    if write_files {
        for s in 0..2 {
            let mut w = create(&cfg.out.join(format!("seller{}.jsonl", s + 1)))?;
            write_transcript(&out.transcripts[s], &mut w)?;
            w.flush()?;
        }
        let mut w = create(&cfg.out.join("payoffs.csv"))?;
        writeln!(w, "round,seller1,seller2")?;
        for (t, (a, b)) in out.payoffs[0].iter().zip(&out.payoffs[1]).enumerate() {
            writeln!(w, "{},{a},{b}", t + 1)?;
        }
        w.flush()?;
    }
    Ok(summary)
}
