use std::collections::BTreeMap;
use std::fs;
use std::io::Write;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use pricing_audit::audit::{estimate_allocations, pairwise_table, PwlInCost};
use pricing_audit::oracles::GroundTruth;
use pricing_audit::sellers::{simulate, SimulationConfig};
use pricing_audit::transcript::Transcript;

use crate::commands::create;
use crate::config::ExperimentConfig;
use crate::svg::{heatmap, line_chart, Series};

pub const LAST_ROUNDS: usize = 10;
pub const HORIZONS: usize = 12;

/// Estimated and true regret curves of seller 1 over its first `n` rounds.
fn curves(tr: &Transcript, est: &[Vec<f64>], truth: &GroundTruth, n: usize) -> (PwlInCost, PwlInCost) {
    let records = &tr.records[..n];
    let estimated = pairwise_table(&tr.grid, records.iter().zip(&est[..n]).map(|(r, x)| (&r.distribution, x.as_slice())));
    let real = pairwise_table(&tr.grid, records.iter().zip(&truth.rows()[..n]).map(|(r, x)| (&r.distribution, x.as_slice())));
    (estimated.into_curve(), real.into_curve())
}

/// Log-spaced horizons from `min(1000, T)` to `T`.
pub fn horizons(rounds: usize) -> Vec<usize> {
    let lo = rounds.min(1000) as f64;
    let hi = rounds as f64;
    let mut hs: Vec<usize> = (0..HORIZONS)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (HORIZONS - 1) as f64).exp().round() as usize)
        .map(|h| h.clamp(1, rounds))
        .collect();
    hs.dedup();
    hs
}

/// Costs `lo … hi` at multiples of 0.01.
pub fn cost_grid(lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = ((lo * 100.0 - 1e-9).ceil() as i64, (hi * 100.0 + 1e-9).floor() as i64);
    (a..=b).map(|i| i as f64 / 100.0).collect()
}

struct Replication {
    last_pairs: Vec<(usize, usize)>,
    estimated: Vec<f64>,
    real: Vec<f64>,
    /// Per horizon: (plausible estimated regret, estimated at true cost, true at true cost).
    by_horizon: Vec<(f64, f64, f64)>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n.max(1) as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Serialize)]
pub struct FigureSummary {
    pub replications: usize,
    pub rounds: usize,
    pub modal_pair: (f64, f64),
    pub modal_count: usize,
    pub plausible_cost_median: f64,
    pub plausible_regret_median: f64,
    pub regret_at_true_cost_median: f64,
}

pub fn cmd_figures(cfg: &ExperimentConfig) -> Result<FigureSummary> {
    cfg.validate()?;
    let market = cfg.environment.build()?;
    let rounds = cfg.rounds();
    if rounds < LAST_ROUNDS {
        bail!("figures need at least {LAST_ROUNDS} rounds");
    }
    let settings = &cfg.audit;
    let costs = cost_grid(settings.cost_lo, settings.cost_hi);
    let hs = horizons(rounds);
    let true_cost = market.costs[0];
    let mut plausible = Vec::new();
    let reps: Vec<Replication> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| -> Result<(Replication, (f64, f64))> {
            let sim = SimulationConfig { rounds, feedback: cfg.feedback, seed: cfg.seed.wrapping_add(rep as u64) };
            let out = simulate([&cfg.sellers[0], &cfg.sellers[1]], market.oracle.as_ref(), market.costs, sim)?;
            let last_pairs = (rounds - LAST_ROUNDS..rounds)
                .map(|t| (out.transcripts[0].records[t].posted, out.transcripts[1].records[t].posted))
                .collect();
            let tr = &out.transcripts[0];
            let est = estimate_allocations(tr);
            let truth = GroundTruth::from_oracle(market.oracle.as_ref(), 0, &out.posted(1));
            let (estimated, real) = curves(tr, est.rows(), &truth, rounds);
            let best = estimated.minimize(settings.cost_lo, settings.cost_hi);
            let by_horizon = hs
                .iter()
                .map(|&n| {
                    let (e, r) = curves(tr, est.rows(), &truth, n);
                    (e.minimize(settings.cost_lo, settings.cost_hi).1, e.eval(true_cost), r.eval(true_cost))
                })
                .collect();
            Ok((
                Replication {
                    last_pairs,
                    estimated: costs.iter().map(|&c| estimated.eval(c)).collect(),
                    real: costs.iter().map(|&c| real.eval(c)).collect(),
                    by_horizon,
                },
                best,
            ))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .map(|(r, best)| {
            plausible.push(best);
            r
        })
        .collect();

    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let grid = market.oracle.grid();
    let k = grid.len();

    // Fig 1: strategy pairs over the last rounds of every replication.
    let mut counts = vec![vec![0usize; k]; k];
    for r in &reps {
        for &(a, b) in &r.last_pairs {
            counts[a][b] += 1;
        }
    }
    let mut w = create(&cfg.out.join("fig1_heatmap.csv"))?;
    writeln!(w, "seller1_price,seller2_price,count")?;
    for (a, row) in counts.iter().enumerate() {
        for (b, n) in row.iter().enumerate() {
            writeln!(w, "{},{},{n}", grid.level(a), grid.level(b))?;
        }
    }
    w.flush()?;
    // Rows are seller 2's price, columns seller 1's.
    let cells: Vec<Vec<f64>> = (0..k).map(|b| (0..k).map(|a| counts[a][b] as f64).collect()).collect();
    let svg = heatmap(
        &format!("Last {LAST_ROUNDS} rounds of {} runs", cfg.replications),
        "seller 1 price",
        "seller 2 price",
        grid.levels(),
        grid.levels(),
        &cells,
    );
    fs::write(cfg.out.join("fig1_heatmap.svg"), svg)?;
    let mut tally = BTreeMap::new();
    for r in &reps {
        for &pair in &r.last_pairs {
            *tally.entry(pair).or_insert(0usize) += 1;
        }
    }
    let (&(ma, mb), &modal_count) =
        tally.iter().max_by_key(|(pair, n)| (**n, std::cmp::Reverse(**pair))).expect("at least one replication");

    // Fig 2: regret against assumed cost.
    let est_mean: Vec<f64> = (0..costs.len()).map(|i| mean(reps.iter().map(|r| r.estimated[i]))).collect();
    let est_median: Vec<f64> = (0..costs.len()).map(|i| median(reps.iter().map(|r| r.estimated[i]).collect())).collect();
    let real_mean: Vec<f64> = (0..costs.len()).map(|i| mean(reps.iter().map(|r| r.real[i]))).collect();
    let mut w = create(&cfg.out.join("fig2_regret_vs_cost.csv"))?;
    writeln!(w, "cost,estimated_regret_mean,estimated_regret_median,true_regret_mean")?;
    for (i, c) in costs.iter().enumerate() {
        writeln!(w, "{c},{},{},{}", est_mean[i], est_median[i], real_mean[i])?;
    }
    w.flush()?;
    let svg = line_chart(
        "Regret of seller 1 against assumed cost",
        "assumed cost",
        "regret per round",
        &[
            Series { name: "estimated (mean)", points: costs.iter().copied().zip(est_mean.iter().copied()).collect() },
            Series { name: "true (mean)", points: costs.iter().copied().zip(real_mean.iter().copied()).collect() },
        ],
        false,
    );
    fs::write(cfg.out.join("fig2_regret_vs_cost.svg"), svg)?;

    // Fig 3: regret against horizon.
    let col = |j: usize, f: fn(&(f64, f64, f64)) -> f64| mean(reps.iter().map(|r| f(&r.by_horizon[j])));
    let mut w = create(&cfg.out.join("fig3_regret_vs_horizon.csv"))?;
    writeln!(w, "horizon,plausible_regret_mean,estimated_regret_at_true_cost_mean,true_regret_at_true_cost_mean")?;
    let mut series = [Vec::new(), Vec::new(), Vec::new()];
    for (j, &h) in hs.iter().enumerate() {
        let row = [col(j, |v| v.0), col(j, |v| v.1), col(j, |v| v.2)];
        writeln!(w, "{h},{},{},{}", row[0], row[1], row[2])?;
        for (s, v) in series.iter_mut().zip(row) {
            s.push((h as f64, v));
        }
    }
    w.flush()?;
    let [a, b, c] = series;
    let svg = line_chart(
        "Regret of seller 1 against horizon",
        "rounds",
        "regret per round",
        &[
            Series { name: "plausible (estimated)", points: a },
            Series { name: "at true cost (estimated)", points: b },
            Series { name: "at true cost (true)", points: c },
        ],
        true,
    );
    fs::write(cfg.out.join("fig3_regret_vs_horizon.svg"), svg)?;

    Ok(FigureSummary {
        replications: cfg.replications,
        rounds,
        modal_pair: (grid.level(ma), grid.level(mb)),
        modal_count,
        plausible_cost_median: median(plausible.iter().map(|p| p.0).collect()),
        plausible_regret_median: median(plausible.iter().map(|p| p.1).collect()),
        regret_at_true_cost_median: median(reps.iter().map(|r| r.by_horizon.last().map_or(f64::NAN, |v| v.1)).collect()),
    })
}
