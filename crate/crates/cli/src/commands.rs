use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use pricing_audit::aggregate::{audit_reduced, AggregatedOutcome, DriftAssumption, DriftMode};
use pricing_audit::audit::{audit, pairwise_table, AuditReport, Verdict};
use pricing_audit::oracles::GroundTruth;
use pricing_audit::sellers::{simulate, SimulationConfig};
use pricing_audit::transcript::{read_reduced_transcript, read_transcript, write_transcript, PriceGrid, Transcript};

use crate::config::{AuditSettings, ExperimentConfig};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_FAIL: u8 = 2;
pub const EXIT_NO_VERDICT: u8 = 3;

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn replication_dir(out: &Path, rep: usize) -> PathBuf {
    out.join(format!("rep-{rep:03}"))
}

/// Per-round allocation vectors as CSV: `round,<level 1>,…,<level k>`.
pub fn write_truth(path: &Path, grid: &PriceGrid, truth: &GroundTruth) -> Result<()> {
    let mut w = create(path)?;
    let header: Vec<String> = grid.levels().iter().map(|p| p.to_string()).collect();
    writeln!(w, "round,{}", header.join(","))?;
    for (t, row) in truth.rows().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{},{}", t + 1, cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth(path: &Path, k: usize) -> Result<GroundTruth> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("{} line {}: bad number", path.display(), i + 1))?;
        if row.len() != k {
            bail!("{} line {}: {} allocations for a {k}-level grid", path.display(), i + 1, row.len());
        }
        rows.push(row);
    }
    Ok(GroundTruth::new(rows)?)
}

#[derive(Serialize)]
struct ReplicationSummary {
    replication: usize,
    seed: u64,
    mean_payoff: [f64; 2],
}

pub fn cmd_simulate(cfg: &ExperimentConfig, with_truth: bool) -> Result<()> {
    cfg.validate()?;
    let market = cfg.environment.build()?;
    let rounds = cfg.rounds();
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let summaries = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| -> Result<ReplicationSummary> {
            let seed = cfg.seed.wrapping_add(rep as u64);
            let sim = SimulationConfig { rounds, feedback: cfg.feedback, seed };
            let out = simulate([&cfg.sellers[0], &cfg.sellers[1]], market.oracle.as_ref(), market.costs, sim)?;
            let dir = replication_dir(&cfg.out, rep);
            for s in 0..2 {
                let mut w = create(&dir.join(format!("seller{}.jsonl", s + 1)))?;
                write_transcript(&out.transcripts[s], &mut w)?;
                w.flush()?;
                if with_truth {
                    let truth = GroundTruth::from_oracle(market.oracle.as_ref(), s, &out.posted(1 - s));
                    write_truth(&dir.join(format!("seller{}_truth.csv", s + 1)), &out.transcripts[s].grid, &truth)?;
                }
            }
            let mut w = create(&dir.join("payoffs.csv"))?;
            writeln!(w, "round,seller1,seller2")?;
            for (t, (a, b)) in out.payoffs[0].iter().zip(&out.payoffs[1]).enumerate() {
                writeln!(w, "{},{a},{b}", t + 1)?;
            }
            w.flush()?;
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            Ok(ReplicationSummary { replication: rep, seed, mean_payoff: [mean(&out.payoffs[0]), mean(&out.payoffs[1])] })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = create(&cfg.out.join("summary.csv"))?;
    writeln!(w, "replication,seed,mean_payoff1,mean_payoff2")?;
    for s in &summaries {
        writeln!(w, "{},{},{},{}", s.replication, s.seed, s.mean_payoff[0], s.mean_payoff[1])?;
    }
    w.flush()?;
    let mut w = create(&cfg.out.join("config.json"))?;
    serde_json::to_writer_pretty(&mut w, cfg)?;
    writeln!(w)?;
    w.flush()?;
    eprintln!("wrote {} replication(s) of {rounds} rounds to {}", cfg.replications, cfg.out.display());
    Ok(())
}

fn with_continuum(grid: PriceGrid, settings: &AuditSettings) -> Result<PriceGrid> {
    match settings.h {
        Some(h) => grid.with_continuum_upper(h).context("--h"),
        None => Ok(grid),
    }
}

pub fn load_transcript(path: &Path) -> Result<Transcript> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_transcript(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

/// `cost,estimated_regret[,true_regret]` over the report's curve samples.
fn write_sweep(path: &Path, report: &AuditReport, truth_curve: Option<&pricing_audit::audit::PwlInCost>) -> Result<()> {
    let mut w = create(path)?;
    match truth_curve {
        Some(_) => writeln!(w, "cost,estimated_regret,true_regret")?,
        None => writeln!(w, "cost,estimated_regret")?,
    }
    for [c, v] in &report.curve {
        match truth_curve {
            Some(tc) => writeln!(w, "{c},{v},{}", tc.eval(*c))?,
            None => writeln!(w, "{c},{v}")?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Prints `value` as JSON; a closed pipe on standard output is not an error.
pub fn print_json<T: Serialize>(value: &T) -> Result<String> {
    let text = serde_json::to_string_pretty(value)?;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}").and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(text),
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = print_json(value)?;
    if let Some(dir) = out {
        let mut w = create(&dir.join("report.json"))?;
        writeln!(w, "{text}")?;
        w.flush()?;
    }
    Ok(())
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail => EXIT_FAIL,
    }
}

pub fn cmd_audit(
    path: &Path,
    settings: &AuditSettings,
    sweep: Option<&Path>,
    truth: Option<&Path>,
    out: Option<&Path>,
) -> Result<u8> {
    let mut transcript = load_transcript(path)?;
    transcript.grid = with_continuum(transcript.grid, settings)?;
    let report = audit(&transcript, &settings.to_config()?)?;
    if let Some(sweep) = sweep {
        let truth_curve = match truth {
            Some(t) => {
                let truth = read_truth(t, transcript.k())?;
                if truth.len() != transcript.len() {
                    bail!("--truth has {} rounds, transcript has {}", truth.len(), transcript.len());
                }
                let rounds = transcript.records.iter().zip(truth.rows()).map(|(r, x)| (&r.distribution, x.as_slice()));
                Some(pairwise_table(&transcript.grid, rounds).into_curve())
            }
            None => None,
        };
        write_sweep(sweep, &report, truth_curve.as_ref())?;
    } else if truth.is_some() {
        bail!("--truth is only used with --sweep");
    }
    emit(&report, out)?;
    Ok(verdict_code(report.verdict))
}

pub fn cmd_audit_aggregated(
    path: &Path,
    settings: &AuditSettings,
    mode: DriftMode,
    floor: f64,
    sweep: Option<&Path>,
    out: Option<&Path>,
) -> Result<u8> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reduced = read_reduced_transcript(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
    reduced.grid = with_continuum(reduced.grid, settings)?;
    let drift = DriftAssumption::new(mode, floor)?;
    let outcome = audit_reduced(&reduced, &drift, &settings.to_config()?)?;
    if let (Some(sweep), AggregatedOutcome::Report(report)) = (sweep, &outcome) {
        write_sweep(sweep, report, None)?;
    }
    emit(&outcome, out)?;
    Ok(match &outcome {
        AggregatedOutcome::Report(r) => verdict_code(r.verdict),
        AggregatedOutcome::InsufficientData { rho_prime, floor, .. } => {
            eprintln!("insufficient data: support error {rho_prime:.4} is not below the claimed floor {floor}");
            EXIT_NO_VERDICT
        }
    })
}
