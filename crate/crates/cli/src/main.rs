use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use pricing_audit::aggregate::DriftMode;
use pricing_audit::sellers::StrategySpec;

mod commands;
mod config;
mod demo;
mod figures;
mod svg;

use commands::{EXIT_ERROR, EXIT_PASS};
use config::{AuditSettings, ExperimentConfig, Preset};

#[derive(Parser)]
#[command(name = "pricing-audit", version, about = "Simulate duopoly pricing and audit seller transcripts for calibrated regret")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replications and write one transcript per seller per replication.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Also write each seller's full allocation vectors (for --truth).
        #[arg(long)]
        with_truth: bool,
    },
    /// Audit a transcript with recorded price distributions.
    Audit {
        transcript: PathBuf,
        #[command(flatten)]
        audit: AuditArgs,
        /// Ground-truth allocations (CSV written by `simulate --with-truth`), added to the sweep.
        #[arg(long, requires = "sweep")]
        truth: Option<PathBuf>,
    },
    /// Audit a transcript of posted prices and allocations only.
    AuditAggregated {
        transcript: PathBuf,
        #[command(flatten)]
        audit: AuditArgs,
        /// Per-step drift bound of the price distributions.
        #[arg(long, conflicts_with = "drift_gamma", required_unless_present = "drift_gamma")]
        drift_eps: Option<f64>,
        /// Drift at most T^-γ per step.
        #[arg(long)]
        drift_gamma: Option<f64>,
        /// Claimed minimum probability of every supported price.
        #[arg(long)]
        floor: f64,
    },
    /// Reproduce the duopoly figures (CSV and SVG).
    Figures {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Manipulate a mean-based learner into supra-competitive prices.
    ManipulateDemo {
        #[command(flatten)]
        run: RunArgs,
        /// Length of the manipulator's first phase.
        #[arg(long)]
        phase1_rounds: Option<usize>,
        /// Learner step size.
        #[arg(long)]
        eta: Option<f64>,
        /// Table parameter ε; also sets the start of the checked window.
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    replications: Option<usize>,
}

impl RunArgs {
    fn resolve(&self, default: Preset) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, preset) => ExperimentConfig::preset(preset.unwrap_or(default)),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(r) = self.rounds {
            cfg.rounds = Some(r);
        }
        if let Some(r) = self.replications {
            cfg.replications = r;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct AuditArgs {
    /// Audit settings from an experiment configuration (JSON); flags override them.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    cost_lo: Option<f64>,
    #[arg(long)]
    cost_hi: Option<f64>,
    /// Regret threshold; the audit passes when R̃ + δ + d ≤ 2r.
    #[arg(long)]
    r: Option<f64>,
    /// Confidence parameter.
    #[arg(long)]
    alpha: Option<f64>,
    /// Include the discretization loss of a continuum of prices.
    #[arg(long)]
    endogenous: bool,
    /// Upper end of the price continuum.
    #[arg(long)]
    h: Option<f64>,
    /// Write `cost,estimated_regret[,true_regret]` rows here.
    #[arg(long)]
    sweep: Option<PathBuf>,
    /// Also write the report to DIR/report.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl AuditArgs {
    fn settings(&self) -> Result<AuditSettings> {
        let mut s = match &self.config {
            Some(path) => ExperimentConfig::load(path)?.audit,
            None => AuditSettings::default(),
        };
        s.cost_lo = self.cost_lo.unwrap_or(s.cost_lo);
        s.cost_hi = self.cost_hi.unwrap_or(s.cost_hi);
        s.r = self.r.unwrap_or(s.r);
        s.alpha = self.alpha.unwrap_or(s.alpha);
        s.endogenous |= self.endogenous;
        s.h = self.h.or(s.h);
        Ok(s)
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate { run, with_truth } => {
            commands::cmd_simulate(&run.resolve(Preset::Duopoly)?, with_truth)?;
            Ok(EXIT_PASS)
        }
        Command::Audit { transcript, audit, truth } => commands::cmd_audit(
            &transcript,
            &audit.settings()?,
            audit.sweep.as_deref(),
            truth.as_deref(),
            audit.out.as_deref(),
        ),
        Command::AuditAggregated { transcript, audit, drift_eps, drift_gamma, floor } => {
            let mode = match (drift_eps, drift_gamma) {
                (Some(eps), _) => DriftMode::Explicit { eps },
                (None, Some(gamma)) => DriftMode::Rate { gamma },
                (None, None) => unreachable!("clap requires one drift flag"),
            };
            commands::cmd_audit_aggregated(&transcript, &audit.settings()?, mode, floor, audit.sweep.as_deref(), audit.out.as_deref())
        }
        Command::Figures { run } => {
            let cfg = run.resolve(Preset::Duopoly)?;
            let summary = figures::cmd_figures(&cfg)?;
            commands::print_json(&summary)?;
            Ok(EXIT_PASS)
        }
        Command::ManipulateDemo { run, phase1_rounds, eta, epsilon } => {
            let mut cfg = run.resolve(Preset::Manipulation)?;
            if run.config.is_none() {
                cfg.environment = config::EnvironmentSpec::Table { epsilon: epsilon.to_string(), path: None };
            }
            for spec in cfg.sellers.iter_mut() {
                match spec {
                    StrategySpec::Manipulator { phase1_rounds: t, .. } => {
                        if let Some(n) = phase1_rounds {
                            *t = n;
                        }
                    }
                    StrategySpec::Mwu { eta: e } => {
                        if let Some(v) = eta {
                            *e = v;
                        }
                    }
                    _ => {}
                }
            }
            let summary = demo::cmd_manipulate_demo(&cfg, epsilon, run.out.is_some())?;
            commands::print_json(&summary)?;
            Ok(EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
