//! Price grids, price distributions and seller transcripts.
//!
//! A transcript is the audit's only input: for each round the posted price (as a
//! grid index), the allocation observed at that price, and the distribution the
//! price was drawn from. On disk it is line-oriented JSON:
//!
//! ```text
//! {"grid":[5.0000000000000000e-1,7.0000000000000000e-1],"continuum_upper":null}
//! {"t":1,"posted":0,"alloc":4.0000000000000000e-1,"support":[0,1],"probs":[5.0000000000000000e-1,5.0000000000000000e-1]}
//! ```
//!
//! Floats are written with 17 significant digits so that a read after a write
//! reproduces every field bit for bit.

use std::fmt;
use std::io::{self, BufRead, Write};

use serde::Deserialize;
use thiserror::Error;

/// Probabilities smaller than this are rejected rather than treated as support.
pub const MIN_SUPPORT_PROB: f64 = 1e-15;
/// Tolerance on `Σ probs = 1`.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Ordered price levels, optionally carved out of a continuum `[0, h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceGrid {
    levels: Vec<f64>,
    continuum_upper: Option<f64>,
}

impl PriceGrid {
    pub fn new(levels: Vec<f64>, continuum_upper: Option<f64>) -> Result<Self, TranscriptError> {
        let grid = PriceGrid { levels, continuum_upper };
        let violations = grid.violations();
        if violations.is_empty() {
            Ok(grid)
        } else {
            Err(TranscriptError::Invalid(violations))
        }
    }

    /// Grid `{num/den : num ∈ numerators}`, each level the correctly rounded quotient.
    pub fn from_fractions(numerators: impl IntoIterator<Item = u32>, den: u32) -> Result<Self, TranscriptError> {
        Self::new(numerators.into_iter().map(|n| n as f64 / den as f64).collect(), None)
    }

    /// The 19-level grid `0.05, 0.10, …, 0.95`.
    pub fn twentieths() -> Self {
        Self::from_fractions(1..=19, 20).expect("static grid is valid")
    }

    pub(crate) fn unchecked(levels: Vec<f64>, continuum_upper: Option<f64>) -> Self {
        PriceGrid { levels, continuum_upper }
    }

    pub fn with_continuum_upper(mut self, h: f64) -> Result<Self, TranscriptError> {
        self.continuum_upper = Some(h);
        Self::new(self.levels, self.continuum_upper)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, index: usize) -> f64 {
        self.levels[index]
    }

    /// Highest price level, `p̄`.
    pub fn max_price(&self) -> f64 {
        self.levels.last().copied().unwrap_or(0.0)
    }

    pub fn continuum_upper(&self) -> Option<f64> {
        self.continuum_upper
    }

    /// Index of the level within `tol` of `price`.
    pub fn index_of(&self, price: f64, tol: f64) -> Option<usize> {
        self.levels.iter().position(|&l| (l - price).abs() <= tol)
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.levels.is_empty() {
            out.push(Violation::header("grid", "grid has no price levels"));
        }
        for (i, &l) in self.levels.iter().enumerate() {
            if !l.is_finite() || l < 0.0 {
                out.push(Violation::header("grid", format!("level {i} ({l}) is not a non-negative number")));
            }
        }
        if self.levels.windows(2).any(|w| !(w[0] < w[1])) {
            out.push(Violation::header("grid", "levels are not strictly increasing"));
        }
        if let Some(h) = self.continuum_upper {
            if !h.is_finite() || h < self.max_price() {
                out.push(Violation::header("continuum_upper", format!("{h} is below the highest level {}", self.max_price())));
            }
        }
        out
    }
}

/// Sparse distribution over grid indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceDistribution {
    support: Vec<usize>,
    probs: Vec<f64>,
}

impl PriceDistribution {
    pub fn new(support: Vec<usize>, probs: Vec<f64>) -> Result<Self, DistributionError> {
        let dist = PriceDistribution { support, probs };
        dist.check()?;
        Ok(dist)
    }

    pub fn point_mass(index: usize) -> Self {
        PriceDistribution { support: vec![index], probs: vec![1.0] }
    }

    /// Builds a distribution from one weight per grid level; zero entries are off-support.
    pub fn from_dense(probs: &[f64]) -> Result<Self, DistributionError> {
        let (support, probs) = probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(i, &p)| (i, p))
            .unzip();
        Self::new(support, probs)
    }

    pub(crate) fn unchecked(support: Vec<usize>, probs: Vec<f64>) -> Self {
        PriceDistribution { support, probs }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    /// `π(index)`, zero off the support.
    pub fn prob(&self, index: usize) -> f64 {
        match self.support.binary_search(&index) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, index: usize) -> bool {
        self.support.binary_search(&index).is_ok()
    }

    /// Smallest probability on the support.
    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Dense vector of length `k`.
    pub fn to_dense(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; k];
        for (i, p) in self.iter() {
            if i < k {
                out[i] = p;
            }
        }
        out
    }

    /// Inverse-CDF draw for `u ∈ [0, 1)`.
    pub fn sample(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, p) in self.iter() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        *self.support.last().expect("distribution has a non-empty support")
    }

    fn check(&self) -> Result<(), DistributionError> {
        if self.support.is_empty() {
            return Err(DistributionError::EmptySupport);
        }
        if self.support.len() != self.probs.len() {
            return Err(DistributionError::LengthMismatch { support: self.support.len(), probs: self.probs.len() });
        }
        if self.support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DistributionError::UnsortedSupport);
        }
        for (&i, &p) in self.support.iter().zip(&self.probs) {
            if !p.is_finite() || p < MIN_SUPPORT_PROB {
                return Err(DistributionError::BadProbability { index: i, prob: p });
            }
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(DistributionError::NotNormalized { sum });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("empty support")]
    EmptySupport,
    #[error("support has {support} entries but probs has {probs}")]
    LengthMismatch { support: usize, probs: usize },
    #[error("support indices are not unique and sorted")]
    UnsortedSupport,
    #[error("probability {prob} at index {index} is not a positive number of at least 1e-15")]
    BadProbability { index: usize, prob: f64 },
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptRecord {
    /// 1-based round number `t`.
    pub round: u64,
    /// Grid index of the posted price `p^t`.
    pub posted: usize,
    /// Allocation observed at the posted price, `x^t(p^t)`.
    pub allocation: f64,
    pub distribution: PriceDistribution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub grid: PriceGrid,
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn new(grid: PriceGrid, records: Vec<TranscriptRecord>) -> Self {
        Transcript { grid, records }
    }

    /// Number of rounds `T`.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of price levels `k`.
    pub fn k(&self) -> usize {
        self.grid.len()
    }

    pub fn posted(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.posted).collect()
    }

    pub fn allocations(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.allocation).collect()
    }

    pub fn distributions(&self) -> Vec<PriceDistribution> {
        self.records.iter().map(|r| r.distribution.clone()).collect()
    }

    /// The first `rounds` rounds.
    pub fn truncated(&self, rounds: usize) -> Transcript {
        Transcript { grid: self.grid.clone(), records: self.records[..rounds.min(self.len())].to_vec() }
    }
}

/// Cost interval `[c̲, c̄]` the auditor considers plausible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRange {
    lo: f64,
    hi: f64,
}

impl CostRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self, ConfigError> {
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(ConfigError::CostRange { lo, hi });
        }
        Ok(CostRange { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditConfig {
    pub cost_range: CostRange,
    /// Regret threshold `r`; the audit passes when the estimate plus margins is at most `2r`.
    pub threshold_r: f64,
    /// The audit errs with probability at most `alpha`.
    pub confidence_alpha: f64,
    /// Whether the seller chose the grid inside `[0, h]` herself.
    pub endogenous: bool,
}

impl AuditConfig {
    pub fn new(cost_range: CostRange, threshold_r: f64, confidence_alpha: f64, endogenous: bool) -> Result<Self, ConfigError> {
        if !(threshold_r > 0.0 && threshold_r.is_finite()) {
            return Err(ConfigError::Threshold(threshold_r));
        }
        if !(confidence_alpha > 0.0 && confidence_alpha < 1.0) {
            return Err(ConfigError::Alpha(confidence_alpha));
        }
        Ok(AuditConfig { cost_range, threshold_r, confidence_alpha, endogenous })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cost range [{lo}, {hi}] must satisfy 0 <= lo <= hi")]
    CostRange { lo: f64, hi: f64 },
    #[error("threshold r = {0} must be positive")]
    Threshold(f64),
    #[error("confidence alpha = {0} must lie in (0, 1)")]
    Alpha(f64),
}

/// One broken invariant. `round` is `None` for header (grid) problems.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub round: Option<u64>,
    pub field: &'static str,
    pub message: String,
}

impl Violation {
    fn header(field: &'static str, message: impl Into<String>) -> Self {
        Violation { round: None, field, message: message.into() }
    }

    fn at(round: u64, field: &'static str, message: impl Into<String>) -> Self {
        Violation { round: Some(round), field, message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.round {
            Some(t) => write!(f, "round {t}: {}: {}", self.field, self.message),
            None => write!(f, "header: {}: {}", self.field, self.message),
        }
    }
}

/// Every broken invariant in `transcript`; empty iff the transcript is well formed.
pub fn validate(transcript: &Transcript) -> Vec<Violation> {
    let mut out = transcript.grid.violations();
    let k = transcript.grid.len();
    for (i, rec) in transcript.records.iter().enumerate() {
        let expected = i as u64 + 1;
        let t = rec.round;
        if t != expected {
            out.push(Violation::at(t, "t", format!("round numbers must run 1..T contiguously; expected {expected}")));
        }
        if !(rec.allocation.is_finite() && (0.0..=1.0).contains(&rec.allocation)) {
            out.push(Violation::at(t, "alloc", format!("allocation out of [0,1]: {}", rec.allocation)));
        }
        if let Err(e) = rec.distribution.check() {
            out.push(Violation::at(t, "probs", e.to_string()));
        }
        if let Some(&bad) = rec.distribution.support.iter().find(|&&i| i >= k) {
            out.push(Violation::at(t, "support", format!("index {bad} is outside the {k}-level grid")));
        }
        if !rec.distribution.contains(rec.posted) {
            out.push(Violation::at(t, "posted", format!("posted index {} is not in the support", rec.posted)));
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid transcript: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// 17 significant digits, valid as a JSON number.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_list<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    let parts: Vec<String> = items.iter().map(f).collect();
    format!("[{}]", parts.join(","))
}

pub(crate) fn write_header<W: Write>(grid: &PriceGrid, sink: &mut W) -> io::Result<()> {
    let h = grid.continuum_upper.map_or_else(|| "null".to_string(), fmt_f64);
    writeln!(sink, "{{\"grid\":{},\"continuum_upper\":{}}}", fmt_list(&grid.levels, |&l| fmt_f64(l)), h)
}

/// Writes a valid transcript; an invalid one is refused.
pub fn write_transcript<W: Write>(transcript: &Transcript, sink: &mut W) -> Result<(), TranscriptError> {
    let violations = validate(transcript);
    if !violations.is_empty() {
        return Err(TranscriptError::Invalid(violations));
    }
    write_header(&transcript.grid, sink)?;
    for rec in &transcript.records {
        writeln!(
            sink,
            "{{\"t\":{},\"posted\":{},\"alloc\":{},\"support\":{},\"probs\":{}}}",
            rec.round,
            rec.posted,
            fmt_f64(rec.allocation),
            fmt_list(&rec.distribution.support, |i| i.to_string()),
            fmt_list(&rec.distribution.probs, |&p| fmt_f64(p)),
        )?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct RawHeader {
    grid: Vec<f64>,
    continuum_upper: Option<f64>,
}

#[derive(Deserialize)]
struct RawRecord {
    t: u64,
    posted: usize,
    alloc: f64,
    support: Option<Vec<usize>>,
    probs: Option<Vec<f64>>,
}

struct RawTranscript {
    grid: PriceGrid,
    lines: Vec<(usize, RawRecord)>,
}

fn read_raw<R: BufRead>(source: R) -> Result<RawTranscript, TranscriptError> {
    let mut grid = None;
    let mut lines = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if grid.is_none() {
            let h: RawHeader = serde_json::from_str(&line)
                .map_err(|e| TranscriptError::Parse { line: line_no, message: format!("bad header: {e}") })?;
            grid = Some(PriceGrid::unchecked(h.grid, h.continuum_upper));
            continue;
        }
        let rec: RawRecord = serde_json::from_str(&line)
            .map_err(|e| TranscriptError::Parse { line: line_no, message: format!("bad record: {e}") })?;
        lines.push((line_no, rec));
    }
    let grid = grid.ok_or(TranscriptError::Parse { line: 1, message: "missing header line".into() })?;
    Ok(RawTranscript { grid, lines })
}

/// Reads and validates a transcript. An empty record section yields `T = 0`.
pub fn read_transcript<R: BufRead>(source: R) -> Result<Transcript, TranscriptError> {
    let raw = read_raw(source)?;
    let mut records = Vec::with_capacity(raw.lines.len());
    for (line, rec) in raw.lines {
        let (Some(support), Some(probs)) = (rec.support, rec.probs) else {
            return Err(TranscriptError::Parse { line, message: "record lacks \"support\" or \"probs\"".into() });
        };
        records.push(TranscriptRecord {
            round: rec.t,
            posted: rec.posted,
            allocation: rec.alloc,
            distribution: PriceDistribution::unchecked(support, probs),
        });
    }
    let transcript = Transcript { grid: raw.grid, records };
    let violations = validate(&transcript);
    if violations.is_empty() {
        Ok(transcript)
    } else {
        Err(TranscriptError::Invalid(violations))
    }
}

/// A transcript without recorded price distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTranscript {
    pub grid: PriceGrid,
    pub posted: Vec<usize>,
    pub allocations: Vec<f64>,
}

impl ReducedTranscript {
    pub fn len(&self) -> usize {
        self.posted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posted.is_empty()
    }
}

impl From<&Transcript> for ReducedTranscript {
    fn from(t: &Transcript) -> Self {
        ReducedTranscript { grid: t.grid.clone(), posted: t.posted(), allocations: t.allocations() }
    }
}

/// Reads a transcript whose records may omit `support`/`probs`; any present are ignored.
pub fn read_reduced_transcript<R: BufRead>(source: R) -> Result<ReducedTranscript, TranscriptError> {
    let raw = read_raw(source)?;
    let mut violations = raw.grid.violations();
    let k = raw.grid.len();
    let mut posted = Vec::with_capacity(raw.lines.len());
    let mut allocations = Vec::with_capacity(raw.lines.len());
    for (i, (_, rec)) in raw.lines.into_iter().enumerate() {
        if rec.t != i as u64 + 1 {
            violations.push(Violation::at(rec.t, "t", format!("round numbers must run 1..T contiguously; expected {}", i + 1)));
        }
        if rec.posted >= k {
            violations.push(Violation::at(rec.t, "posted", format!("index {} is outside the {k}-level grid", rec.posted)));
        }
        if !(rec.alloc.is_finite() && (0.0..=1.0).contains(&rec.alloc)) {
            violations.push(Violation::at(rec.t, "alloc", format!("allocation out of [0,1]: {}", rec.alloc)));
        }
        posted.push(rec.posted);
        allocations.push(rec.alloc);
    }
    if violations.is_empty() {
        Ok(ReducedTranscript { grid: raw.grid, posted, allocations })
    } else {
        Err(TranscriptError::Invalid(violations))
    }
}

pub fn write_reduced_transcript<W: Write>(t: &ReducedTranscript, sink: &mut W) -> Result<(), TranscriptError> {
    write_header(&t.grid, sink)?;
    for (i, (&p, &x)) in t.posted.iter().zip(&t.allocations).enumerate() {
        writeln!(sink, "{{\"t\":{},\"posted\":{},\"alloc\":{}}}", i + 1, p, fmt_f64(x))?;
    }
    Ok(())
}
