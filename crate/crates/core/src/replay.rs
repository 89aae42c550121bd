//! Re-running margin voting over recorded crowdsourced labels.
//!
//! A vote is correct when its label matches the item's gold label, so the
//! running lead is (#correct − #incorrect) over the drawn labels. Each
//! replay draws from its own stream keyed by experiment context, item id and
//! repetition, which keeps results stable under parallel execution and
//! independent of which other items survived a filter.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form;
use crate::error::{Error, Result};
use crate::montecarlo::WALK_STEP_CAP;
use crate::params::VotingSpec;
use crate::seed::{self, StreamRng};

/// Column names of the label file, in order.
pub const LABEL_COLUMNS: [&str; 4] = ["worker_id", "item_id", "label", "gold"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub worker_id: String,
    pub item_id: String,
    pub label: bool,
    pub gold: bool,
}

impl LabelRecord {
    pub fn is_correct(&self) -> bool {
        self.label == self.gold
    }
}

/// Per-worker and per-item frequency of correct labels.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct AccuracyMaps {
    pub worker: BTreeMap<String, f64>,
    pub item: BTreeMap<String, f64>,
}

impl AccuracyMaps {
    fn compute(records: &[LabelRecord]) -> Self {
        let mut worker: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
        let mut item: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
        for r in records {
            for (map, key) in [(&mut worker, &r.worker_id), (&mut item, &r.item_id)] {
                let e = map.entry(key.as_str()).or_default();
                e.0 += r.is_correct() as u64;
                e.1 += 1;
            }
        }
        let freq = |m: BTreeMap<&str, (u64, u64)>| -> BTreeMap<String, f64> {
            m.into_iter()
                .map(|(k, (c, n))| (k.to_string(), c as f64 / n as f64))
                .collect()
        };
        Self {
            worker: freq(worker),
            item: freq(item),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelDataset {
    records: Vec<LabelRecord>,
    accuracy: AccuracyMaps,
    pool_accuracy: f64,
    by_item: BTreeMap<String, Vec<usize>>,
    /// Accuracies of the unfiltered source; filters always screen on these.
    basis: Arc<AccuracyMaps>,
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else {
        values.sum::<f64>() / n as f64
    }
}

impl LabelDataset {
    /// Builds a dataset, rejecting repeated (worker, item) pairs.
    ///
    /// Line numbers in errors assume one header line followed by the records.
    pub fn from_records(records: Vec<LabelRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if !seen.insert((r.worker_id.as_str(), r.item_id.as_str())) {
                return Err(Error::DuplicateLabel {
                    line: i as u64 + 2,
                    worker: r.worker_id.clone(),
                    item: r.item_id.clone(),
                });
            }
        }
        drop(seen);
        let accuracy = AccuracyMaps::compute(&records);
        let basis = Arc::new(accuracy.clone());
        Ok(Self::assemble(records, accuracy, basis))
    }

    fn assemble(records: Vec<LabelRecord>, accuracy: AccuracyMaps, basis: Arc<AccuracyMaps>) -> Self {
        let mut by_item: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            by_item.entry(r.item_id.clone()).or_default().push(i);
        }
        let pool_accuracy = mean(accuracy.worker.values().copied());
        Self {
            records,
            accuracy,
            pool_accuracy,
            by_item,
            basis,
        }
    }

    pub fn records(&self) -> &[LabelRecord] {
        &self.records
    }

    pub fn worker_accuracy(&self) -> &BTreeMap<String, f64> {
        &self.accuracy.worker
    }

    pub fn item_accuracy(&self) -> &BTreeMap<String, f64> {
        &self.accuracy.item
    }

    /// Mean of the per-worker accuracies; NaN for an empty dataset.
    pub fn pool_accuracy(&self) -> f64 {
        self.pool_accuracy
    }

    pub fn screening_basis(&self) -> &AccuracyMaps {
        &self.basis
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_workers(&self) -> usize {
        self.accuracy.worker.len()
    }

    pub fn n_items(&self) -> usize {
        self.by_item.len()
    }

    pub fn item_ids(&self) -> impl Iterator<Item = &str> {
        self.by_item.keys().map(String::as_str)
    }

    /// Correctness of every label recorded for an item, in file order.
    pub fn item_votes(&self, item_id: &str) -> Result<Vec<bool>> {
        self.by_item
            .get(item_id)
            .map(|idx| idx.iter().map(|&i| self.records[i].is_correct()).collect())
            .ok_or_else(|| Error::UnknownItem(item_id.to_string()))
    }
}

fn parse_binary(field: &str, column: &str, line: u64) -> Result<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Parse {
            line,
            message: format!("{column} must be 0 or 1, got {other:?}"),
        }),
    }
}

/// Reads a `worker_id,item_id,label,gold` CSV with a header row.
pub fn read_labels<R: Read>(reader: R) -> Result<LabelDataset> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv.headers().map_err(|e| csv_error(e, 1))?.clone();
    if headers.iter().collect::<Vec<_>>() != LABEL_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "header must be {}, got {}",
                LABEL_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut records = Vec::new();
    for (i, row) in csv.records().enumerate() {
        let fallback_line = i as u64 + 2;
        let row = row.map_err(|e| csv_error(e, fallback_line))?;
        let line = row.position().map_or(fallback_line, |p| p.line());
        if row.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields, found {}", row.len()),
            });
        }
        if row[0].is_empty() || row[1].is_empty() {
            return Err(Error::Parse {
                line,
                message: "worker_id and item_id must be non-empty".into(),
            });
        }
        records.push(LabelRecord {
            worker_id: row[0].to_string(),
            item_id: row[1].to_string(),
            label: parse_binary(&row[2], "label", line)?,
            gold: parse_binary(&row[3], "gold", line)?,
        });
    }
    LabelDataset::from_records(records)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelDataset> {
    read_labels(std::fs::File::open(path)?)
}

/// Writes the dataset in the label file format.
pub fn write_labels<W: Write>(ds: &LabelDataset, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    csv.write_record(LABEL_COLUMNS).map_err(io)?;
    for r in &ds.records {
        csv.write_record([
            r.worker_id.as_str(),
            r.item_id.as_str(),
            if r.label { "1" } else { "0" },
            if r.gold { "1" } else { "0" },
        ])
        .map_err(io)?;
    }
    csv.flush()?;
    Ok(())
}

/// Every worker labels every item; each label is correct with probability `p`.
/// Gold labels are fair coin flips.
pub fn generate_synthetic(p: f64, n_workers: usize, n_items: usize, seed: u64) -> Result<LabelDataset> {
    let acc = crate::params::WorkerAccuracy::new(p)?;
    let w_width = n_workers.saturating_sub(1).to_string().len().max(3);
    let i_width = n_items.saturating_sub(1).to_string().len().max(4);
    let mut gold_rng = seed::stream(seed, &[0]);
    let golds: Vec<bool> = (0..n_items).map(|_| gold_rng.random_bool(0.5)).collect();
    let mut rng = seed::stream(seed, &[1]);
    let mut records = Vec::with_capacity(n_workers * n_items);
    for w in 0..n_workers {
        for (i, &gold) in golds.iter().enumerate() {
            let correct = rng.random_bool(acc.value());
            records.push(LabelRecord {
                worker_id: format!("w{w:0w_width$}"),
                item_id: format!("i{i:0i_width$}"),
                label: if correct { gold } else { !gold },
                gold,
            });
        }
    }
    LabelDataset::from_records(records)
}

fn check_threshold(name: &'static str, tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("threshold must lie in [0, 1], got {tau}"),
        })
    }
}

/// Keeps labels whose worker accuracy is above `tau_w` and whose item
/// accuracy is above `tau_i` (both strict).
///
/// Screening uses the accuracies of the original unfiltered dataset, so
/// filtering twice with the same thresholds is the same as filtering once.
/// The returned dataset's own accuracy maps are recomputed on the subset.
pub fn filter_dataset(ds: &LabelDataset, tau_w: f64, tau_i: f64) -> Result<LabelDataset> {
    check_threshold("tau_w", tau_w)?;
    check_threshold("tau_i", tau_i)?;
    let basis = &ds.basis;
    let records: Vec<LabelRecord> = ds
        .records
        .iter()
        .filter(|r| basis.worker[&r.worker_id] > tau_w && basis.item[&r.item_id] > tau_i)
        .cloned()
        .collect();
    let accuracy = AccuracyMaps::compute(&records);
    Ok(LabelDataset::assemble(records, accuracy, Arc::clone(&ds.basis)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    /// A recorded label may be drawn any number of times.
    With,
    /// Each recorded label is drawn at most once per replay.
    Without,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Consensus {
    Correct,
    Incorrect,
    /// The item's labels ran out before the margin was reached.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayOutcome {
    pub item_id: String,
    pub consensus: Consensus,
    pub votes_cast: u64,
}

fn check_delta(delta: u32) -> Result<()> {
    if delta == 0 {
        Err(Error::InvalidThreshold(0.0))
    } else {
        Ok(())
    }
}

/// Draws labels for one item until the lead reaches `delta`.
pub fn replay_item<R: Rng + ?Sized>(
    ds: &LabelDataset,
    item_id: &str,
    delta: u32,
    mode: ReplayMode,
    rng: &mut R,
) -> Result<ReplayOutcome> {
    check_delta(delta)?;
    let votes = ds.item_votes(item_id)?;
    let (consensus, votes_cast) = replay_votes(&votes, delta, mode, rng)?;
    Ok(ReplayOutcome {
        item_id: item_id.to_string(),
        consensus,
        votes_cast,
    })
}

fn replay_votes<R: Rng + ?Sized>(
    votes: &[bool],
    delta: u32,
    mode: ReplayMode,
    rng: &mut R,
) -> Result<(Consensus, u64)> {
    let target = delta as i64;
    let n = votes.len();
    let mut lead = 0i64;
    let mut cast = 0u64;
    match mode {
        ReplayMode::With => {
            while lead.abs() < target {
                if cast == WALK_STEP_CAP {
                    return Err(Error::StepCapExceeded { cap: WALK_STEP_CAP });
                }
                lead += if votes[rng.random_range(0..n)] { 1 } else { -1 };
                cast += 1;
            }
        }
        ReplayMode::Without => {
            let mut order: Vec<usize> = (0..n).collect();
            for t in 0..n {
                if lead.abs() >= target {
                    break;
                }
                let j = rng.random_range(t..n);
                order.swap(t, j);
                lead += if votes[order[t]] { 1 } else { -1 };
                cast += 1;
            }
            if lead.abs() < target {
                return Ok((Consensus::Unresolved, cast));
            }
        }
    }
    let consensus = if lead > 0 {
        Consensus::Correct
    } else {
        Consensus::Incorrect
    };
    Ok((consensus, cast))
}

/// Stable 64-bit key for an item id (FNV-1a).
pub fn item_key(item_id: &str) -> u64 {
    item_id.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01B3)
    })
}

/// Stream for repetition `rep` of `item_id` within an experiment context.
pub fn replay_stream(seed: u64, context: &[u64], item_id: &str, rep: u64) -> StreamRng {
    let mut path = context.to_vec();
    path.push(item_key(item_id));
    path.push(rep);
    seed::stream(seed, &path)
}

/// Parameters of a per-item replay run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplayConfig {
    pub delta: u32,
    pub mode: ReplayMode,
    pub repetitions: u32,
    pub seed: u64,
    pub tau_w: f64,
    pub tau_i: f64,
}

impl ReplayConfig {
    fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        check_threshold("tau_w", self.tau_w)?;
        check_threshold("tau_i", self.tau_i)?;
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter {
                name: "repetitions",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    fn context(&self) -> [u64; 5] {
        [
            0,
            self.tau_w.to_bits(),
            self.tau_i.to_bits(),
            self.delta as u64,
            matches!(self.mode, ReplayMode::With) as u64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayRow {
    pub repetition: u32,
    #[serde(flatten)]
    pub outcome: ReplayOutcome,
}

/// Filters the dataset, then replays every surviving item `repetitions` times.
/// Rows are ordered by item id, then repetition.
pub fn replay_items(ds: &LabelDataset, config: &ReplayConfig) -> Result<Vec<ReplayRow>> {
    config.validate()?;
    let subset = filter_dataset(ds, config.tau_w, config.tau_i)?;
    let context = config.context();
    let jobs: Vec<(&str, u32)> = subset
        .item_ids()
        .flat_map(|item| (0..config.repetitions).map(move |rep| (item, rep)))
        .collect();
    jobs.into_par_iter()
        .map(|(item, rep)| {
            let mut rng = replay_stream(config.seed, &context, item, rep as u64);
            replay_item(&subset, item, config.delta, config.mode, &mut rng).map(|outcome| {
                ReplayRow {
                    repetition: rep,
                    outcome,
                }
            })
        })
        .collect()
}

/// Aggregate of one (τ_w, τ_i, δ) setting of the filter grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub tau_w: f64,
    pub tau_i: f64,
    pub delta: u32,
    pub workers: usize,
    pub items: usize,
    pub replays: u64,
    pub resolved: u64,
    pub unresolved: u64,
    /// Mean correctness over resolved replays.
    pub mean_correctness: Option<f64>,
    /// Mean votes cast over resolved replays.
    pub mean_votes: Option<f64>,
    pub unresolved_rate: Option<f64>,
    /// No labels survived the filter.
    pub empty: bool,
}

/// Without-replacement replays over a lattice of worker/item filters.
///
/// Produces one row per `(τ_w, τ_i)` pair and threshold, in that nesting
/// order; settings whose filtered dataset is empty are kept and flagged.
pub fn grid_experiment(
    ds: &LabelDataset,
    deltas: &[u32],
    taus: &[(f64, f64)],
    repetitions: u32,
    seed: u64,
) -> Result<Vec<GridRow>> {
    if deltas.is_empty() || taus.is_empty() {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: "threshold set and filter grid must be non-empty".into(),
        });
    }
    let mut rows = Vec::with_capacity(deltas.len() * taus.len());
    for &(tau_w, tau_i) in taus {
        for &delta in deltas {
            let config = ReplayConfig {
                delta,
                mode: ReplayMode::Without,
                repetitions,
                seed,
                tau_w,
                tau_i,
            };
            let outcomes = replay_items(ds, &config)?;
            let subset = filter_dataset(ds, tau_w, tau_i)?;
            rows.push(aggregate_grid_row(&config, &subset, &outcomes));
        }
    }
    Ok(rows)
}

fn aggregate_grid_row(config: &ReplayConfig, subset: &LabelDataset, outcomes: &[ReplayRow]) -> GridRow {
    let replays = outcomes.len() as u64;
    let (mut resolved, mut correct, mut votes) = (0u64, 0u64, 0u64);
    for row in outcomes {
        match row.outcome.consensus {
            Consensus::Unresolved => {}
            c => {
                resolved += 1;
                correct += (c == Consensus::Correct) as u64;
                votes += row.outcome.votes_cast;
            }
        }
    }
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    GridRow {
        tau_w: config.tau_w,
        tau_i: config.tau_i,
        delta: config.delta,
        workers: subset.n_workers(),
        items: subset.n_items(),
        replays,
        resolved,
        unresolved: replays - resolved,
        mean_correctness: ratio(correct, resolved),
        mean_votes: ratio(votes, resolved),
        unresolved_rate: ratio(replays - resolved, replays),
        empty: subset.is_empty(),
    }
}

/// One with-replacement pass over every item.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryRow {
    pub delta: u32,
    pub experiment: u32,
    pub quality_experimental: f64,
    pub quality_theory: f64,
    pub quality_gap: f64,
    pub expected_votes_experimental: f64,
    pub expected_votes_theory: f64,
    pub votes_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheorySummary {
    pub delta: u32,
    pub experiments: u32,
    pub quality_theory: f64,
    pub expected_votes_theory: f64,
    pub mean_quality: f64,
    pub mean_quality_gap: f64,
    /// Sample standard deviation of the per-experiment quality.
    pub sd_quality: f64,
    /// Binomial standard error of one experiment's quality estimate,
    /// `sqrt(Q_th (1 − Q_th) / items)`.
    pub quality_standard_error: f64,
    pub mean_votes: f64,
    pub mean_votes_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryComparison {
    pub pool_accuracy: f64,
    pub items: usize,
    pub rows: Vec<TheoryRow>,
    pub summaries: Vec<TheorySummary>,
}

/// Experimental quality and votes against theory at the pool accuracy.
pub fn theory_comparison(
    ds: &LabelDataset,
    deltas: &[u32],
    experiments: u32,
    seed: u64,
) -> Result<TheoryComparison> {
    if ds.is_empty() {
        return Err(Error::InvalidParameter {
            name: "dataset",
            reason: "theory comparison needs at least one label".into(),
        });
    }
    if deltas.is_empty() || experiments == 0 {
        return Err(Error::InvalidParameter {
            name: "experiments",
            reason: "need at least one threshold and one experiment".into(),
        });
    }
    let pool = ds.pool_accuracy();
    let items: Vec<&str> = ds.item_ids().collect();
    let n_items = items.len() as f64;
    let mut rows = Vec::with_capacity(deltas.len() * experiments as usize);
    let mut summaries = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        check_delta(delta)?;
        let spec = VotingSpec::new(pool, delta as f64)?;
        let q_th = closed_form::consensus_quality(&spec);
        let e_th = closed_form::expected_votes(&spec)?;
        let block: Vec<TheoryRow> = (0..experiments)
            .into_par_iter()
            .map(|experiment| {
                let context = [1, delta as u64, experiment as u64];
                let (mut correct, mut votes) = (0u64, 0u64);
                for item in &items {
                    let mut rng = replay_stream(seed, &context, item, 0);
                    let o = replay_item(ds, item, delta, ReplayMode::With, &mut rng)?;
                    correct += (o.consensus == Consensus::Correct) as u64;
                    votes += o.votes_cast;
                }
                let q = correct as f64 / n_items;
                let e = votes as f64 / n_items;
                Ok(TheoryRow {
                    delta,
                    experiment,
                    quality_experimental: q,
                    quality_theory: q_th,
                    quality_gap: q - q_th,
                    expected_votes_experimental: e,
                    expected_votes_theory: e_th,
                    votes_gap: e - e_th,
                })
            })
            .collect::<Result<_>>()?;
        let k = block.len() as f64;
        let mean_q = block.iter().map(|r| r.quality_experimental).sum::<f64>() / k;
        let mean_e = block.iter().map(|r| r.expected_votes_experimental).sum::<f64>() / k;
        let sd_q = if block.len() > 1 {
            (block
                .iter()
                .map(|r| (r.quality_experimental - mean_q).powi(2))
                .sum::<f64>()
                / (k - 1.0))
                .sqrt()
        } else {
            0.0
        };
        summaries.push(TheorySummary {
            delta,
            experiments,
            quality_theory: q_th,
            expected_votes_theory: e_th,
            mean_quality: mean_q,
            mean_quality_gap: mean_q - q_th,
            sd_quality: sd_q,
            quality_standard_error: (q_th * (1.0 - q_th) / n_items).sqrt(),
            mean_votes: mean_e,
            mean_votes_gap: mean_e - e_th,
        });
        rows.extend(block);
    }
    Ok(TheoryComparison {
        pool_accuracy: pool,
        items: items.len(),
        rows,
        summaries,
    })
}
