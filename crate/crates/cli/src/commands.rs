use std::fmt;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use margin_vote::chain::{self, DEFAULT_MAX_STEPS, DEFAULT_TAIL_TOL};
use margin_vote::closed_form;
use margin_vote::comparison;
use margin_vote::montecarlo::{self, SimConfig};
use margin_vote::planning;
use margin_vote::replay::{self, ReplayConfig, ReplayMode};
use margin_vote::{ConsensusStats, VotingSpec};

use crate::args::{parse_grid, parse_int_list, Destination, Format, Grid, IntList};
use crate::figures::FiguresArgs;
use crate::table::{round_json, round_sig, Cell, Table};

/// One produced file, named relative to the output location.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub artifacts: Vec<Artifact>,
    /// Results are a set of files and `--out` names a directory.
    pub directory: bool,
}

impl Output {
    pub fn single(artifact: Artifact) -> Self {
        Self {
            artifacts: vec![artifact],
            directory: false,
        }
    }
}

/// Bad input detected by the front-end, reported with exit code 2.
#[derive(Debug)]
pub struct UsageError {
    pub flag: Option<String>,
    pub message: String,
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.flag {
            Some(flag) => write!(f, "invalid value for {flag}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for UsageError {}

/// Attributes a library validation error to a specific flag.
pub fn flag_err(e: margin_vote::Error, flag: &str) -> anyhow::Error {
    if e.is_validation() {
        anyhow::Error::new(UsageError {
            flag: Some(flag.to_string()),
            message: e.to_string(),
        })
    } else {
        anyhow::Error::new(e)
    }
}

pub fn flagged<T>(r: margin_vote::Result<T>, flag: &str) -> anyhow::Result<T> {
    r.map_err(|e| flag_err(e, flag))
}

pub fn json_artifact(name: &str, value: impl Serialize) -> anyhow::Result<Artifact> {
    let value = round_json(serde_json::to_value(value)?);
    let mut bytes = serde_json::to_vec_pretty(&value)?;
    bytes.push(b'\n');
    Ok(Artifact {
        name: format!("{name}.json"),
        bytes,
    })
}

pub fn table_artifact(name: &str, table: &Table, format: Format) -> anyhow::Result<Artifact> {
    match format {
        Format::Csv => Ok(Artifact {
            name: format!("{name}.csv"),
            bytes: table.to_csv(),
        }),
        Format::Json => json_artifact(name, table.to_json()),
    }
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "params", rename_all = "kebab-case")]
pub enum Command {
    /// Quality, expected votes and vote-count variance.
    Stats(StatsArgs),
    /// Distribution of the number of votes until consensus.
    Pdf(PdfArgs),
    /// Data files behind the standard figures.
    Figures(FiguresArgs),
    /// Monte Carlo estimates against theory.
    Simulate(SimulateArgs),
    /// Replay margin voting over a recorded label file.
    Replay(ReplayArgs),
    /// Threshold and payment equivalence between two worker pools.
    Plan(PlanArgs),
    /// Margin voting against majority voting.
    Compare(CompareArgs),
    /// Write a synthetic label file.
    Synthesize(SynthesizeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Stats(_) => "stats",
            Command::Pdf(_) => "pdf",
            Command::Figures(_) => "figures",
            Command::Simulate(_) => "simulate",
            Command::Replay(_) => "replay",
            Command::Plan(_) => "plan",
            Command::Compare(_) => "compare",
            Command::Synthesize(_) => "synthesize",
        }
    }

    pub fn run(&self) -> anyhow::Result<Output> {
        match self {
            Command::Stats(a) => a.run().map(Output::single),
            Command::Pdf(a) => a.run().map(Output::single),
            Command::Figures(a) => a.run(),
            Command::Simulate(a) => a.run().map(Output::single),
            Command::Replay(a) => a.run().map(Output::single),
            Command::Plan(a) => a.run().map(Output::single),
            Command::Compare(a) => a.run().map(Output::single),
            Command::Synthesize(a) => a.run().map(Output::single),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Figures(a) => Some(a.seed),
            Command::Simulate(a) => Some(a.seed),
            Command::Replay(a) => Some(a.seed),
            Command::Synthesize(a) => Some(a.seed),
            _ => None,
        }
    }

    /// Files read by the command, checksummed into the manifest.
    pub fn inputs(&self) -> Vec<PathBuf> {
        match self {
            Command::Replay(a) => vec![a.labels.clone()],
            _ => Vec::new(),
        }
    }

    pub fn destination(&self) -> &Destination {
        match self {
            Command::Stats(a) => &a.dest,
            Command::Pdf(a) => &a.dest,
            Command::Figures(a) => &a.dest,
            Command::Simulate(a) => &a.dest,
            Command::Replay(a) => &a.dest,
            Command::Plan(a) => &a.dest,
            Command::Compare(a) => &a.dest,
            Command::Synthesize(a) => &a.dest,
        }
    }
}

fn spec_from_flags(p: f64, delta: f64) -> anyhow::Result<VotingSpec> {
    let acc = flagged(margin_vote::WorkerAccuracy::new(p), "--p")?;
    flagged(VotingSpec::from_accuracy(acc, delta), "--delta")
}

fn integer_spec(p: f64, delta: f64) -> anyhow::Result<(VotingSpec, u32)> {
    let spec = spec_from_flags(p, delta)?;
    let d = flagged(spec.integer_threshold(), "--delta")?;
    Ok((spec, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Closed,
    Matrix,
    Both,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct StatsArgs {
    /// Worker accuracy in [0, 1].
    #[arg(long)]
    pub p: f64,
    /// Consensus threshold (positive integer).
    #[arg(long)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = Method::Closed)]
    pub method: Method,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    #[serde(skip)]
    pub dest: Destination,
}

fn stats_json(s: &ConsensusStats) -> Value {
    json!({
        "quality": s.quality,
        "expected_votes": s.expected_votes,
        "votes_variance": s.votes_variance,
        "std_dev": s.std_dev(),
    })
}

fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

impl StatsArgs {
    fn run(&self) -> anyhow::Result<Artifact> {
        let (spec, _) = integer_spec(self.p, self.delta)?;
        let mut sources = Vec::new();
        if self.method != Method::Matrix {
            sources.push(("closed_form", closed_form::stats(&spec)?));
        }
        if self.method != Method::Closed {
            sources.push(("matrix", chain::matrix_stats(&spec)?));
        }
        if self.format == Format::Csv {
            let mut t = Table::new(&["source", "p", "delta", "quality", "expected_votes", "votes_variance", "std_dev"]);
            for (name, s) in &sources {
                t.push(vec![
                    (*name).into(),
                    self.p.into(),
                    self.delta.into(),
                    s.quality.into(),
                    s.expected_votes.into(),
                    s.votes_variance.into(),
                    s.std_dev().into(),
                ]);
            }
            return table_artifact("stats", &t, Format::Csv);
        }
        let mut out = json!({ "p": self.p, "delta": self.delta });
        for (name, s) in &sources {
            out[*name] = stats_json(s);
        }
        if let [(_, a), (_, b)] = sources.as_slice() {
            out["relative_difference"] = json!({
                "quality": relative_difference(a.quality, b.quality),
                "expected_votes": relative_difference(a.expected_votes, b.expected_votes),
                "votes_variance": relative_difference(a.votes_variance, b.votes_variance),
            });
        }
        json_artifact("stats", out)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PdfArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub delta: f64,
    /// Stop once the probability of not yet having terminated is at most this.
    #[arg(long, default_value_t = DEFAULT_TAIL_TOL)]
    pub tail_tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    pub max_steps: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    #[serde(skip)]
    pub dest: Destination,
}

/// Rows `m, f_incorrect, f_correct, cdf`, where the cdf is accumulated from
/// the rounded probabilities so it can be recomputed from the file.
pub fn pdf_rows(dist: &chain::TerminationDistribution) -> Vec<(u64, f64, f64, f64)> {
    let mut cdf = 0.0;
    dist.entries
        .iter()
        .map(|e| {
            let (fi, fc) = (round_sig(e.f_incorrect), round_sig(e.f_correct));
            cdf += fi + fc;
            (e.m, fi, fc, cdf)
        })
        .collect()
}

impl PdfArgs {
    fn run(&self) -> anyhow::Result<Artifact> {
        let (spec, _) = integer_spec(self.p, self.delta)?;
        let model = chain::build_chain(&spec)?;
        let tail = flagged(
            chain::termination_distribution(&model, self.tail_tol, self.max_steps),
            if self.tail_tol > 0.0 && self.tail_tol < 1.0 {
                "--max-steps"
            } else {
                "--tail-tol"
            },
        )?;
        if tail.hit_step_cap {
            eprintln!(
                "warning: stopped at {} votes with tail mass {:e} above --tail-tol",
                tail.last_step(),
                tail.truncation_mass
            );
        }
        let mut t = Table::new(&["m", "f_incorrect", "f_correct", "cdf"]);
        for (m, fi, fc, cdf) in pdf_rows(&tail) {
            t.push(vec![m.into(), fi.into(), fc.into(), cdf.into()]);
        }
        table_artifact("pdf", &t, self.format)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// `json` gives the full report, `csv` the vote-count histogram.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    #[serde(skip)]
    pub dest: Destination,
}

fn z_score(diff: f64, se: f64) -> Option<f64> {
    (se > 0.0).then(|| diff / se)
}

impl SimulateArgs {
    fn run(&self) -> anyhow::Result<Artifact> {
        let (spec, delta) = integer_spec(self.p, self.delta)?;
        let config = flagged(SimConfig::new(spec, self.trials, self.seed), "--trials")?;
        let r = montecarlo::simulate_walks(&config)?;
        if self.format == Format::Csv {
            let mut t = Table::new(&["votes", "count"]);
            for (&m, &c) in &r.histogram {
                t.push(vec![m.into(), c.into()]);
            }
            return table_artifact("simulate", &t, Format::Csv);
        }
        let th = closed_form::stats(&spec)?;
        let block = |est: f64, theory: f64, se: f64| {
            json!({
                "estimate": est,
                "theory": theory,
                "standard_error": se,
                "z": z_score(est - theory, se),
                "relative_error": montecarlo::relative_error(est, theory).ok(),
            })
        };
        let histogram: Vec<Value> = r
            .histogram
            .iter()
            .map(|(m, c)| json!({ "votes": m, "count": c }))
            .collect();
        json_artifact(
            "simulate",
            json!({
                "p": self.p,
                "delta": delta,
                "trials": r.trials,
                "seed": self.seed,
                "correct": r.correct,
                "quality": block(r.quality_estimate, th.quality, r.standard_error_quality),
                "expected_votes": block(r.mean_votes, th.expected_votes, r.standard_error_mean),
                "votes_variance": block(r.votes_variance_estimate, th.votes_variance, r.standard_error_variance),
                "histogram": histogram,
            }),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// Replay every item and list the outcomes.
    Items,
    /// Without-replacement replays over a lattice of accuracy filters.
    Grid,
    /// With-replacement experiments against theory at the pool accuracy.
    Theory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    With,
    Without,
}

impl From<ModeArg> for ReplayMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::With => ReplayMode::With,
            ModeArg::Without => ReplayMode::Without,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// CSV with columns worker_id,item_id,label,gold.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_enum, default_value_t = Experiment::Items)]
    pub experiment: Experiment,
    /// Threshold for the items experiment.
    #[arg(long, default_value_t = 2)]
    pub delta: u32,
    /// Thresholds for the grid and theory experiments.
    #[arg(long, value_parser = parse_int_list, default_value = "1:5")]
    pub deltas: IntList,
    #[arg(long, value_enum, default_value_t = ModeArg::Without)]
    pub mode: ModeArg,
    /// Replays per item (items and grid experiments).
    #[arg(long, default_value_t = 20)]
    pub reps: u32,
    /// Number of experiments per threshold (theory experiment).
    #[arg(long, default_value_t = 100)]
    pub experiments: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Minimum worker accuracy (strict) for the items experiment.
    #[arg(long, default_value_t = 0.0)]
    pub tau_w: f64,
    /// Minimum item accuracy (strict) for the items experiment.
    #[arg(long, default_value_t = 0.0)]
    pub tau_i: f64,
    #[arg(long, value_parser = parse_grid, default_value = "0:0.9:0.1")]
    pub tau_w_grid: Grid,
    #[arg(long, value_parser = parse_grid, default_value = "0:0.9:0.1")]
    pub tau_i_grid: Grid,
    /// Defaults to csv for items and grid, json for theory.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[command(flatten)]
    #[serde(skip)]
    pub dest: Destination,
}

fn replay_flag(e: &margin_vote::Error) -> &'static str {
    use margin_vote::Error::*;
    match e {
        InvalidThreshold(_) => "--delta",
        InvalidParameter { name: "tau_w", .. } => "--tau-w",
        InvalidParameter { name: "tau_i", .. } => "--tau-i",
        InvalidParameter { name: "repetitions", .. } => "--reps",
        InvalidParameter { name: "experiments", .. } => "--experiments",
        _ => "--labels",
    }
}

impl ReplayArgs {
    fn run(&self) -> anyhow::Result<Artifact> {
        let ds = flagged(replay::load_labels(&self.labels), "--labels")
            .with_context(|| format!("reading {}", self.labels.display()))?;
        let lift = |e: margin_vote::Error| {
            let flag = replay_flag(&e);
            flag_err(e, flag)
        };
        match self.experiment {
            Experiment::Items => {
                let config = ReplayConfig {
                    delta: self.delta,
                    mode: self.mode.into(),
                    repetitions: self.reps,
                    seed: self.seed,
                    tau_w: self.tau_w,
                    tau_i: self.tau_i,
                };
                let rows = replay::replay_items(&ds, &config).map_err(lift)?;
                let mut t = Table::new(&["item_id", "repetition", "consensus", "votes_cast"]);
                for r in rows {
                    let consensus = serde_json::to_value(r.outcome.consensus)?;
                    t.push(vec![
                        r.outcome.item_id.into(),
                        r.repetition.into(),
                        consensus.as_str().unwrap_or_default().into(),
                        r.outcome.votes_cast.into(),
                    ]);
                }
                table_artifact("replay", &t, self.format.unwrap_or(Format::Csv))
            }
            Experiment::Grid => {
                let taus: Vec<(f64, f64)> = self
                    .tau_w_grid
                    .0
                    .iter()
                    .flat_map(|&w| self.tau_i_grid.0.iter().map(move |&i| (w, i)))
                    .collect();
                let rows = replay::grid_experiment(&ds, &self.deltas.0, &taus, self.reps, self.seed).map_err(|e| {
                    match e {
                        margin_vote::Error::InvalidParameter { name: "tau_w", .. } => {
                            flag_err(e, "--tau-w-grid")
                        }
                        margin_vote::Error::InvalidParameter { name: "tau_i", .. } => {
                            flag_err(e, "--tau-i-grid")
                        }
                        e => lift(e),
                    }
                })?;
                let mut t = Table::new(&[
                    "tau_w",
                    "tau_i",
                    "delta",
                    "workers",
                    "items",
                    "replays",
                    "resolved",
                    "unresolved",
                    "mean_correctness",
                    "mean_votes",
                    "unresolved_rate",
                    "empty",
                ]);
                for r in rows {
                    t.push(vec![
                        r.tau_w.into(),
                        r.tau_i.into(),
                        r.delta.into(),
                        r.workers.into(),
                        r.items.into(),
                        r.replays.into(),
                        r.resolved.into(),
                        r.unresolved.into(),
                        r.mean_correctness.into(),
                        r.mean_votes.into(),
                        r.unresolved_rate.into(),
                        r.empty.into(),
                    ]);
                }
                table_artifact("replay_grid", &t, self.format.unwrap_or(Format::Csv))
            }
            Experiment::Theory => {
                let cmp = replay::theory_comparison(&ds, &self.deltas.0, self.experiments, self.seed).map_err(|e| {
                    match e {
                        margin_vote::Error::InvalidParameter { name: "experiments", .. } => lift(e),
                        margin_vote::Error::InvalidThreshold(_) => flag_err(e, "--deltas"),
                        e => lift(e),
                    }
                })?;
                match self.format.unwrap_or(Format::Json) {
                    Format::Json => json_artifact("replay_theory", &cmp),
                    Format::Csv => {
                        let mut t = Table::new(&[
                            "delta",
                            "experiment",
                            "quality_experimental",
                            "quality_theory",
                            "quality_gap",
                            "expected_votes_experimental",
                            "expected_votes_theory",
                            "votes_gap",
                        ]);
                        for r in &cmp.rows {
                            t.push(vec![
                                r.delta.into(),
                                r.experiment.into(),
                                r.quality_experimental.into(),
                                r.quality_theory.into(),
                                r.quality_gap.into(),
                                r.expected_votes_experimental.into(),
                                r.expected_votes_theory.into(),
                                r.votes_gap.into(),
                            ]);
                        }
                        table_artifact("replay_theory", &t, Format::Csv)
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// Require the equivalent threshold to be an integer.
    Exact,
    Floor,
    Ceil,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PlanArgs {
    /// Odds p/(1−p) of pool 1.
    #[arg(long)]
    pub phi1: f64,
    #[arg(long)]
    pub delta1: u32,
    #[arg(long)]
    pub phi2: f64,
    /// Per-vote pay of pool 1.
    #[arg(long, default_value_t = 1.0)]
    pub pay1: f64,
    /// Risk aversion: weight on the standard deviation of the vote count.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// How to turn a non-integer equivalent threshold into a usable one.
    #[arg(long, value_enum, default_value_t = Rounding::Exact)]
    pub round: Rounding,
    #[command(flatten)]
    #[serde(skip)]
    pub dest: Destination,
}

impl PlanArgs {
    fn run(&self) -> anyhow::Result<Artifact> {
        if self.delta1 == 0 {
            return Err(UsageError {
                flag: Some("--delta1".into()),
                message: "consensus threshold must be a positive integer".into(),
            }
            .into());
        }
        let odds_flag = |e: &margin_vote::Error| match e {
            margin_vote::Error::OddsNotAboveOne { name: "phi2", .. } => "--phi2",
            _ => "--phi1",
        };
        let delta2 = planning::equivalent_threshold(self.phi1, self.delta1 as f64, self.phi2)
            .map_err(|e| {
                let flag = odds_flag(&e);
                flag_err(e, flag)
            })?;
        let pay_ratio = planning::equivalent_pay_ratio(self.phi1, self.phi2)?;
        let candidates = planning::integerize_threshold(delta2, self.phi2)?;
        let plan = match self.round {
            Rounding::Exact => planning::utility_pay_ratio(self.phi1, self.delta1, self.pay1, self.phi2, self.lambda),
            Rounding::Floor | Rounding::Ceil => {
                let d2 = if self.round == Rounding::Floor {
                    candidates.floor
                } else {
                    candidates.ceil
                };
                if d2 == 0 {
                    return Err(UsageError {
                        flag: Some("--round".into()),
                        message: format!("rounding {delta2} down gives a zero threshold"),
                    }
                    .into());
                }
                planning::utility_pay_ratio_at(self.phi1, self.delta1, self.pay1, self.phi2, d2, self.lambda)
            }
        };
        let plan = plan.map_err(|e| {
            if let margin_vote::Error::NeedsRounding(d) = e {
                return UsageError {
                    flag: Some("--round".into()),
                    message: format!("equivalent threshold {d} is not an integer; pass --round floor or --round ceil"),
                }
                .into();
            }
            let flag = match &e {
                margin_vote::Error::InvalidParameter { name: "lambda", .. } => "--lambda",
                _ => "--pay1",
            };
            flag_err(e, flag)
        })?;
        json_artifact(
            "plan",
            json!({
                "phi1": self.phi1,
                "delta1": self.delta1,
                "phi2": self.phi2,
                "delta2_real": delta2,
                "delta2_is_integer": planning::as_integer_threshold(delta2).is_some(),
                "pay_ratio": pay_ratio,
                "candidates": candidates,
                "plan": plan,
            }),
        )
    }
}

/// Panel size paired with each threshold; `2δ−1` when not listed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PanelMap(pub Vec<(u32, u32)>);

impl PanelMap {
    pub fn panel(&self, delta: u32) -> u32 {
        self.0
            .iter()
            .find(|(d, _)| *d == delta)
            .map_or(2 * delta - 1, |&(_, n)| n)
    }
}

pub fn parse_panel_map(s: &str) -> Result<PanelMap, String> {
    if s.trim().is_empty() {
        return Ok(PanelMap::default());
    }
    s.split(',')
        .map(|pair| {
            let (d, n) = pair
                .split_once('=')
                .ok_or_else(|| format!("expected delta=n pairs, got {pair:?}"))?;
            let d: u32 = d.trim().parse().map_err(|_| format!("bad threshold {d:?}"))?;
            let n: u32 = n.trim().parse().map_err(|_| format!("bad panel size {n:?}"))?;
            Ok((d, n))
        })
        .collect::<Result<Vec<_>, String>>()
        .map(PanelMap)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[arg(long, value_parser = parse_grid, default_value = "0.51:0.99:0.02")]
    pub p_grid: Grid,
    #[arg(long, value_parser = parse_int_list, default_value = "2:5")]
    pub deltas: IntList,
    /// Panel sizes as `delta=n,...`; unlisted thresholds use 2δ−1.
    #[arg(long, value_parser = parse_panel_map, default_value = "")]
    pub n_map: PanelMap,
    /// Majority panels stop once the leader cannot be overtaken.
    #[arg(long)]
    pub early_stopping: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    #[serde(skip)]
    pub dest: Destination,
}

pub fn dominance_table(rows: &[comparison::DominanceRow]) -> anyhow::Result<Table> {
    let mut t = Table::new(&[
        "p",
        "delta",
        "n",
        "quality_margin",
        "expected_votes_margin",
        "quality_mv",
        "expected_votes_mv",
        "ratio",
        "quality_mv_matched",
        "matched_lower",
        "matched_upper",
        "dominance",
    ]);
    for r in rows {
        let flag = serde_json::to_value(r.dominance)?;
        t.push(vec![
            r.p.into(),
            r.delta.into(),
            r.n.into(),
            r.quality_margin.into(),
            r.expected_votes_margin.into(),
            r.quality_mv.into(),
            r.expected_votes_mv.into(),
            r.ratio.into(),
            r.quality_mv_matched.into(),
            r.matched_lower.into(),
            r.matched_upper.into(),
            Cell::Text(flag.as_str().unwrap_or_default().to_string()),
        ]);
    }
    Ok(t)
}

impl CompareArgs {
    fn run(&self) -> anyhow::Result<Artifact> {
        let rows = comparison::dominance_scan(
            &self.p_grid.0,
            &self.deltas.0,
            |d| self.n_map.panel(d),
            self.early_stopping,
        )
        .map_err(|e| {
            let flag = match e {
                margin_vote::Error::InvalidAccuracy(_) => "--p-grid",
                _ => "--n-map",
            };
            flag_err(e, flag)
        })?;
        table_artifact("compare", &dominance_table(&rows)?, self.format)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthesizeArgs {
    /// Accuracy shared by every worker.
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 40)]
    pub workers: usize,
    #[arg(long, default_value_t = 100)]
    pub items: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub dest: Destination,
}

impl SynthesizeArgs {
    fn run(&self) -> anyhow::Result<Artifact> {
        let ds = flagged(replay::generate_synthetic(self.p, self.workers, self.items, self.seed), "--p")?;
        let mut bytes = Vec::new();
        replay::write_labels(&ds, &mut bytes)?;
        Ok(Artifact {
            name: "labels.csv".into(),
            bytes,
        })
    }
}
