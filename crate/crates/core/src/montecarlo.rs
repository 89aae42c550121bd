//! Seeded random-walk simulation of margin voting.
//!
//! Trial `i` draws from its own ChaCha stream keyed by `(seed, i)`, and the
//! reduction only sums integer counts, so a report is bit-identical for a
//! given config no matter how many threads run it.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::closed_form;
use crate::error::{Error, Result};
use crate::params::VotingSpec;
use crate::seed;

/// Hard limit on the length of a single simulated walk.
pub const WALK_STEP_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub spec: VotingSpec,
    pub trials: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(spec: VotingSpec, trials: u64, seed: u64) -> Result<Self> {
        spec.integer_threshold()?;
        if trials == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                reason: "must be at least 1".into(),
            });
        }
        Ok(Self { spec, trials, seed })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub trials: u64,
    pub correct: u64,
    pub quality_estimate: f64,
    pub mean_votes: f64,
    /// Unbiased (n − 1) sample variance of the number of votes.
    pub votes_variance_estimate: f64,
    /// Number of trials that ended after each vote count.
    pub histogram: BTreeMap<u64, u64>,
    pub standard_error_quality: f64,
    pub standard_error_mean: f64,
    pub standard_error_variance: f64,
}

#[derive(Default)]
struct Tally {
    correct: u64,
    histogram: BTreeMap<u64, u64>,
}

impl Tally {
    fn record(mut self, (correct, votes): (bool, u64)) -> Self {
        self.correct += correct as u64;
        *self.histogram.entry(votes).or_default() += 1;
        self
    }

    fn merge(mut self, other: Tally) -> Self {
        self.correct += other.correct;
        for (votes, count) in other.histogram {
            *self.histogram.entry(votes).or_default() += count;
        }
        self
    }
}

/// Runs one walk from difference 0 until it reaches ±δ.
/// Returns whether consensus was correct and how many votes were cast.
pub fn run_walk<R: Rng + ?Sized>(rng: &mut R, p: f64, delta: u32, cap: u64) -> Result<(bool, u64)> {
    let target = delta as i64;
    let mut lead = 0i64;
    let mut votes = 0u64;
    while lead.abs() < target {
        if votes == cap {
            return Err(Error::StepCapExceeded { cap });
        }
        lead += if rng.random_bool(p) { 1 } else { -1 };
        votes += 1;
    }
    Ok((lead > 0, votes))
}

pub fn simulate_walks(config: &SimConfig) -> Result<SimReport> {
    simulate_walks_capped(config, WALK_STEP_CAP)
}

/// [`simulate_walks`] with an explicit per-walk step cap.
pub fn simulate_walks_capped(config: &SimConfig, cap: u64) -> Result<SimReport> {
    let delta = config.spec.integer_threshold()?;
    let p = config.spec.p();
    let tally = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = seed::stream(config.seed, &[trial]);
            run_walk(&mut rng, p, delta, cap)
        })
        .try_fold(Tally::default, |acc, walk| walk.map(|w| acc.record(w)))
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
    Ok(summarize(tally))
}

fn summarize(tally: Tally) -> SimReport {
    let n_int: u64 = tally.histogram.values().sum();
    let n = n_int as f64;
    let total_votes: u128 = tally
        .histogram
        .iter()
        .map(|(&m, &c)| m as u128 * c as u128)
        .sum();
    let mean = total_votes as f64 / n;
    let central = |power: i32| -> f64 {
        tally
            .histogram
            .iter()
            .map(|(&m, &c)| c as f64 * (m as f64 - mean).powi(power))
            .sum()
    };
    let (variance, se_variance) = if n_int > 1 {
        let s2 = central(2) / (n - 1.0);
        let m4 = central(4) / n;
        let var_of_s2 = (m4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n;
        (s2, var_of_s2.max(0.0).sqrt())
    } else {
        (0.0, 0.0)
    };
    let quality = tally.correct as f64 / n;
    SimReport {
        trials: n_int,
        correct: tally.correct,
        quality_estimate: quality,
        mean_votes: mean,
        votes_variance_estimate: variance,
        histogram: tally.histogram,
        standard_error_quality: (quality * (1.0 - quality) / n).sqrt(),
        standard_error_mean: (variance / n).sqrt(),
        standard_error_variance: se_variance,
    }
}

/// `(estimate − theory) / estimate`, normalised by the simulated value.
pub fn relative_error(estimate: f64, theory: f64) -> Result<f64> {
    if estimate == 0.0 {
        Err(Error::ZeroEstimate)
    } else {
        Ok((estimate - theory) / estimate)
    }
}

/// Theory against simulation for one `(p, δ)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub delta: u32,
    pub trials: u64,
    pub quality_theory: f64,
    pub quality_sim: f64,
    pub err_quality: Option<f64>,
    pub expected_votes_theory: f64,
    pub mean_votes_sim: f64,
    pub err_expected_votes: Option<f64>,
    pub variance_theory: f64,
    pub variance_sim: f64,
    /// `None` when the simulated variance is zero (for instance δ = 1).
    pub err_variance: Option<f64>,
}

/// Seed used for the `(p, δ)` cell of a sweep, independent of grid layout.
pub fn sweep_cell_seed(seed: u64, p: f64, delta: u32) -> u64 {
    seed::derive_seed(seed, &[p.to_bits(), delta as u64])
}

pub fn error_sweep(p_grid: &[f64], deltas: &[u32], trials: u64, seed: u64) -> Result<Vec<SweepRow>> {
    if p_grid.is_empty() || deltas.is_empty() {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: "p grid and threshold set must be non-empty".into(),
        });
    }
    let mut rows = Vec::with_capacity(p_grid.len() * deltas.len());
    for &delta in deltas {
        for &p in p_grid {
            let spec = VotingSpec::new(p, delta as f64)?;
            let config = SimConfig::new(spec, trials, sweep_cell_seed(seed, p, delta))?;
            let report = simulate_walks(&config)?;
            let theory = closed_form::stats(&spec)?;
            rows.push(SweepRow {
                p,
                delta,
                trials,
                quality_theory: theory.quality,
                quality_sim: report.quality_estimate,
                err_quality: relative_error(report.quality_estimate, theory.quality).ok(),
                expected_votes_theory: theory.expected_votes,
                mean_votes_sim: report.mean_votes,
                err_expected_votes: relative_error(report.mean_votes, theory.expected_votes).ok(),
                variance_theory: theory.votes_variance,
                variance_sim: report.votes_variance_estimate,
                err_variance: relative_error(report.votes_variance_estimate, theory.votes_variance)
                    .ok(),
            });
        }
    }
    Ok(rows)
}
