//! Absorbing Markov chain view of margin voting.
//!
//! States are indexed `0..2δ−1`; index `i` holds the vote difference
//! `i − (δ − 1)` (correct minus incorrect), so the walk starts at index
//! `δ − 1`. Index 0 leaks into the "incorrect" absorbing state with
//! probability `q`, the last index into "correct" with probability `p`.
//!
//! All fundamental-matrix quantities are obtained by tridiagonal solves
//! against `I − T_tr`; the fundamental matrix itself is never formed.

use serde::Serialize;

use crate::closed_form::{ConsensusStats, StatsSource};
use crate::error::{Error, Result};
use crate::params::{VotingSpec, WorkerAccuracy};
use crate::tridiag::Tridiagonal;

/// Column of the absorption block holding the incorrect-consensus state.
pub const INCORRECT: usize = 0;
/// Column of the absorption block holding the correct-consensus state.
pub const CORRECT: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    delta: u32,
    accuracy: WorkerAccuracy,
    transient: Tridiagonal,
    absorption: Vec<[f64; 2]>,
    start: Vec<f64>,
}

pub fn build_chain(spec: &VotingSpec) -> Result<ChainModel> {
    let delta = spec.integer_threshold()?;
    let size = 2 * delta as usize - 1;
    let p = spec.p();
    let q = spec.accuracy.complement();

    let transient = Tridiagonal::new(vec![q; size - 1], vec![0.0; size], vec![p; size - 1]);
    let mut absorption = vec![[0.0; 2]; size];
    absorption[0][INCORRECT] = q;
    absorption[size - 1][CORRECT] = p;
    let mut start = vec![0.0; size];
    start[delta as usize - 1] = 1.0;

    Ok(ChainModel {
        delta,
        accuracy: spec.accuracy,
        transient,
        absorption,
        start,
    })
}

impl ChainModel {
    pub fn delta(&self) -> u32 {
        self.delta
    }

    pub fn accuracy(&self) -> WorkerAccuracy {
        self.accuracy
    }

    pub fn spec(&self) -> VotingSpec {
        VotingSpec::from_accuracy(self.accuracy, self.delta as f64)
            .expect("chain threshold is a positive integer")
    }

    /// Number of transient states, `2δ − 1`.
    pub fn size(&self) -> usize {
        self.start.len()
    }

    pub fn start_index(&self) -> usize {
        self.delta as usize - 1
    }

    /// Vote difference (correct minus incorrect) held by transient state `i`.
    pub fn vote_difference(&self, i: usize) -> i64 {
        i as i64 - self.start_index() as i64
    }

    pub fn transient(&self) -> &Tridiagonal {
        &self.transient
    }

    /// Rows of the absorption block, `[incorrect, correct]`.
    pub fn absorption(&self) -> &[[f64; 2]] {
        &self.absorption
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    /// Row sums of `[T_tr | T_A]`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.size())
            .map(|i| self.transient.row_sum(i) + self.absorption[i][0] + self.absorption[i][1])
            .collect()
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        // I − T_tr is diagonally dominant, strictly in its first and last rows,
        // hence nonsingular for every p in [0, 1].
        self.transient
            .identity_minus()
            .solve(rhs)
            .expect("I - T_tr is nonsingular")
    }
}

/// Expected number of votes from each transient state, `t = N·1`.
pub fn expected_steps_vector(chain: &ChainModel) -> Vec<f64> {
    chain.solve(&vec![1.0; chain.size()])
}

/// Variance of the number of votes from each state, `(2N − I)t − t_sq`.
pub fn steps_variance_vector(chain: &ChainModel) -> Vec<f64> {
    let t = expected_steps_vector(chain);
    let nt = chain.solve(&t);
    nt.iter()
        .zip(&t)
        .map(|(n_t, t)| 2.0 * n_t - t - t * t)
        .collect()
}

/// Probabilities of ending in each absorbing state from a given start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsorptionSplit {
    pub incorrect: f64,
    pub correct: f64,
}

/// Rows of `B = N·T_A`, one per transient start state.
pub fn absorption_split(chain: &ChainModel) -> Vec<AbsorptionSplit> {
    let col = |c: usize| -> Vec<f64> { chain.absorption.iter().map(|row| row[c]).collect() };
    let incorrect = chain.solve(&col(INCORRECT));
    let correct = chain.solve(&col(CORRECT));
    incorrect
        .into_iter()
        .zip(correct)
        .map(|(incorrect, correct)| AbsorptionSplit { incorrect, correct })
        .collect()
}

/// Quality, mean and variance read off the start state of the chain.
pub fn matrix_stats(spec: &VotingSpec) -> Result<ConsensusStats> {
    let chain = build_chain(spec)?;
    let mid = chain.start_index();
    Ok(ConsensusStats {
        quality: absorption_split(&chain)[mid].correct,
        expected_votes: expected_steps_vector(&chain)[mid],
        votes_variance: steps_variance_vector(&chain)[mid],
        source: StatsSource::Matrix,
    })
}

/// Probability of terminating at exactly `m` votes, `z · T_tr^(m−1) · T_A`,
/// returned as `(incorrect, correct)`.
pub fn termination_pmf_at(chain: &ChainModel, m: u64) -> (f64, f64) {
    if m == 0 {
        return (0.0, 0.0);
    }
    let mut mass = chain.start.clone();
    let mut scratch = vec![0.0; mass.len()];
    for _ in 1..m {
        chain.transient.left_mul_into(&mass, &mut scratch);
        std::mem::swap(&mut mass, &mut scratch);
    }
    absorbed(chain, &mass)
}

fn absorbed(chain: &ChainModel, mass: &[f64]) -> (f64, f64) {
    mass.iter()
        .zip(&chain.absorption)
        .fold((0.0, 0.0), |(i, c), (m, row)| (i + m * row[INCORRECT], c + m * row[CORRECT]))
}

/// One support point of the time-to-consensus distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PmfEntry {
    pub m: u64,
    pub f_incorrect: f64,
    pub f_correct: f64,
}

impl PmfEntry {
    pub fn total(&self) -> f64 {
        self.f_incorrect + self.f_correct
    }
}

/// Truncated law of the number of votes, split by absorbing state.
///
/// Only support points (`m ≥ δ`, `m ≡ δ mod 2`) are stored; every other
/// step count has probability exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerminationDistribution {
    pub spec: VotingSpec,
    pub entries: Vec<PmfEntry>,
    /// Probability that consensus has not been reached by the last entry.
    pub truncation_mass: f64,
    /// Set when `max_steps` was reached before the tail fell below tolerance.
    pub hit_step_cap: bool,
}

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

pub fn termination_distribution(
    chain: &ChainModel,
    tail_tol: f64,
    max_steps: u64,
) -> Result<TerminationDistribution> {
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::InvalidParameter {
            name: "tail_tol",
            reason: format!("must lie in (0, 1), got {tail_tol}"),
        });
    }
    if max_steps == 0 {
        return Err(Error::InvalidParameter {
            name: "max_steps",
            reason: "must be at least 1".into(),
        });
    }
    let spec = chain.spec();
    let delta = chain.delta as u64;

    if chain.accuracy.is_degenerate() {
        let correct = chain.accuracy.value() == 1.0;
        let reached = delta <= max_steps;
        let entries = if reached {
            vec![PmfEntry {
                m: delta,
                f_incorrect: if correct { 0.0 } else { 1.0 },
                f_correct: if correct { 1.0 } else { 0.0 },
            }]
        } else {
            Vec::new()
        };
        return Ok(TerminationDistribution {
            spec,
            entries,
            truncation_mass: if reached { 0.0 } else { 1.0 },
            hit_step_cap: !reached,
        });
    }

    let mut mass = chain.start.clone();
    let mut scratch = vec![0.0; mass.len()];
    let mut entries = Vec::new();
    let mut remaining = 1.0;
    let mut m = 0;
    while m < max_steps {
        m += 1;
        let (f_incorrect, f_correct) = absorbed(chain, &mass);
        chain.transient.left_mul_into(&mass, &mut scratch);
        std::mem::swap(&mut mass, &mut scratch);
        if m >= delta && (m - delta).is_multiple_of(2) {
            entries.push(PmfEntry {
                m,
                f_incorrect,
                f_correct,
            });
            remaining = mass.iter().sum();
            if remaining <= tail_tol {
                break;
            }
        }
    }
    Ok(TerminationDistribution {
        spec,
        entries,
        truncation_mass: remaining,
        hit_step_cap: remaining > tail_tol,
    })
}

impl TerminationDistribution {
    /// Probability of terminating at exactly `m` votes as `(incorrect, correct)`.
    pub fn pmf(&self, m: u64) -> (f64, f64) {
        self.entries
            .binary_search_by_key(&m, |e| e.m)
            .map(|i| (self.entries[i].f_incorrect, self.entries[i].f_correct))
            .unwrap_or((0.0, 0.0))
    }

    pub fn captured_mass(&self) -> f64 {
        self.entries.iter().map(PmfEntry::total).sum()
    }

    pub fn correct_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.f_correct).sum()
    }

    pub fn incorrect_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.f_incorrect).sum()
    }

    /// Mean of the truncated table (mass beyond the last entry is ignored).
    pub fn mean(&self) -> f64 {
        self.entries.iter().map(|e| e.m as f64 * e.total()).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.entries
            .iter()
            .map(|e| (e.m as f64 - mean).powi(2) * e.total())
            .sum()
    }

    pub fn last_step(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.m)
    }

    /// Running cumulative probability, one value per entry.
    pub fn cdf(&self) -> Vec<f64> {
        self.entries
            .iter()
            .scan(0.0, |acc, e| {
                *acc += e.total();
                Some(*acc)
            })
            .collect()
    }
}
