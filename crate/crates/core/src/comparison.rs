//! Majority-voting baselines.
//!
//! A fixed panel of n workers votes and the majority label wins. With early
//! stopping, voting halts once the leader cannot be overtaken by the votes
//! still to come (|lead| > n − cast), which never changes the decision.

use serde::Serialize;

use crate::closed_form;
use crate::error::{Error, Result};
use crate::params::{VotingSpec, WorkerAccuracy};

/// Tolerance for calling two qualities equal in a dominance scan.
pub const NEUTRAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MajoritySpec {
    pub n: u32,
    pub accuracy: WorkerAccuracy,
    pub early_stopping: bool,
}

impl MajoritySpec {
    pub fn new(n: u32, accuracy: WorkerAccuracy, early_stopping: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "panel size must be at least 1".into(),
            });
        }
        if !early_stopping && n.is_multiple_of(2) {
            return Err(Error::EvenPanel(n));
        }
        Ok(Self {
            n,
            accuracy,
            early_stopping,
        })
    }

    pub fn quality(&self) -> Result<f64> {
        if self.early_stopping {
            Ok(early_stop_majority(self.n, self.accuracy)?.quality)
        } else {
            majority_quality(self.n, self.accuracy)
        }
    }

    pub fn expected_votes(&self) -> Result<f64> {
        if self.early_stopping {
            Ok(early_stop_majority(self.n, self.accuracy)?.expected_votes)
        } else {
            Ok(self.n as f64)
        }
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Probability that a strict majority of an odd panel of size n is correct.
pub fn majority_quality(n: u32, p: WorkerAccuracy) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "panel size must be at least 1".into(),
        });
    }
    if n.is_multiple_of(2) {
        return Err(Error::EvenPanel(n));
    }
    if p.is_symmetric() {
        return Ok(0.5);
    }
    match p.value() {
        0.0 => return Ok(0.0),
        1.0 => return Ok(1.0),
        _ => {}
    }
    let (ln_p, ln_q) = (p.value().ln(), p.complement().ln());
    // ln C(n, j) by the running product C(n, j+1) = C(n, j)·(n−j)/(j+1)
    let mut ln_choose = 0.0;
    let mut terms = Vec::with_capacity(n as usize / 2 + 1);
    for j in 0..=n {
        if j > n / 2 {
            terms.push(ln_choose + j as f64 * ln_p + (n - j) as f64 * ln_q);
        }
        if j < n {
            ln_choose += ((n - j) as f64).ln() - ((j + 1) as f64).ln();
        }
    }
    Ok(log_sum_exp(&terms).exp().min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EarlyStopOutcome {
    pub quality: f64,
    pub incorrect: f64,
    /// Probability of an even split after all n votes; zero for odd n.
    pub tie: f64,
    pub expected_votes: f64,
}

/// Exact outcome law of early-stopping majority voting over a panel of n.
pub fn early_stop_majority(n: u32, p: WorkerAccuracy) -> Result<EarlyStopOutcome> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "panel size must be at least 1".into(),
        });
    }
    let (p, q) = (p.value(), p.complement());
    let n = n as usize;
    // mass[lead + n] for leads reachable without having stopped
    let mut mass = vec![0.0; 2 * n + 1];
    let mut next = vec![0.0; 2 * n + 1];
    mass[n] = 1.0;
    let (mut correct, mut incorrect, mut votes) = (0.0, 0.0, 0.0);
    for t in 1..=n {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            next[i + 1] += m * p;
            next[i - 1] += m * q;
        }
        let remaining = (n - t) as i64;
        for (i, m) in next.iter_mut().enumerate() {
            let lead = i as i64 - n as i64;
            if *m != 0.0 && lead.abs() > remaining {
                votes += t as f64 * *m;
                if lead > 0 {
                    correct += *m;
                } else {
                    incorrect += *m;
                }
                *m = 0.0;
            }
        }
        std::mem::swap(&mut mass, &mut next);
    }
    let tie: f64 = mass.iter().sum();
    votes += n as f64 * tie;
    Ok(EarlyStopOutcome {
        quality: correct,
        incorrect,
        tie,
        expected_votes: votes,
    })
}

/// `E[votes]` of margin voting over `E[votes]` of the majority scheme.
pub fn cost_ratio(spec: &VotingSpec, mv: &MajoritySpec) -> Result<f64> {
    Ok(closed_form::expected_votes(spec)? / mv.expected_votes()?)
}

/// Majority quality at a fractional expected cost, interpolating linearly
/// between the odd panels whose expected votes bracket `cost`.
///
/// Returns `(quality, lower_panel, upper_panel)`. Costs below one vote use
/// the single-worker panel.
pub fn matched_majority_quality(p: WorkerAccuracy, cost: f64, early_stopping: bool) -> Result<(f64, u32, u32)> {
    if !(cost > 0.0 && cost.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "cost",
            reason: format!("expected cost must be positive, got {cost}"),
        });
    }
    let panel = |n: u32| MajoritySpec::new(n, p, early_stopping);
    let mut lo = panel(1)?;
    let (mut lo_cost, mut lo_q) = (lo.expected_votes()?, lo.quality()?);
    if cost <= lo_cost {
        return Ok((lo_q, 1, 1));
    }
    loop {
        let hi = panel(lo.n + 2)?;
        let (hi_cost, hi_q) = (hi.expected_votes()?, hi.quality()?);
        if cost <= hi_cost {
            if cost == hi_cost {
                return Ok((hi_q, hi.n, hi.n));
            }
            let w = (cost - lo_cost) / (hi_cost - lo_cost);
            return Ok((lo_q + w * (hi_q - lo_q), lo.n, hi.n));
        }
        (lo, lo_cost, lo_q) = (hi, hi_cost, hi_q);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Dominance {
    Margin,
    Majority,
    Neutral,
}

impl Dominance {
    fn classify(margin: f64, majority: f64) -> Self {
        if (margin - majority).abs() < NEUTRAL_TOLERANCE {
            Dominance::Neutral
        } else if margin > majority {
            Dominance::Margin
        } else {
            Dominance::Majority
        }
    }

    /// Margin voting is at least as good.
    pub fn holds(self) -> bool {
        self != Dominance::Majority
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominanceRow {
    pub p: f64,
    pub delta: u32,
    /// Panel paired with δ by the caller.
    pub n: u32,
    pub quality_margin: f64,
    pub expected_votes_margin: f64,
    pub quality_mv: f64,
    pub expected_votes_mv: f64,
    /// `expected_votes_margin / expected_votes_mv`.
    pub ratio: f64,
    /// Majority quality at the margin scheme's expected cost.
    pub quality_mv_matched: f64,
    pub matched_lower: u32,
    pub matched_upper: u32,
    pub dominance: Dominance,
}

/// Tabulates margin voting against majority voting over a grid.
///
/// `n_map` pairs each δ with the panel size reported in `quality_mv` and
/// `ratio`; the dominance flag always uses the cost-matched comparison.
/// Rows are ordered by p, then δ.
pub fn dominance_scan(
    p_grid: &[f64],
    deltas: &[u32],
    n_map: impl Fn(u32) -> u32,
    early_stopping: bool,
) -> Result<Vec<DominanceRow>> {
    let mut rows = Vec::with_capacity(p_grid.len() * deltas.len());
    for &p in p_grid {
        let acc = WorkerAccuracy::new(p)?;
        for &delta in deltas {
            let spec = VotingSpec::from_accuracy(acc, delta as f64)?;
            let stats = closed_form::stats(&spec)?;
            let mv = MajoritySpec::new(n_map(delta), acc, early_stopping)?;
            let expected_votes_mv = mv.expected_votes()?;
            let (matched, lower, upper) = matched_majority_quality(acc, stats.expected_votes, early_stopping)?;
            rows.push(DominanceRow {
                p,
                delta,
                n: mv.n,
                quality_margin: stats.quality,
                expected_votes_margin: stats.expected_votes,
                quality_mv: mv.quality()?,
                expected_votes_mv,
                ratio: stats.expected_votes / expected_votes_mv,
                quality_mv_matched: matched,
                matched_lower: lower,
                matched_upper: upper,
                dominance: Dominance::classify(stats.quality, matched),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn acc(p: f64) -> WorkerAccuracy {
        WorkerAccuracy::new(p).unwrap()
    }

    /// Every length-n vote sequence, weighted by its probability.
    fn enumerate(n: u32, p: f64) -> (f64, f64, f64) {
        let (mut full, mut early, mut votes) = (0.0, 0.0, 0.0);
        for bits in 0u32..(1 << n) {
            let correct = bits.count_ones();
            let w = p.powi(correct as i32) * (1.0 - p).powi((n - correct) as i32);
            if 2 * correct > n {
                full += w;
            }
            let mut lead = 0i64;
            let mut stop = n;
            for t in 0..n {
                lead += if bits >> t & 1 == 1 { 1 } else { -1 };
                if lead.abs() > (n - t - 1) as i64 {
                    stop = t + 1;
                    break;
                }
            }
            if lead > 0 {
                early += w;
            }
            votes += w * stop as f64;
        }
        (full, early, votes)
    }

    #[test]
    fn small_panels() {
        assert_eq!(majority_quality(1, acc(0.8)).unwrap(), 0.8);
        assert_relative_eq!(majority_quality(3, acc(0.75)).unwrap(), 0.84375, epsilon = 1e-15);
        for n in [1, 3, 9, 101] {
            assert_eq!(majority_quality(n, acc(0.5)).unwrap(), 0.5);
        }
        assert_eq!(majority_quality(4, acc(0.7)), Err(Error::EvenPanel(4)));
        assert!(majority_quality(0, acc(0.7)).is_err());
    }

    #[test]
    fn large_panel_is_stable() {
        let q = majority_quality(10_001, acc(0.51)).unwrap();
        assert!(q > 0.97 && q <= 1.0);
        assert_eq!(majority_quality(2001, acc(0.9)).unwrap(), 1.0);
        assert!(majority_quality(2001, acc(0.1)).unwrap() < 1e-300);
    }

    #[test]
    fn early_stop_worked_example() {
        let o = early_stop_majority(3, acc(0.75)).unwrap();
        assert_relative_eq!(o.quality, 0.84375, epsilon = 1e-15);
        assert_relative_eq!(o.expected_votes, 2.375, epsilon = 1e-15);
        assert_eq!(o.tie, 0.0);
        let o = early_stop_majority(1, acc(0.6)).unwrap();
        assert_eq!((o.quality, o.expected_votes), (0.6, 1.0));
    }

    #[test]
    fn perfect_workers_stop_at_bare_majority() {
        for n in 1..=20 {
            let o = early_stop_majority(n, acc(1.0)).unwrap();
            assert_eq!(o.quality, 1.0);
            assert_eq!(o.expected_votes, (n / 2 + 1) as f64);
        }
    }

    #[test]
    fn matches_enumeration() {
        for n in 1..=15u32 {
            for i in 0..=20 {
                let p = 0.5 + 0.025 * i as f64;
                let (full, early, votes) = enumerate(n, p);
                let o = early_stop_majority(n, acc(p)).unwrap();
                assert!((o.quality - early).abs() < 1e-12);
                assert!((o.expected_votes - votes).abs() < 1e-11);
                if n % 2 == 1 {
                    assert!((majority_quality(n, acc(p)).unwrap() - full).abs() < 1e-12);
                    assert_eq!(o.tie, 0.0);
                } else {
                    assert!((o.quality + o.incorrect + o.tie - 1.0).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn early_stopping_saves_votes() {
        for n in 1..=25 {
            for p in [0.5, 0.6, 0.75, 0.9, 0.99] {
                let e = early_stop_majority(n, acc(p)).unwrap().expected_votes;
                // a panel of two can never stop after one vote
                if n <= 2 {
                    assert_eq!(e, n as f64);
                } else {
                    assert!(e < n as f64);
                }
            }
        }
    }

    #[test]
    fn ratios() {
        for p in [0.55, 0.75, 0.95] {
            let spec = VotingSpec::new(p, 1.0).unwrap();
            let mv = MajoritySpec::new(1, acc(p), false).unwrap();
            assert_eq!(cost_ratio(&spec, &mv).unwrap(), 1.0);
        }
        let spec = VotingSpec::new(0.75, 2.0).unwrap();
        let simple = MajoritySpec::new(3, acc(0.75), false).unwrap();
        assert_relative_eq!(cost_ratio(&spec, &simple).unwrap(), 3.2 / 3.0, epsilon = 1e-12);
        let early = MajoritySpec::new(3, acc(0.75), true).unwrap();
        assert_relative_eq!(cost_ratio(&spec, &early).unwrap(), 3.2 / 2.375, epsilon = 1e-12);
        assert!(MajoritySpec::new(4, acc(0.75), false).is_err());
        assert!(MajoritySpec::new(4, acc(0.75), true).is_ok());
    }

    #[test]
    fn matched_cost_interpolation() {
        let (q, lo, hi) = matched_majority_quality(acc(0.75), 3.2, false).unwrap();
        assert_eq!((lo, hi), (3, 5));
        let q3 = majority_quality(3, acc(0.75)).unwrap();
        let q5 = majority_quality(5, acc(0.75)).unwrap();
        assert_relative_eq!(q, q3 + 0.1 * (q5 - q3), epsilon = 1e-15);
        assert_eq!(matched_majority_quality(acc(0.75), 3.0, false).unwrap(), (q3, 3, 3));
        assert_eq!(matched_majority_quality(acc(0.75), 1.0, false).unwrap(), (0.75, 1, 1));
    }

    #[test]
    fn scan_worked_cell() {
        let rows = dominance_scan(&[0.75], &[2], |_| 3, false).unwrap();
        let r = rows[0];
        assert_relative_eq!(r.quality_margin, 0.9, epsilon = 1e-12);
        assert_relative_eq!(r.quality_mv, 0.84375, epsilon = 1e-15);
        assert!(r.quality_margin > r.quality_mv_matched);
        assert_eq!(r.dominance, Dominance::Margin);
    }

    #[test]
    fn scan_shape_and_symmetric_row() {
        let ps = [0.5, 0.6, 0.7, 0.8];
        let rows = dominance_scan(&ps, &[1, 2, 3], |d| 2 * d - 1, true).unwrap();
        assert_eq!(rows.len(), 12);
        for r in rows.iter().filter(|r| r.p == 0.5) {
            assert_eq!(r.quality_margin, 0.5);
            assert_eq!(r.quality_mv, 0.5);
            assert_eq!(r.dominance, Dominance::Neutral);
        }
        assert!(dominance_scan(&ps, &[2], |_| 4, false).is_err());
    }

    #[test]
    fn margin_dominates_at_matched_cost() {
        let ps: Vec<f64> = (0..=40).map(|i| 0.55 + 0.01 * i as f64).collect();
        for early in [false, true] {
            let rows = dominance_scan(&ps, &[2, 3, 4, 5], |d| 2 * d - 1, early).unwrap();
            for r in &rows {
                assert!(r.dominance.holds(), "{r:?}");
            }
        }
    }
}
