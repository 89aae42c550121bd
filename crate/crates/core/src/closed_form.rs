//! Closed-form quantities of margin voting and of the underlying Gambler's
//! Ruin walk.
//!
//! Odds powers are computed as `exp(δ·ln φ)` and the ratio
//! `(φ^δ − 1)/(φ^δ + 1)` as `tanh(δ·ln φ / 2)`, so nothing overflows for
//! extreme odds or large thresholds. Inside the symmetric band
//! (`|2p − 1| < 1e-12`) every function returns the random-walk limit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{OddsRatio, VotingSpec, WorkerAccuracy};

/// Log-odds of correctness beyond which the quality is reported as exactly 1.
const QUALITY_SATURATION: f64 = 700.0;

/// Where a set of statistics came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsSource {
    ClosedForm,
    Matrix,
    Simulation,
}

/// Quality, mean and variance of the number of votes for one voting spec.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsensusStats {
    pub quality: f64,
    pub expected_votes: f64,
    pub votes_variance: f64,
    pub source: StatsSource,
}

impl ConsensusStats {
    pub fn std_dev(&self) -> f64 {
        self.votes_variance.sqrt()
    }
}

/// Logistic map from the total log-odds `δ·ln φ` to a probability.
pub fn quality_from_log_odds(total_log_odds: f64) -> f64 {
    if total_log_odds > QUALITY_SATURATION {
        1.0
    } else if total_log_odds < -QUALITY_SATURATION {
        0.0
    } else if total_log_odds >= 0.0 {
        1.0 / (1.0 + (-total_log_odds).exp())
    } else {
        let e = total_log_odds.exp();
        e / (1.0 + e)
    }
}

/// Probability that the consensus label is correct: `φ^δ / (1 + φ^δ)`.
///
/// Accepts real-valued thresholds.
pub fn consensus_quality(spec: &VotingSpec) -> f64 {
    let p = spec.accuracy;
    if p.is_symmetric() {
        return 0.5;
    }
    if p.value() == 1.0 {
        return 1.0;
    }
    if p.value() == 0.0 {
        return 0.0;
    }
    quality_from_log_odds(spec.threshold() * p.log_odds())
}

/// Same as [`consensus_quality`] but parameterised by odds.
pub fn quality_from_odds(phi: OddsRatio, threshold: f64) -> Result<f64> {
    Ok(consensus_quality(&VotingSpec::from_odds(phi, threshold)?))
}

/// Expected number of votes until a margin of δ, for integer δ.
pub fn expected_votes(spec: &VotingSpec) -> Result<f64> {
    spec.integer_threshold()?;
    Ok(expected_votes_real(spec))
}

/// The expected-votes expression evaluated at a possibly non-integer δ.
///
/// Only meaningful as an algebraic extension (for instance when checking
/// cost equivalence at a real equivalent threshold).
pub fn expected_votes_real(spec: &VotingSpec) -> f64 {
    let delta = spec.threshold();
    let p = spec.accuracy;
    if p.is_symmetric() {
        return delta * delta;
    }
    if p.is_degenerate() {
        return delta;
    }
    let half_log_odds = 0.5 * p.log_odds();
    // (φ+1)/(φ−1) = 1/tanh(ln φ / 2)
    delta * (delta * half_log_odds).tanh() / half_log_odds.tanh()
}

/// Quarter squares `floor(z² / 4)`.
pub fn quarter_square(z: u64) -> u64 {
    z * z / 4
}

/// Coefficients of the bracketed polynomial in the variance formula,
/// lowest power of φ first. Length `2δ − 3` for δ ≥ 2, empty otherwise.
///
/// The pattern is a pyramid of quarter squares peaking at `h(δ)` on the
/// middle power `φ^(δ−2)`.
pub fn variance_bracket_coefficients(delta: u32) -> Vec<u64> {
    if delta < 2 {
        return Vec::new();
    }
    let d = delta as u64;
    let len = (2 * d - 3) as usize;
    let mid = (d - 2) as usize;
    let mut coeffs = vec![0; len];
    coeffs[mid] = quarter_square(d);
    for i in 1..=mid {
        let h = quarter_square(d - i as u64);
        coeffs[mid + i] = h;
        coeffs[mid - i] = h;
    }
    coeffs
}

fn horner(coeffs: &[u64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c as f64)
}

/// Variance of the number of votes until a margin of δ, for integer δ.
pub fn votes_variance(spec: &VotingSpec) -> Result<f64> {
    let delta = spec.integer_threshold()?;
    let p = spec.accuracy;
    if p.is_symmetric() {
        return Ok(symmetric_votes_variance(delta));
    }
    if p.is_degenerate() || delta == 1 {
        return Ok(0.0);
    }
    // Var is invariant under φ ↦ 1/φ; evaluating at the smaller of the two
    // keeps every power in (0, 1].
    let x = (-p.log_odds().abs()).exp();
    let d = delta as f64;
    let x_pow_delta = (d * x.ln()).exp();
    let ratio = (x + 1.0) / (x_pow_delta + 1.0);
    let bracket = horner(&variance_bracket_coefficients(delta), x);
    Ok(4.0 * d * x * ratio * ratio * bracket)
}

/// `(2/3)·δ²·(δ² − 1)`, the random-voting variance.
pub fn symmetric_votes_variance(delta: u32) -> f64 {
    let d2 = (delta as f64).powi(2);
    2.0 * d2 * (d2 - 1.0) / 3.0
}

pub fn stats(spec: &VotingSpec) -> Result<ConsensusStats> {
    Ok(ConsensusStats {
        quality: consensus_quality(spec),
        expected_votes: expected_votes(spec)?,
        votes_variance: votes_variance(spec)?,
        source: StatsSource::ClosedForm,
    })
}

/// A gambler starting at `k` and playing until reaching `0` or `n`.
///
/// Margin voting with threshold δ is the walk with `k = δ`, `n = 2δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GamblerSpec {
    k: u64,
    n: u64,
    pub p: WorkerAccuracy,
}

impl GamblerSpec {
    pub fn new(k: u64, n: u64, p: WorkerAccuracy) -> Result<Self> {
        check_gambler(k, n)?;
        Ok(Self { k, n, p })
    }

    pub fn from_voting(delta: u32, p: WorkerAccuracy) -> Result<Self> {
        Self::new(delta as u64, 2 * delta as u64, p)
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }
}

fn check_gambler(k: u64, n: u64) -> Result<()> {
    if k == 0 || k >= n {
        Err(Error::InvalidGambler { k, n })
    } else {
        Ok(())
    }
}

/// Probability of reaching `n` before `0`: `(S^k − 1)/(S^n − 1)`, `S = q/p`.
pub fn gambler_win_probability(g: &GamblerSpec) -> f64 {
    let (k, n) = (g.k as f64, g.n as f64);
    let p = g.p.value();
    if g.p.is_symmetric() {
        return k / n;
    }
    if p == 1.0 {
        return 1.0;
    }
    if p == 0.0 {
        return 0.0;
    }
    let ln_s = -g.p.log_odds();
    if ln_s < 0.0 {
        (k * ln_s).exp_m1() / (n * ln_s).exp_m1()
    } else {
        // Divide through by S^n so neither power overflows.
        ((k - n) * ln_s).exp() * (-k * ln_s).exp_m1() / (-n * ln_s).exp_m1()
    }
}

/// Expected duration of the walk, `(n·P_win − k)/(2p − 1)`; `k(n − k)` if fair.
pub fn gambler_expected_duration(g: &GamblerSpec) -> f64 {
    let (k, n) = (g.k as f64, g.n as f64);
    if g.p.is_symmetric() {
        return k * (n - k);
    }
    (n * gambler_win_probability(g) - k) / (2.0 * g.p.value() - 1.0)
}

/// Variance of the fair walk's duration, `(k(n−k)/3)(2k² − 2kn + n² − 2)`.
pub fn gambler_symmetric_variance(k: u64, n: u64) -> Result<f64> {
    check_gambler(k, n)?;
    let (k, n) = (k as f64, n as f64);
    Ok(k * (n - k) / 3.0 * (2.0 * k * k - 2.0 * k * n + n * n - 2.0))
}

/// Mean duration of the fair walk conditioned on winning and on ruin.
pub fn gambler_symmetric_conditional_durations(k: u64, n: u64) -> Result<(f64, f64)> {
    check_gambler(k, n)?;
    let (k, n) = (k as f64, n as f64);
    Ok(((n * n - k * k) / 3.0, k * (2.0 * n - k) / 3.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(p: f64, delta: f64) -> VotingSpec {
        VotingSpec::new(p, delta).unwrap()
    }

    fn acc(p: f64) -> WorkerAccuracy {
        WorkerAccuracy::new(p).unwrap()
    }

    #[test]
    fn quality_worked_examples() {
        assert_relative_eq!(consensus_quality(&spec(0.75, 2.0)), 0.9, max_relative = 1e-15);
        assert_relative_eq!(
            consensus_quality(&spec(0.75, 3.0)),
            27.0 / 28.0,
            max_relative = 1e-15
        );
        assert_eq!(consensus_quality(&spec(0.5, 5.0)), 0.5);
        assert_relative_eq!(consensus_quality(&spec(0.6356, 3.0)), 0.841, epsilon = 5e-4);
        assert_eq!(consensus_quality(&spec(1.0, 3.0)), 1.0);
        assert_eq!(consensus_quality(&spec(0.0, 3.0)), 0.0);
    }

    #[test]
    fn quality_saturates_without_overflow() {
        let q = consensus_quality(&spec(0.99, 1.0e4));
        assert_eq!(q, 1.0);
        let q = consensus_quality(&spec(0.01, 1.0e4));
        assert_eq!(q, 0.0);
    }

    #[test]
    fn quality_accepts_real_threshold() {
        // φ = 9, δ = 1.5 → 27 / 28
        let q = quality_from_odds(OddsRatio::new(9.0).unwrap(), 1.5).unwrap();
        assert_relative_eq!(q, 27.0 / 28.0, max_relative = 1e-14);
    }

    #[test]
    fn expected_votes_examples() {
        assert_relative_eq!(expected_votes(&spec(0.75, 2.0)).unwrap(), 3.2, max_relative = 1e-14);
        assert_eq!(expected_votes(&spec(0.5, 3.0)).unwrap(), 9.0);
        for p in [0.1, 0.5, 0.6, 0.99, 1.0, 0.0] {
            assert_relative_eq!(expected_votes(&spec(p, 1.0)).unwrap(), 1.0, max_relative = 1e-14);
        }
        assert_eq!(expected_votes(&spec(1.0, 7.0)).unwrap(), 7.0);
        assert_eq!(
            expected_votes(&spec(0.7, 2.5)),
            Err(Error::NonIntegerThreshold(2.5))
        );
    }

    #[test]
    fn expected_votes_matches_raw_formula() {
        // δ·((φ+1)/(φ−1))·((φ^δ−1)/(φ^δ+1)) evaluated directly.
        for (p, d) in [(0.6, 3), (0.8, 5), (0.3, 4), (0.95, 10)] {
            let phi: f64 = p / (1.0 - p);
            let pd = phi.powi(d);
            let raw = d as f64 * (phi + 1.0) / (phi - 1.0) * (pd - 1.0) / (pd + 1.0);
            assert_relative_eq!(
                expected_votes(&spec(p, d as f64)).unwrap(),
                raw,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn quarter_squares() {
        assert_eq!(quarter_square(4), 4);
        assert_eq!(quarter_square(5), 6);
        assert_eq!(quarter_square(1), 0);
        assert_eq!(quarter_square(0), 0);
        let seq: Vec<u64> = (0..10).map(quarter_square).collect();
        assert_eq!(seq, vec![0, 0, 1, 2, 4, 6, 9, 12, 16, 20]);
    }

    #[test]
    fn bracket_coefficients_form_a_pyramid() {
        assert!(variance_bracket_coefficients(1).is_empty());
        assert_eq!(variance_bracket_coefficients(2), vec![1]);
        assert_eq!(variance_bracket_coefficients(3), vec![1, 2, 1]);
        assert_eq!(variance_bracket_coefficients(5), vec![1, 2, 4, 6, 4, 2, 1]);
        assert_eq!(
            variance_bracket_coefficients(7),
            vec![1, 2, 4, 6, 9, 12, 9, 6, 4, 2, 1]
        );
    }

    #[test]
    fn variance_examples() {
        assert_eq!(votes_variance(&spec(0.5, 2.0)).unwrap(), 8.0);
        assert_eq!(votes_variance(&spec(0.5, 3.0)).unwrap(), 48.0);
        assert_relative_eq!(votes_variance(&spec(0.75, 2.0)).unwrap(), 3.84, max_relative = 1e-14);
        for p in [0.2, 0.5, 0.9] {
            assert_eq!(votes_variance(&spec(p, 1.0)).unwrap(), 0.0);
        }
        assert_eq!(votes_variance(&spec(1.0, 4.0)).unwrap(), 0.0);
        assert_eq!(votes_variance(&spec(0.0, 4.0)).unwrap(), 0.0);
        assert!(votes_variance(&spec(0.7, 2.5)).is_err());
    }

    #[test]
    fn variance_is_finite_for_large_thresholds() {
        let v = votes_variance(&spec(0.9, 5000.0)).unwrap();
        assert!(v.is_finite() && v > 0.0);
        let e = expected_votes(&spec(0.9, 5000.0)).unwrap();
        assert!(e.is_finite() && e > 5000.0);
    }

    /// Direct evaluation of the tabulated variance expressions for δ = 2..7,
    /// with the δ = 7 prefactor taken as (φ+1)/(φ⁷+1).
    fn tabulated_variance(delta: u32, phi: f64) -> f64 {
        let poly: &[f64] = match delta {
            2 => &[1.0],
            3 => &[1.0, 2.0, 1.0],
            4 => &[1.0, 2.0, 4.0, 2.0, 1.0],
            5 => &[1.0, 2.0, 4.0, 6.0, 4.0, 2.0, 1.0],
            6 => &[1.0, 2.0, 4.0, 6.0, 9.0, 6.0, 4.0, 2.0, 1.0],
            7 => &[1.0, 2.0, 4.0, 6.0, 9.0, 12.0, 9.0, 6.0, 4.0, 2.0, 1.0],
            _ => unreachable!(),
        };
        let poly_val: f64 = poly.iter().enumerate().map(|(j, c)| c * phi.powi(j as i32)).sum();
        let pre = (phi + 1.0) / (phi.powi(delta as i32) + 1.0);
        4.0 * delta as f64 * phi * pre * pre * poly_val
    }

    #[test]
    fn variance_matches_table_rows() {
        for delta in 2..=7u32 {
            for phi in [1.5, 2.0, 3.0] {
                let p = phi / (1.0 + phi);
                let v = votes_variance(&spec(p, delta as f64)).unwrap();
                assert_relative_eq!(v, tabulated_variance(delta, phi), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn complement_symmetry() {
        for i in 1..=99 {
            let p = i as f64 / 100.0;
            for d in 1..=10 {
                let q1 = consensus_quality(&spec(p, d as f64));
                let q2 = consensus_quality(&spec(1.0 - p, d as f64));
                assert!((q1 + q2 - 1.0).abs() < 1e-12, "p={p} d={d}");
            }
        }
    }

    #[test]
    fn odds_exponentiation() {
        for i in 0..=40 {
            let p = 0.55 + i as f64 * 0.01;
            let phi = p / (1.0 - p);
            for d in 1..=10 {
                let q = consensus_quality(&spec(p, d as f64));
                // 1 − q carries an absolute error near one ulp of 1
                let tol = 1e-15 * (1.0 + phi.powi(d));
                assert_relative_eq!(q / (1.0 - q), phi.powi(d), max_relative = tol.max(1e-12));
            }
        }
    }

    #[test]
    fn continuity_at_symmetric_point() {
        for d in 2..=8u32 {
            let sym_e = (d * d) as f64;
            let sym_v = symmetric_votes_variance(d);
            for p in [0.5 + 1e-7, 0.5 - 1e-7] {
                let s = spec(p, d as f64);
                assert_relative_eq!(expected_votes(&s).unwrap(), sym_e, max_relative = 1e-4);
                assert_relative_eq!(votes_variance(&s).unwrap(), sym_v, max_relative = 1e-4);
                let g = GamblerSpec::from_voting(d, acc(p)).unwrap();
                assert_relative_eq!(gambler_expected_duration(&g), sym_e, max_relative = 1e-4);
                assert_relative_eq!(gambler_win_probability(&g), 0.5, max_relative = 1e-4);
            }
        }
    }

    /// Probability of absorption at `n`, by propagating path mass one step at
    /// a time until the unabsorbed remainder drops below 1e-12.
    fn win_probability_by_paths(k: u64, n: u64, p: f64) -> f64 {
        let mut mass = vec![0.0; n as usize + 1];
        mass[k as usize] = 1.0;
        let mut won = 0.0;
        loop {
            let mut next = vec![0.0; n as usize + 1];
            for pos in 1..n as usize {
                let m = mass[pos];
                if m == 0.0 {
                    continue;
                }
                next[pos + 1] += m * p;
                next[pos - 1] += m * (1.0 - p);
            }
            won += next[n as usize];
            next[n as usize] = 0.0;
            next[0] = 0.0;
            mass = next;
            if mass.iter().sum::<f64>() < 1e-12 {
                return won;
            }
        }
    }

    #[test]
    fn gambler_win_examples() {
        let g = GamblerSpec::new(2, 4, acc(0.75)).unwrap();
        assert_relative_eq!(gambler_win_probability(&g), 0.9, max_relative = 1e-14);
        let g = GamblerSpec::new(1, 4, acc(0.5)).unwrap();
        assert_eq!(gambler_win_probability(&g), 0.25);

        let g = GamblerSpec::new(2, 3, acc(0.6)).unwrap();
        let oracle = win_probability_by_paths(2, 3, 0.6);
        assert_relative_eq!(gambler_win_probability(&g), oracle, epsilon = 1e-11);
        assert_relative_eq!(gambler_win_probability(&g), 15.0 / 19.0, max_relative = 1e-14);
    }

    #[test]
    fn gambler_win_against_path_oracle_grid() {
        for (k, n) in [(1, 2), (3, 7), (5, 6), (4, 10)] {
            for p in [0.2, 0.45, 0.55, 0.8] {
                let g = GamblerSpec::new(k, n, acc(p)).unwrap();
                let oracle = win_probability_by_paths(k, n, p);
                assert_relative_eq!(gambler_win_probability(&g), oracle, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn gambler_win_extreme_odds() {
        let g = GamblerSpec::new(1, 2000, acc(0.1)).unwrap();
        let w = gambler_win_probability(&g);
        assert!(w.is_finite() && (0.0..1e-300).contains(&w));
        let g = GamblerSpec::new(1, 2000, acc(0.9)).unwrap();
        assert_relative_eq!(gambler_win_probability(&g), 1.0 - 1.0 / 9.0, max_relative = 1e-12);
    }

    #[test]
    fn gambler_rejects_bad_range() {
        assert_eq!(
            GamblerSpec::new(0, 4, acc(0.5)),
            Err(Error::InvalidGambler { k: 0, n: 4 })
        );
        assert!(GamblerSpec::new(4, 4, acc(0.5)).is_err());
        assert!(gambler_symmetric_variance(5, 3).is_err());
        assert!(gambler_symmetric_conditional_durations(0, 3).is_err());
    }

    #[test]
    fn gambler_duration_examples() {
        let g = GamblerSpec::new(2, 4, acc(0.75)).unwrap();
        assert_relative_eq!(gambler_expected_duration(&g), 3.2, max_relative = 1e-14);
        let g = GamblerSpec::new(3, 6, acc(0.5)).unwrap();
        assert_eq!(gambler_expected_duration(&g), 9.0);
        for p in [0.0, 0.3, 0.5, 0.9, 1.0] {
            let g = GamblerSpec::new(1, 2, acc(p)).unwrap();
            assert_relative_eq!(gambler_expected_duration(&g), 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn wald_consistency() {
        for (k, n) in [(1, 3), (2, 5), (4, 8), (7, 9)] {
            for p in [0.1, 0.35, 0.6, 0.85] {
                let g = GamblerSpec::new(k, n, acc(p)).unwrap();
                let lhs = n as f64 * gambler_win_probability(&g);
                let rhs = k as f64 + (2.0 * p - 1.0) * gambler_expected_duration(&g);
                assert!((lhs - rhs).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn symmetric_variance_examples() {
        assert_eq!(gambler_symmetric_variance(2, 4).unwrap(), 8.0);
        assert_eq!(gambler_symmetric_variance(1, 2).unwrap(), 0.0);
        for d in 1..=10u32 {
            assert_relative_eq!(
                gambler_symmetric_variance(d as u64, 2 * d as u64).unwrap(),
                symmetric_votes_variance(d),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn conditional_duration_examples() {
        assert_eq!(gambler_symmetric_conditional_durations(3, 6).unwrap(), (9.0, 9.0));
        let (win, ruin) = gambler_symmetric_conditional_durations(1, 4).unwrap();
        assert_relative_eq!(win, 5.0, max_relative = 1e-15);
        assert_relative_eq!(ruin, 7.0 / 3.0, max_relative = 1e-15);

        let g = GamblerSpec::new(2, 5, acc(0.5)).unwrap();
        let pw = gambler_win_probability(&g);
        let (win, ruin) = gambler_symmetric_conditional_durations(2, 5).unwrap();
        assert!((pw * win + (1.0 - pw) * ruin - 6.0).abs() < 1e-12);
    }

    #[test]
    fn stats_bundle() {
        let s = stats(&spec(0.75, 2.0)).unwrap();
        assert_eq!(s.source, StatsSource::ClosedForm);
        assert_relative_eq!(s.quality, 0.9, max_relative = 1e-15);
        assert_relative_eq!(s.expected_votes, 3.2, max_relative = 1e-14);
        assert_relative_eq!(s.votes_variance, 3.84, max_relative = 1e-14);
        assert!(s.expected_votes >= 2.0);
    }
}
