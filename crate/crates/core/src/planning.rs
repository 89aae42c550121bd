//! Matching two worker pools on quality and cost.
//!
//! Pool 1 works at odds φ1 with threshold δ1. Pool 2 at odds φ2 reaches the
//! same quality with δ2 = δ1·ln φ1 / ln φ2, because quality depends on the
//! pair only through φ^δ. Payments then follow from equating expected cost,
//! optionally penalised by λ standard deviations of the vote count.

use serde::Serialize;

use crate::closed_form::{self, quality_from_log_odds};
use crate::error::{Error, Result};
use crate::params::{OddsRatio, VotingSpec};

/// Distance from an integer below which an equivalent threshold counts as integral.
pub const INTEGER_TOLERANCE: f64 = 1e-9;

fn odds_above_one(name: &'static str, phi: f64) -> Result<OddsRatio> {
    let odds = OddsRatio::new(phi)?;
    if phi > 1.0 && phi.is_finite() {
        Ok(odds)
    } else {
        Err(Error::OddsNotAboveOne { name, value: phi })
    }
}

fn spec_at(phi: OddsRatio, delta: f64) -> Result<VotingSpec> {
    VotingSpec::from_odds(phi, delta)
}

/// Threshold for pool 2 giving the same quality as `(φ1, δ1)`.
pub fn equivalent_threshold(phi1: f64, delta1: f64, phi2: f64) -> Result<f64> {
    let o1 = odds_above_one("phi1", phi1)?;
    let o2 = odds_above_one("phi2", phi2)?;
    spec_at(o1, delta1)?;
    Ok(delta1 * o1.ln() / o2.ln())
}

/// The nearest integer when `delta` is within [`INTEGER_TOLERANCE`] of it.
pub fn as_integer_threshold(delta: f64) -> Option<u32> {
    let r = delta.round();
    ((delta - r).abs() <= INTEGER_TOLERANCE && r >= 1.0 && r <= u32::MAX as f64).then_some(r as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegerCandidates {
    pub target: f64,
    pub floor: u32,
    pub ceil: u32,
    pub quality_floor: f64,
    pub quality_ceil: f64,
}

/// Integer thresholds on either side of a real one, with their qualities.
///
/// A target within [`INTEGER_TOLERANCE`] of an integer collapses to it. The
/// floor may be 0, which is a process with no votes and quality 1/2.
pub fn integerize_threshold(delta2: f64, phi2: f64) -> Result<IntegerCandidates> {
    if !(delta2 > 0.0 && delta2.is_finite()) {
        return Err(Error::InvalidThreshold(delta2));
    }
    let odds = OddsRatio::new(phi2)?;
    let (floor, ceil) = match as_integer_threshold(delta2) {
        Some(d) => (d, d),
        None => (delta2.floor() as u32, delta2.ceil() as u32),
    };
    let quality = |d: u32| -> Result<f64> {
        if d == 0 {
            Ok(quality_from_log_odds(0.0))
        } else {
            Ok(closed_form::consensus_quality(&spec_at(odds, d as f64)?))
        }
    };
    Ok(IntegerCandidates {
        target: delta2,
        floor,
        ceil,
        quality_floor: quality(floor)?,
        quality_ceil: quality(ceil)?,
    })
}

fn check_pay(name: &'static str, pay: f64) -> Result<()> {
    if pay >= 0.0 && pay.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("payment must be a nonnegative number, got {pay}"),
        })
    }
}

/// `pay · E[votes]` at odds φ and integer threshold δ.
pub fn expected_cost(pay: f64, phi: f64, delta: u32) -> Result<f64> {
    check_pay("pay", pay)?;
    let spec = spec_at(OddsRatio::new(phi)?, delta as f64)?;
    Ok(pay * closed_form::expected_votes(&spec)?)
}

/// Per-vote pay ratio `pay1 / pay2` making the two pools cost the same at
/// equal quality.
pub fn equivalent_pay_ratio(phi1: f64, phi2: f64) -> Result<f64> {
    let o1 = odds_above_one("phi1", phi1)?;
    let o2 = odds_above_one("phi2", phi2)?;
    Ok((o1.ln() / o2.ln()) * ((phi2 + 1.0) / (phi1 + 1.0)) * ((phi1 - 1.0) / (phi2 - 1.0)))
}

/// Effort ψ along the iso-payment curve `ψ = c·ln φ·(φ−1)/(φ+1)`.
pub fn iso_effort(phi: f64, c: f64) -> Result<f64> {
    let odds = odds_above_one("phi", phi)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "c",
            reason: format!("curve constant must be positive, got {c}"),
        });
    }
    Ok(c * odds.ln() * (phi - 1.0) / (phi + 1.0))
}

/// Per-vote pay at odds φ that keeps expected cost at a given quality fixed,
/// up to the scale `c0`.
pub fn fair_pay(phi: f64, c0: f64) -> Result<f64> {
    iso_effort(phi, c0)
}

/// Variance of a Bernoulli(Q) outcome. Not needed by [`utility_pay_ratio`],
/// since equal qualities cancel it out of the equivalence.
pub fn quality_variance(q: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&q) {
        Ok(q * (1.0 - q))
    } else {
        Err(Error::InvalidParameter {
            name: "quality",
            reason: format!("must lie in [0, 1], got {q}"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaymentPlan {
    pub pay1: f64,
    pub pay2: f64,
    pub delta1: u32,
    pub delta2: u32,
    pub lambda: f64,
    /// Quality of pool 1.
    pub quality: f64,
    /// Quality of pool 2 at `delta2`; equals `quality` when δ2 is the exact equivalent.
    pub quality2: f64,
    pub expected_votes1: f64,
    pub expected_votes2: f64,
    pub expected_cost1: f64,
    pub expected_cost2: f64,
}

/// Pool-2 pay equalising `E[n] + λ·sd(n)` weighted cost with pool 1, at the
/// equivalent threshold. Fails with [`Error::NeedsRounding`] when that
/// threshold is not an integer; see [`utility_pay_ratio_at`].
pub fn utility_pay_ratio(phi1: f64, delta1: u32, pay1: f64, phi2: f64, lambda: f64) -> Result<PaymentPlan> {
    let delta2 = equivalent_threshold(phi1, delta1 as f64, phi2)?;
    let d2 = as_integer_threshold(delta2).ok_or(Error::NeedsRounding(delta2))?;
    utility_pay_ratio_at(phi1, delta1, pay1, phi2, d2, lambda)
}

/// As [`utility_pay_ratio`] with an explicitly chosen integer δ2.
pub fn utility_pay_ratio_at(
    phi1: f64,
    delta1: u32,
    pay1: f64,
    phi2: f64,
    delta2: u32,
    lambda: f64,
) -> Result<PaymentPlan> {
    let o1 = odds_above_one("phi1", phi1)?;
    let o2 = odds_above_one("phi2", phi2)?;
    check_pay("pay1", pay1)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("risk aversion must be nonnegative, got {lambda}"),
        });
    }
    let s1 = closed_form::stats(&spec_at(o1, delta1 as f64)?)?;
    let s2 = closed_form::stats(&spec_at(o2, delta2 as f64)?)?;
    let weighted1 = s1.expected_votes + lambda * s1.std_dev();
    let weighted2 = s2.expected_votes + lambda * s2.std_dev();
    let pay2 = pay1 * weighted1 / weighted2;
    Ok(PaymentPlan {
        pay1,
        pay2,
        delta1,
        delta2,
        lambda,
        quality: s1.quality,
        quality2: s2.quality,
        expected_votes1: s1.expected_votes,
        expected_votes2: s2.expected_votes,
        expected_cost1: pay1 * s1.expected_votes,
        expected_cost2: pay2 * s2.expected_votes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain;
    use approx::assert_relative_eq;

    fn q(phi: f64, delta: f64) -> f64 {
        closed_form::quality_from_odds(OddsRatio::new(phi).unwrap(), delta).unwrap()
    }

    #[test]
    fn worked_equivalence() {
        let d2 = equivalent_threshold(9.0, 2.0, 3.0).unwrap();
        assert_relative_eq!(d2, 4.0, epsilon = 1e-15);
        assert_eq!(as_integer_threshold(d2), Some(4));
        assert_relative_eq!(q(9.0, 2.0), 81.0 / 82.0, epsilon = 1e-15);
        assert_relative_eq!(q(3.0, d2), 81.0 / 82.0, epsilon = 1e-15);
        assert_eq!(equivalent_threshold(2.5, 3.0, 2.5).unwrap(), 3.0);
        let half = equivalent_threshold(3.0, 3.0, 9.0).unwrap();
        assert_relative_eq!(half, 1.5, epsilon = 1e-15);
        assert_eq!(as_integer_threshold(half), None);
    }

    #[test]
    fn equivalence_needs_better_than_random_pools() {
        for (a, b) in [(1.0, 3.0), (3.0, 1.0), (0.5, 3.0), (3.0, 0.8)] {
            assert!(matches!(
                equivalent_threshold(a, 2.0, b),
                Err(Error::OddsNotAboveOne { .. })
            ));
            assert!(equivalent_pay_ratio(a, b).is_err());
        }
        assert!(iso_effort(1.0, 1.0).is_err());
    }

    #[test]
    fn quality_equivalence_grid() {
        let phis: Vec<f64> = (0..=39).map(|i| 1.2 + 0.2 * i as f64).collect();
        for &p1 in &phis {
            for &p2 in &phis {
                for d1 in 1..=8 {
                    let d2 = equivalent_threshold(p1, d1 as f64, p2).unwrap();
                    assert!((q(p1, d1 as f64) - q(p2, d2)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn integer_candidates() {
        let c = integerize_threshold(4.0, 3.0).unwrap();
        assert_eq!((c.floor, c.ceil), (4, 4));
        assert_eq!(c.quality_floor, c.quality_ceil);
        let c = integerize_threshold(1.5, 9.0).unwrap();
        assert_eq!((c.floor, c.ceil), (1, 2));
        assert_relative_eq!(c.quality_floor, 0.9, epsilon = 1e-15);
        assert_relative_eq!(c.quality_ceil, 81.0 / 82.0, epsilon = 1e-15);
        let c = integerize_threshold(0.4, 3.0).unwrap();
        assert_eq!((c.floor, c.ceil, c.quality_floor), (0, 1, 0.5));
        assert!(integerize_threshold(0.0, 3.0).is_err());
    }

    #[test]
    fn candidates_bracket_target_quality() {
        for &(p1, d1, p2) in &[(9.0, 3.0, 2.0), (4.0, 5.0, 1.7), (2.2, 2.0, 6.5), (1.3, 7.0, 1.25)] {
            let d2 = equivalent_threshold(p1, d1, p2).unwrap();
            let c = integerize_threshold(d2, p2).unwrap();
            let target = q(p1, d1);
            assert!(c.quality_floor <= target + 1e-12 && target <= c.quality_ceil + 1e-12);
        }
    }

    #[test]
    fn costs() {
        assert_relative_eq!(expected_cost(1.0, 3.0, 2).unwrap(), 3.2, epsilon = 1e-12);
        assert_eq!(expected_cost(0.0, 3.0, 2).unwrap(), 0.0);
        assert_relative_eq!(
            expected_cost(2.5, 1.7, 5).unwrap(),
            2.0 * expected_cost(1.25, 1.7, 5).unwrap(),
            epsilon = 1e-12
        );
        assert!(expected_cost(-1.0, 3.0, 2).is_err());
    }

    #[test]
    fn pay_ratio() {
        assert_relative_eq!(equivalent_pay_ratio(9.0, 3.0).unwrap(), 3.2, epsilon = 1e-14);
        assert_eq!(equivalent_pay_ratio(2.0, 2.0).unwrap(), 1.0);
        for &(a, b) in &[(9.0, 3.0), (1.1, 20.0), (4.5, 1.7)] {
            let r = equivalent_pay_ratio(a, b).unwrap() * equivalent_pay_ratio(b, a).unwrap();
            assert_relative_eq!(r, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn pay_ratio_equalises_cost() {
        // expected votes at real δ2, so the identity φ2^δ2 = φ1^δ1 applies
        for &(p1, d1, p2) in &[(9.0, 2.0, 3.0), (3.0, 3.0, 9.0), (1.4, 5.0, 2.9), (7.0, 1.0, 1.2)] {
            let d2 = equivalent_threshold(p1, d1, p2).unwrap();
            let pay1 = 1.0;
            let pay2 = pay1 / equivalent_pay_ratio(p1, p2).unwrap();
            let e1 = closed_form::expected_votes_real(&spec_at(OddsRatio::new(p1).unwrap(), d1).unwrap());
            let e2 = closed_form::expected_votes_real(&spec_at(OddsRatio::new(p2).unwrap(), d2).unwrap());
            assert_relative_eq!(pay1 * e1, pay2 * e2, max_relative = 1e-9);
        }
    }

    #[test]
    fn iso_curve() {
        assert!(iso_effort(1.0 + 1e-9, 1.0).unwrap() < 1e-17);
        assert_relative_eq!(
            iso_effort(std::f64::consts::E, 1.0).unwrap(),
            (std::f64::consts::E - 1.0) / (std::f64::consts::E + 1.0),
            epsilon = 1e-15
        );
        assert_relative_eq!(iso_effort(2.0, 2.0).unwrap(), 2.0 * iso_effort(2.0, 1.0).unwrap(), epsilon = 1e-15);
        for i in 0..=189 {
            let phi = 1.1 + 0.1 * i as f64;
            let ratio = fair_pay(phi, 3.0).unwrap() / iso_effort(phi, 1.5).unwrap();
            assert!((ratio - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bernoulli_variance() {
        assert_eq!(quality_variance(0.5).unwrap(), 0.25);
        assert_eq!(quality_variance(0.0).unwrap(), 0.0);
        assert_eq!(quality_variance(1.0).unwrap(), 0.0);
        assert_relative_eq!(quality_variance(0.9).unwrap(), 0.09, epsilon = 1e-15);
        assert!(quality_variance(1.1).is_err());
    }

    #[test]
    fn risk_neutral_plan() {
        let plan = utility_pay_ratio(9.0, 2, 1.0, 3.0, 0.0).unwrap();
        assert_eq!(plan.delta2, 4);
        // δ·(φ^δ−1)/(φ^δ+1)·(φ+1)/(φ−1) at φ=9, δ=2
        assert_relative_eq!(plan.expected_votes1, 200.0 / 82.0, epsilon = 1e-12);
        assert!((plan.pay2 - plan.expected_votes1 / plan.expected_votes2).abs() < 1e-12);
        assert_relative_eq!(plan.expected_cost1, plan.expected_cost2, max_relative = 1e-12);
        assert_relative_eq!(plan.quality, plan.quality2, epsilon = 1e-12);
        assert_relative_eq!(1.0 / plan.pay2, 3.2, max_relative = 1e-12);
    }

    #[test]
    fn rounding_required() {
        assert_eq!(
            utility_pay_ratio(3.0, 3, 1.0, 9.0, 1.0).unwrap_err(),
            Error::NeedsRounding(equivalent_threshold(3.0, 3.0, 9.0).unwrap())
        );
        let plan = utility_pay_ratio_at(3.0, 3, 1.0, 9.0, 2, 1.0).unwrap();
        assert_eq!(plan.delta2, 2);
        assert!(plan.quality2 > plan.quality);
    }

    #[test]
    fn risk_aversion_direction_matches_matrix_oracle() {
        for lambda in [1.0, 2.0, 10.0] {
            let plan = utility_pay_ratio(9.0, 2, 1.0, 3.0, lambda).unwrap();
            let m1 = chain::matrix_stats(&spec_at(OddsRatio::new(9.0).unwrap(), 2.0).unwrap()).unwrap();
            let m2 = chain::matrix_stats(&spec_at(OddsRatio::new(3.0).unwrap(), 4.0).unwrap()).unwrap();
            let oracle = (m1.expected_votes + lambda * m1.std_dev()) / (m2.expected_votes + lambda * m2.std_dev());
            assert_relative_eq!(plan.pay2, oracle, max_relative = 1e-9);
            let neutral = utility_pay_ratio(9.0, 2, 1.0, 3.0, 0.0).unwrap().pay2;
            let cv1 = m1.std_dev() / m1.expected_votes;
            let cv2 = m2.std_dev() / m2.expected_votes;
            assert_eq!(plan.pay2 < neutral, cv1 < cv2);
        }
    }

    #[test]
    fn equal_pools_pay_equally() {
        for lambda in [0.0, 1.0, 2.0, 10.0, 100.0] {
            let plan = utility_pay_ratio(2.7, 4, 1.5, 2.7, lambda).unwrap();
            assert_eq!(plan.delta2, 4);
            assert_eq!(plan.pay2, 1.5);
        }
    }

    #[test]
    fn utility_pay_is_monotone_and_continuous_in_lambda() {
        for &(p1, d1, p2) in &[(9.0, 2, 3.0), (3.0, 4, 9.0)] {
            let pay = |lambda: f64| utility_pay_ratio(p1, d1, 1.0, p2, lambda).unwrap().pay2;
            let pays: Vec<f64> = (0..=200).map(|i| pay(i as f64 * 0.05)).collect();
            let increasing = pays[pays.len() - 1] >= pays[0];
            for (i, w) in pays.windows(2).enumerate() {
                let lambda = i as f64 * 0.05;
                assert!((pay(lambda + 1e-9) - w[0]).abs() < 1e-8);
                if increasing {
                    assert!(w[1] >= w[0] - 1e-15);
                } else {
                    assert!(w[1] <= w[0] + 1e-15);
                }
            }
        }
    }
}
