//! Parameter types shared by every model: worker accuracy, odds, and the
//! (accuracy, threshold) pair that defines a margin-voting process.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the band around p = 1/2 that is treated as random voting.
///
/// The general closed forms are 0/0 at φ = 1, so inside this band every
/// formula switches to its symmetric-walk limit.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Probability that a single vote is correct.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct WorkerAccuracy(f64);

impl WorkerAccuracy {
    pub fn new(p: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            Err(Error::InvalidAccuracy(p))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Probability of an incorrect vote, `1 - p`.
    #[inline]
    pub fn complement(self) -> f64 {
        1.0 - self.0
    }

    /// The mirrored accuracy `1 - p`.
    pub fn flipped(self) -> Self {
        Self(1.0 - self.0)
    }

    pub fn is_symmetric(self) -> bool {
        (2.0 * self.0 - 1.0).abs() < SYMMETRY_TOLERANCE
    }

    /// True for p = 0 or p = 1, where every walk is deterministic.
    pub fn is_degenerate(self) -> bool {
        self.0 == 0.0 || self.0 == 1.0
    }

    /// Natural log of the odds, `ln(p / (1 - p))`; ±∞ at the endpoints.
    pub fn log_odds(self) -> f64 {
        if self.0 == 1.0 {
            f64::INFINITY
        } else if self.0 == 0.0 {
            f64::NEG_INFINITY
        } else {
            (self.0 / (1.0 - self.0)).ln()
        }
    }
}

impl TryFrom<f64> for WorkerAccuracy {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<WorkerAccuracy> for f64 {
    fn from(p: WorkerAccuracy) -> f64 {
        p.0
    }
}

/// Odds φ = p / (1 - p) of a correct vote. May be +∞ when p = 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct OddsRatio(f64);

impl OddsRatio {
    pub fn new(phi: f64) -> Result<Self> {
        if phi >= 0.0 {
            Ok(Self(phi))
        } else {
            Err(Error::InvalidOdds(phi))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn ln(self) -> f64 {
        self.0.ln()
    }
}

impl TryFrom<f64> for OddsRatio {
    type Error = Error;
    fn try_from(phi: f64) -> Result<Self> {
        Self::new(phi)
    }
}

impl From<OddsRatio> for f64 {
    fn from(phi: OddsRatio) -> f64 {
        phi.0
    }
}

pub fn odds_from_accuracy(p: WorkerAccuracy) -> OddsRatio {
    let p = p.value();
    if p == 1.0 {
        OddsRatio(f64::INFINITY)
    } else {
        OddsRatio(p / (1.0 - p))
    }
}

pub fn accuracy_from_odds(phi: OddsRatio) -> WorkerAccuracy {
    let phi = phi.value();
    if phi.is_infinite() {
        WorkerAccuracy(1.0)
    } else {
        WorkerAccuracy(phi / (1.0 + phi))
    }
}

/// A margin-voting process: worker accuracy plus the consensus threshold δ.
///
/// δ is real because threshold equivalence produces non-integer values;
/// consumers that count discrete votes call [`VotingSpec::integer_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VotingSpec {
    pub accuracy: WorkerAccuracy,
    threshold: f64,
}

impl VotingSpec {
    pub fn new(p: f64, threshold: f64) -> Result<Self> {
        Self::from_accuracy(WorkerAccuracy::new(p)?, threshold)
    }

    pub fn from_accuracy(accuracy: WorkerAccuracy, threshold: f64) -> Result<Self> {
        if threshold > 0.0 && threshold.is_finite() {
            Ok(Self {
                accuracy,
                threshold,
            })
        } else {
            Err(Error::InvalidThreshold(threshold))
        }
    }

    pub fn from_odds(phi: OddsRatio, threshold: f64) -> Result<Self> {
        Self::from_accuracy(accuracy_from_odds(phi), threshold)
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.accuracy.value()
    }

    #[inline]
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn odds(&self) -> OddsRatio {
        odds_from_accuracy(self.accuracy)
    }

    pub fn is_symmetric(&self) -> bool {
        self.accuracy.is_symmetric()
    }

    pub fn is_integer_threshold(&self) -> bool {
        self.threshold.fract() == 0.0 && self.threshold <= u32::MAX as f64
    }

    /// δ as an integer, or [`Error::NonIntegerThreshold`].
    pub fn integer_threshold(&self) -> Result<u32> {
        if self.is_integer_threshold() {
            Ok(self.threshold as u32)
        } else {
            Err(Error::NonIntegerThreshold(self.threshold))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn acc(p: f64) -> WorkerAccuracy {
        WorkerAccuracy::new(p).unwrap()
    }

    #[test]
    fn odds_examples() {
        assert_eq!(odds_from_accuracy(acc(0.75)).value(), 3.0);
        assert_eq!(odds_from_accuracy(acc(0.5)).value(), 1.0);
        assert_relative_eq!(
            odds_from_accuracy(acc(0.6356)).value(),
            1.744,
            max_relative = 1e-3
        );
        assert_eq!(odds_from_accuracy(acc(1.0)).value(), f64::INFINITY);
        assert_eq!(odds_from_accuracy(acc(0.0)).value(), 0.0);
    }

    #[test]
    fn accuracy_examples() {
        let p = |phi: f64| accuracy_from_odds(OddsRatio::new(phi).unwrap()).value();
        assert_eq!(p(3.0), 0.75);
        assert_eq!(p(1.0), 0.5);
        assert_eq!(p(9.0), 0.9);
        assert_eq!(p(f64::INFINITY), 1.0);
        assert_eq!(p(0.0), 0.0);
    }

    #[test]
    fn rejects_out_of_range() {
        assert_eq!(WorkerAccuracy::new(1.5), Err(Error::InvalidAccuracy(1.5)));
        assert!(WorkerAccuracy::new(-0.1).is_err());
        assert!(WorkerAccuracy::new(f64::NAN).is_err());
        assert_eq!(OddsRatio::new(-1.0), Err(Error::InvalidOdds(-1.0)));
        assert!(OddsRatio::new(f64::NAN).is_err());
        assert_eq!(VotingSpec::new(0.7, 0.0), Err(Error::InvalidThreshold(0.0)));
        assert!(VotingSpec::new(0.7, f64::INFINITY).is_err());
    }

    #[test]
    fn integer_threshold_boundary() {
        assert_eq!(VotingSpec::new(0.7, 3.0).unwrap().integer_threshold(), Ok(3));
        assert_eq!(
            VotingSpec::new(0.7, 1.5).unwrap().integer_threshold(),
            Err(Error::NonIntegerThreshold(1.5))
        );
    }

    #[test]
    fn symmetric_band() {
        assert!(acc(0.5).is_symmetric());
        assert!(acc(0.5 + 1e-13).is_symmetric());
        assert!(!acc(0.5 + 1e-9).is_symmetric());
    }

    proptest! {
        #[test]
        fn round_trip(p in 1e-9f64..(1.0 - 1e-9)) {
            let back = accuracy_from_odds(odds_from_accuracy(acc(p))).value();
            prop_assert!(((back - p) / p).abs() <= 1e-12);
        }

        #[test]
        fn odds_strictly_increasing(a in 1e-6f64..(1.0 - 1e-6), b in 1e-6f64..(1.0 - 1e-6)) {
            prop_assume!(a < b);
            prop_assert!(odds_from_accuracy(acc(a)).value() < odds_from_accuracy(acc(b)).value());
        }
    }
}
