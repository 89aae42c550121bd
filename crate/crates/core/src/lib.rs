//! Analytics for δ-margin voting.
//!
//! Workers cast binary votes one at a time until one label leads the other
//! by δ. With independent workers of accuracy p this is a gambler's-ruin walk
//! started at 0 with absorbing barriers at ±δ. The crate computes the
//! quality and vote-count moments in closed form and from the absorbing
//! chain, simulates walks, replays recorded labels, matches worker pools on
//! quality and cost, and compares against majority voting.

pub mod chain;
pub mod closed_form;
pub mod comparison;
pub mod error;
pub mod montecarlo;
pub mod params;
pub mod planning;
pub mod replay;
pub mod seed;
pub mod tridiag;

pub use chain::{build_chain, matrix_stats, termination_distribution, ChainModel, PmfEntry, TerminationDistribution};
pub use closed_form::{consensus_quality, expected_votes, votes_variance, ConsensusStats, GamblerSpec, StatsSource};
pub use comparison::{early_stop_majority, majority_quality, MajoritySpec};
pub use error::{Error, Result};
pub use montecarlo::{simulate_walks, SimConfig, SimReport};
pub use params::{accuracy_from_odds, odds_from_accuracy, OddsRatio, VotingSpec, WorkerAccuracy};
pub use planning::PaymentPlan;
pub use replay::{LabelDataset, LabelRecord, ReplayMode};
