//! Shared inputs for the benchmarks.

use margin_vote::VotingSpec;

/// Representative (p, δ) workloads, from quick to long walks.
pub fn workloads() -> Vec<(&'static str, VotingSpec)> {
    [("p0.9_d3", 0.9, 3.0), ("p0.75_d5", 0.75, 5.0), ("p0.55_d10", 0.55, 10.0)]
        .into_iter()
        .map(|(name, p, d)| (name, VotingSpec::new(p, d).expect("valid workload")))
        .collect()
}
