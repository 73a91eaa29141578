//! Centralized broadcast baseline.
//!
//! One coordinator applies a full noisy Bellman sweep per round and
//! broadcasts the iterate, so every machine starts each round with the whole
//! previous table. Network traffic is *not* metered — the baseline models
//! free broadcast and exists to show what the boundary-exchange protocols
//! give up (nothing, round for round: each state's perturbation is keyed by
//! its owning machine, so this produces bit-identical iterates to
//! [`run_sdbp`](crate::protocols::sdbp::run_sdbp) with single sweeps).

use std::collections::BTreeMap;

use crate::depgraph::ShardedMdp;
use crate::error::{ensure_contract, Result};
use crate::mdp_core::{DeltaNoise, ValueTable};
use crate::protocols::{
    owner_keyed_global_sweep, Algorithm, ErrorOracle, RoundRow, RunOptions, RunReport, Transcript,
};

/// Run the broadcast baseline for up to `max_rounds` rounds.
///
/// Transcript modes are ignored (there are no point-to-point messages to
/// record); bit counters stay at zero.
pub fn run_broadcast(
    data: &ShardedMdp,
    noise: &DeltaNoise,
    max_rounds: usize,
    opts: &RunOptions,
) -> Result<RunReport> {
    ensure_contract!(opts.value_bits > 0, "value width must be positive");
    let oracle = ErrorOracle::new(data)?;
    let mut v = ValueTable::zeros(data.mdp.n_states());
    let mut rows = Vec::new();
    let mut rounds_to_target = None;

    for round in 1..=max_rounds {
        v = owner_keyed_global_sweep(data, &v, noise, round as u64)?;
        let sup_error = oracle.sup_error(&v);
        rows.push(RoundRow {
            round,
            sup_error,
            mean_error: oracle.mean_error(&v),
            disagreement: 0.0,
            cum_bits_total: 0,
            batch: None,
        });
        if let Some(eps) = opts.target_epsilon {
            if sup_error <= eps {
                rounds_to_target = Some(round);
                break;
            }
        }
    }

    Ok(RunReport {
        algorithm: Algorithm::Broadcast,
        rows,
        final_values: v,
        final_tables: None,
        rounds_to_target,
        rounds_to_exact: None,
        budget_exceeded: opts.target_epsilon.is_some() && rounds_to_target.is_none(),
        bits_per_edge: BTreeMap::new(),
        transcript: Transcript::Off,
        measured_local_error: None,
        batch_snapshots: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::DepGraph;
    use crate::instances::{gen_topology_mdp, TopologySpec};
    use crate::mdp_core::{truncated_vstar, NoiseMode};
    use crate::protocols::sdbp::run_sdbp;

    fn grid_instance() -> ShardedMdp {
        gen_topology_mdp(&TopologySpec::grid(9), 4, 0.9, 5).unwrap()
    }

    #[test]
    fn exact_broadcast_is_truncated_value_iteration() {
        let data = grid_instance();
        let report =
            run_broadcast(&data, &DeltaNoise::none(), 6, &RunOptions::default()).unwrap();
        assert_eq!(report.final_values, truncated_vstar(&data.mdp, 6).unwrap());
        assert_eq!(report.cum_bits_total(), 0);
    }

    #[test]
    fn broadcast_matches_sdbp_bitwise_under_noise() {
        // Owner-keyed perturbations make the two protocols draw identical
        // noise, so their iterates agree bit for bit at any δ.
        let data = grid_instance();
        let graph = DepGraph::build(&data).unwrap();
        let noise = DeltaNoise::new(0.03, 42, NoiseMode::UniformBounded).unwrap();
        let opts = RunOptions::default();
        let b = run_broadcast(&data, &noise, 40, &opts).unwrap();
        let s = run_sdbp(&data, &graph, &noise, 40, &opts).unwrap();
        assert_eq!(b.final_values, s.final_values);
        for (rb, rs) in b.rows.iter().zip(&s.rows) {
            assert_eq!(rb.sup_error.to_bits(), rs.sup_error.to_bits(), "round {}", rb.round);
        }
    }

    #[test]
    fn rounds_to_target_equal_sdbp() {
        let data = grid_instance();
        let graph = DepGraph::build(&data).unwrap();
        let opts = RunOptions::targeting(0.05);
        let b = run_broadcast(&data, &DeltaNoise::none(), 10_000, &opts).unwrap();
        let s = run_sdbp(&data, &graph, &DeltaNoise::none(), 10_000, &opts).unwrap();
        assert_eq!(b.rounds_to_target, s.rounds_to_target);
        assert!(b.rounds_to_target.is_some());
    }
}
