//! Synchronous distributed Bellman propagation.
//!
//! Every round, each machine backs up its owned states against its local
//! view (own fresh values + cached neighbor boundary values), then sends
//! each neighbor exactly the boundary values that neighbor reads; deliveries
//! land before the next round. With exact operators and single sweeps the
//! assembled iterate equals centralized value iteration bit for bit: every
//! machine's cache holds precisely the previous global iterate restricted to
//! what it reads, and all backups go through the same shared kernel.

use crate::depgraph::{DepGraph, ShardedMdp};
use crate::error::{ensure_contract, Result};
use crate::mdp_core::DeltaNoise;
use crate::protocols::{
    check_sharded_inputs, readout_table, Algorithm, ErrorOracle, MachineViews, Message, RoundRow,
    RunOptions, RunReport, TranscriptRecorder, EXACT_READOUT_TOL,
};

/// Run SDBP for up to `max_rounds` rounds.
///
/// Stops early when `opts.target_epsilon` is reached (the row for that round
/// is still recorded and `rounds_to_target` is set). `budget_exceeded` is
/// reported when a target was requested but never reached.
pub fn run_sdbp(
    data: &ShardedMdp,
    graph: &DepGraph,
    noise: &DeltaNoise,
    max_rounds: usize,
    opts: &RunOptions,
) -> Result<RunReport> {
    check_sharded_inputs(data, graph)?;
    ensure_contract!(opts.value_bits > 0, "value width must be positive");
    let m = data.n_machines();
    let oracle = ErrorOracle::new(data)?;
    let mut views = MachineViews::zeros(m, data.mdp.n_states());
    let mut recorder = TranscriptRecorder::new(opts.transcript);
    let mut rows = Vec::new();
    let mut bits_per_edge = std::collections::BTreeMap::new();
    let mut cum_bits: u64 = 0;
    let mut rounds_to_target = None;
    let mut rounds_to_exact = None;
    // Post-delivery readouts can only reach the oracle on noiseless runs, so
    // the (comparatively expensive) exactness probe is skipped under noise.
    let probe_exactness = noise.delta == 0.0;

    for round in 1..=max_rounds {
        // Backup phase: all machines use the caches delivered last round.
        for j in 0..m {
            views.backup_owned(data, j, round as u64, noise, opts.local_sweeps);
        }
        // Exchange phase: fresh boundary values out, delivered immediately
        // (synchronous links). Receiver k reads ∂_{k←j} from sender j.
        recorder.begin_round();
        for j in 0..m {
            for &k in graph.neighbors(j) {
                let boundary = graph.boundary_in(k, j);
                if boundary.is_empty() {
                    continue;
                }
                let payload: Vec<(usize, f64)> =
                    boundary.iter().map(|&s| (s, views.view(j)[s])).collect();
                let bit_size = payload.len() as u64 * opts.value_bits;
                let message = Message { sender: j, receiver: k, payload, bit_size };
                cum_bits += bit_size;
                *bits_per_edge.entry((j, k)).or_insert(0) += bit_size;
                recorder.record(round, &message);
                views.deliver(k, &message.payload);
            }
        }
        // Measurement phase: rows report the assembled backup-phase iterate;
        // exactness is judged on the post-delivery readout.
        let assembled = views.assemble(data);
        let sup_error = oracle.sup_error(&assembled);
        rows.push(RoundRow {
            round,
            sup_error,
            mean_error: oracle.mean_error(&assembled),
            disagreement: 0.0,
            cum_bits_total: cum_bits,
            batch: None,
        });
        if probe_exactness && rounds_to_exact.is_none() {
            let readout = readout_table(data, &views);
            if oracle.sup_error(&readout) <= EXACT_READOUT_TOL {
                rounds_to_exact = Some(round);
            }
        }
        if let Some(eps) = opts.target_epsilon {
            if sup_error <= eps {
                rounds_to_target = Some(round);
                break;
            }
        }
    }

    let final_values = views.assemble(data);
    Ok(RunReport {
        algorithm: Algorithm::Sdbp,
        rows,
        final_values,
        final_tables: None,
        rounds_to_target,
        rounds_to_exact,
        budget_exceeded: opts.target_epsilon.is_some() && rounds_to_target.is_none(),
        bits_per_edge,
        transcript: recorder.finish(),
        measured_local_error: None,
        batch_snapshots: None,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::DepGraph;
    use crate::instances::{gen_thm1_pair, gen_topology_mdp, TopologySpec};
    use crate::mdp_core::{truncated_vstar, NoiseMode};
    use crate::protocols::{LocalSweeps, TranscriptMode};

    fn ring_instance() -> (ShardedMdp, DepGraph) {
        let data = gen_topology_mdp(&TopologySpec::ring(8), 3, 0.9, 11).unwrap();
        let graph = DepGraph::build(&data).unwrap();
        (data, graph)
    }

    // --- exactness ---

    #[test]
    fn exact_sdbp_equals_truncated_vstar_bitwise() {
        let (data, graph) = ring_instance();
        for t in [1usize, 3, 7] {
            let report =
                run_sdbp(&data, &graph, &DeltaNoise::none(), t, &RunOptions::default()).unwrap();
            let reference = truncated_vstar(&data.mdp, t).unwrap();
            assert_eq!(
                report.final_values, reference,
                "assembled V^({t}) must equal 𝒯^{t} 0 exactly"
            );
        }
    }

    #[test]
    fn light_cone_on_the_locality_chain() {
        // Chain of length 3, single sweeps: the reward needs one round to
        // materialize at x_L and then L more to cross L hops, so x0's
        // truncated value 𝒯^t 0 = γ^L − γ^t is zero through t = L and first
        // pays γ^L(1−γ) at t = L + 1.
        let pair = gen_thm1_pair(3, 0.9).unwrap();
        let graph = pair.depgraph().unwrap();
        let at = |t: usize| {
            run_sdbp(&pair.rewarded, &graph, &DeltaNoise::none(), t, &RunOptions::default())
                .unwrap()
                .final_values[0]
        };
        assert_eq!(at(2), 0.0);
        assert_eq!(at(3), 0.0);
        assert!((at(4) - 0.9f64.powi(3) * 0.1).abs() < 1e-15);
    }

    #[test]
    fn noisy_steady_state_respects_delta_floor() {
        // δ = 0.05 worst-case sign at γ = 0.9: sup error settles within
        // (δ/(1+γ), δ/(1−γ)] — bounded by 0.5, bounded away from zero.
        let (data, graph) = ring_instance();
        let noise = DeltaNoise::new(0.05, 7, NoiseMode::WorstCaseSign).unwrap();
        let report = run_sdbp(&data, &graph, &noise, 400, &RunOptions::default()).unwrap();
        let tail = report.rows.last().unwrap().sup_error;
        let delta = 0.05;
        let gamma = data.mdp.gamma();
        assert!(tail <= delta / (1.0 - gamma) + 1e-12, "steady error {tail} above δ/(1−γ)");
        assert!(tail > delta / (1.0 + gamma), "persistent signs keep error above δ/(1+γ)");
    }

    #[test]
    fn per_round_theorem5_bound() {
        let (data, graph) = ring_instance();
        let noise = DeltaNoise::new(0.02, 3, NoiseMode::UniformBounded).unwrap();
        let report = run_sdbp(&data, &graph, &noise, 120, &RunOptions::default()).unwrap();
        let gamma = data.mdp.gamma();
        for row in &report.rows {
            let bound = gamma.powi(row.round as i32) / (1.0 - gamma) + 0.02 / (1.0 - gamma);
            assert!(
                row.sup_error <= bound + 1e-9,
                "round {}: {} > {bound}",
                row.round,
                row.sup_error
            );
        }
    }

    // --- reporting and determinism ---

    #[test]
    fn target_stops_early_and_sets_rounds() {
        let (data, graph) = ring_instance();
        let report =
            run_sdbp(&data, &graph, &DeltaNoise::none(), 10_000, &RunOptions::targeting(0.01))
                .unwrap();
        let hit = report.rounds_to_target.expect("exact runs reach any positive target");
        assert!(!report.budget_exceeded);
        assert_eq!(report.rows.len(), hit);
        assert!(report.rows.last().unwrap().sup_error <= 0.01);
        // Previous round (if any) was still above target.
        if hit > 1 {
            assert!(report.rows[hit - 2].sup_error > 0.01);
        }
    }

    #[test]
    fn budget_exceeded_when_target_unreachable() {
        let (data, graph) = ring_instance();
        let report =
            run_sdbp(&data, &graph, &DeltaNoise::none(), 3, &RunOptions::targeting(1e-9)).unwrap();
        assert!(report.budget_exceeded);
        assert_eq!(report.rounds_to_target, None);
        assert_eq!(report.rows.len(), 3);
    }

    #[test]
    fn bit_accounting_is_exact() {
        let (data, graph) = ring_instance();
        let report =
            run_sdbp(&data, &graph, &DeltaNoise::none(), 5, &RunOptions::default()).unwrap();
        // Per round, every directed edge ships its boundary set once.
        let per_round: u64 = (0..8)
            .flat_map(|j| graph.neighbors(j).iter().map(move |&k| (j, k)))
            .map(|(j, k)| graph.boundary_in(k, j).len() as u64 * 64)
            .sum();
        assert_eq!(report.cum_bits_total(), 5 * per_round);
        let from_edges: u64 = report.bits_per_edge.values().sum();
        assert_eq!(from_edges, report.cum_bits_total());
    }

    #[test]
    fn runs_replay_bit_identically() {
        let (data, graph) = ring_instance();
        let noise = DeltaNoise::new(0.01, 99, NoiseMode::UniformBounded).unwrap();
        let opts = RunOptions { transcript: TranscriptMode::Digest, ..Default::default() };
        let a = run_sdbp(&data, &graph, &noise, 50, &opts).unwrap();
        let b = run_sdbp(&data, &graph, &noise, 50, &opts).unwrap();
        assert_eq!(a.final_values, b.final_values);
        assert_eq!(a.to_csv(), b.to_csv());
        match (&a.transcript, &b.transcript) {
            (crate::protocols::Transcript::Digest(da), crate::protocols::Transcript::Digest(db)) => {
                assert_eq!(da, db)
            }
            _ => panic!("expected digests"),
        }
    }

    #[test]
    fn extra_local_sweeps_do_not_speed_information() {
        // To-convergence sweeps on the L = 4 chain: information still moves
        // one hop per round, but each hop carries the local fixed point at
        // full strength. The exact value γ^L lands in x0's *cache-solved
        // readout* at round L and in the backup-phase view one round later.
        let pair = gen_thm1_pair(4, 0.5).unwrap();
        let graph = pair.depgraph().unwrap();
        let opts = RunOptions { local_sweeps: LocalSweeps::ToConvergence, ..Default::default() };
        let run = |t: usize| {
            run_sdbp(&pair.rewarded, &graph, &DeltaNoise::none(), t, &opts).unwrap()
        };
        assert_eq!(run(4).final_values[0], 0.0, "round 4's backup used the round-3 cache");
        assert_eq!(run(5).final_values[0], 0.5f64.powi(4));
        // γ = 1/2 keeps everything dyadic, so the readout hits the oracle to
        // within its 1e-10 solve tolerance at exactly round L.
        assert_eq!(run(6).rounds_to_exact, Some(4));
    }
}
