//! SDBP under a per-edge bandwidth cap.
//!
//! Each directed edge may carry at most `B` bits per round. Boundary states
//! whose values changed are queued FIFO; each round an edge ships the first
//! `⌊B / value_bits⌋` queued states, reading their values *at send time* so
//! a state never occupies two queue slots (superseded values coalesce). The
//! result is a pipeline: information still crosses one edge per round, but a
//! boundary of `m` states takes `⌈m / ⌊B/value_bits⌋⌉` rounds to pour
//! through an edge, and the two terms compose additively along a path.
//!
//! The runner is exact (δ = 0): the cap is a communication constraint, and
//! its interaction with staleness is the object of study.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::depgraph::{DepGraph, ShardedMdp};
use crate::error::{ensure_contract, Result};
use crate::mdp_core::DeltaNoise;
use crate::protocols::{
    check_sharded_inputs, readout_table, Algorithm, ErrorOracle, MachineViews, Message, RoundRow,
    RunOptions, RunReport, TranscriptRecorder, EXACT_READOUT_TOL,
};

/// Per-directed-edge transmission state.
struct EdgeQueue {
    /// States awaiting transmission, oldest first.
    fifo: VecDeque<usize>,
    /// Membership index for `fifo` (coalescing guard).
    queued: BTreeSet<usize>,
    /// Last value actually put on the wire, per state (unsent states are
    /// implicitly at the shared zero initialization).
    last_sent: BTreeMap<usize, f64>,
}

/// Run bandwidth-capped SDBP for up to `max_rounds` rounds.
///
/// `bits_per_edge_round` is the cap `B`; it must fit at least one serialized
/// value. Pass `u64::MAX` for an unlimited cap (the run then matches
/// [`run_sdbp`](crate::protocols::sdbp::run_sdbp) view for view).
pub fn run_sdbp_bandwidth(
    data: &ShardedMdp,
    graph: &DepGraph,
    bits_per_edge_round: u64,
    max_rounds: usize,
    opts: &RunOptions,
) -> Result<RunReport> {
    check_sharded_inputs(data, graph)?;
    ensure_contract!(opts.value_bits > 0, "value width must be positive");
    ensure_contract!(
        bits_per_edge_round >= opts.value_bits,
        "cap of {bits_per_edge_round} bits cannot carry one {}-bit value",
        opts.value_bits
    );
    let per_round_states = (bits_per_edge_round / opts.value_bits) as usize;
    let m = data.n_machines();
    let noise = DeltaNoise::none();
    let oracle = ErrorOracle::new(data)?;
    let mut views = MachineViews::zeros(m, data.mdp.n_states());
    let mut recorder = TranscriptRecorder::new(opts.transcript);
    let mut rows = Vec::new();
    let mut bits_per_edge = BTreeMap::new();
    let mut cum_bits: u64 = 0;
    let mut rounds_to_target = None;
    let mut rounds_to_exact = None;

    // One queue per directed edge that ever carries traffic.
    let mut queues: BTreeMap<(usize, usize), EdgeQueue> = BTreeMap::new();
    for j in 0..m {
        for &k in graph.neighbors(j) {
            if !graph.boundary_in(k, j).is_empty() {
                queues.insert(
                    (j, k),
                    EdgeQueue {
                        fifo: VecDeque::new(),
                        queued: BTreeSet::new(),
                        last_sent: BTreeMap::new(),
                    },
                );
            }
        }
    }

    for round in 1..=max_rounds {
        for j in 0..m {
            views.backup_owned(data, j, round as u64, &noise, opts.local_sweeps);
        }
        // Enqueue boundary states whose current value is not what the edge
        // last shipped (and which are not already waiting).
        for (&(j, k), queue) in queues.iter_mut() {
            for &s in graph.boundary_in(k, j) {
                if queue.queued.contains(&s) {
                    continue;
                }
                let current = views.view(j)[s];
                let on_wire = queue.last_sent.get(&s).copied().unwrap_or(0.0);
                if current.to_bits() != on_wire.to_bits() {
                    queue.fifo.push_back(s);
                    queue.queued.insert(s);
                }
            }
        }
        // Transmit up to the cap on every edge; values read at send time.
        recorder.begin_round();
        let mut deliveries: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
        for (&(j, k), queue) in queues.iter_mut() {
            let mut payload = Vec::new();
            for _ in 0..per_round_states {
                let Some(s) = queue.fifo.pop_front() else { break };
                queue.queued.remove(&s);
                let value = views.view(j)[s];
                queue.last_sent.insert(s, value);
                payload.push((s, value));
            }
            if payload.is_empty() {
                continue;
            }
            payload.sort_unstable_by_key(|&(s, _)| s);
            let bit_size = payload.len() as u64 * opts.value_bits;
            debug_assert!(bit_size <= bits_per_edge_round);
            cum_bits += bit_size;
            *bits_per_edge.entry((j, k)).or_insert(0) += bit_size;
            let message = Message { sender: j, receiver: k, payload, bit_size };
            recorder.record(round, &message);
            deliveries.push((k, message.payload));
        }
        for (k, payload) in deliveries {
            views.deliver(k, &payload);
        }

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
        if rounds_to_exact.is_none() {
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
        // Nothing in flight and nothing moving: the run is at its fixed
        // point and further rounds cannot change any view.
        if rounds_to_exact.is_some() && queues.values().all(|q| q.fifo.is_empty()) {
            break;
        }
    }

    let final_values = views.assemble(data);
    Ok(RunReport {
        algorithm: Algorithm::SdbpBandwidth,
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
