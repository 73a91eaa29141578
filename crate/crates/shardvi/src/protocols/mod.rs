//! Synchronous round-based protocol executions over a simulated network.
//!
//! Four disciplines share one round anatomy — every machine backs up its
//! owned states from its local view, then ships fresh values, which are
//! delivered before the next round:
//!
//! - [`sdbp::run_sdbp`] — boundary exchange: neighbors receive exactly the
//!   states they read.
//! - [`broadcast::run_broadcast`] — the centralized reference: one global
//!   sweep per round, zero network traffic.
//! - [`bandwidth::run_sdbp_bandwidth`] — boundary exchange under a per-edge
//!   bit cap, with FIFO queues and coalescing of superseded values.
//! - [`gossip::run_gossip_fvi`] — federated averaging: machines keep full
//!   value tables, refresh their owned coordinates, and mix tables with
//!   Metropolis–Hastings weights.
//!
//! [`indist::indistinguishability_check`] replays a protocol on two
//! instances that differ only far from an observer machine and compares the
//! observer's received transcript and outputs bit for bit.
//!
//! Every run is a pure function of (instance, seed, options): machines are
//! iterated in index order, message payloads are sorted, perturbations are
//! keyed hashes, and reports format floats at fixed precision — reruns
//! reproduce artifacts byte-identically.

pub mod bandwidth;
pub mod broadcast;
pub mod gossip;
pub mod indist;
pub mod sdbp;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::depgraph::{DepGraph, ShardedMdp};
use crate::error::{ensure_contract, Result};
use crate::mdp_core::{backup_state, bellman_apply_noisy, solve_vstar, DeltaNoise, ValueTable};

/// Serialized width of one value in transit (bits).
pub const DEFAULT_VALUE_BITS: u64 = 64;

/// Default round budget; headline star-topology gossip runs exceed it.
pub const DEFAULT_ROUND_BUDGET: usize = 50_000;

/// Accuracy of the `V⋆` oracle that run errors are measured against.
pub const VSTAR_ORACLE_TOL: f64 = 1e-10;

/// Iteration cap for to-convergence local solves (the contraction reaches
/// a floating-point fixed point or a terminal 1-ulp oscillation long before
/// this on any realistic shard).
pub const LOCAL_SOLVE_MAX_ITERS: usize = 1000;

/// Tolerance for declaring a readout "exact" against the `V⋆` oracle when
/// determining `rounds_to_exact` (strictly looser than [`VSTAR_ORACLE_TOL`]
/// so oracle error never masks a genuinely exact readout).
pub const EXACT_READOUT_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Options shared across runners
// ---------------------------------------------------------------------------

/// How much local computation a machine performs per round.
///
/// Information still crosses at most one machine edge per round in either
/// mode — extra local sweeps never substitute for communication.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalSweeps {
    /// One Bellman backup of the owned states per round. The assembled
    /// iterate then reproduces centralized value iteration exactly.
    Single,
    /// Solve the owned states to a local fixed point (boundary cache held
    /// constant) every round. Models machines with free local compute.
    ToConvergence,
}

/// What the run records about network traffic beyond bit counters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TranscriptMode {
    /// No transcript (cheapest; bit accounting still exact).
    Off,
    /// A running SHA-256 digest over every message in delivery order —
    /// constant memory, byte-exact replay detection.
    Digest,
    /// Store every message received by one machine, for transcript
    /// comparisons.
    AtMachine(usize),
    /// Store every message on the network, grouped by round — the raw
    /// material for per-edge and per-cut transcript analysis.
    Full,
}

/// Common knobs for protocol executions.
#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Stop (successfully) once `sup_error ≤ target`; `None` runs the full
    /// budget.
    pub target_epsilon: Option<f64>,
    /// Local computation per round.
    pub local_sweeps: LocalSweeps,
    /// Serialized bits per transmitted value.
    pub value_bits: u64,
    /// Transcript recording mode.
    pub transcript: TranscriptMode,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            target_epsilon: None,
            local_sweeps: LocalSweeps::Single,
            value_bits: DEFAULT_VALUE_BITS,
            transcript: TranscriptMode::Off,
        }
    }
}

impl RunOptions {
    /// Options targeting ε with otherwise default settings.
    pub fn targeting(epsilon: f64) -> Self {
        RunOptions { target_epsilon: Some(epsilon), ..Default::default() }
    }
}

// ---------------------------------------------------------------------------
// Messages and transcripts
// ---------------------------------------------------------------------------

/// One network message: boundary values from `sender` to `receiver`.
#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    /// Sending machine.
    pub sender: usize,
    /// Receiving machine.
    pub receiver: usize,
    /// `(state, value)` pairs, sorted by state.
    pub payload: Vec<(usize, f64)>,
    /// Exact size on the wire: `payload.len() × value_bits`.
    pub bit_size: u64,
}

/// Collected transcript of a run, per [`TranscriptMode`].
#[derive(Clone, Debug)]
pub enum Transcript {
    /// Nothing recorded.
    Off,
    /// Hex SHA-256 over all messages in delivery order.
    Digest(String),
    /// All messages received by `machine`, grouped by round (index 0 holds
    /// round 1).
    AtMachine {
        /// The observed machine.
        machine: usize,
        /// Per-round received messages, sender-sorted.
        rounds: Vec<Vec<Message>>,
    },
    /// Every message on the network, grouped by round, in delivery order.
    Full(Vec<Vec<Message>>),
}

/// Incremental transcript collector.
pub(crate) struct TranscriptRecorder {
    mode: TranscriptMode,
    hasher: Sha256,
    rounds: Vec<Vec<Message>>,
}

impl TranscriptRecorder {
    pub(crate) fn new(mode: TranscriptMode) -> Self {
        TranscriptRecorder { mode, hasher: Sha256::new(), rounds: Vec::new() }
    }

    /// Open round `t` (1-based); must be called in order.
    pub(crate) fn begin_round(&mut self) {
        if matches!(self.mode, TranscriptMode::AtMachine(_) | TranscriptMode::Full) {
            self.rounds.push(Vec::new());
        }
    }

    /// Record one delivered message.
    pub(crate) fn record(&mut self, round: usize, message: &Message) {
        match self.mode {
            TranscriptMode::Off => {}
            TranscriptMode::Digest => {
                self.hasher.update((round as u64).to_le_bytes());
                self.hasher.update((message.sender as u64).to_le_bytes());
                self.hasher.update((message.receiver as u64).to_le_bytes());
                for &(state, value) in &message.payload {
                    self.hasher.update((state as u64).to_le_bytes());
                    self.hasher.update(value.to_bits().to_le_bytes());
                }
            }
            TranscriptMode::AtMachine(observer) => {
                if message.receiver == observer {
                    self.rounds
                        .last_mut()
                        .expect("begin_round precedes record")
                        .push(message.clone());
                }
            }
            TranscriptMode::Full => {
                self.rounds
                    .last_mut()
                    .expect("begin_round precedes record")
                    .push(message.clone());
            }
        }
    }

    pub(crate) fn finish(self) -> Transcript {
        match self.mode {
            TranscriptMode::Off => Transcript::Off,
            TranscriptMode::Digest => {
                Transcript::Digest(format!("{:x}", self.hasher.finalize()))
            }
            TranscriptMode::AtMachine(machine) => {
                Transcript::AtMachine { machine, rounds: self.rounds }
            }
            TranscriptMode::Full => Transcript::Full(self.rounds),
        }
    }
}

// ---------------------------------------------------------------------------
// Run reports
// ---------------------------------------------------------------------------

/// Which protocol produced a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Synchronous distributed Bellman propagation.
    Sdbp,
    /// Gossip federated value iteration.
    GossipFvi,
    /// Centralized broadcast baseline.
    Broadcast,
    /// Bandwidth-capped SDBP.
    SdbpBandwidth,
    /// Bounded-delay asynchronous SDBP.
    AsyncSdbp,
}

impl Algorithm {
    /// Lowercase label used in summaries and file names.
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Sdbp => "sdbp",
            Algorithm::GossipFvi => "gossip_fvi",
            Algorithm::Broadcast => "broadcast",
            Algorithm::SdbpBandwidth => "sdbp_bandwidth",
            Algorithm::AsyncSdbp => "async_sdbp",
        }
    }
}

/// Per-round measurements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundRow {
    /// Round index, starting at 1.
    pub round: usize,
    /// `max_j ‖V_j − V⋆‖∞` (for single-table protocols, `‖V − V⋆‖∞`).
    pub sup_error: f64,
    /// Gossip: `E_t = ‖V̄ − V⋆‖∞`; single-table protocols: mean absolute
    /// error over states.
    pub mean_error: f64,
    /// Gossip: `D_t = max_j ‖V_j − V̄‖∞`; zero for single-table protocols.
    pub disagreement: f64,
    /// Total bits shipped across all edges through this round.
    pub cum_bits_total: u64,
    /// Asynchronous batch index `⌊t/D⌋`, absent for synchronous runs.
    pub batch: Option<usize>,
}

/// Full record of one protocol execution.
#[derive(Clone, Debug)]
pub struct RunReport {
    /// Which protocol ran.
    pub algorithm: Algorithm,
    /// One row per executed round.
    pub rows: Vec<RoundRow>,
    /// Assembled global value table after the last round (ownership-stitched
    /// for sharded protocols; the mean table is *not* used here).
    pub final_values: ValueTable,
    /// Gossip only: every machine's full table after the last round.
    pub final_tables: Option<Vec<ValueTable>>,
    /// First round with `sup_error ≤ target`, when a target was set and hit.
    pub rounds_to_target: Option<usize>,
    /// Boundary-exchange protocols only: first round after which every
    /// machine's *readout* — a free local solve against its post-delivery
    /// cache — matches `V⋆` to [`EXACT_READOUT_TOL`]. This is the
    /// "achieved rounds" statistic for pipelined bandwidth runs; it credits
    /// local computation but never communication the run has not done.
    pub rounds_to_exact: Option<usize>,
    /// A target was set and the budget ran out before reaching it.
    pub budget_exceeded: bool,
    /// Exact cumulative bits per directed edge.
    pub bits_per_edge: BTreeMap<(usize, usize), u64>,
    /// Transcript per the requested mode.
    pub transcript: Transcript,
    /// Gossip instrumentation: per-round measured local-step error
    /// `δ_t = max_j ‖U_j − 𝒯V_j‖∞` (only when requested).
    pub measured_local_error: Option<Vec<f64>>,
    /// Asynchronous runs only: assembled snapshots `V^[b]` taken at wall
    /// clock `t = b·D`, index `b` starting at 0 (the zero initialization).
    pub batch_snapshots: Option<Vec<ValueTable>>,
}

impl RunReport {
    /// Total bits shipped over the whole run.
    pub fn cum_bits_total(&self) -> u64 {
        self.rows.last().map_or(0, |row| row.cum_bits_total)
    }

    /// Number of executed rounds.
    pub fn rounds_run(&self) -> usize {
        self.rows.len()
    }

    /// Render the per-round series as CSV. Floats use fixed `{:.12e}`
    /// formatting so identical runs serialize byte-identically. The `batch`
    /// column appears only for asynchronous runs.
    pub fn to_csv(&self) -> String {
        let with_batch = self.rows.iter().any(|r| r.batch.is_some());
        let mut out = String::new();
        if with_batch {
            out.push_str("round,sup_error,mean_error,disagreement,cum_bits_total,batch\n");
        } else {
            out.push_str("round,sup_error,mean_error,disagreement,cum_bits_total\n");
        }
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{}",
                row.round, row.sup_error, row.mean_error, row.disagreement, row.cum_bits_total
            ));
            if with_batch {
                out.push_str(&format!(",{}", row.batch.unwrap_or(0)));
            }
            out.push('\n');
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Shared execution machinery
// ---------------------------------------------------------------------------

/// Per-machine local views: a full-length value array per machine holding
/// fresh owned values plus cached boundary values (all other entries stay at
/// the zero initialization and are never read by that machine's backups).
pub(crate) struct MachineViews {
    views: Vec<Vec<f64>>,
}

impl MachineViews {
    pub(crate) fn zeros(n_machines: usize, n_states: usize) -> Self {
        MachineViews { views: vec![vec![0.0; n_states]; n_machines] }
    }

    pub(crate) fn view(&self, machine: usize) -> &[f64] {
        &self.views[machine]
    }

    /// Back up machine `j`'s owned states from its current view and write
    /// the results back. `Single` performs one Jacobi sweep; `ToConvergence`
    /// iterates (with the round's perturbation held fixed) until the local
    /// fixed point stops moving or [`LOCAL_SOLVE_MAX_ITERS`] is hit.
    pub(crate) fn backup_owned(
        &mut self,
        data: &ShardedMdp,
        machine: usize,
        round: u64,
        noise: &DeltaNoise,
        sweeps: LocalSweeps,
    ) {
        let owned = data.partition.owned_states(machine);
        let view = &mut self.views[machine];
        match sweeps {
            LocalSweeps::Single => {
                local_sweep(data, machine, round, noise, owned, view);
            }
            LocalSweeps::ToConvergence => {
                for _ in 0..LOCAL_SOLVE_MAX_ITERS {
                    let moved = local_sweep(data, machine, round, noise, owned, view);
                    if !moved {
                        break;
                    }
                }
            }
        }
    }

    /// Deliver a payload into the receiver's cache.
    pub(crate) fn deliver(&mut self, receiver: usize, payload: &[(usize, f64)]) {
        let view = &mut self.views[receiver];
        for &(state, value) in payload {
            view[state] = value;
        }
    }

    /// Stitch the global table from each owner's fresh values.
    pub(crate) fn assemble(&self, data: &ShardedMdp) -> ValueTable {
        let n = data.mdp.n_states();
        let mut out = ValueTable::zeros(n);
        for s in 0..n {
            out[s] = self.views[data.partition.owner_of(s)][s];
        }
        out
    }
}

/// One Jacobi backup of `owned` within `view`; returns whether any entry
/// changed bitwise.
fn local_sweep(
    data: &ShardedMdp,
    machine: usize,
    round: u64,
    noise: &DeltaNoise,
    owned: &[usize],
    view: &mut [f64],
) -> bool {
    let fresh: Vec<f64> = owned
        .iter()
        .map(|&s| {
            backup_state(&data.mdp, s, &|sp| view[sp])
                + noise.perturbation(machine, round, s)
        })
        .collect();
    let mut moved = false;
    for (&s, &value) in owned.iter().zip(&fresh) {
        if view[s].to_bits() != value.to_bits() {
            moved = true;
        }
        view[s] = value;
    }
    moved
}

/// Solve machine `j`'s owned states to a local fixed point against a frozen
/// boundary cache — the "free local computation" readout used when judging
/// what a machine can output after a communication phase.
pub(crate) fn local_readout(data: &ShardedMdp, machine: usize, view: &[f64]) -> Vec<f64> {
    let owned = data.partition.owned_states(machine);
    let mut scratch = view.to_vec();
    let noise = DeltaNoise::none();
    for _ in 0..LOCAL_SOLVE_MAX_ITERS {
        if !local_sweep(data, machine, 0, &noise, owned, &mut scratch) {
            break;
        }
    }
    owned.iter().map(|&s| scratch[s]).collect()
}

/// Stitch a global table from every machine's readout.
pub(crate) fn readout_table(data: &ShardedMdp, views: &MachineViews) -> ValueTable {
    let mut out = ValueTable::zeros(data.mdp.n_states());
    for j in 0..data.n_machines() {
        let owned = data.partition.owned_states(j);
        for (&s, &value) in owned.iter().zip(&local_readout(data, j, views.view(j))) {
            out[s] = value;
        }
    }
    out
}

/// Error statistics of an assembled table against the `V⋆` oracle.
pub(crate) struct ErrorOracle {
    vstar: ValueTable,
}

impl ErrorOracle {
    /// Solve `V⋆` to [`VSTAR_ORACLE_TOL`].
    pub(crate) fn new(data: &ShardedMdp) -> Result<Self> {
        Ok(ErrorOracle { vstar: solve_vstar(&data.mdp, VSTAR_ORACLE_TOL)?.values })
    }

    pub(crate) fn sup_error(&self, v: &ValueTable) -> f64 {
        v.sup_dist(&self.vstar)
    }

    pub(crate) fn mean_error(&self, v: &ValueTable) -> f64 {
        v.mean_dist(&self.vstar)
    }
}

/// Validate the (data, graph) pairing shared by all sharded runners.
pub(crate) fn check_sharded_inputs(data: &ShardedMdp, graph: &DepGraph) -> Result<()> {
    ensure_contract!(
        graph.n_machines() == data.n_machines(),
        "graph has {} machines but partition has {}",
        graph.n_machines(),
        data.n_machines()
    );
    Ok(())
}

/// Apply one centralized noisy sweep where each state's perturbation is
/// keyed by its *owner* — the broadcast baseline and any sharded protocol
/// with a full view therefore draw identical noise and produce identical
/// iterates.
pub(crate) fn owner_keyed_global_sweep(
    data: &ShardedMdp,
    v: &ValueTable,
    noise: &DeltaNoise,
    round: u64,
) -> Result<ValueTable> {
    let mut out = bellman_apply_noisy(&data.mdp, v, &DeltaNoise::none(), 0, round, None)?;
    if noise.delta > 0.0 {
        for s in 0..out.len() {
            out[s] += noise.perturbation(data.partition.owner_of(s), round, s);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::Partition;
    use crate::mdp_core::Mdp;

    fn two_machine_chain() -> ShardedMdp {
        let mdp = Mdp::new(
            2,
            1,
            0.5,
            &[(0, 0, 1, 1.0), (1, 0, 1, 1.0)],
            &[(1, 0, 0.5)],
        )
        .unwrap();
        ShardedMdp::new(mdp, Partition::contiguous(2, 2).unwrap()).unwrap()
    }

    #[test]
    fn views_backup_and_assemble() {
        let data = two_machine_chain();
        let mut views = MachineViews::zeros(2, 2);
        let noise = DeltaNoise::none();
        views.backup_owned(&data, 0, 1, &noise, LocalSweeps::Single);
        views.backup_owned(&data, 1, 1, &noise, LocalSweeps::Single);
        // Machine 0 saw a zero cache for state 1; machine 1 backed itself up.
        assert_eq!(views.assemble(&data).as_slice(), &[0.0, 0.5]);
    }

    #[test]
    fn to_convergence_reaches_local_fixed_point() {
        let data = two_machine_chain();
        let mut views = MachineViews::zeros(2, 2);
        let noise = DeltaNoise::none();
        views.backup_owned(&data, 1, 1, &noise, LocalSweeps::ToConvergence);
        // Self-loop with reward 1/2 at γ=1/2 → local fixed point exactly 1.
        assert_eq!(views.view(1)[1], 1.0);
    }

    #[test]
    fn local_readout_uses_frozen_cache() {
        let data = two_machine_chain();
        let mut views = MachineViews::zeros(2, 2);
        views.deliver(0, &[(1, 1.0)]);
        let out = local_readout(&data, 0, views.view(0));
        assert_eq!(out, vec![0.5], "x0 backs up to γ·cache(x1)");
    }

    #[test]
    fn digest_transcripts_replay_identically() {
        let msg = Message {
            sender: 0,
            receiver: 1,
            payload: vec![(3, 0.25), (4, 0.5)],
            bit_size: 128,
        };
        let mut a = TranscriptRecorder::new(TranscriptMode::Digest);
        a.begin_round();
        a.record(1, &msg);
        let mut b = TranscriptRecorder::new(TranscriptMode::Digest);
        b.begin_round();
        b.record(1, &msg);
        match (a.finish(), b.finish()) {
            (Transcript::Digest(da), Transcript::Digest(db)) => assert_eq!(da, db),
            _ => panic!("expected digests"),
        }
        // A different value changes the digest.
        let mut c = TranscriptRecorder::new(TranscriptMode::Digest);
        c.begin_round();
        c.record(
            1,
            &Message { payload: vec![(3, 0.250000001), (4, 0.5)], ..msg.clone() },
        );
        match c.finish() {
            Transcript::Digest(dc) => {
                let mut d = TranscriptRecorder::new(TranscriptMode::Digest);
                d.begin_round();
                d.record(1, &msg);
                match d.finish() {
                    Transcript::Digest(dd) => assert_ne!(dc, dd),
                    _ => unreachable!(),
                }
            }
            _ => panic!("expected digest"),
        }
    }

    #[test]
    fn at_machine_transcript_filters_receiver() {
        let mut rec = TranscriptRecorder::new(TranscriptMode::AtMachine(1));
        rec.begin_round();
        let to_one = Message { sender: 0, receiver: 1, payload: vec![(0, 1.0)], bit_size: 64 };
        let to_two = Message { sender: 0, receiver: 2, payload: vec![(0, 1.0)], bit_size: 64 };
        rec.record(1, &to_one);
        rec.record(1, &to_two);
        match rec.finish() {
            Transcript::AtMachine { machine, rounds } => {
                assert_eq!(machine, 1);
                assert_eq!(rounds, vec![vec![to_one]]);
            }
            _ => panic!("expected stored transcript"),
        }
    }

    #[test]
    fn csv_renders_fixed_precision() {
        let report = RunReport {
            algorithm: Algorithm::Sdbp,
            rows: vec![RoundRow {
                round: 1,
                sup_error: 0.5,
                mean_error: 0.25,
                disagreement: 0.0,
                cum_bits_total: 128,
                batch: None,
            }],
            final_values: ValueTable::zeros(1),
            final_tables: None,
            rounds_to_target: None,
            rounds_to_exact: None,
            budget_exceeded: false,
            bits_per_edge: BTreeMap::new(),
            transcript: Transcript::Off,
            measured_local_error: None,
            batch_snapshots: None,
        };
        let csv = report.to_csv();
        assert!(csv.starts_with("round,sup_error,mean_error,disagreement,cum_bits_total\n"));
        assert!(csv.contains("1,5.000000000000e-1,2.500000000000e-1,0.000000000000e0,128"));
    }
}
