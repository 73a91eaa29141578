//! Bounded-delay asynchronous execution.
//!
//! The synchronous protocols assume lockstep rounds; here messages may sit
//! in flight for up to `D − 1` wall-clock rounds and machines may skip
//! updates, as long as every message is consumed within `D` rounds of
//! sending and every machine performs at least one backup every `D` rounds.
//! Under those two constraints, `D` wall-clock rounds advance the
//! computation at least as far as one synchronous round — the per-batch
//! snapshots `V^[b] := V^(bD)` dominate the synchronous iterates — and
//! never faster than one *hop of information per round*.
//!
//! The maximal-delay schedule ([`DelaySchedule::adversarial`]) holds every
//! message exactly `D − 1` rounds and updates every machine once per batch,
//! at its last round. It realizes the worst case exactly: its batch
//! snapshots equal the synchronous iterates bit for bit, so a batch moves
//! information exactly one machine hop, stretching every locality bound by
//! a factor of `D`.

use crate::depgraph::{DepGraph, ShardedMdp};
use crate::error::{ensure_contract, Error, Result};
use crate::mdp_core::{keyed_hash, DeltaNoise, Mdp};
use crate::protocols::{
    check_sharded_inputs, Algorithm, ErrorOracle, MachineViews, Message, RoundRow, RunOptions,
    RunReport, TranscriptRecorder,
};
use serde::{Deserialize, Serialize};

/// How per-message delays are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayMode {
    /// Every message held exactly `D − 1` rounds; machines update once per
    /// batch, at the batch's last round.
    AdversarialMax,
    /// Delays drawn uniformly from `{0, …, D − 1}` per message, keyed by
    /// `(seed, round, sender, receiver)`; machines update every round.
    UniformRandom,
    /// A fixed delay per directed edge, keyed by `(seed, sender, receiver)`;
    /// machines update every round.
    PerEdgeFixed,
}

/// A validated bounded-delay schedule.
///
/// Construction enforces the two bounded-delay invariants: delays fit in
/// `{0, …, D − 1}` (every message is consumed within `D` rounds) and the
/// update cadence is at most `D` (every machine backs up at least once per
/// batch).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DelaySchedule {
    mode: DelayMode,
    d: usize,
    seed: u64,
    update_cadence: usize,
}

impl DelaySchedule {
    /// General constructor; `1 ≤ update_cadence ≤ d` and `d ≥ 1`.
    pub fn new(mode: DelayMode, d: usize, seed: u64, update_cadence: usize) -> Result<Self> {
        ensure_contract!(d >= 1, "delay bound D must be >= 1, got {d}");
        ensure_contract!(
            (1..=d).contains(&update_cadence),
            "update cadence {update_cadence} violates 1 <= cadence <= D = {d}"
        );
        if mode == DelayMode::AdversarialMax {
            ensure_contract!(
                update_cadence == d,
                "the maximal-delay schedule updates exactly once per batch; \
                 cadence {update_cadence} != D = {d}"
            );
        }
        Ok(DelaySchedule { mode, d, seed, update_cadence })
    }

    /// The maximal-delay schedule for delay bound `d`.
    pub fn adversarial(d: usize) -> Result<Self> {
        Self::new(DelayMode::AdversarialMax, d, 0, d)
    }

    /// Per-message uniform random delays, updates every round.
    pub fn uniform(d: usize, seed: u64) -> Result<Self> {
        Self::new(DelayMode::UniformRandom, d, seed, 1)
    }

    /// Fixed per-edge delays, updates every round.
    pub fn per_edge(d: usize, seed: u64) -> Result<Self> {
        Self::new(DelayMode::PerEdgeFixed, d, seed, 1)
    }

    /// The delay bound `D`.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Schedule mode.
    pub fn mode(&self) -> DelayMode {
        self.mode
    }

    /// Whether machines run their backup in wall-clock round `t` (1-based).
    pub fn updates_in_round(&self, t: usize) -> bool {
        t % self.update_cadence == 0
    }

    /// Rounds the message sent in round `t` over edge `(sender, receiver)`
    /// spends in flight; always in `{0, …, D − 1}`.
    pub fn delay(&self, t: usize, sender: usize, receiver: usize) -> usize {
        match self.mode {
            DelayMode::AdversarialMax => self.d - 1,
            DelayMode::UniformRandom => {
                let bits = keyed_hash(
                    self.seed ^ 0xA57C_11ED,
                    sender as u64,
                    t as u64,
                    receiver as u64,
                );
                (bits % self.d as u64) as usize
            }
            DelayMode::PerEdgeFixed => {
                let bits =
                    keyed_hash(self.seed ^ 0xF1_7ED, sender as u64, 0, receiver as u64);
                (bits % self.d as u64) as usize
            }
        }
    }
}

/// Run bounded-delay asynchronous SDBP for `max_rounds` wall-clock rounds.
///
/// Per round: in-flight messages due this round are delivered (visible to
/// this round's backups), scheduled machines back up their owned states
/// and send fresh boundary values, and at every batch boundary `t = b·D`
/// the assembled table is snapshotted into `batch_snapshots[b]`.
/// Rows carry `batch = ⌊t/D⌋`.
pub fn run_async_sdbp(
    data: &ShardedMdp,
    graph: &DepGraph,
    noise: &DeltaNoise,
    schedule: &DelaySchedule,
    max_rounds: usize,
    opts: &RunOptions,
) -> Result<RunReport> {
    check_sharded_inputs(data, graph)?;
    ensure_contract!(opts.value_bits > 0, "value width must be positive");
    let m = data.n_machines();
    let d = schedule.d();
    let oracle = ErrorOracle::new(data)?;
    let mut views = MachineViews::zeros(m, data.mdp.n_states());
    let mut recorder = TranscriptRecorder::new(opts.transcript);
    let mut rows = Vec::new();
    let mut bits_per_edge = std::collections::BTreeMap::new();
    let mut cum_bits: u64 = 0;
    let mut rounds_to_target = None;
    let mut snapshots = vec![views.assemble(data)];
    // In-flight messages keyed by the round whose backups may first see
    // them, each tagged with its send round. Random per-message delays can
    // reorder a channel (a slow message overtaken by a fast successor);
    // applying the late straggler would overwrite fresher cached values and
    // silently stretch the effective information lag past `D`. Channels are
    // therefore freshness-filtered: a message is dropped if a later send on
    // the same directed edge has already been applied.
    let mut in_flight: std::collections::BTreeMap<usize, Vec<(usize, Message)>> =
        std::collections::BTreeMap::new();
    let mut freshest_applied: std::collections::BTreeMap<(usize, usize), usize> =
        std::collections::BTreeMap::new();

    for round in 1..=max_rounds {
        if let Some(due) = in_flight.remove(&round) {
            for (send_round, message) in &due {
                let edge = (message.sender, message.receiver);
                if freshest_applied.get(&edge).is_some_and(|&applied| applied >= *send_round) {
                    continue;
                }
                freshest_applied.insert(edge, *send_round);
                views.deliver(message.receiver, &message.payload);
            }
        }
        recorder.begin_round();
        if schedule.updates_in_round(round) {
            for j in 0..m {
                views.backup_owned(data, j, round as u64, noise, opts.local_sweeps);
            }
            for j in 0..m {
                for &k in graph.neighbors(j) {
                    let boundary = graph.boundary_in(k, j);
                    if boundary.is_empty() {
                        continue;
                    }
                    let payload: Vec<(usize, f64)> =
                        boundary.iter().map(|&s| (s, views.view(j)[s])).collect();
                    let bit_size = payload.len() as u64 * opts.value_bits;
                    cum_bits += bit_size;
                    *bits_per_edge.entry((j, k)).or_insert(0) += bit_size;
                    let message = Message { sender: j, receiver: k, payload, bit_size };
                    recorder.record(round, &message);
                    let delay = schedule.delay(round, j, k);
                    debug_assert!(delay < d, "delay bound violated");
                    in_flight.entry(round + delay + 1).or_default().push((round, message));
                }
            }
        }
        if round % d == 0 {
            snapshots.push(views.assemble(data));
        }
        let assembled = views.assemble(data);
        let sup_error = oracle.sup_error(&assembled);
        rows.push(RoundRow {
            round,
            sup_error,
            mean_error: oracle.mean_error(&assembled),
            disagreement: 0.0,
            cum_bits_total: cum_bits,
            batch: Some(round / d),
        });
        if let Some(eps) = opts.target_epsilon {
            if sup_error <= eps {
                rounds_to_target = Some(round);
                break;
            }
        }
    }

    let final_values = views.assemble(data);
    Ok(RunReport {
        algorithm: Algorithm::AsyncSdbp,
        rows,
        final_values,
        final_tables: None,
        rounds_to_target,
        rounds_to_exact: None,
        budget_exceeded: opts.target_epsilon.is_some() && rounds_to_target.is_none(),
        bits_per_edge,
        transcript: recorder.finish(),
        measured_local_error: None,
        batch_snapshots: Some(snapshots),
    })
}

/// The wall-clock locality lower bound `D · L_ε`: under delay bound `D`, no
/// protocol output can depend on data `L_ε` hops away in fewer rounds.
pub fn async_round_bound(gamma: f64, epsilon: f64, d: usize) -> Result<usize> {
    ensure_contract!(d >= 1, "delay bound D must be >= 1, got {d}");
    Ok(d * crate::depgraph::discounted_radius(gamma, epsilon)?)
}

/// Rebuild `data` with every reward on machines strictly outside radius
/// `radius` of `center` passed through `f` (transitions untouched, so the
/// dependency graph is preserved).
///
/// With `f = |r| (r + 0.37).fract()` this is the standard far-data
/// perturbation for light-cone tests; with `f = |_| 0.0` it zeroes far
/// rewards.
pub fn map_far_rewards(
    data: &ShardedMdp,
    graph: &DepGraph,
    center: usize,
    radius: usize,
    f: impl Fn(f64) -> f64,
) -> Result<ShardedMdp> {
    ensure_contract!(
        center < data.n_machines(),
        "center machine {center} out of range for {} machines",
        data.n_machines()
    );
    let distances = graph.distances_from(center);
    let mdp = &data.mdp;
    let transitions: Vec<(usize, usize, usize, f64)> = mdp.transition_entries().collect();
    let mut rewards = Vec::new();
    for s in 0..mdp.n_states() {
        let far = distances[data.partition.owner_of(s)] > radius;
        for a in 0..mdp.n_actions() {
            let r = mdp.reward(s, a);
            let mapped = if far { f(r) } else { r };
            if mapped != 0.0 {
                rewards.push((s, a, mapped));
            }
        }
    }
    let rebuilt = Mdp::new(mdp.n_states(), mdp.n_actions(), mdp.gamma(), &transitions, &rewards)?;
    ShardedMdp::new(rebuilt, data.partition.clone())
}

/// Outcome of a batch light-cone check.
#[derive(Clone, Debug)]
pub struct LightconeVerdict {
    /// The snapshot at the observed machine was bit-identical.
    pub passed: bool,
    /// On failure: `(state, base value, perturbed value)` of the first
    /// differing owned state.
    pub witness: Option<(usize, f64, f64)>,
}

/// Re-run under rewards perturbed outside radius `batch` of `machine` and
/// assert the snapshot `V^[batch]` at `machine` is unchanged.
///
/// The batch-counting light cone is a worst-case property: it is exact for
/// the maximal-delay schedule (one hop per batch) and simply false for
/// faster schedules, where information crosses up to one hop per *round* —
/// so this check requires [`DelayMode::AdversarialMax`].
pub fn batch_lightcone_check(
    data: &ShardedMdp,
    graph: &DepGraph,
    noise: &DeltaNoise,
    schedule: &DelaySchedule,
    run: &RunReport,
    machine: usize,
    batch: usize,
) -> Result<LightconeVerdict> {
    ensure_contract!(
        schedule.mode() == DelayMode::AdversarialMax,
        "the per-batch light cone holds only for the maximal-delay schedule; \
         under {:?} information can cross one hop per round",
        schedule.mode()
    );
    let snapshots = run.batch_snapshots.as_ref().ok_or_else(|| {
        Error::Contract("run report carries no batch snapshots".to_string())
    })?;
    ensure_contract!(
        batch < snapshots.len(),
        "batch {batch} not recorded (run covered {} batches)",
        snapshots.len().saturating_sub(1)
    );
    let perturbed_data =
        map_far_rewards(data, graph, machine, batch, |r| (r + 0.37).fract())?;
    let perturbed = run_async_sdbp(
        &perturbed_data,
        graph,
        noise,
        schedule,
        batch * schedule.d(),
        &RunOptions::default(),
    )?;
    let perturbed_snapshot = &perturbed.batch_snapshots.as_ref().expect("async run")[batch];
    let base_snapshot = &snapshots[batch];
    for &s in data.partition.owned_states(machine) {
        if base_snapshot[s].to_bits() != perturbed_snapshot[s].to_bits() {
            return Ok(LightconeVerdict {
                passed: false,
                witness: Some((s, base_snapshot[s], perturbed_snapshot[s])),
            });
        }
    }
    Ok(LightconeVerdict { passed: true, witness: None })
}
