//! Cross-cutting measurement: transcript digests, per-edge bit ledgers,
//! the exhaustive distinct-transcript lower-bound check, and closed-form
//! bound comparators.
//!
//! Two kinds of bits are deliberately kept apart. Raw payload bits are what
//! the wire carries (`payload length × value width`) and are what budgets
//! and caps meter. The information-theoretic floor for the parallel-chain
//! family counts *distinguishable transcripts*: each of the `L` cut edges
//! must take `2^m` distinct values across the `2^m` instances, hence carry
//! at least `m` bits of information, for `m·L` in total — independent of
//! how wide the encoding of a single value happens to be.

use std::collections::BTreeSet;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::depgraph::{DepGraph, ShardedMdp};
use crate::error::{ensure_contract, Error, Result};
use crate::instances::gen_thm2_family;
use crate::mdp_core::keyed_hash;
use crate::protocols::bandwidth::run_sdbp_bandwidth;
use crate::protocols::sdbp::run_sdbp;
use crate::protocols::{Algorithm, Message, RunOptions, RunReport, Transcript, TranscriptMode};

/// Grace added to bound comparisons so accumulated float error in a
/// genuinely satisfied bound is never reported as a violation.
pub const SLACK_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Transcript hashing
// ---------------------------------------------------------------------------

/// Chained per-round digests of everything one machine received, ending in
/// a digest that also covers the machine's output values.
///
/// Identical executions (instance, seed, schedule) produce identical
/// digest chains — the determinism anchor the rest of the suite leans on.
/// Values are folded in rounded to 12 decimal digits, robust to benign
/// formatting differences while still catching any real divergence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TranscriptHash {
    /// The observed machine.
    pub machine: usize,
    /// `per_round[t]` covers rounds `1..=t+1` (each digest chains the
    /// previous one).
    pub per_round: Vec<String>,
    /// Final digest: the last per-round digest chained with the machine's
    /// output values on its owned states.
    pub final_digest: String,
}

fn fold_value(hasher: &mut Sha256, value: f64) {
    hasher.update(format!("{value:.12e}").as_bytes());
}

fn fold_message(hasher: &mut Sha256, round: usize, message: &Message) {
    hasher.update((round as u64).to_le_bytes());
    hasher.update((message.sender as u64).to_le_bytes());
    hasher.update((message.receiver as u64).to_le_bytes());
    for &(state, value) in &message.payload {
        hasher.update((state as u64).to_le_bytes());
        fold_value(hasher, value);
    }
}

fn hex(hasher: Sha256) -> String {
    format!("{:x}", hasher.finalize())
}

/// Compute the digest chain for the machine observed in `report`'s
/// transcript (which must have been recorded with
/// [`TranscriptMode::AtMachine`]).
pub fn transcript_hash(report: &RunReport, data: &ShardedMdp) -> Result<TranscriptHash> {
    let Transcript::AtMachine { machine, rounds } = &report.transcript else {
        return Err(Error::Contract(
            "transcript_hash needs a run recorded with TranscriptMode::AtMachine".to_string(),
        ));
    };
    let mut per_round = Vec::with_capacity(rounds.len());
    let mut prev = String::new();
    for (i, received) in rounds.iter().enumerate() {
        let mut hasher = Sha256::new();
        hasher.update(prev.as_bytes());
        for message in received {
            fold_message(&mut hasher, i + 1, message);
        }
        prev = hex(hasher);
        per_round.push(prev.clone());
    }
    let mut hasher = Sha256::new();
    hasher.update(prev.as_bytes());
    for &s in data.partition.owned_states(*machine) {
        hasher.update((s as u64).to_le_bytes());
        fold_value(&mut hasher, report.final_values[s]);
    }
    Ok(TranscriptHash { machine: *machine, per_round, final_digest: hex(hasher) })
}

// ---------------------------------------------------------------------------
// Bit ledger
// ---------------------------------------------------------------------------

/// Bit accounting for one run: per-edge cumulative counts, the per-round
/// cumulative total, and the transcript size of each designated cut.
///
/// All counts are nonnegative and the per-round series is monotone by
/// construction; a cut's transcript size is exactly the sum over its
/// crossing edges (both directions).
#[derive(Clone, Debug, Serialize)]
pub struct BitLedger {
    /// `((sender, receiver), cumulative bits)`, sorted by edge.
    pub per_edge: Vec<((usize, usize), u64)>,
    /// Cumulative bits after each round (parallel to the report's rows).
    pub per_round_cumulative: Vec<u64>,
    /// Total bits crossing each designated cut, in input order.
    pub cut_bits: Vec<u64>,
}

/// Build the ledger for `report`; `cuts` lists each designated cut as its
/// crossing edges `{j, k}` (orientation-free — both directions count).
pub fn bit_ledger(report: &RunReport, cuts: &[Vec<(usize, usize)>]) -> BitLedger {
    let per_edge: Vec<_> = report.bits_per_edge.iter().map(|(&edge, &bits)| (edge, bits)).collect();
    let per_round_cumulative: Vec<u64> = report.rows.iter().map(|r| r.cum_bits_total).collect();
    let cut_bits = cuts
        .iter()
        .map(|cut| {
            cut.iter()
                .map(|&(j, k)| {
                    report.bits_per_edge.get(&(j, k)).copied().unwrap_or(0)
                        + report.bits_per_edge.get(&(k, j)).copied().unwrap_or(0)
                })
                .sum()
        })
        .collect();
    BitLedger { per_edge, per_round_cumulative, cut_bits }
}

// ---------------------------------------------------------------------------
// Distinct-transcript lower bound
// ---------------------------------------------------------------------------

/// Which protocol the lower-bound enumeration drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitProtocol {
    /// Plain boundary propagation.
    Sdbp,
    /// Boundary propagation under a per-edge bit cap.
    SdbpBandwidth {
        /// Cap in bits per directed edge per round.
        bits_per_edge_round: u64,
    },
}

/// Outcome of the exhaustive enumeration over an `m`-bit instance family.
#[derive(Clone, Debug, Serialize)]
pub struct BitBoundReport {
    /// Chain length `L` (also the number of cut edges).
    pub chain_len: usize,
    /// Number of parallel chains `m` (bits per instance).
    pub n_chains: usize,
    /// Instances enumerated: `2^m`.
    pub n_instances: usize,
    /// The cut edges, root side first: `(r, r+1)` for `r < L`.
    pub cut_edges: Vec<(usize, usize)>,
    /// Distinct transcripts observed per cut, aligned with `cut_edges`.
    pub distinct_per_cut: Vec<usize>,
    /// Every cut showed all `2^m` transcripts — each carried the full `m`
    /// bits of information.
    pub all_cuts_full: bool,
    /// Information-theoretic floor `m·L`, in distinguishability units.
    pub info_floor_bits: u64,
    /// Largest raw payload volume any instance actually sent.
    pub measured_total_bits: u64,
    /// Instances whose decoded output disagreed with their bit pattern —
    /// a correctness failure of the protocol, not a bit-bound failure.
    pub correctness_failures: Vec<usize>,
}

/// Run `protocol` on every instance of the `(L, m)` parallel-chain family
/// and count distinct per-cut transcripts.
///
/// `wrapper_seed` wraps the protocol in shared randomness: a seed-keyed pad
/// folded into every digest, identical across instances. Conditioned on the
/// seed the protocol is deterministic, so per-realization distinct counts
/// equal the unpadded ones — zero-error randomization buys nothing against
/// the enumeration.
pub fn verify_bit_lowerbound(
    chain_len: usize,
    n_chains: usize,
    gamma: f64,
    protocol: BitProtocol,
    value_bits: u64,
    wrapper_seed: Option<u64>,
) -> Result<BitBoundReport> {
    ensure_contract!(
        (1..=12).contains(&n_chains),
        "enumeration needs 1 <= m <= 12 chains, got {n_chains}"
    );
    ensure_contract!(chain_len >= 1, "chain length must be >= 1, got {chain_len}");
    let n_instances = 1usize << n_chains;
    let cut_edges: Vec<(usize, usize)> = (0..chain_len).map(|r| (r, r + 1)).collect();
    // To-convergence local solves put exact chain values on the wire (the
    // terminal self-loop closes its geometric series locally), so sources
    // read exactly `γ^L·b_q` by round `L + 1`. Unbounded local computation
    // is precisely the regime the bit floor is immune to.
    let opts = RunOptions {
        value_bits,
        transcript: TranscriptMode::Full,
        local_sweeps: crate::protocols::LocalSweeps::ToConvergence,
        ..RunOptions::default()
    };
    // Room for every protocol in scope: plain runs are exact by round
    // L + 1; capped runs by L − 1 + m extra rounds at the tightest cap.
    let max_rounds = chain_len + n_chains + 2;

    let mut seen: Vec<BTreeSet<String>> = vec![BTreeSet::new(); cut_edges.len()];
    let mut measured_total_bits = 0u64;
    let mut correctness_failures = Vec::new();
    for index in 0..n_instances {
        let bits: Vec<bool> = (0..n_chains).map(|q| (index >> q) & 1 == 1).collect();
        let instance = gen_thm2_family(chain_len, n_chains, gamma, &bits)?;
        let graph = DepGraph::build(&instance.data)?;
        let report = match protocol {
            BitProtocol::Sdbp => {
                run_sdbp(&instance.data, &graph, &crate::mdp_core::DeltaNoise::none(), max_rounds, &opts)?
            }
            BitProtocol::SdbpBandwidth { bits_per_edge_round } => {
                run_sdbp_bandwidth(&instance.data, &graph, bits_per_edge_round, max_rounds, &opts)?
            }
        };
        let Transcript::Full(rounds) = &report.transcript else {
            unreachable!("runs above request full transcripts");
        };
        for (c, &(j, k)) in cut_edges.iter().enumerate() {
            let mut hasher = Sha256::new();
            for (i, round) in rounds.iter().enumerate() {
                if let Some(seed) = wrapper_seed {
                    hasher.update(keyed_hash(seed, j as u64, i as u64, k as u64).to_le_bytes());
                }
                for message in round {
                    if (message.sender, message.receiver) == (j, k)
                        || (message.sender, message.receiver) == (k, j)
                    {
                        fold_message(&mut hasher, i + 1, message);
                    }
                }
            }
            seen[c].insert(hex(hasher));
        }
        measured_total_bits = measured_total_bits.max(report.cum_bits_total());
        // Decode from the source machine's post-delivery readout: its local
        // solve against the values it holds, the same statistic exactness
        // is declared on. (The stored backup view can lag one delivery
        // behind when a capped run stops the round its last value lands.)
        let source_values =
            crate::protocols::local_readout(&instance.data, 0, report.final_values.as_slice());
        if instance.decode(&source_values) != bits {
            correctness_failures.push(index);
        }
    }
    let distinct_per_cut: Vec<usize> = seen.iter().map(|s| s.len()).collect();
    let all_cuts_full = distinct_per_cut.iter().all(|&c| c == n_instances);
    Ok(BitBoundReport {
        chain_len,
        n_chains,
        n_instances,
        cut_edges,
        distinct_per_cut,
        all_cuts_full,
        info_floor_bits: (n_chains * chain_len) as u64,
        measured_total_bits,
        correctness_failures,
    })
}

// ---------------------------------------------------------------------------
// Closed-form bound comparators
// ---------------------------------------------------------------------------

/// Which closed-form bound to compare a run against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Synchronous per-round error bound `γ^T/(1−γ) + δ/(1−γ)`.
    Thm5Direct,
    /// Bounded-delay per-round bound `γ^⌊T/D⌋/(1−γ) + δ/(1−γ)`.
    Thm7Async,
    /// Gossip potential step `B_{t+1} ≤ ρ·B_t + C₀δ` with
    /// `B_t = E_t + 4D_t/(1−γ)`, `ρ = 1 − (1−γ)·gap/8`, `C₀ = 1 + 8/(1−γ)`.
    Thm8Gossip,
    /// Round lower bound: an accurate run takes at least
    /// `min{diam, L_ε}` rounds.
    Thm1Rounds,
    /// Bit lower bound: total traffic at least the information floor.
    Thm2Bits,
}

impl BoundKind {
    /// Stable label used in tables and file names.
    pub fn label(&self) -> &'static str {
        match self {
            BoundKind::Thm5Direct => "thm5_direct",
            BoundKind::Thm7Async => "thm7_async",
            BoundKind::Thm8Gossip => "thm8_gossip",
            BoundKind::Thm1Rounds => "thm1_rounds",
            BoundKind::Thm2Bits => "thm2_bits",
        }
    }
}

/// Whether the bound caps the measurement from above or floors it from
/// below.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundDirection {
    /// Satisfied when `measured ≤ bound`.
    Upper,
    /// Satisfied when `measured ≥ bound`.
    Lower,
}

/// Context a bound comparison needs beyond the run report itself.
#[derive(Clone, Copy, Debug)]
pub struct BoundParams {
    /// Discount factor of the instance the run executed on.
    pub gamma: f64,
    /// Configured per-round perturbation magnitude.
    pub delta: f64,
    /// Spectral gap of the mixing matrix (gossip bounds).
    pub gap: Option<f64>,
    /// Delay bound `D` (asynchronous bounds).
    pub delay_bound: Option<usize>,
    /// Machine-graph diameter (round lower bound).
    pub diameter: Option<usize>,
    /// Target accuracy ε (round lower bound).
    pub epsilon: Option<f64>,
    /// `E_0 = ‖V̄^(0) − V⋆‖∞` (gossip potential; zero-initialized runs use
    /// `‖V⋆‖∞`).
    pub initial_error: Option<f64>,
    /// Information floor in bits (bit lower bound).
    pub info_floor_bits: Option<u64>,
}

impl BoundParams {
    /// Params carrying only the universally required fields.
    pub fn new(gamma: f64, delta: f64) -> Self {
        BoundParams {
            gamma,
            delta,
            gap: None,
            delay_bound: None,
            diameter: None,
            epsilon: None,
            initial_error: None,
            info_floor_bits: None,
        }
    }
}

/// One compared point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct VerdictRow {
    /// Round the measurement belongs to.
    pub round: usize,
    /// Measured statistic.
    pub measured: f64,
    /// Closed-form bound at that round.
    pub bound: f64,
    /// Whether the bound holds (with [`SLACK_TOL`] grace).
    pub satisfied: bool,
    /// Slack in the satisfying direction (negative = violation).
    pub slack: f64,
}

/// Per-round verdicts plus slack statistics for one (run, bound) pair.
#[derive(Clone, Debug, Serialize)]
pub struct VerdictTable {
    /// The compared bound.
    pub kind: BoundKind,
    /// Direction of the comparison.
    pub direction: BoundDirection,
    /// Per-round verdicts.
    pub rows: Vec<VerdictRow>,
    /// All rows satisfied.
    pub all_satisfied: bool,
    /// Smallest slack over the rows.
    pub min_slack: f64,
    /// Mean slack over the rows.
    pub mean_slack: f64,
}

impl VerdictTable {
    fn from_rows(kind: BoundKind, direction: BoundDirection, rows: Vec<VerdictRow>) -> Self {
        let all_satisfied = rows.iter().all(|r| r.satisfied);
        let min_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
        let mean_slack = rows.iter().map(|r| r.slack).sum::<f64>() / rows.len().max(1) as f64;
        VerdictTable { kind, direction, rows, all_satisfied, min_slack, mean_slack }
    }

    /// Render as a markdown table with a verdict footer.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "### {} ({})\n\n| round | measured | bound | satisfied | slack |\n|---:|---:|---:|:---:|---:|\n",
            self.kind.label(),
            match self.direction {
                BoundDirection::Upper => "measured ≤ bound",
                BoundDirection::Lower => "measured ≥ bound",
            }
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "| {} | {:.6e} | {:.6e} | {} | {:.6e} |\n",
                row.round,
                row.measured,
                row.bound,
                if row.satisfied { "yes" } else { "NO" },
                row.slack
            ));
        }
        out.push_str(&format!(
            "\n**{}** — min slack {:.6e}, mean slack {:.6e}\n",
            if self.all_satisfied { "all rounds satisfied" } else { "VIOLATED" },
            self.min_slack,
            self.mean_slack
        ));
        out
    }

    /// Render as pretty-printed JSON.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn verdict(round: usize, measured: f64, bound: f64, direction: BoundDirection) -> VerdictRow {
    let slack = match direction {
        BoundDirection::Upper => bound - measured,
        BoundDirection::Lower => measured - bound,
    };
    VerdictRow { round, measured, bound, satisfied: slack >= -SLACK_TOL, slack }
}

/// Compare a run against one closed-form bound.
///
/// The report must carry the series the bound needs: per-round sup errors
/// for the upper bounds, `rounds_to_target` for the round lower bound,
/// cumulative bits for the bit floor. A report from the wrong algorithm —
/// e.g. a gossip run against the synchronous propagation bound, whose
/// premises it does not satisfy — is a contract violation.
pub fn compare_bounds(
    report: &RunReport,
    kind: BoundKind,
    params: &BoundParams,
) -> Result<VerdictTable> {
    let gamma = params.gamma;
    ensure_contract!(
        gamma > 0.0 && gamma < 1.0,
        "discount must lie in (0, 1), got {gamma}"
    );
    match kind {
        BoundKind::Thm5Direct => {
            ensure_contract!(
                matches!(report.algorithm, Algorithm::Sdbp | Algorithm::Broadcast),
                "the synchronous propagation bound covers full boundary exchange; \
                 a {} run does not satisfy its premises",
                report.algorithm.label()
            );
            let rows = report
                .rows
                .iter()
                .map(|r| {
                    let bound =
                        (gamma.powi(r.round as i32) + params.delta) / (1.0 - gamma);
                    verdict(r.round, r.sup_error, bound, BoundDirection::Upper)
                })
                .collect();
            Ok(VerdictTable::from_rows(kind, BoundDirection::Upper, rows))
        }
        BoundKind::Thm7Async => {
            ensure_contract!(
                report.algorithm == Algorithm::AsyncSdbp,
                "the bounded-delay bound applies to asynchronous runs, not {}",
                report.algorithm.label()
            );
            let d = params.delay_bound.ok_or_else(|| {
                Error::Contract("thm7_async needs params.delay_bound".to_string())
            })?;
            ensure_contract!(d >= 1, "delay bound D must be >= 1, got {d}");
            let rows = report
                .rows
                .iter()
                .map(|r| {
                    let bound =
                        (gamma.powi((r.round / d) as i32) + params.delta) / (1.0 - gamma);
                    verdict(r.round, r.sup_error, bound, BoundDirection::Upper)
                })
                .collect();
            Ok(VerdictTable::from_rows(kind, BoundDirection::Upper, rows))
        }
        BoundKind::Thm8Gossip => {
            ensure_contract!(
                report.algorithm == Algorithm::GossipFvi,
                "the gossip potential bound needs mean-error and disagreement \
                 series, which a {} run does not produce",
                report.algorithm.label()
            );
            let gap = params
                .gap
                .ok_or_else(|| Error::Contract("thm8_gossip needs params.gap".to_string()))?;
            ensure_contract!(gap > 0.0 && gap <= 1.0, "spectral gap must lie in (0, 1], got {gap}");
            let e0 = params.initial_error.ok_or_else(|| {
                Error::Contract("thm8_gossip needs params.initial_error (E_0)".to_string())
            })?;
            let alpha = 4.0 / (1.0 - gamma);
            let rho = 1.0 - (1.0 - gamma) * gap / 8.0;
            let c0 = 1.0 + 8.0 / (1.0 - gamma);
            let mut prev_b = e0; // D_0 = 0 under common initialization
            let rows = report
                .rows
                .iter()
                .map(|r| {
                    let b = r.mean_error + alpha * r.disagreement;
                    let bound = rho * prev_b + c0 * params.delta;
                    prev_b = b;
                    verdict(r.round, b, bound, BoundDirection::Upper)
                })
                .collect();
            Ok(VerdictTable::from_rows(kind, BoundDirection::Upper, rows))
        }
        BoundKind::Thm1Rounds => {
            let rounds = report.rounds_to_target.ok_or_else(|| {
                Error::Contract(
                    "thm1_rounds applies to accurate runs; this run never reached \
                     its target"
                        .to_string(),
                )
            })?;
            let diameter = params.diameter.ok_or_else(|| {
                Error::Contract("thm1_rounds needs params.diameter".to_string())
            })?;
            let epsilon = params.epsilon.ok_or_else(|| {
                Error::Contract("thm1_rounds needs params.epsilon".to_string())
            })?;
            let radius = crate::depgraph::discounted_radius(gamma, epsilon)?;
            let bound = diameter.min(radius);
            let rows = vec![verdict(rounds, rounds as f64, bound as f64, BoundDirection::Lower)];
            Ok(VerdictTable::from_rows(kind, BoundDirection::Lower, rows))
        }
        BoundKind::Thm2Bits => {
            let floor = params.info_floor_bits.ok_or_else(|| {
                Error::Contract("thm2_bits needs params.info_floor_bits".to_string())
            })?;
            let measured = report.cum_bits_total();
            let rows = vec![verdict(
                report.rounds_run(),
                measured as f64,
                floor as f64,
                BoundDirection::Lower,
            )];
            Ok(VerdictTable::from_rows(kind, BoundDirection::Lower, rows))
        }
    }
}

// ---------------------------------------------------------------------------
// Gossip recursion check
// ---------------------------------------------------------------------------

/// Which δ series feeds the recursion inequalities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaSeries {
    /// The configured perturbation magnitude, as the closed-form analysis
    /// states it.
    Configured(f64),
    /// The per-round measured local-step inconsistency
    /// `δ_t = max_j ‖U_j − 𝒯V_j‖∞` from the run report. This is the sound
    /// instrument for local steps that are not uniformly δ-accurate
    /// Bellman approximations — notably owned-slice refresh, whose
    /// untouched coordinates make its effective δ state-dependent.
    Measured,
}

/// One round of the two-dimensional recursion check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RecursionRow {
    /// Round (1-based).
    pub round: usize,
    /// Measured `E_t = ‖V̄ − V⋆‖∞`.
    pub e: f64,
    /// Measured `D_t = max_j ‖V_j − V̄‖∞`.
    pub d: f64,
    /// Bound `γ(E_{t−1} + D_{t−1}) + δ_t` on `E_t`.
    pub e_bound: f64,
    /// Bound `(1 − gap)(2γD_{t−1} + 2δ_t)` on `D_t`.
    pub d_bound: f64,
    /// Potential `B_t = E_t + 4D_t/(1−γ)`.
    pub b: f64,
    /// Bound `ρB_{t−1} + C₀δ_t` on `B_t`.
    pub b_bound: f64,
    /// `e ≤ e_bound`.
    pub e_ok: bool,
    /// `d ≤ d_bound`.
    pub d_ok: bool,
    /// `b ≤ b_bound`.
    pub b_ok: bool,
}

/// Verdict of [`check_gossip_recursion`].
#[derive(Clone, Debug, Serialize)]
pub struct RecursionReport {
    /// Per-round measurements and verdicts.
    pub rows: Vec<RecursionRow>,
    /// Average-error inequality held every round.
    pub all_e: bool,
    /// Disagreement inequality held every round.
    pub all_d: bool,
    /// Potential step held every round.
    pub all_b: bool,
    /// First `(round, inequality)` that failed, if any.
    pub first_violation: Option<(usize, String)>,
}

/// Check the two-dimensional recursion and the potential step on a gossip
/// run, round by round.
///
/// `initial_error` is `E_0` (zero-initialized runs: `‖V⋆‖∞`); `D_0 = 0`
/// under common initialization.
pub fn check_gossip_recursion(
    report: &RunReport,
    gamma: f64,
    gap: f64,
    initial_error: f64,
    delta: DeltaSeries,
) -> Result<RecursionReport> {
    ensure_contract!(
        report.algorithm == Algorithm::GossipFvi,
        "recursion check applies to gossip runs, not {}",
        report.algorithm.label()
    );
    ensure_contract!(gamma > 0.0 && gamma < 1.0, "discount must lie in (0, 1), got {gamma}");
    ensure_contract!(gap > 0.0 && gap <= 1.0, "spectral gap must lie in (0, 1], got {gap}");
    let measured = match delta {
        DeltaSeries::Configured(_) => None,
        DeltaSeries::Measured => Some(report.measured_local_error.as_ref().ok_or_else(|| {
            Error::Contract(
                "DeltaSeries::Measured needs a run with measure_local_error enabled".to_string(),
            )
        })?),
    };
    let alpha = 4.0 / (1.0 - gamma);
    let rho = 1.0 - (1.0 - gamma) * gap / 8.0;
    let c0 = 1.0 + 8.0 / (1.0 - gamma);
    let mut rows = Vec::with_capacity(report.rows.len());
    let mut first_violation = None;
    let (mut e_prev, mut d_prev) = (initial_error, 0.0f64);
    for (i, row) in report.rows.iter().enumerate() {
        let delta_t = match delta {
            DeltaSeries::Configured(value) => value,
            DeltaSeries::Measured => measured.expect("checked above")[i],
        };
        let (e, d) = (row.mean_error, row.disagreement);
        let e_bound = gamma * (e_prev + d_prev) + delta_t;
        let d_bound = (1.0 - gap) * (2.0 * gamma * d_prev + 2.0 * delta_t);
        let b = e + alpha * d;
        let b_bound = rho * (e_prev + alpha * d_prev) + c0 * delta_t;
        let (e_ok, d_ok, b_ok) = (
            e <= e_bound + SLACK_TOL,
            d <= d_bound + SLACK_TOL,
            b <= b_bound + SLACK_TOL,
        );
        if first_violation.is_none() {
            for (ok, name) in [(e_ok, "E"), (d_ok, "D"), (b_ok, "B")] {
                if !ok {
                    first_violation = Some((row.round, name.to_string()));
                    break;
                }
            }
        }
        rows.push(RecursionRow {
            round: row.round,
            e,
            d,
            e_bound,
            d_bound,
            b,
            b_bound,
            e_ok,
            d_ok,
            b_ok,
        });
        (e_prev, d_prev) = (e, d);
    }
    let all_e = rows.iter().all(|r| r.e_ok);
    let all_d = rows.iter().all(|r| r.d_ok);
    let all_b = rows.iter().all(|r| r.b_ok);
    Ok(RecursionReport { rows, all_e, all_d, all_b, first_violation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::{mh_matrix, Laziness};
    use crate::instances::{gen_thm1_pair, gen_topology_mdp, TopologySpec};
    use crate::mdp_core::{solve_vstar, DeltaNoise, NoiseMode};
    use crate::protocols::gossip::{run_gossip_fvi, GossipOptions};
    use crate::protocols::{DEFAULT_VALUE_BITS, VSTAR_ORACLE_TOL};

    #[test]
    fn distinct_transcripts_saturate_every_cut() {
        let report =
            verify_bit_lowerbound(3, 4, 0.9, BitProtocol::Sdbp, DEFAULT_VALUE_BITS, None).unwrap();
        assert_eq!(report.cut_edges, vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(report.distinct_per_cut, vec![16, 16, 16]);
        assert!(report.all_cuts_full);
        assert!(report.correctness_failures.is_empty());
        assert_eq!(report.info_floor_bits, 12);
        assert!(report.measured_total_bits >= report.info_floor_bits);
    }

    #[test]
    fn single_chain_cut_carries_one_bit() {
        let report =
            verify_bit_lowerbound(2, 1, 0.9, BitProtocol::Sdbp, DEFAULT_VALUE_BITS, None).unwrap();
        assert_eq!(report.distinct_per_cut, vec![2, 2]);
        assert!(report.all_cuts_full);
    }

    #[test]
    fn shared_randomness_does_not_change_distinct_counts() {
        let baseline =
            verify_bit_lowerbound(2, 3, 0.9, BitProtocol::Sdbp, DEFAULT_VALUE_BITS, None).unwrap();
        for seed in [1, 2, 3] {
            let wrapped = verify_bit_lowerbound(
                2,
                3,
                0.9,
                BitProtocol::Sdbp,
                DEFAULT_VALUE_BITS,
                Some(seed),
            )
            .unwrap();
            assert_eq!(wrapped.distinct_per_cut, baseline.distinct_per_cut);
            assert!(wrapped.correctness_failures.is_empty());
        }
    }

    #[test]
    fn bandwidth_capped_enumeration_still_saturates_cuts() {
        let report = verify_bit_lowerbound(
            2,
            3,
            0.9,
            BitProtocol::SdbpBandwidth { bits_per_edge_round: DEFAULT_VALUE_BITS },
            DEFAULT_VALUE_BITS,
            None,
        )
        .unwrap();
        assert!(report.all_cuts_full, "distinct counts: {:?}", report.distinct_per_cut);
        assert!(report.correctness_failures.is_empty());
    }

    #[test]
    fn transcript_hash_is_deterministic_and_seed_sensitive() {
        let data = gen_topology_mdp(&TopologySpec::ring(6), 2, 0.9, 4).unwrap();
        let graph = DepGraph::build(&data).unwrap();
        let opts = RunOptions { transcript: TranscriptMode::AtMachine(2), ..Default::default() };
        let noise = |seed| DeltaNoise::new(0.02, seed, NoiseMode::UniformBounded).unwrap();
        let a = run_sdbp(&data, &graph, &noise(7), 12, &opts).unwrap();
        let b = run_sdbp(&data, &graph, &noise(7), 12, &opts).unwrap();
        let c = run_sdbp(&data, &graph, &noise(8), 12, &opts).unwrap();
        let (ha, hb, hc) = (
            transcript_hash(&a, &data).unwrap(),
            transcript_hash(&b, &data).unwrap(),
            transcript_hash(&c, &data).unwrap(),
        );
        assert_eq!(ha, hb, "identical executions must hash identically");
        assert_eq!(ha.per_round.len(), 12);
        assert_ne!(ha.final_digest, hc.final_digest, "different seeds must diverge");
        let off = run_sdbp(&data, &graph, &noise(7), 12, &RunOptions::default()).unwrap();
        assert!(transcript_hash(&off, &data).is_err());
    }

    #[test]
    fn ledger_totals_are_monotone_and_cuts_sum_crossing_edges() {
        let data = gen_topology_mdp(&TopologySpec::ring(6), 2, 0.9, 4).unwrap();
        let graph = DepGraph::build(&data).unwrap();
        let report =
            run_sdbp(&data, &graph, &DeltaNoise::none(), 10, &RunOptions::default()).unwrap();
        // Cut the ring between {0..2} and {3..5}: crossing edges (2,3), (5,0).
        let ledger = bit_ledger(&report, &[vec![(2, 3), (5, 0)]]);
        assert!(ledger.per_round_cumulative.windows(2).all(|w| w[0] <= w[1]));
        let expected: u64 = [(2, 3), (3, 2), (5, 0), (0, 5)]
            .iter()
            .filter_map(|e| report.bits_per_edge.get(e))
            .sum();
        assert_eq!(ledger.cut_bits, vec![expected]);
        assert!(ledger.cut_bits[0] > 0);
        let total: u64 = ledger.per_edge.iter().map(|&(_, b)| b).sum();
        assert_eq!(total, report.cum_bits_total());
    }

    #[test]
    fn thm5_direct_satisfied_with_nonnegative_slack() {
        let data = gen_topology_mdp(&TopologySpec::grid(9), 3, 0.9, 11).unwrap();
        let graph = DepGraph::build(&data).unwrap();
        for delta in [0.0, 0.05] {
            let noise = if delta == 0.0 {
                DeltaNoise::none()
            } else {
                DeltaNoise::new(delta, 5, NoiseMode::WorstCaseSign).unwrap()
            };
            let report = run_sdbp(&data, &graph, &noise, 40, &RunOptions::default()).unwrap();
            let table =
                compare_bounds(&report, BoundKind::Thm5Direct, &BoundParams::new(0.9, delta))
                    .unwrap();
            assert!(table.all_satisfied);
            assert!(table.min_slack >= 0.0);
        }
        let gossip_like = {
            let w = mh_matrix(&graph, Laziness::LazyHalf).unwrap();
            run_gossip_fvi(
                &data,
                &graph,
                &w,
                &DeltaNoise::none(),
                5,
                &RunOptions::default(),
                &GossipOptions::default(),
            )
            .unwrap()
        };
        assert!(compare_bounds(&gossip_like, BoundKind::Thm5Direct, &BoundParams::new(0.9, 0.0))
            .is_err());
    }

    #[test]
    fn thm7_async_bound_satisfied_on_adversarial_run() {
        let data = gen_topology_mdp(&TopologySpec::ring(12), 3, 0.9, 2).unwrap();
        let graph = DepGraph::build(&data).unwrap();
        let schedule = crate::async_engine::DelaySchedule::adversarial(3).unwrap();
        let report = crate::async_engine::run_async_sdbp(
            &data,
            &graph,
            &DeltaNoise::none(),
            &schedule,
            30,
            &RunOptions::default(),
        )
        .unwrap();
        let mut params = BoundParams::new(0.9, 0.0);
        assert!(compare_bounds(&report, BoundKind::Thm7Async, &params).is_err());
        params.delay_bound = Some(3);
        let table = compare_bounds(&report, BoundKind::Thm7Async, &params).unwrap();
        assert!(table.all_satisfied);
        assert!(table.min_slack >= 0.0);
    }

    #[test]
    fn thm1_rounds_floor_holds_on_accurate_chain_run() {
        let pair = gen_thm1_pair(6, 0.5).unwrap();
        let graph = pair.depgraph().unwrap();
        let report = run_sdbp(
            &pair.rewarded,
            &graph,
            &DeltaNoise::none(),
            100,
            &RunOptions::targeting(0.1),
        )
        .unwrap();
        let mut params = BoundParams::new(0.5, 0.0);
        params.diameter = Some(6);
        params.epsilon = Some(0.1);
        let table = compare_bounds(&report, BoundKind::Thm1Rounds, &params).unwrap();
        assert!(table.all_satisfied);
        // L_ε(0.5, 0.1) = 2 (0.25 > 0.2 ≥ 0.125), diameter 6 → floor 2.
        assert_eq!(table.rows[0].bound, 2.0);
        assert!(table.rows[0].measured >= 2.0);
    }

    #[test]
    fn thm2_bits_floor_is_cleared_by_raw_traffic() {
        let instance = gen_thm2_family(3, 4, 0.9, &[true, false, true, true]).unwrap();
        let graph = DepGraph::build(&instance.data).unwrap();
        let report =
            run_sdbp(&instance.data, &graph, &DeltaNoise::none(), 6, &RunOptions::default())
                .unwrap();
        let mut params = BoundParams::new(0.9, 0.0);
        params.info_floor_bits = Some(12);
        let table = compare_bounds(&report, BoundKind::Thm2Bits, &params).unwrap();
        assert!(table.all_satisfied);
        assert!(table.rows[0].measured >= 12.0);
    }

    #[test]
    fn markdown_and_json_renderings_carry_the_verdict() {
        let pair = gen_thm1_pair(3, 0.5).unwrap();
        let graph = pair.depgraph().unwrap();
        let report =
            run_sdbp(&pair.rewarded, &graph, &DeltaNoise::none(), 8, &RunOptions::default())
                .unwrap();
        let table =
            compare_bounds(&report, BoundKind::Thm5Direct, &BoundParams::new(0.5, 0.0)).unwrap();
        let md = table.to_markdown();
        assert!(md.contains("thm5_direct"));
        assert!(md.contains("all rounds satisfied"));
        let json = table.to_json().unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["kind"], "thm5_direct");
        assert_eq!(parsed["all_satisfied"], true);
    }

    #[test]
    fn measured_delta_recursion_holds_for_owned_scope_gossip() {
        let data = gen_topology_mdp(&TopologySpec::ring(8), 3, 0.9, 6).unwrap();
        let graph = DepGraph::build(&data).unwrap();
        let w = mh_matrix(&graph, Laziness::LazyHalf).unwrap();
        let gap = w.gap();
        let report = run_gossip_fvi(
            &data,
            &graph,
            &w,
            &DeltaNoise::none(),
            60,
            &RunOptions::default(),
            &GossipOptions { measure_local_error: true, ..Default::default() },
        )
        .unwrap();
        let e0 = solve_vstar(&data.mdp, VSTAR_ORACLE_TOL).unwrap().values.sup_norm();
        let checked =
            check_gossip_recursion(&report, 0.9, gap, e0, DeltaSeries::Measured).unwrap();
        assert!(checked.all_e, "first violation: {:?}", checked.first_violation);
    }
}
