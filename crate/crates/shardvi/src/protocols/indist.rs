//! Transcript indistinguishability between paired instances.
//!
//! If two instances differ only in data held by machines farther than `R`
//! hops from an observer, then after `R` rounds of any of the simulated
//! protocols the observer's received transcript and its outputs are
//! bit-identical across the pair: one round moves information one hop, and
//! every execution here is a deterministic function of (instance, seed).
//! The checker replays both runs with identical seeds and diffs what the
//! observer saw — first the messages, then the outputs — returning the
//! earliest divergence, if any.
//!
//! The distance precondition is *reported*, not enforced: a pair differing
//! inside the radius is exactly how one demonstrates that `R` rounds are
//! too few, and the spec'd failure examples need that run to happen. The
//! verdict's `guaranteed` flag says whether the pass was forced by the
//! locality argument; [`indistinguishability_check_strict`] instead rejects
//! in-radius differences up front, with a witness.

use crate::depgraph::{DepGraph, ShardedMdp, UNREACHABLE};
use crate::error::{ensure_contract, Error, Result};
use crate::mdp_core::DeltaNoise;
use crate::protocols::gossip::{run_gossip_fvi, GossipOptions};
use crate::protocols::sdbp::run_sdbp;
use crate::protocols::{
    local_readout, LocalSweeps, RunOptions, Transcript, TranscriptMode,
};

/// Which protocol the checker replays.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndistProtocol {
    /// Boundary exchange, with the given local-computation budget.
    Sdbp {
        /// Per-round local sweeps for both replays.
        local_sweeps: LocalSweeps,
    },
    /// Gossip federated value iteration (owned-scope local step, lazy
    /// Metropolis–Hastings mixing).
    Gossip,
}

/// The earliest observed difference between the two replays.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Divergence {
    /// A message received by the observer carried different values.
    Message {
        /// Round (1-based) of the delivery.
        round: usize,
        /// Sending machine.
        sender: usize,
        /// State whose value differed.
        state: usize,
        /// Value in the left replay.
        left: f64,
        /// Value in the right replay.
        right: f64,
    },
    /// Transcripts matched but the observer's outputs differed.
    Output {
        /// State whose output value differed.
        state: usize,
        /// Left output value.
        left: f64,
        /// Right output value.
        right: f64,
    },
}

/// Outcome of an indistinguishability replay.
#[derive(Clone, Debug)]
pub struct IndistVerdict {
    /// No divergence was observed.
    pub passed: bool,
    /// Every differing machine lies strictly outside radius `rounds` of the
    /// observer, so a pass was forced by locality (a fail with this flag set
    /// would falsify the simulator).
    pub guaranteed: bool,
    /// Rounds replayed.
    pub rounds: usize,
    /// Observer machine.
    pub observer: usize,
    /// Earliest difference, if any.
    pub first_divergence: Option<Divergence>,
    /// Observer outputs in the left replay (SDBP: readout of owned states in
    /// owned order; gossip: the full table).
    pub output_left: Vec<f64>,
    /// Observer outputs in the right replay.
    pub output_right: Vec<f64>,
}

/// Machines whose local data (transitions or rewards of owned states)
/// differ between the two instances.
fn differing_machines(left: &ShardedMdp, right: &ShardedMdp) -> Vec<usize> {
    let mut out = Vec::new();
    for j in 0..left.n_machines() {
        let differs = left.partition.owned_states(j).iter().any(|&s| {
            (0..left.mdp.n_actions()).any(|a| {
                left.mdp.transitions(s, a) != right.mdp.transitions(s, a)
                    || left.mdp.reward(s, a) != right.mdp.reward(s, a)
            })
        });
        if differs {
            out.push(j);
        }
    }
    out
}

/// Validate the pairing and return the shared dependency graph plus the
/// differing machines and their distances from the observer.
fn prepare(
    left: &ShardedMdp,
    right: &ShardedMdp,
    observer: usize,
) -> Result<(DepGraph, Vec<usize>, Vec<usize>)> {
    ensure_contract!(
        left.mdp.n_states() == right.mdp.n_states()
            && left.mdp.n_actions() == right.mdp.n_actions(),
        "paired instances must have identical shape"
    );
    ensure_contract!(
        left.mdp.gamma() == right.mdp.gamma(),
        "paired instances must share gamma, got {} and {}",
        left.mdp.gamma(),
        right.mdp.gamma()
    );
    ensure_contract!(
        left.partition == right.partition,
        "paired instances must share the partition"
    );
    ensure_contract!(
        observer < left.n_machines(),
        "observer {observer} out of range for {} machines",
        left.n_machines()
    );
    let graph = DepGraph::build(left)?;
    ensure_contract!(
        graph == DepGraph::build(right)?,
        "paired instances must induce the same dependency graph"
    );
    let differing = differing_machines(left, right);
    let distances = graph.distances_from(observer);
    Ok((graph, differing, distances))
}

/// Replay `protocol` on both instances for `rounds` rounds with identical
/// seeds and diff the observer's transcript and outputs bit for bit.
pub fn indistinguishability_check(
    protocol: IndistProtocol,
    left: &ShardedMdp,
    right: &ShardedMdp,
    observer: usize,
    rounds: usize,
    noise: &DeltaNoise,
) -> Result<IndistVerdict> {
    let (graph, differing, distances) = prepare(left, right, observer)?;
    let guaranteed = differing
        .iter()
        .all(|&j| distances[j] == UNREACHABLE || distances[j] > rounds);

    let (transcript_left, output_left) = replay(protocol, left, &graph, observer, rounds, noise)?;
    let (transcript_right, output_right) =
        replay(protocol, right, &graph, observer, rounds, noise)?;

    let mut first_divergence = diff_transcripts(&transcript_left, &transcript_right)?;
    if first_divergence.is_none() {
        for (idx, (&l, &r)) in output_left.iter().zip(&output_right).enumerate() {
            if l.to_bits() != r.to_bits() {
                let state = match protocol {
                    IndistProtocol::Sdbp { .. } => left.partition.owned_states(observer)[idx],
                    IndistProtocol::Gossip => idx,
                };
                first_divergence = Some(Divergence::Output { state, left: l, right: r });
                break;
            }
        }
    }

    Ok(IndistVerdict {
        passed: first_divergence.is_none(),
        guaranteed,
        rounds,
        observer,
        first_divergence,
        output_left,
        output_right,
    })
}

/// Like [`indistinguishability_check`], but reject pairs that differ within
/// radius `rounds` of the observer instead of running them.
pub fn indistinguishability_check_strict(
    protocol: IndistProtocol,
    left: &ShardedMdp,
    right: &ShardedMdp,
    observer: usize,
    rounds: usize,
    noise: &DeltaNoise,
) -> Result<IndistVerdict> {
    let (_, differing, distances) = prepare(left, right, observer)?;
    if let Some(&witness) = differing
        .iter()
        .find(|&&j| distances[j] != UNREACHABLE && distances[j] <= rounds)
    {
        return Err(Error::Contract(format!(
            "instances differ at machine {witness}, distance {} ≤ radius {rounds} \
             from observer {observer}",
            distances[witness]
        )));
    }
    indistinguishability_check(protocol, left, right, observer, rounds, noise)
}

/// Run one side and return the observer's transcript and outputs.
fn replay(
    protocol: IndistProtocol,
    data: &ShardedMdp,
    graph: &DepGraph,
    observer: usize,
    rounds: usize,
    noise: &DeltaNoise,
) -> Result<(Vec<Vec<crate::protocols::Message>>, Vec<f64>)> {
    match protocol {
        IndistProtocol::Sdbp { local_sweeps } => {
            let opts = RunOptions {
                local_sweeps,
                transcript: TranscriptMode::AtMachine(observer),
                ..Default::default()
            };
            let report = run_sdbp(data, graph, noise, rounds, &opts)?;
            let Transcript::AtMachine { rounds: transcript, .. } = report.transcript else {
                unreachable!("requested an at-machine transcript");
            };
            // Rebuild the observer's view: zeros, plus every delivery it
            // received, plus its own final values — exactly what its local
            // readout may legitimately depend on.
            let mut view = vec![0.0; data.mdp.n_states()];
            for round in &transcript {
                for message in round {
                    for &(state, value) in &message.payload {
                        view[state] = value;
                    }
                }
            }
            for &s in data.partition.owned_states(observer) {
                view[s] = report.final_values[s];
            }
            let output = local_readout(data, observer, &view);
            Ok((transcript, output))
        }
        IndistProtocol::Gossip => {
            let w = crate::depgraph::mh_matrix(graph, crate::depgraph::Laziness::LazyHalf)?;
            let opts = RunOptions {
                transcript: TranscriptMode::AtMachine(observer),
                ..Default::default()
            };
            let report =
                run_gossip_fvi(data, graph, &w, noise, rounds, &opts, &GossipOptions::default())?;
            let Transcript::AtMachine { rounds: transcript, .. } = report.transcript else {
                unreachable!("requested an at-machine transcript");
            };
            let output = report
                .final_tables
                .as_ref()
                .expect("gossip reports tables")[observer]
                .as_slice()
                .to_vec();
            Ok((transcript, output))
        }
    }
}

/// First bitwise difference between two observer transcripts.
fn diff_transcripts(
    left: &[Vec<crate::protocols::Message>],
    right: &[Vec<crate::protocols::Message>],
) -> Result<Option<Divergence>> {
    ensure_contract!(
        left.len() == right.len(),
        "replays executed different round counts ({} vs {})",
        left.len(),
        right.len()
    );
    for (round_idx, (lmsgs, rmsgs)) in left.iter().zip(right).enumerate() {
        ensure_contract!(
            lmsgs.len() == rmsgs.len(),
            "round {}: replays produced different message counts",
            round_idx + 1
        );
        for (lm, rm) in lmsgs.iter().zip(rmsgs) {
            ensure_contract!(
                lm.sender == rm.sender && lm.payload.len() == rm.payload.len(),
                "round {}: replays produced different message structure",
                round_idx + 1
            );
            for (&(ls, lv), &(rs, rv)) in lm.payload.iter().zip(&rm.payload) {
                ensure_contract!(
                    ls == rs,
                    "round {}: replays transmitted different state sets",
                    round_idx + 1
                );
                if lv.to_bits() != rv.to_bits() {
                    return Ok(Some(Divergence::Message {
                        round: round_idx + 1,
                        sender: lm.sender,
                        state: ls,
                        left: lv,
                        right: rv,
                    }));
                }
            }
        }
    }
    Ok(None)
}
