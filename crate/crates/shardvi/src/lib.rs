//! Deterministic round-based simulator and analysis library for distributed
//! value iteration over data-induced dependency graphs.
//!
//! State space of a tabular discounted MDP is partitioned across `M`
//! machines; machines run local Bellman backups and exchange boundary values
//! along the dependency graph induced by the transition structure. The crate
//! simulates several communication disciplines over this substrate:
//!
//! - **SDBP** — synchronous distributed Bellman propagation: every round,
//!   each machine backs up its owned states and ships fresh boundary values
//!   to the neighbors that read them.
//! - **Broadcast** — a centralized reference in which every machine sees the
//!   full global iterate each round.
//! - **Bandwidth-capped SDBP** — per-edge byte budgets with FIFO queues and
//!   coalescing of superseded values.
//! - **Gossip-FVI** — federated value iteration with lazy Metropolis–Hastings
//!   averaging of full value tables instead of boundary exchange.
//! - **Asynchronous SDBP** — bounded message delay `D` with adversarial or
//!   randomized delivery schedules.
//!
//! All executions are deterministic: perturbations are keyed hashes of
//! `(seed, machine, round, state)`, iteration order is fixed, and reports
//! serialize with fixed-precision formatting, so a rerun reproduces every
//! artifact byte for byte.
//!
//! The analysis side computes graph quantities that govern convergence —
//! BFS distances and diameter, the discounted locality radius `L_ε`,
//! spectral gap of the lazy Metropolis–Hastings matrix, conductance under
//! two cut-normalization conventions — and closed-form round/error bounds to
//! compare against measured trajectories.
//!
//! Entry points: protocol runners in [`protocols`] and [`async_engine`],
//! instance generators in [`instances`], bound evaluation in [`accounting`],
//! and the file-format / CLI layer in [`harness`].

pub mod accounting;
pub mod async_engine;
pub mod depgraph;
pub mod error;
pub mod harness;
pub mod instances;
pub mod mdp_core;
pub mod protocols;

pub use error::{Error, Result};
pub use mdp_core::{
    bellman_apply, bellman_apply_noisy, solve_vstar, truncated_vstar, DeltaNoise, Mdp, NoiseMode,
    ValueTable,
};

pub use async_engine::{
    async_round_bound, batch_lightcone_check, map_far_rewards, run_async_sdbp, DelayMode,
    DelaySchedule, LightconeVerdict,
};
pub use depgraph::{
    discounted_radius, mh_matrix, spectral_gap, ConductanceConvention, DepGraph, GraphSummary,
    Laziness, MixingMatrix, Partition, ShardedMdp,
};
pub use instances::{
    gen_fed_tree, gen_thm1_pair, gen_thm2_family, gen_topology_mdp, TopologyKind, TopologySpec,
};
pub use protocols::{
    bandwidth::run_sdbp_bandwidth,
    broadcast::run_broadcast,
    gossip::{run_gossip_fvi, GossipOptions, GossipScope},
    indist::{indistinguishability_check, IndistProtocol, IndistVerdict},
    sdbp::run_sdbp,
    Algorithm, LocalSweeps, RunOptions, RunReport, TranscriptMode,
};

pub use accounting::{
    bit_ledger, check_gossip_recursion, compare_bounds, transcript_hash, verify_bit_lowerbound,
    BitProtocol, BoundKind, BoundParams, DeltaSeries, VerdictTable,
};
