//! Generators for canonical topologies, random sharded MDPs, and the hard
//! instance families used by the lower-bound checks.
//!
//! Three kinds of artifacts come out of here:
//!
//! - **Random topology MDPs** ([`gen_topology_mdp`]): an MDP sharded over
//!   `M` machines whose dependency graph realizes *exactly* a requested
//!   support (ring, grid, star, expander, path, tree) — no missing edges, no
//!   extras. These drive all protocol experiments.
//! - **Locality pairs** ([`gen_thm1_pair`]): two MDPs differing only in one
//!   reward at the far end of a machine chain. Any observer at the near end
//!   needs as many rounds as the hop distance (capped by the discounted
//!   radius) before its output may legally differ between the two.
//! - **Bit families** ([`gen_thm2_family`], [`gen_fed_tree`]): `m` parallel
//!   chains whose terminal rewards encode a bit vector `b`; reading an
//!   ε-accurate value table at the near end decodes all of `b`, which is the
//!   engine of the communication lower bound `Ω(max{L, m/B})`.
//!
//! All generators are pure functions of their arguments (randomness comes
//! from a ChaCha stream keyed by the seed), so concurrent generation and
//! replay are safe.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::depgraph::{DepGraph, Partition, ShardedMdp};
use crate::error::{ensure_contract, Result};
use crate::mdp_core::Mdp;

/// Cross transitions generated per directed machine-pair in random topology
/// MDPs. At least one is required to realize the support edge; a few more
/// give the boundary sets some width.
pub const CROSS_DENSITY: usize = 3;

// ---------------------------------------------------------------------------
// Topology specifications
// ---------------------------------------------------------------------------

/// Supported machine-graph shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    /// Cycle on `M` machines.
    Ring,
    /// √M × √M four-neighbor lattice (`M` must be a perfect square).
    Grid,
    /// One hub connected to `M − 1` leaves.
    Star,
    /// Random regular graph of even degree (default 4), built as an
    /// edge-disjoint union of Hamiltonian cycles so it is always connected.
    Expander,
    /// Path on `M` machines.
    Path,
    /// Complete rooted tree with the given depth and branching factor,
    /// machines numbered in level order.
    Tree,
}

/// Full description of a machine topology.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySpec {
    /// Shape.
    pub kind: TopologyKind,
    /// Number of machines.
    pub m: usize,
    /// Degree for [`TopologyKind::Expander`] (must be even, ≥ 2).
    pub expander_degree: usize,
    /// Depth for [`TopologyKind::Tree`] (root at depth 0).
    pub tree_depth: usize,
    /// Branching factor for [`TopologyKind::Tree`].
    pub branching: usize,
    /// Seed for topology-level randomness (expander wiring).
    pub seed: u64,
}

impl TopologySpec {
    /// Ring on `m` machines.
    pub fn ring(m: usize) -> Self {
        Self { kind: TopologyKind::Ring, m, expander_degree: 4, tree_depth: 0, branching: 0, seed: 0 }
    }

    /// Square grid on `m` machines (`m` must be a perfect square).
    pub fn grid(m: usize) -> Self {
        Self { kind: TopologyKind::Grid, m, expander_degree: 4, tree_depth: 0, branching: 0, seed: 0 }
    }

    /// Star on `m` machines, hub at machine 0.
    pub fn star(m: usize) -> Self {
        Self { kind: TopologyKind::Star, m, expander_degree: 4, tree_depth: 0, branching: 0, seed: 0 }
    }

    /// Degree-4 expander on `m` machines, wired by `seed`.
    pub fn expander(m: usize, seed: u64) -> Self {
        Self { kind: TopologyKind::Expander, m, expander_degree: 4, tree_depth: 0, branching: 0, seed }
    }

    /// Path on `m` machines.
    pub fn path(m: usize) -> Self {
        Self { kind: TopologyKind::Path, m, expander_degree: 4, tree_depth: 0, branching: 0, seed: 0 }
    }

    /// Complete tree with `branching ≥ 1` children per internal node and the
    /// given depth (a depth-0 tree is a single machine).
    pub fn tree(depth: usize, branching: usize) -> Self {
        let m = tree_node_count(depth, branching);
        Self { kind: TopologyKind::Tree, m, expander_degree: 4, tree_depth: depth, branching, seed: 0 }
    }

    /// Short lowercase name used in reports and file names.
    pub fn label(&self) -> &'static str {
        match self.kind {
            TopologyKind::Ring => "ring",
            TopologyKind::Grid => "grid",
            TopologyKind::Star => "star",
            TopologyKind::Expander => "expander",
            TopologyKind::Path => "path",
            TopologyKind::Tree => "tree",
        }
    }

    /// The undirected machine edges this spec describes, sorted with
    /// `j < k`. Validates all shape constraints.
    pub fn machine_edges(&self) -> Result<Vec<(usize, usize)>> {
        let m = self.m;
        let mut edges = BTreeSet::new();
        match self.kind {
            TopologyKind::Ring => {
                ensure_contract!(m >= 3, "ring needs at least 3 machines, got {m}");
                for j in 0..m {
                    let k = (j + 1) % m;
                    edges.insert((j.min(k), j.max(k)));
                }
            }
            TopologyKind::Grid => {
                let side = (m as f64).sqrt().round() as usize;
                ensure_contract!(
                    side * side == m && m >= 1,
                    "grid needs a perfect-square machine count, got {m}"
                );
                for r in 0..side {
                    for c in 0..side {
                        let here = r * side + c;
                        if c + 1 < side {
                            edges.insert((here, here + 1));
                        }
                        if r + 1 < side {
                            edges.insert((here, here + side));
                        }
                    }
                }
            }
            TopologyKind::Star => {
                ensure_contract!(m >= 2, "star needs at least 2 machines, got {m}");
                for leaf in 1..m {
                    edges.insert((0, leaf));
                }
            }
            TopologyKind::Expander => {
                let d = self.expander_degree;
                ensure_contract!(
                    d >= 2 && d % 2 == 0,
                    "expander degree must be even and >= 2, got {d}"
                );
                ensure_contract!(
                    m > d,
                    "expander needs more machines than its degree ({m} vs {d})"
                );
                return expander_edges(m, d, self.seed);
            }
            TopologyKind::Path => {
                ensure_contract!(m >= 2, "path needs at least 2 machines, got {m}");
                for j in 0..m - 1 {
                    edges.insert((j, j + 1));
                }
            }
            TopologyKind::Tree => {
                ensure_contract!(self.branching >= 1, "tree branching must be >= 1");
                let expect = tree_node_count(self.tree_depth, self.branching);
                ensure_contract!(
                    m == expect,
                    "tree of depth {} and branching {} has {expect} machines, spec says {m}",
                    self.tree_depth,
                    self.branching
                );
                for (parent, child) in tree_edges(self.tree_depth, self.branching) {
                    edges.insert((parent, child));
                }
            }
        }
        Ok(edges.into_iter().collect())
    }
}

/// Node count of the complete tree: `Σ_{ℓ=0}^{depth} branching^ℓ`.
pub fn tree_node_count(depth: usize, branching: usize) -> usize {
    let mut total = 0usize;
    let mut level = 1usize;
    for _ in 0..=depth {
        total += level;
        level *= branching.max(1);
        if branching <= 1 {
            level = 1;
        }
    }
    total
}

/// Parent→child edges of the complete tree in level order (heap indexing:
/// children of `i` are `b·i + 1 + c`).
pub fn tree_edges(depth: usize, branching: usize) -> Vec<(usize, usize)> {
    let n = tree_node_count(depth, branching);
    let mut edges = Vec::new();
    for i in 0..n {
        for c in 0..branching {
            let child = branching * i + 1 + c;
            if child < n {
                edges.push((i, child));
            }
        }
    }
    edges
}

/// Machines on the leftmost root-to-leaf path of the complete tree.
pub fn tree_leftmost_path(depth: usize, branching: usize) -> Vec<usize> {
    let mut path = vec![0];
    let mut cur = 0;
    for _ in 0..depth {
        cur = branching * cur + 1;
        path.push(cur);
    }
    path
}

/// Random `d`-regular graph as a union of `d/2` pairwise edge-disjoint
/// Hamiltonian cycles. Each cycle keeps the graph connected by itself;
/// resampling only has to avoid duplicate edges, which takes a handful of
/// attempts at the sizes used here.
fn expander_edges(m: usize, d: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let n_cycles = d / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'attempt: for _ in 0..10_000 {
        let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        for _ in 0..n_cycles {
            let mut order: Vec<usize> = (0..m).collect();
            // Fisher–Yates with the shared stream.
            for i in (1..m).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            for w in 0..m {
                let a = order[w];
                let b = order[(w + 1) % m];
                let key = (a.min(b), a.max(b));
                if !edges.insert(key) {
                    continue 'attempt;
                }
            }
        }
        return Ok(edges.into_iter().collect());
    }
    unreachable!("edge-disjoint cycle packing failed to materialize within 10000 attempts")
}

// ---------------------------------------------------------------------------
// Random topology MDPs
// ---------------------------------------------------------------------------

/// Generate a random sharded MDP whose dependency graph realizes exactly
/// the requested topology.
///
/// Construction: machine `j` owns the contiguous block of
/// `states_per_machine` states starting at `j·states_per_machine`. Every
/// `(s, a)` row gets one or two in-shard targets; then, for each directed
/// machine pair along a topology edge, [`CROSS_DENSITY`] transitions into
/// uniformly chosen states of the neighbor are spliced into random rows of
/// the source shard. Probabilities are random and normalized per row;
/// rewards are uniform in `[0, 1]`. Two actions throughout.
///
/// Cross targets only ever land in topology neighbors, and each direction
/// of each edge receives at least one transition — so the dependency graph
/// equals the request, with no extra and no missing edges.
pub fn gen_topology_mdp(
    spec: &TopologySpec,
    states_per_machine: usize,
    gamma: f64,
    seed: u64,
) -> Result<ShardedMdp> {
    ensure_contract!(states_per_machine >= 1, "need at least one state per machine");
    let edges = spec.machine_edges()?;
    let m = spec.m;
    let n_actions = 2;
    let n_states = m * states_per_machine;
    let shard = |machine: usize| machine * states_per_machine..(machine + 1) * states_per_machine;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Target sets per (s, a), filled in-shard first, then cross splices.
    let mut targets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_states * n_actions];
    for s in 0..n_states {
        let machine = s / states_per_machine;
        for a in 0..n_actions {
            let row = &mut targets[s * n_actions + a];
            for _ in 0..2 {
                let t = rng.gen_range(shard(machine));
                row.insert(t);
            }
        }
    }
    // Directed splices: both directions of every undirected edge.
    for &(j, k) in &edges {
        for (src, dst) in [(j, k), (k, j)] {
            for _ in 0..CROSS_DENSITY {
                let s = rng.gen_range(shard(src));
                let a = rng.gen_range(0..n_actions);
                let t = rng.gen_range(shard(dst));
                targets[s * n_actions + a].insert(t);
            }
        }
    }

    let mut transitions = Vec::new();
    let mut rewards = Vec::new();
    for s in 0..n_states {
        for a in 0..n_actions {
            let row: Vec<usize> = targets[s * n_actions + a].iter().copied().collect();
            // Weights bounded away from zero keep every branch plausible.
            let weights: Vec<f64> = row.iter().map(|_| 0.2 + 0.8 * rng.gen::<f64>()).collect();
            let total: f64 = weights.iter().sum();
            for (t, w) in row.iter().zip(&weights) {
                transitions.push((s, a, *t, w / total));
            }
            rewards.push((s, a, rng.gen::<f64>()));
        }
    }

    let mdp = Mdp::new(n_states, n_actions, gamma, &transitions, &rewards)?;
    let partition = Partition::contiguous(n_states, m)?;
    ShardedMdp::new(mdp, partition)
}

// ---------------------------------------------------------------------------
// Locality pair
// ---------------------------------------------------------------------------

/// Two MDPs on a machine chain that differ only in one far-away reward.
///
/// States `x_0 … x_L`, one per machine, deterministic forward transitions,
/// terminal self-loop. The `zero` variant has all rewards 0 (so `V⋆ ≡ 0`);
/// the `rewarded` variant pays `1 − γ` on the terminal self-loop, making
/// `V⋆(x_ℓ) = γ^{L−ℓ}`. Both shard identically, so their dependency graphs
/// coincide — an observer at machine 0 can only tell them apart after
/// information has crossed all `L` hops.
#[derive(Clone, Debug)]
pub struct Thm1Pair {
    /// The all-zero-reward variant.
    pub zero: ShardedMdp,
    /// The variant with reward `1 − γ` on the terminal self-loop.
    pub rewarded: ShardedMdp,
    /// Machine whose output is observed (owns `x_0`).
    pub observer_machine: usize,
    /// Machine holding the distinguishing reward (owns `x_L`).
    pub reward_machine: usize,
    /// Hop distance `L` between them.
    pub chain_len: usize,
    /// Discount factor.
    pub gamma: f64,
}

impl Thm1Pair {
    /// The shared dependency graph of both variants.
    pub fn depgraph(&self) -> Result<DepGraph> {
        DepGraph::build(&self.zero)
    }
}

/// Generate the locality pair for chain length `L ≥ 1`.
pub fn gen_thm1_pair(chain_len: usize, gamma: f64) -> Result<Thm1Pair> {
    gen_thm1_pair_with_decoy(chain_len, gamma, false)
}

/// Like [`gen_thm1_pair`], optionally adding a second action with identical
/// dynamics and rewards so backups exercise a genuine max over actions.
pub fn gen_thm1_pair_with_decoy(chain_len: usize, gamma: f64, decoy: bool) -> Result<Thm1Pair> {
    ensure_contract!(chain_len >= 1, "chain length must be >= 1, got {chain_len}");
    let l = chain_len;
    let n_actions = if decoy { 2 } else { 1 };
    let mut transitions = Vec::new();
    for a in 0..n_actions {
        for s in 0..l {
            transitions.push((s, a, s + 1, 1.0));
        }
        transitions.push((l, a, l, 1.0));
    }
    let terminal_rewards: Vec<(usize, usize, f64)> =
        (0..n_actions).map(|a| (l, a, 1.0 - gamma)).collect();
    let partition = Partition::contiguous(l + 1, l + 1)?;
    let zero = ShardedMdp::new(
        Mdp::new(l + 1, n_actions, gamma, &transitions, &[])?,
        partition.clone(),
    )?;
    let rewarded = ShardedMdp::new(
        Mdp::new(l + 1, n_actions, gamma, &transitions, &terminal_rewards)?,
        partition,
    )?;
    Ok(Thm1Pair {
        zero,
        rewarded,
        observer_machine: 0,
        reward_machine: l,
        chain_len: l,
        gamma,
    })
}

// ---------------------------------------------------------------------------
// Bit family
// ---------------------------------------------------------------------------

/// `m` parallel chains across `L + 1` machines whose terminal rewards encode
/// a bit vector.
///
/// Machine `ℓ` owns states `x^q_ℓ = ℓ·m + q` for all chains `q`; chain `q`
/// pays `(1 − γ)·b_q` on its terminal self-loop, so `V⋆(x^q_0) = γ^L·b_q`.
/// Any value table within `γ^L/4` of `V⋆` at the sources decodes every bit
/// by thresholding at `γ^L/2`.
#[derive(Clone, Debug)]
pub struct Thm2Instance {
    /// The sharded MDP.
    pub data: ShardedMdp,
    /// Hop distance `L` from sources to rewards.
    pub chain_len: usize,
    /// Number of parallel chains `m`.
    pub n_chains: usize,
    /// The encoded bit vector.
    pub bits: Vec<bool>,
    /// Discount factor.
    pub gamma: f64,
}

impl Thm2Instance {
    /// State id of chain `q` at depth `ℓ`.
    pub fn chain_state(&self, depth: usize, q: usize) -> usize {
        depth * self.n_chains + q
    }

    /// The observer-side states `x^q_0`, in chain order.
    pub fn source_states(&self) -> Vec<usize> {
        (0..self.n_chains).map(|q| self.chain_state(0, q)).collect()
    }

    /// The decoding threshold `γ^L / 2`.
    pub fn threshold(&self) -> f64 {
        self.gamma.powi(self.chain_len as i32) / 2.0
    }

    /// Decode bits from source-state values by thresholding.
    pub fn decode(&self, source_values: &[f64]) -> Vec<bool> {
        decode_bits(source_values, self.threshold())
    }
}

/// Generate the bit-family instance for `L, m ≥ 1` and `|bits| = m`.
pub fn gen_thm2_family(
    chain_len: usize,
    n_chains: usize,
    gamma: f64,
    bits: &[bool],
) -> Result<Thm2Instance> {
    ensure_contract!(chain_len >= 1, "chain length must be >= 1, got {chain_len}");
    ensure_contract!(n_chains >= 1, "need at least one chain, got {n_chains}");
    ensure_contract!(
        bits.len() == n_chains,
        "bit vector has {} entries for {n_chains} chains",
        bits.len()
    );
    let (l, m) = (chain_len, n_chains);
    let state = |depth: usize, q: usize| depth * m + q;
    let mut transitions = Vec::new();
    let mut rewards = Vec::new();
    for q in 0..m {
        for depth in 0..l {
            transitions.push((state(depth, q), 0, state(depth + 1, q), 1.0));
        }
        transitions.push((state(l, q), 0, state(l, q), 1.0));
        if bits[q] {
            rewards.push((state(l, q), 0, 1.0 - gamma));
        }
    }
    let n_states = (l + 1) * m;
    let data = ShardedMdp::new(
        Mdp::new(n_states, 1, gamma, &transitions, &rewards)?,
        Partition::contiguous(n_states, l + 1)?,
    )?;
    Ok(Thm2Instance { data, chain_len: l, n_chains: m, bits: bits.to_vec(), gamma })
}

/// Threshold-decode a bit per value: `value > threshold`.
pub fn decode_bits(values: &[f64], threshold: f64) -> Vec<bool> {
    values.iter().map(|&v| v > threshold).collect()
}

// ---------------------------------------------------------------------------
// Federated tree
// ---------------------------------------------------------------------------

/// The bit family embedded in a complete tree of machines.
///
/// The leftmost root-to-leaf path carries the [`gen_thm2_family`]
/// construction (root = observer); every other machine holds a single
/// zero-reward hub state. Hub states transition only to hub states of
/// off-path children (self-loop at leaves), which realizes every tree edge
/// in the dependency graph without ever feeding value back into the chains
/// — so path values are exactly those of the plain bit family.
#[derive(Clone, Debug)]
pub struct FedTreeInstance {
    /// The sharded MDP.
    pub data: ShardedMdp,
    /// Root machine (always 0).
    pub root: usize,
    /// Machines on the loaded path, root first.
    pub loaded_path: Vec<usize>,
    /// `chain_states[ℓ][q]` = state of chain `q` at path depth `ℓ`.
    pub chain_states: Vec<Vec<usize>>,
    /// Hub state of each machine, if it has one.
    pub hub_states: Vec<Option<usize>>,
    /// Tree depth `L`.
    pub depth: usize,
    /// Branching factor.
    pub branching: usize,
    /// Number of parallel chains.
    pub n_chains: usize,
    /// The encoded bit vector.
    pub bits: Vec<bool>,
    /// Discount factor.
    pub gamma: f64,
}

/// Generate the federated-tree instance. With `branching = 1` the tree is a
/// path, no hubs are created, and the MDP is identical to
/// [`gen_thm2_family`] with the same parameters.
pub fn gen_fed_tree(
    depth: usize,
    branching: usize,
    n_chains: usize,
    gamma: f64,
    bits: &[bool],
) -> Result<FedTreeInstance> {
    ensure_contract!(depth >= 1, "tree depth must be >= 1, got {depth}");
    ensure_contract!(branching >= 1, "branching must be >= 1, got {branching}");
    ensure_contract!(
        bits.len() == n_chains,
        "bit vector has {} entries for {n_chains} chains",
        bits.len()
    );
    let n_machines = tree_node_count(depth, branching);
    let path = tree_leftmost_path(depth, branching);
    let on_path = {
        let mut mask = vec![false; n_machines];
        for &j in &path {
            mask[j] = true;
        }
        mask
    };
    let children: Vec<Vec<usize>> = (0..n_machines)
        .map(|i| {
            (0..branching)
                .map(|c| branching * i + 1 + c)
                .filter(|&child| child < n_machines)
                .collect()
        })
        .collect();

    // A machine needs a hub iff it is off the path, or has off-path
    // children whose tree edges would otherwise go unrealized.
    let needs_hub: Vec<bool> = (0..n_machines)
        .map(|j| !on_path[j] || children[j].iter().any(|&c| !on_path[c]))
        .collect();

    // Assign state ids machine by machine: chain states first (on-path
    // machines only), then the hub. Each machine's states are contiguous.
    let mut owner = Vec::new();
    let mut chain_states: Vec<Vec<usize>> = vec![Vec::new(); depth + 1];
    let mut hub_states: Vec<Option<usize>> = vec![None; n_machines];
    for j in 0..n_machines {
        if let Some(level) = path.iter().position(|&p| p == j) {
            for _q in 0..n_chains {
                chain_states[level].push(owner.len());
                owner.push(j);
            }
        }
        if needs_hub[j] {
            hub_states[j] = Some(owner.len());
            owner.push(j);
        }
    }
    let n_states = owner.len();

    let mut transitions = Vec::new();
    let mut rewards = Vec::new();
    for q in 0..n_chains {
        for level in 0..depth {
            transitions.push((chain_states[level][q], 0, chain_states[level + 1][q], 1.0));
        }
        let terminal = chain_states[depth][q];
        transitions.push((terminal, 0, terminal, 1.0));
        if bits[q] {
            rewards.push((terminal, 0, 1.0 - gamma));
        }
    }
    for j in 0..n_machines {
        let Some(hub) = hub_states[j] else { continue };
        let off_path_children: Vec<usize> = children[j]
            .iter()
            .copied()
            .filter(|&c| !on_path[c])
            .collect();
        if off_path_children.is_empty() {
            transitions.push((hub, 0, hub, 1.0));
        } else {
            let p = 1.0 / off_path_children.len() as f64;
            for c in off_path_children {
                let child_hub =
                    hub_states[c].expect("off-path machines always carry a hub");
                transitions.push((hub, 0, child_hub, p));
            }
        }
    }

    let data = ShardedMdp::new(
        Mdp::new(n_states, 1, gamma, &transitions, &rewards)?,
        Partition::new(owner, n_machines)?,
    )?;
    Ok(FedTreeInstance {
        data,
        root: 0,
        loaded_path: path,
        chain_states,
        hub_states,
        depth,
        branching,
        n_chains,
        bits: bits.to_vec(),
        gamma,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
