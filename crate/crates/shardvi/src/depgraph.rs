//! Data-induced dependency graphs over machine partitions.
//!
//! Given an MDP whose states are partitioned across `M` machines, machine
//! `j` depends on machine `k` when some owned state's backup reads a value
//! held by `k` — i.e. some transition `(s, a, s')` with positive probability
//! has `s` owned by `j` and `s'` owned by `k`. The resulting graph (directed
//! edges with transition-count weights, plus the undirected support)
//! controls how fast information moves between machines, and therefore how
//! many communication rounds any boundary-exchange scheme needs.
//!
//! This module computes the graph itself plus the quantities the round/error
//! bounds are stated in:
//!
//! - boundary sets `∂_{j←k}`, BFS distances, diameter;
//! - the discounted locality radius `L_ε = max{L ≥ 0 : γ^L > 2ε}` — beyond
//!   distance `L_ε`, discounting shrinks any influence below the target
//!   accuracy;
//! - the lazy Metropolis–Hastings averaging matrix
//!   `W_jk = 1/(2·max(d_j,d_k))` for edges, diagonal filled to make rows sum
//!   to one, whose spectral gap `1 − |λ₂|` governs gossip mixing;
//! - conductance sweeps under two cut normalizations (MH cut weight over
//!   min side fraction, and unweighted cut edges over min side volume).

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_contract, Error, Result};
use crate::mdp_core::{Mdp, ValueTable};

/// Distance value for unreachable pairs (disconnected support).
pub const UNREACHABLE: usize = usize::MAX;

// ---------------------------------------------------------------------------
// Partition / sharded dataset
// ---------------------------------------------------------------------------

/// Assignment of every MDP state to an owning machine.
///
/// A transition belongs to the shard of its source state's owner, so
/// ownership and backup responsibility coincide: machine `j` backs up
/// exactly the states it owns, using exactly the transitions in its shard.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    /// `owner[s]` = machine owning state `s`.
    owner: Vec<usize>,
    /// Owned states per machine, each list sorted ascending.
    owned: Vec<Vec<usize>>,
}

impl Partition {
    /// Build from an owner-per-state list. Requires `n_machines ≥ 1` and
    /// every machine to own at least one state.
    pub fn new(owner: Vec<usize>, n_machines: usize) -> Result<Self> {
        ensure_contract!(n_machines > 0, "partition needs at least one machine");
        ensure_contract!(!owner.is_empty(), "partition covers no states");
        let mut owned = vec![Vec::new(); n_machines];
        for (s, &m) in owner.iter().enumerate() {
            ensure_contract!(
                m < n_machines,
                "state {s} assigned to machine {m}, but only {n_machines} machines exist"
            );
            owned[m].push(s);
        }
        for (m, states) in owned.iter().enumerate() {
            ensure_contract!(!states.is_empty(), "machine {m} owns no states");
        }
        Ok(Self { owner, owned })
    }

    /// Contiguous block partition: equal blocks in state order, with the
    /// first `n_states mod n_machines` machines taking one extra state.
    pub fn contiguous(n_states: usize, n_machines: usize) -> Result<Self> {
        ensure_contract!(
            n_states >= n_machines,
            "cannot spread {n_states} states over {n_machines} machines"
        );
        let base = n_states / n_machines;
        let extra = n_states % n_machines;
        let mut owner = Vec::with_capacity(n_states);
        for m in 0..n_machines {
            let size = base + usize::from(m < extra);
            owner.extend(std::iter::repeat(m).take(size));
        }
        Partition::new(owner, n_machines)
    }

    /// Number of machines.
    pub fn n_machines(&self) -> usize {
        self.owned.len()
    }

    /// Number of states covered.
    pub fn n_states(&self) -> usize {
        self.owner.len()
    }

    /// Owning machine of state `s`.
    pub fn owner_of(&self, s: usize) -> usize {
        self.owner[s]
    }

    /// Sorted list of states owned by machine `m`.
    pub fn owned_states(&self, m: usize) -> &[usize] {
        &self.owned[m]
    }

    /// Serialize as the line-based text format: one `state machine` pair per
    /// line, in state order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, &m) in self.owner.iter().enumerate() {
            out.push_str(&format!("{s} {m}\n"));
        }
        out
    }

    /// Parse the line-based text format produced by [`Partition::to_text`].
    /// States may appear in any order but must cover `0..n` exactly once;
    /// blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let parse = |tok: Option<&str>, what: &str| -> Result<usize> {
                tok.ok_or_else(|| Error::Parse {
                    location: format!("partition line {}", lineno + 1),
                    message: format!("missing {what}"),
                })?
                .parse::<usize>()
                .map_err(|e| Error::Parse {
                    location: format!("partition line {}", lineno + 1),
                    message: format!("bad {what}: {e}"),
                })
            };
            let s = parse(fields.next(), "state index")?;
            let m = parse(fields.next(), "machine index")?;
            if fields.next().is_some() {
                return Err(Error::Parse {
                    location: format!("partition line {}", lineno + 1),
                    message: "expected exactly two fields: state machine".into(),
                });
            }
            pairs.push((s, m));
        }
        ensure_contract!(!pairs.is_empty(), "partition file lists no states");
        let n = pairs.len();
        let mut owner = vec![usize::MAX; n];
        let mut n_machines = 0;
        for (s, m) in pairs {
            ensure_contract!(s < n, "state index {s} out of range for {n} listed states");
            ensure_contract!(owner[s] == usize::MAX, "state {s} listed twice");
            owner[s] = m;
            n_machines = n_machines.max(m + 1);
        }
        Partition::new(owner, n_machines)
    }
}

/// An MDP together with a machine partition of its states — the unit every
/// distributed protocol and analysis consumes.
#[derive(Clone, Debug)]
pub struct ShardedMdp {
    /// The full MDP.
    pub mdp: Mdp,
    /// State ownership.
    pub partition: Partition,
}

impl ShardedMdp {
    /// Bundle an MDP with a partition covering exactly its states.
    pub fn new(mdp: Mdp, partition: Partition) -> Result<Self> {
        ensure_contract!(
            partition.n_states() == mdp.n_states(),
            "partition covers {} states but MDP has {}",
            partition.n_states(),
            mdp.n_states()
        );
        Ok(Self { mdp, partition })
    }

    /// Machine count `M`.
    pub fn n_machines(&self) -> usize {
        self.partition.n_machines()
    }

    /// Shard of machine `j`: transitions `(s, a, s', p)` whose source state
    /// is owned by `j`, in canonical order.
    pub fn shard(&self, j: usize) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.partition.owned_states(j).iter().flat_map(move |&s| {
            (0..self.mdp.n_actions()).flat_map(move |a| {
                self.mdp.transitions(s, a).iter().map(move |&(sp, p)| (s, a, sp, p))
            })
        })
    }
}

// ---------------------------------------------------------------------------
// DepGraph
// ---------------------------------------------------------------------------

/// The machine-level dependency graph of a partitioned MDP.
///
/// A directed edge `(j, k)` with weight `w` means `w` positive-probability
/// transitions in machine `j`'s shard land in states owned by `k`; the
/// boundary set `∂_{j←k}` lists exactly which of `k`'s states those are.
/// Distances, diameter, and all spectral quantities live on the undirected
/// support.
#[derive(Clone, Debug, PartialEq)]
pub struct DepGraph {
    n_machines: usize,
    /// Sorted undirected neighbor lists (no self-loops, no duplicates).
    adjacency: Vec<Vec<usize>>,
    /// Directed edge weights: `(j, k) → transition count`.
    directed: BTreeMap<(usize, usize), usize>,
    /// `boundary[j][idx]` = sorted states owned by `adjacency[j][idx]` whose
    /// values machine `j` reads during its own backups (the set `∂_{j←k}`).
    boundary: Vec<Vec<Vec<usize>>>,
}

impl DepGraph {
    /// Build the dependency graph of a sharded MDP.
    ///
    /// Only transitions with strictly positive probability induce
    /// dependencies; a zero-probability record contributes nothing to any
    /// backup and is ignored.
    pub fn build(data: &ShardedMdp) -> Result<Self> {
        let partition = &data.partition;
        let m = partition.n_machines();
        let mut directed = BTreeMap::new();
        let mut reads: Vec<BTreeMap<usize, BTreeSet<usize>>> = vec![BTreeMap::new(); m];
        for (s, _a, sp, p) in data.mdp.transition_entries() {
            if p <= 0.0 {
                continue;
            }
            let j = partition.owner_of(s);
            let k = partition.owner_of(sp);
            if j != k {
                *directed.entry((j, k)).or_insert(0) += 1;
                reads[j].entry(k).or_default().insert(sp);
            }
        }
        let mut adjacency = vec![BTreeSet::new(); m];
        for &(j, k) in directed.keys() {
            adjacency[j].insert(k);
            adjacency[k].insert(j);
        }
        let adjacency: Vec<Vec<usize>> =
            adjacency.into_iter().map(|set| set.into_iter().collect()).collect();
        let boundary = adjacency
            .iter()
            .enumerate()
            .map(|(j, nbrs)| {
                nbrs.iter()
                    .map(|&k| {
                        reads[j]
                            .get(&k)
                            .map(|set| set.iter().copied().collect())
                            .unwrap_or_default()
                    })
                    .collect()
            })
            .collect();
        Ok(Self { n_machines: m, adjacency, directed, boundary })
    }

    /// Build directly from directed machine-level edges with unit weights
    /// (used by generators to state expected topologies, and by the edge-list
    /// loader). Edges may repeat (weights accumulate); self-loops rejected.
    pub fn from_directed_edges(n_machines: usize, edges: &[(usize, usize)]) -> Result<Self> {
        ensure_contract!(n_machines > 0, "graph needs at least one machine");
        let mut directed = BTreeMap::new();
        for &(j, k) in edges {
            ensure_contract!(
                j < n_machines && k < n_machines,
                "edge ({j},{k}) out of range for {n_machines} machines"
            );
            ensure_contract!(j != k, "self-loop ({j},{j}) not allowed");
            *directed.entry((j, k)).or_insert(0usize) += 1;
        }
        let mut adjacency = vec![BTreeSet::new(); n_machines];
        for &(j, k) in directed.keys() {
            adjacency[j].insert(k);
            adjacency[k].insert(j);
        }
        let adjacency: Vec<Vec<usize>> =
            adjacency.into_iter().map(|set| set.into_iter().collect()).collect();
        let boundary = adjacency.iter().map(|nbrs| vec![Vec::new(); nbrs.len()]).collect();
        Ok(Self { n_machines, adjacency, directed, boundary })
    }

    /// Undirected convenience constructor: each listed pair becomes edges in
    /// both directions.
    pub fn from_undirected_edges(n_machines: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let both: Vec<(usize, usize)> =
            edges.iter().flat_map(|&(j, k)| [(j, k), (k, j)]).collect();
        DepGraph::from_directed_edges(n_machines, &both)
    }

    /// Number of machines (vertices).
    pub fn n_machines(&self) -> usize {
        self.n_machines
    }

    /// Sorted undirected neighbors of machine `j`.
    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.adjacency[j]
    }

    /// Undirected degree of machine `j`.
    pub fn degree(&self, j: usize) -> usize {
        self.adjacency[j].len()
    }

    /// Directed edge weight `w(j,k)`: number of transitions in `j`'s shard
    /// landing in `k`'s states. Zero when no such transition exists.
    pub fn directed_weight(&self, j: usize, k: usize) -> usize {
        self.directed.get(&(j, k)).copied().unwrap_or(0)
    }

    /// All directed edges `(j, k, weight)` in sorted order.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.directed.iter().map(|(&(j, k), &w)| (j, k, w))
    }

    /// The boundary set `∂_{j←k}`: states owned by `k` whose values `j`
    /// reads. Empty when `(j,k)` carries no dependency or the graph was
    /// built without an MDP.
    pub fn boundary_in(&self, j: usize, k: usize) -> &[usize] {
        match self.adjacency[j].binary_search(&k) {
            Ok(idx) => &self.boundary[j][idx],
            Err(_) => &[],
        }
    }

    /// All undirected support edges `(j, k)` with `j < k`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (j, nbrs) in self.adjacency.iter().enumerate() {
            for &k in nbrs {
                if j < k {
                    out.push((j, k));
                }
            }
        }
        out
    }

    /// BFS distances from `src` on the undirected support; [`UNREACHABLE`]
    /// where no path exists.
    pub fn distances_from(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![UNREACHABLE; self.n_machines];
        let mut queue = VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(j) = queue.pop_front() {
            for &k in &self.adjacency[j] {
                if dist[k] == UNREACHABLE {
                    dist[k] = dist[j] + 1;
                    queue.push_back(k);
                }
            }
        }
        dist
    }

    /// Full all-pairs distance matrix (symmetric, zero diagonal,
    /// [`UNREACHABLE`] across components).
    pub fn distance_matrix(&self) -> Vec<Vec<usize>> {
        (0..self.n_machines).map(|j| self.distances_from(j)).collect()
    }

    /// Hop distance between two machines.
    pub fn distance(&self, j: usize, k: usize) -> usize {
        self.distances_from(j)[k]
    }

    /// Diameter: the maximum *finite* pairwise distance. A graph with no
    /// edges (or a single machine) has diameter 0; disconnected graphs
    /// report the largest within-component eccentricity.
    pub fn diameter(&self) -> usize {
        let mut best = 0;
        for j in 0..self.n_machines {
            for &d in &self.distances_from(j) {
                if d != UNREACHABLE {
                    best = best.max(d);
                }
            }
        }
        best
    }

    /// Connected components of the support, each sorted, ordered by
    /// smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n_machines];
        let mut comps = Vec::new();
        for start in 0..self.n_machines {
            if seen[start] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(j) = queue.pop_front() {
                comp.push(j);
                for &k in &self.adjacency[j] {
                    if !seen[k] {
                        seen[k] = true;
                        queue.push_back(k);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// Whether the support is connected.
    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// Serialize as the line-based edge list `j k weight`: one line per
    /// directed edge in sorted order, weight = transition count.
    pub fn to_edge_text(&self) -> String {
        let mut out = String::new();
        for (j, k, w) in self.directed_edges() {
            out.push_str(&format!("{j} {k} {w}\n"));
        }
        out
    }

    /// Parse the `j k weight` edge-list format. Vertex count is inferred
    /// from the largest index; boundary-state detail is not representable in
    /// this format and loads empty.
    pub fn from_edge_text(text: &str) -> Result<Self> {
        let mut directed = BTreeMap::new();
        let mut max_vertex = 0;
        let mut any = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    location: format!("graph line {}", lineno + 1),
                    message: "expected three fields: j k weight".into(),
                });
            }
            let parse_num = |tok: &str, what: &str| -> Result<usize> {
                tok.parse::<usize>().map_err(|e| Error::Parse {
                    location: format!("graph line {}", lineno + 1),
                    message: format!("bad {what}: {e}"),
                })
            };
            let j = parse_num(fields[0], "vertex")?;
            let k = parse_num(fields[1], "vertex")?;
            let w = parse_num(fields[2], "weight")?;
            ensure_contract!(j != k, "graph line {}: self-loop ({j},{j})", lineno + 1);
            ensure_contract!(w > 0, "graph line {}: weight must be positive", lineno + 1);
            max_vertex = max_vertex.max(j).max(k);
            *directed.entry((j, k)).or_insert(0usize) += w;
            any = true;
        }
        ensure_contract!(any, "graph file lists no edges");
        let n_machines = max_vertex + 1;
        let mut adjacency = vec![BTreeSet::new(); n_machines];
        for &(j, k) in directed.keys() {
            adjacency[j].insert(k);
            adjacency[k].insert(j);
        }
        let adjacency: Vec<Vec<usize>> =
            adjacency.into_iter().map(|set| set.into_iter().collect()).collect();
        let boundary = adjacency.iter().map(|nbrs| vec![Vec::new(); nbrs.len()]).collect();
        Ok(Self { n_machines, adjacency, directed, boundary })
    }

    // -----------------------------------------------------------------------
    // Conductance
    // -----------------------------------------------------------------------

    /// Sweep candidate cuts and return the minimum conductance under the
    /// requested convention, together with the achieving cut side.
    ///
    /// At `M ≤ 20` every nonempty proper subset is enumerated, so the result
    /// is exact. Above that, candidates are all prefixes of the sorted
    /// λ₂-eigenvector ordering (ties broken by vertex index) plus all BFS
    /// balls around every vertex; the result is then an upper bound on the
    /// true minimum.
    pub fn conductance_sweep(&self, convention: ConductanceConvention) -> Result<ConductanceReport> {
        ensure_contract!(self.n_machines >= 2, "conductance needs at least two machines");
        if !self.is_connected() {
            return Err(Error::Disconnected(self.components()));
        }
        let m = self.n_machines;
        let w = mh_matrix(self, Laziness::LazyHalf)?;
        let mut best_phi = f64::INFINITY;
        let mut best_cut: Vec<usize> = Vec::new();
        let mut consider = |side: &[usize], phi: f64| {
            if phi < best_phi {
                best_phi = phi;
                best_cut = side.to_vec();
            }
        };

        if m <= 20 {
            // Exhaustive: subsets containing vertex 0 cover every cut once.
            for mask in 0u32..(1u32 << (m - 1)) {
                let side: Vec<usize> =
                    std::iter::once(0).chain((1..m).filter(|&j| (mask >> (j - 1)) & 1 == 1)).collect();
                if side.len() == m {
                    continue;
                }
                let phi = self.cut_conductance(&side, &w, convention);
                consider(&side, phi);
            }
        } else {
            // Sweep prefixes of the λ₂-eigenvector ordering.
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| {
                w.fiedler_vector()[a]
                    .partial_cmp(&w.fiedler_vector()[b])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut side = Vec::new();
            for &j in order.iter().take(m - 1) {
                side.push(j);
                let phi = self.cut_conductance(&side, &w, convention);
                consider(&side, phi);
            }
            // BFS balls around every vertex, every radius short of covering.
            for root in 0..m {
                let dist = self.distances_from(root);
                let max_dist = *dist.iter().max().unwrap();
                for radius in 0..max_dist {
                    let ball: Vec<usize> = (0..m).filter(|&j| dist[j] <= radius).collect();
                    if !ball.is_empty() && ball.len() < m {
                        let phi = self.cut_conductance(&ball, &w, convention);
                        consider(&ball, phi);
                    }
                }
            }
        }

        best_cut.sort_unstable();
        Ok(ConductanceReport { phi: best_phi, cut: best_cut, convention })
    }

    /// Conductance of one specific cut side under the given convention.
    pub fn cut_conductance(
        &self,
        side: &[usize],
        w: &MixingMatrix,
        convention: ConductanceConvention,
    ) -> f64 {
        let m = self.n_machines;
        let mut in_side = vec![false; m];
        for &j in side {
            in_side[j] = true;
        }
        let side_size = side.len();
        let comp_size = m - side_size;
        match convention {
            ConductanceConvention::PaperDefinition => {
                // MH cut weight over min(|S|, |S̄|)/M.
                let mut cross = 0.0;
                for (j, k) in self.edges() {
                    if in_side[j] != in_side[k] {
                        cross += w.entry(j, k);
                    }
                }
                cross * m as f64 / side_size.min(comp_size) as f64
            }
            ConductanceConvention::GraphVolume => {
                // Unweighted cut edges over min-side volume (sum of degrees).
                let mut cut_edges = 0usize;
                for (j, k) in self.edges() {
                    if in_side[j] != in_side[k] {
                        cut_edges += 1;
                    }
                }
                let vol_side: usize = side.iter().map(|&j| self.degree(j)).sum();
                let vol_comp: usize =
                    (0..m).filter(|&j| !in_side[j]).map(|j| self.degree(j)).sum();
                cut_edges as f64 / vol_side.min(vol_comp) as f64
            }
        }
    }
}

/// Which conductance normalization to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConductanceConvention {
    /// `Φ(W) = min_S [Σ_{j∈S,k∉S} W_jk] / [min(|S|,|S̄|)/M]`: MH cut weight
    /// normalized by min side *fraction*. The `1/M` in the denominator means
    /// values can exceed 1 and grow with `M`; dividing by `M` recovers the
    /// classical conductance of the chain `W`, which is the quantity obeying
    /// the Cheeger sandwich against `gap(W)`.
    PaperDefinition,
    /// Classical unweighted graph conductance
    /// `|cut(S)| / min(vol S, vol S̄)` with degree volumes. Headline topology
    /// tables use this convention. Beware: its Cheeger inequality bounds the
    /// normalized-Laplacian gap, *not* the lazy-MH gap — on the star the two
    /// differ by a factor of ~M².
    GraphVolume,
}

/// Minimum-conductance cut found by [`DepGraph::conductance_sweep`].
#[derive(Clone, Debug)]
pub struct ConductanceReport {
    /// The conductance value.
    pub phi: f64,
    /// The achieving side `S` (sorted).
    pub cut: Vec<usize>,
    /// Which normalization `phi` uses.
    pub convention: ConductanceConvention,
}

// ---------------------------------------------------------------------------
// Mixing matrix
// ---------------------------------------------------------------------------

/// Degree rule for the Metropolis–Hastings construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Laziness {
    /// `W_jk = 1/(2·max(d_j,d_k))`: every self-weight is ≥ 1/2, making `W`
    /// positive semidefinite (no negative eigenvalues, no parity
    /// oscillation).
    LazyHalf,
}

/// A symmetric doubly stochastic averaging matrix with cached spectrum.
#[derive(Clone, Debug)]
pub struct MixingMatrix {
    w: DMatrix<f64>,
    /// Per-row sparse view `(k, W_jk)` sorted by `k` (diagonal included):
    /// fixes the floating-point summation order of averaging steps.
    rows: Vec<Vec<(usize, f64)>>,
    /// Eigenvalues sorted descending.
    eigenvalues: Vec<f64>,
    /// Eigenvector for λ₂, used to seed conductance sweeps.
    fiedler: Vec<f64>,
}

impl MixingMatrix {
    fn from_dense(w: DMatrix<f64>) -> Self {
        let m = w.nrows();
        let rows = (0..m)
            .map(|j| {
                (0..m)
                    .filter(|&k| w[(j, k)] != 0.0)
                    .map(|k| (k, w[(j, k)]))
                    .collect()
            })
            .collect();
        let eig = nalgebra::SymmetricEigen::new(w.clone());
        let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let lambda2 = if m > 1 { eigenvalues[1] } else { 1.0 };
        // Pick the eigenvector closest to λ₂ with a nontrivial component
        // orthogonal to the all-ones top eigenvector.
        let mut fiedler = vec![0.0; m];
        if m > 1 {
            let mut best_idx = None;
            let mut best_err = f64::INFINITY;
            for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
                let col = eig.eigenvectors.column(idx);
                let mean = col.iter().sum::<f64>() / m as f64;
                let centered: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
                let err = (ev - lambda2).abs();
                if centered.sqrt() > 1e-8 && err < best_err {
                    best_err = err;
                    best_idx = Some(idx);
                }
            }
            if let Some(idx) = best_idx {
                for (j, v) in eig.eigenvectors.column(idx).iter().enumerate() {
                    fiedler[j] = *v;
                }
            }
        }
        MixingMatrix { w, rows, eigenvalues, fiedler }
    }

    /// Matrix dimension `M`.
    pub fn size(&self) -> usize {
        self.w.nrows()
    }

    /// Entry `W_jk`.
    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.w[(j, k)]
    }

    /// The dense matrix.
    pub fn dense(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Eigenvalues sorted descending (first entry 1 up to fp error).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Spectral gap `1 − |λ₂|` where `λ₂` is the second-largest eigenvalue.
    pub fn gap(&self) -> f64 {
        if self.size() < 2 {
            return 1.0;
        }
        1.0 - self.eigenvalues[1].abs()
    }

    /// Eigenvector associated with `λ₂`.
    pub fn fiedler_vector(&self) -> &[f64] {
        &self.fiedler
    }

    /// One synchronous averaging step on per-machine value tables:
    /// `out_j = Σ_k W_jk · tables_k`, computed coordinate-wise with a fixed
    /// summation order (ascending `k` over the sparse support), so repeated
    /// runs are bit-identical.
    pub fn mix_tables(&self, tables: &[ValueTable]) -> Vec<ValueTable> {
        assert_eq!(tables.len(), self.size(), "one table per machine");
        let n = tables.first().map_or(0, ValueTable::len);
        let mut out = Vec::with_capacity(tables.len());
        for row in &self.rows {
            let mut mixed = ValueTable::zeros(n);
            for s in 0..n {
                let mut acc = 0.0;
                for &(k, weight) in row {
                    acc += weight * tables[k][s];
                }
                mixed[s] = acc;
            }
            out.push(mixed);
        }
        out
    }
}

/// Build the Metropolis–Hastings mixing matrix of a connected dependency
/// graph: `W_jk = 1/(2·max(d_j,d_k))` on support edges, diagonal filled so
/// each row sums to one. Errors with the component partition when the
/// support is disconnected.
pub fn mh_matrix(graph: &DepGraph, laziness: Laziness) -> Result<MixingMatrix> {
    let Laziness::LazyHalf = laziness;
    if !graph.is_connected() {
        return Err(Error::Disconnected(graph.components()));
    }
    let m = graph.n_machines();
    let mut w = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut off_diag = 0.0;
        for &k in graph.neighbors(j) {
            let weight = 1.0 / (2.0 * graph.degree(j).max(graph.degree(k)) as f64);
            w[(j, k)] = weight;
            off_diag += weight;
        }
        w[(j, j)] = 1.0 - off_diag;
    }
    Ok(MixingMatrix::from_dense(w))
}

/// Spectral gap `1 − |λ₂|` of a mixing matrix (deterministic dense
/// symmetric eigendecomposition).
pub fn spectral_gap(w: &MixingMatrix) -> f64 {
    w.gap()
}

// ---------------------------------------------------------------------------
// Discounted locality radius
// ---------------------------------------------------------------------------

/// The discounted radius `L_ε = max{L ≥ 0 : γ^L > 2ε}`.
///
/// Influence at hop distance `L` is damped by `γ^L`; once that falls to
/// `2ε` the contribution is below the resolvable accuracy, so `L_ε` is the
/// farthest distance that still matters at accuracy `ε`. Defined by the
/// strict inequality — when `γ^L` hits `2ε` exactly, that `L` does *not*
/// qualify. Requires `ε ∈ (0, 1/2)`: at `ε ≥ 1/2` even `L = 0` fails the
/// inequality and the maximum is over an empty set.
pub fn discounted_radius(gamma: f64, epsilon: f64) -> Result<usize> {
    ensure_contract!(
        gamma.is_finite() && 0.0 < gamma && gamma < 1.0,
        "gamma must lie strictly in (0,1), got {gamma}"
    );
    ensure_contract!(
        epsilon.is_finite() && 0.0 < epsilon && epsilon < 0.5,
        "epsilon must lie strictly in (0, 1/2), got {epsilon}"
    );
    let mut l = 0usize;
    // Repeated multiplication mirrors how discounting actually accumulates
    // across rounds in truncated value iteration.
    let mut power = gamma;
    while power > 2.0 * epsilon {
        l += 1;
        power *= gamma;
    }
    Ok(l)
}

// ---------------------------------------------------------------------------
// JSON export
// ---------------------------------------------------------------------------

/// Summary document for a graph analysis, serialized by `analyze` commands.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphSummary {
    /// Number of machines.
    #[serde(rename = "M")]
    pub m: usize,
    /// Support diameter.
    pub diameter: usize,
    /// Spectral gap `1 − |λ₂|` of the lazy MH matrix.
    pub gap: f64,
    /// Conductance under [`ConductanceConvention::GraphVolume`].
    pub phi_graph: f64,
    /// Conductance under [`ConductanceConvention::PaperDefinition`].
    pub phi_paper: f64,
    /// All MH eigenvalues, sorted descending.
    pub eigenvalues: Vec<f64>,
}

impl GraphSummary {
    /// Compute the full summary for a connected graph.
    pub fn compute(graph: &DepGraph) -> Result<Self> {
        let w = mh_matrix(graph, Laziness::LazyHalf)?;
        let phi_graph = graph.conductance_sweep(ConductanceConvention::GraphVolume)?.phi;
        let phi_paper = graph.conductance_sweep(ConductanceConvention::PaperDefinition)?.phi;
        Ok(GraphSummary {
            m: graph.n_machines(),
            diameter: graph.diameter(),
            gap: w.gap(),
            phi_graph,
            phi_paper,
            eigenvalues: w.eigenvalues().to_vec(),
        })
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp_core::Mdp;

    fn path_graph(m: usize) -> DepGraph {
        let edges: Vec<(usize, usize)> = (0..m - 1).map(|j| (j, j + 1)).collect();
        DepGraph::from_undirected_edges(m, &edges).unwrap()
    }

    fn ring_graph(m: usize) -> DepGraph {
        let edges: Vec<(usize, usize)> = (0..m).map(|j| (j, (j + 1) % m)).collect();
        DepGraph::from_undirected_edges(m, &edges).unwrap()
    }

    fn star_graph(m: usize) -> DepGraph {
        let edges: Vec<(usize, usize)> = (1..m).map(|j| (0, j)).collect();
        DepGraph::from_undirected_edges(m, &edges).unwrap()
    }

    fn complete_graph(m: usize) -> DepGraph {
        let mut edges = Vec::new();
        for j in 0..m {
            for k in j + 1..m {
                edges.push((j, k));
            }
        }
        DepGraph::from_undirected_edges(m, &edges).unwrap()
    }

    fn lazy_mh(g: &DepGraph) -> MixingMatrix {
        mh_matrix(g, Laziness::LazyHalf).unwrap()
    }

    // --- partition ---

    #[test]
    fn contiguous_partition_spreads_remainder() {
        let p = Partition::contiguous(10, 3).unwrap();
        assert_eq!(p.owned_states(0), &[0, 1, 2, 3]);
        assert_eq!(p.owned_states(1), &[4, 5, 6]);
        assert_eq!(p.owned_states(2), &[7, 8, 9]);
    }

    #[test]
    fn partition_rejects_empty_machine() {
        assert!(Partition::new(vec![0, 0, 0], 2).is_err());
    }

    #[test]
    fn partition_text_round_trip() {
        let p = Partition::new(vec![0, 1, 1, 0, 2], 3).unwrap();
        let text = p.to_text();
        let back = Partition::from_text(&text).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn partition_text_rejects_duplicates_and_gaps() {
        assert!(Partition::from_text("0 0\n0 1\n").is_err());
        assert!(Partition::from_text("0 0\n2 1\n").is_err());
        assert!(Partition::from_text("").is_err());
    }

    // --- graph construction from an MDP ---

    #[test]
    fn build_detects_cross_machine_reads() {
        // Chain x0 → x1 → x2 → x3, two states per machine: machine 0 reads
        // x2 (owned by machine 1); machine 1 reads nothing remote.
        let mdp = Mdp::new(
            4,
            1,
            0.9,
            &[(0, 0, 1, 1.0), (1, 0, 2, 1.0), (2, 0, 3, 1.0), (3, 0, 3, 1.0)],
            &[],
        )
        .unwrap();
        let data = ShardedMdp::new(mdp, Partition::contiguous(4, 2).unwrap()).unwrap();
        let g = DepGraph::build(&data).unwrap();
        assert_eq!(g.edges(), vec![(0, 1)]);
        assert_eq!(g.directed_weight(0, 1), 1, "one cross transition x1 → x2");
        assert_eq!(g.directed_weight(1, 0), 0);
        assert_eq!(g.boundary_in(0, 1), &[2], "machine 0 reads x2 from machine 1");
        assert!(g.boundary_in(1, 0).is_empty(), "machine 1 reads nothing from machine 0");
        assert_eq!(g.diameter(), 1);
    }

    #[test]
    fn build_single_machine_has_no_edges() {
        let mdp = Mdp::new(3, 1, 0.9, &[(0, 0, 1, 1.0), (1, 0, 2, 1.0), (2, 0, 0, 1.0)], &[])
            .unwrap();
        let data = ShardedMdp::new(mdp, Partition::contiguous(3, 1).unwrap()).unwrap();
        let g = DepGraph::build(&data).unwrap();
        assert!(g.edges().is_empty());
        assert_eq!(g.diameter(), 0);
    }

    #[test]
    fn build_ignores_intra_machine_transitions() {
        let mdp = Mdp::new(
            4,
            1,
            0.9,
            &[(0, 0, 1, 1.0), (1, 0, 0, 1.0), (2, 0, 3, 1.0), (3, 0, 2, 1.0)],
            &[],
        )
        .unwrap();
        let data = ShardedMdp::new(mdp, Partition::contiguous(4, 2).unwrap()).unwrap();
        let g = DepGraph::build(&data).unwrap();
        assert!(g.edges().is_empty());
        assert!(!g.is_connected());
        assert_eq!(g.diameter(), 0, "diameter is the max finite distance");
    }

    #[test]
    fn shard_view_filters_by_source_owner() {
        let mdp = Mdp::new(
            4,
            1,
            0.9,
            &[(0, 0, 1, 1.0), (1, 0, 2, 1.0), (2, 0, 3, 1.0), (3, 0, 3, 1.0)],
            &[],
        )
        .unwrap();
        let data = ShardedMdp::new(mdp, Partition::contiguous(4, 2).unwrap()).unwrap();
        let shard0: Vec<_> = data.shard(0).collect();
        assert_eq!(shard0, vec![(0, 0, 1, 1.0), (1, 0, 2, 1.0)]);
    }

    // --- distances and diameter ---

    #[test]
    fn path_distances_and_diameter() {
        let g = path_graph(5);
        assert_eq!(g.distances_from(0), vec![0, 1, 2, 3, 4]);
        assert_eq!(g.diameter(), 4);
    }

    #[test]
    fn ring_diameter_is_half() {
        assert_eq!(ring_graph(8).diameter(), 4);
        assert_eq!(ring_graph(9).diameter(), 4);
        assert_eq!(ring_graph(64).diameter(), 32);
    }

    #[test]
    fn star_diameter_is_two() {
        assert_eq!(star_graph(64).diameter(), 2);
    }

    #[test]
    fn distance_matrix_symmetric_zero_diagonal() {
        let g = ring_graph(9);
        let d = g.distance_matrix();
        for j in 0..9 {
            assert_eq!(d[j][j], 0);
            for k in 0..9 {
                assert_eq!(d[j][k], d[k][j]);
            }
        }
    }

    // --- discounted radius ---

    #[test]
    fn discounted_radius_strict_inequality() {
        // γ = 0.5, ε = 0.25: γ¹ = 0.5 is not strictly > 0.5, so L_ε = 0
        // (where the floor formula would give 1).
        assert_eq!(discounted_radius(0.5, 0.25).unwrap(), 0);
        // γ = 0.5, ε = 0.2: 0.5 > 0.4 yes, 0.25 > 0.4 no → L = 1.
        assert_eq!(discounted_radius(0.5, 0.2).unwrap(), 1);
    }

    #[test]
    fn discounted_radius_headline_values() {
        // γ = 0.95, ε = 0.01: largest L with 0.95^L > 0.02.
        assert_eq!(discounted_radius(0.95, 0.01).unwrap(), 76);
        // γ = 0.9, ε = 0.05: largest L with 0.9^L > 0.1.
        assert_eq!(discounted_radius(0.9, 0.05).unwrap(), 21);
    }

    #[test]
    fn discounted_radius_rejects_epsilon_at_or_above_half() {
        assert!(discounted_radius(0.9, 0.5).is_err());
        assert!(discounted_radius(0.9, 0.7).is_err());
        assert!(discounted_radius(0.9, 0.0).is_err());
    }

    // --- MH matrix ---

    #[test]
    fn mh_rows_sum_to_one_and_symmetric() {
        for g in [path_graph(6), ring_graph(7), star_graph(9), complete_graph(5)] {
            let w = lazy_mh(&g);
            let m = g.n_machines();
            for j in 0..m {
                let row_sum: f64 = (0..m).map(|k| w.entry(j, k)).sum();
                assert!((row_sum - 1.0).abs() < 1e-12, "row {j} sums to {row_sum}");
                for k in 0..m {
                    assert_eq!(w.entry(j, k), w.entry(k, j), "W must be symmetric");
                }
                assert!(w.entry(j, j) >= 0.5 - 1e-12, "laziness: self-weight ≥ 1/2");
            }
        }
    }

    #[test]
    fn mh_ring_weights_match_closed_form() {
        // All degrees 2 → off-diagonal 1/4, diagonal 1/2.
        let w = lazy_mh(&ring_graph(8));
        assert_eq!(w.entry(0, 1), 0.25);
        assert_eq!(w.entry(0, 0), 0.5);
    }

    #[test]
    fn mh_star_weights_match_closed_form() {
        // Hub degree M−1, leaves degree 1: every edge weight 1/(2(M−1)), hub
        // diagonal 1/2, leaf diagonal 1 − 1/(2(M−1)) = 125/126 at M = 64.
        let m = 64;
        let w = lazy_mh(&star_graph(m));
        let edge = 1.0 / (2.0 * (m - 1) as f64);
        assert_eq!(w.entry(0, 1), edge);
        assert!((w.entry(0, 0) - 0.5).abs() < 1e-12);
        assert!((w.entry(1, 1) - 125.0 / 126.0).abs() < 1e-12);
    }

    #[test]
    fn mh_disconnected_errors_with_components() {
        let g = DepGraph::from_undirected_edges(4, &[(0, 1), (2, 3)]).unwrap();
        match mh_matrix(&g, Laziness::LazyHalf) {
            Err(Error::Disconnected(comps)) => {
                assert_eq!(comps, vec![vec![0, 1], vec![2, 3]]);
            }
            other => panic!("expected Disconnected, got {other:?}"),
        }
    }

    #[test]
    fn mix_tables_averages_with_fixed_order() {
        let g = path_graph(3);
        let w = lazy_mh(&g);
        let tables = vec![
            ValueTable(vec![1.0]),
            ValueTable(vec![2.0]),
            ValueTable(vec![4.0]),
        ];
        let mixed = w.mix_tables(&tables);
        // Row 0: [1/2, 1/4 .. wait degrees: ends 1, middle 2 → end-edge
        // weight 1/(2·2) = 1/4; end diagonal 3/4, middle diagonal 1/2.
        assert!((mixed[0][0] - (0.75 * 1.0 + 0.25 * 2.0)).abs() < 1e-15);
        assert!((mixed[1][0] - (0.25 * 1.0 + 0.5 * 2.0 + 0.25 * 4.0)).abs() < 1e-15);
        // Averaging preserves the total (double stochasticity).
        let before: f64 = [1.0, 2.0, 4.0].iter().sum();
        let after: f64 = mixed.iter().map(|t| t[0]).sum();
        assert!((before - after).abs() < 1e-12);
    }

    // --- spectral gap ---

    #[test]
    fn ring_gap_matches_closed_form() {
        // Lazy MH on a ring: W = I/2 + (C + Cᵀ)/4 has eigenvalues
        // 1/2 + cos(2πk/M)/2, so gap = (1 − cos(2π/M))/2.
        for m in [8, 16, 64] {
            let gap = lazy_mh(&ring_graph(m)).gap();
            let expect = (1.0 - (2.0 * std::f64::consts::PI / m as f64).cos()) / 2.0;
            assert!((gap - expect).abs() < 1e-10, "M={m}: {gap} vs {expect}");
        }
    }

    #[test]
    fn ring64_gap_headline_value() {
        let gap = lazy_mh(&ring_graph(64)).gap();
        assert!((gap - 0.0024).abs() < 1e-4, "got {gap}");
    }

    #[test]
    fn star64_gap_is_one_over_126() {
        // λ₂ of the lazy MH star comes from the leaf-difference eigenspace:
        // λ = 1 − 1/(2(M−1)), hence gap = 1/126 at M = 64.
        let gap = lazy_mh(&star_graph(64)).gap();
        assert!((gap - 1.0 / 126.0).abs() < 1e-10, "got {gap}");
    }

    #[test]
    fn complete_uniform_averaging_gap_is_one() {
        // All-entries-1/M is the rank-one projector onto constants: λ₂ = 0.
        let w = MixingMatrix::from_dense(DMatrix::from_element(5, 5, 0.2));
        assert!((w.gap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_sorted_top_is_one() {
        let w = lazy_mh(&ring_graph(12));
        assert!((w.eigenvalues()[0] - 1.0).abs() < 1e-10);
        assert!(w.eigenvalues().windows(2).all(|pair| pair[0] >= pair[1]));
        // Lazy construction: all eigenvalues in [0, 1].
        assert!(w.eigenvalues().iter().all(|&ev| ev >= -1e-10 && ev <= 1.0 + 1e-10));
    }

    // --- conductance ---

    #[test]
    fn star_graph_volume_conductance_is_one() {
        // Any side not containing the hub has cut = vol(side); sides with
        // the hub mirror to the complement. Every candidate ratio is 1.
        let report = star_graph(64).conductance_sweep(ConductanceConvention::GraphVolume).unwrap();
        assert_eq!(report.phi, 1.0);
    }

    #[test]
    fn ring_graph_volume_conductance_matches_half_split() {
        // Best cut is an arc of length M/2: 2 cut edges over volume M.
        let report = ring_graph(64).conductance_sweep(ConductanceConvention::GraphVolume).unwrap();
        assert!((report.phi - 2.0 / 64.0).abs() < 2e-3, "got {}", report.phi);
    }

    #[test]
    fn exhaustive_matches_known_optimum_on_small_ring() {
        // M = 12 uses the exhaustive path; the optimum is a half-ring arc:
        // 2 edges over volume 12.
        let report = ring_graph(12).conductance_sweep(ConductanceConvention::GraphVolume).unwrap();
        assert!((report.phi - 2.0 / 12.0).abs() < 1e-12);
        assert_eq!(report.cut.len(), 6, "optimal side is a half ring");
    }

    #[test]
    fn paper_convention_on_path4() {
        // Path M=4, exhaustive. Middle cut S={0,1}: cut weight 1/4, min side
        // fraction 2/4 → Φ = (1/4)/(1/2) = 1/2. End cuts give 1. Min = 1/2.
        let report =
            path_graph(4).conductance_sweep(ConductanceConvention::PaperDefinition).unwrap();
        assert!((report.phi - 0.5).abs() < 1e-12, "got {}", report.phi);
    }

    #[test]
    fn two_machine_single_cut() {
        let g = path_graph(2);
        let report = g.conductance_sweep(ConductanceConvention::GraphVolume).unwrap();
        // Only cut: {0} vs {1}, 1 edge over volume 1.
        assert_eq!(report.phi, 1.0);
        assert_eq!(report.cut, vec![0]);
    }

    #[test]
    fn cut_conductance_is_complement_symmetric() {
        let g = ring_graph(10);
        let w = lazy_mh(&g);
        let side = [0, 1, 2];
        let comp: Vec<usize> = (3..10).collect();
        for conv in [ConductanceConvention::GraphVolume, ConductanceConvention::PaperDefinition] {
            let a = g.cut_conductance(&side, &w, conv);
            let b = g.cut_conductance(&comp, &w, conv);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cheeger_sandwich_for_chain_conductance() {
        // Φ_chain := Φ_paper / M is the classical conductance of the
        // reversible chain W (uniform stationary law), and obeys
        // Φ_chain²/2 ≤ gap(W) ≤ 2·Φ_chain on every connected graph —
        // including the star, where the *unweighted* convention breaks the
        // lower branch (see below).
        for g in [ring_graph(16), star_graph(16), path_graph(16), complete_graph(8)] {
            let gap = lazy_mh(&g).gap();
            let phi_chain = g
                .conductance_sweep(ConductanceConvention::PaperDefinition)
                .unwrap()
                .phi
                / g.n_machines() as f64;
            assert!(
                phi_chain * phi_chain / 2.0 <= gap + 1e-12,
                "lower Cheeger branch: Φ²/2 = {} vs gap {gap}",
                phi_chain * phi_chain / 2.0
            );
            assert!(gap <= 2.0 * phi_chain + 1e-12, "upper Cheeger branch: gap {gap} vs 2Φ");
        }
    }

    #[test]
    fn star_breaks_unweighted_cheeger_against_mh_gap() {
        // The unweighted-volume conductance of the star is 1, but the lazy
        // MH gap is 1/(2(M−1)) — the Φ²/2 ≤ gap branch fails by a factor of
        // about M. This is the documented convention mismatch: unweighted
        // Cheeger controls the normalized Laplacian, not the MH matrix.
        let g = star_graph(16);
        let gap = lazy_mh(&g).gap();
        let phi = g.conductance_sweep(ConductanceConvention::GraphVolume).unwrap().phi;
        assert!(phi * phi / 2.0 > gap);
    }

    // --- serialization ---

    #[test]
    fn edge_text_round_trip() {
        let g = ring_graph(6);
        let text = g.to_edge_text();
        let back = DepGraph::from_edge_text(&text).unwrap();
        assert_eq!(g.edges(), back.edges());
        assert_eq!(
            g.directed_edges().collect::<Vec<_>>(),
            back.directed_edges().collect::<Vec<_>>()
        );
        assert_eq!(text, back.to_edge_text());
    }

    #[test]
    fn edge_text_preserves_directed_weights() {
        let g = DepGraph::from_directed_edges(3, &[(0, 1), (0, 1), (1, 2)]).unwrap();
        assert_eq!(g.directed_weight(0, 1), 2);
        let back = DepGraph::from_edge_text(&g.to_edge_text()).unwrap();
        assert_eq!(back.directed_weight(0, 1), 2);
        assert_eq!(back.directed_weight(1, 0), 0);
        assert_eq!(back.directed_weight(1, 2), 1);
    }

    #[test]
    fn edge_text_rejects_malformed_lines() {
        assert!(DepGraph::from_edge_text("0 1\n").is_err());
        assert!(DepGraph::from_edge_text("0 x 1\n").is_err());
        assert!(DepGraph::from_edge_text("1 1 1\n").is_err());
        assert!(DepGraph::from_edge_text("").is_err());
    }

    #[test]
    fn graph_summary_fields_consistent() {
        let g = ring_graph(8);
        let summary = GraphSummary::compute(&g).unwrap();
        assert_eq!(summary.m, 8);
        assert_eq!(summary.diameter, 4);
        assert_eq!(summary.eigenvalues.len(), 8);
        assert!(summary.gap > 0.0);
        assert!(summary.phi_paper >= summary.phi_graph);
    }
}
