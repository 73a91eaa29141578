//! Tabular discounted MDPs and Bellman machinery.
//!
//! Provides the [`Mdp`] container (sparse transition lists, rewards in
//! `[0,1]`, discount `γ ∈ (0,1)`), the exact Bellman optimality operator
//!
//! ```text
//! (𝒯V)(s) = max_a [ r(s,a) + γ · Σ_{s'} P(s'|s,a) · V(s') ]
//! ```
//!
//! a δ-perturbed variant reproducing bounded local-operator error, a
//! high-precision value-iteration oracle for `V⋆`, and truncated optimal
//! values `V⋆,(T) = 𝒯^T 0`.
//!
//! Every distributed protocol in this crate routes its per-state backups
//! through [`backup_state`], so a simulated execution and the centralized
//! reference perform bit-identical floating-point work whenever they see the
//! same input values. Exactness claims in the test suite rely on this.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_contract, Result};

/// Probability mass per `(state, action)` row must sum to 1 within this.
pub const PROB_SUM_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Mdp
// ---------------------------------------------------------------------------

/// A finite discounted MDP with sparse transition lists.
///
/// Transitions are stored per `(state, action)` in canonical order (sorted by
/// next state), which both fixes the floating-point summation order of every
/// backup and makes serialized files byte-stable.
#[derive(Clone, Debug, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    /// `row(s, a)` → sorted list of `(next_state, probability)`.
    transitions: Vec<Vec<(usize, f64)>>,
    /// `row(s, a)` → reward in `[0, 1]`.
    rewards: Vec<f64>,
    gamma: f64,
}

impl Mdp {
    /// Build and validate an MDP from sparse `(s, a, s', p)` transition
    /// entries and `(s, a, r)` reward entries.
    ///
    /// Invariants enforced:
    /// - `gamma ∈ (0, 1)` strictly;
    /// - per `(s, a)`: probabilities nonnegative and summing to 1 within
    ///   `1e-12`, with no duplicate `(s, a, s')` entries;
    /// - every reward lies in `[0, 1]`; unspecified `(s, a)` rewards are 0.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        transitions: &[(usize, usize, usize, f64)],
        rewards: &[(usize, usize, f64)],
    ) -> Result<Self> {
        ensure_contract!(n_states > 0, "MDP must have at least one state");
        ensure_contract!(n_actions > 0, "MDP must have at least one action");
        ensure_contract!(
            gamma.is_finite() && 0.0 < gamma && gamma < 1.0,
            "gamma must lie strictly in (0,1), got {gamma}"
        );

        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_states * n_actions];
        for &(s, a, sp, p) in transitions {
            ensure_contract!(s < n_states, "transition source state {s} out of range");
            ensure_contract!(a < n_actions, "transition action {a} out of range");
            ensure_contract!(sp < n_states, "transition next state {sp} out of range");
            ensure_contract!(
                p.is_finite() && p >= 0.0,
                "transition probability must be finite and nonnegative, got {p}"
            );
            rows[s * n_actions + a].push((sp, p));
        }
        for (idx, row) in rows.iter_mut().enumerate() {
            let (s, a) = (idx / n_actions, idx % n_actions);
            ensure_contract!(
                !row.is_empty(),
                "state {s} action {a} has no transitions (every row must be a distribution)"
            );
            row.sort_unstable_by_key(|&(sp, _)| sp);
            for pair in row.windows(2) {
                ensure_contract!(
                    pair[0].0 != pair[1].0,
                    "duplicate transition entry for state {s} action {a} next {}",
                    pair[0].0
                );
            }
            let total: f64 = row.iter().map(|&(_, p)| p).sum();
            ensure_contract!(
                (total - 1.0).abs() <= PROB_SUM_TOL,
                "probabilities for state {s} action {a} sum to {total}, expected 1"
            );
        }

        let mut reward_table = vec![0.0; n_states * n_actions];
        let mut seen = vec![false; n_states * n_actions];
        for &(s, a, r) in rewards {
            ensure_contract!(s < n_states, "reward state {s} out of range");
            ensure_contract!(a < n_actions, "reward action {a} out of range");
            ensure_contract!(
                r.is_finite() && (0.0..=1.0).contains(&r),
                "reward for state {s} action {a} must lie in [0,1], got {r}"
            );
            ensure_contract!(!seen[s * n_actions + a], "duplicate reward for state {s} action {a}");
            seen[s * n_actions + a] = true;
            reward_table[s * n_actions + a] = r;
        }

        Ok(Self { n_states, n_actions, transitions: rows, rewards: reward_table, gamma })
    }

    /// Number of states.
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Number of actions.
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Discount factor γ.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Sorted `(next_state, probability)` list for `(s, a)`.
    pub fn transitions(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.n_actions + a]
    }

    /// Reward for `(s, a)`.
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    /// Upper bound `1/(1−γ)` on any value reachable from rewards in `[0,1]`.
    pub fn value_bound(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    /// Enumerate all transition entries in canonical `(s, a, s')` order.
    pub fn transition_entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        (0..self.n_states).flat_map(move |s| {
            (0..self.n_actions).flat_map(move |a| {
                self.transitions(s, a).iter().map(move |&(sp, p)| (s, a, sp, p))
            })
        })
    }

    /// Serialize to the canonical JSON document:
    /// `{n_states, n_actions, gamma, transitions: [[s,a,s',p]..], rewards: [[s,a,r]..]}`
    /// with entries in `(s, a, s')` order, so equal MDPs produce
    /// byte-identical files.
    pub fn to_json(&self) -> Result<String> {
        let doc = MdpDocument {
            n_states: self.n_states,
            n_actions: self.n_actions,
            gamma: self.gamma,
            transitions: self.transition_entries().collect(),
            rewards: (0..self.n_states)
                .flat_map(|s| (0..self.n_actions).map(move |a| (s, a)))
                .map(|(s, a)| (s, a, self.reward(s, a)))
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parse the canonical JSON document produced by [`Mdp::to_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MdpDocument = serde_json::from_str(text)?;
        Mdp::new(doc.n_states, doc.n_actions, doc.gamma, &doc.transitions, &doc.rewards)
    }
}

/// On-disk JSON layout. Tuples serialize as arrays, giving the documented
/// `[[s, a, s', p], ...]` element shape.
#[derive(Serialize, Deserialize)]
struct MdpDocument {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    transitions: Vec<(usize, usize, usize, f64)>,
    rewards: Vec<(usize, usize, f64)>,
}

// ---------------------------------------------------------------------------
// ValueTable
// ---------------------------------------------------------------------------

/// A state-indexed vector of values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable(pub Vec<f64>);

impl ValueTable {
    /// All-zero table of the given length (the canonical initialization
    /// `V^(0) = 0`).
    pub fn zeros(n: usize) -> Self {
        ValueTable(vec![0.0; n])
    }

    /// Number of states covered.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Whether the table is empty.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Raw slice access.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Sup-norm distance `‖self − other‖∞`. Panics on length mismatch.
    pub fn sup_dist(&self, other: &ValueTable) -> f64 {
        assert_eq!(self.len(), other.len(), "value table length mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Mean absolute distance `(1/n)·Σ |self − other|`.
    pub fn mean_dist(&self, other: &ValueTable) -> f64 {
        assert_eq!(self.len(), other.len(), "value table length mismatch");
        if self.is_empty() {
            return 0.0;
        }
        let total: f64 = self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum();
        total / self.len() as f64
    }

    /// Sup-norm `‖self‖∞`.
    pub fn sup_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for ValueTable {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for ValueTable {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

// ---------------------------------------------------------------------------
// DeltaNoise
// ---------------------------------------------------------------------------

/// How per-backup perturbations are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// No perturbation; the operator is exact.
    None,
    /// Magnitude uniform in `[-δ, δ)`, keyed by `(seed, machine, round, state)`.
    UniformBounded,
    /// Magnitude exactly δ with a deterministic sign per `(machine, state)`.
    ///
    /// The sign does not vary with the round, so the same bias is re-applied
    /// every backup — the persistent-error pattern that drives the
    /// steady-state floor δ/(1−γ) close to its worst case, unlike zero-mean
    /// round-varying noise which largely averages out.
    WorstCaseSign,
}

/// Reproducible bounded perturbation of local Bellman backups.
///
/// Models a local operator `𝒯̃_j` with `‖𝒯̃_j V − 𝒯_j V‖∞ ≤ δ`: each backed-up
/// state receives an additive term of magnitude at most `delta`, a pure
/// function of `(seed, machine, round, state)`, so replaying a run reproduces
/// it bit for bit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaNoise {
    /// Perturbation bound δ ≥ 0.
    pub delta: f64,
    /// Base seed for the keyed generator.
    pub seed: u64,
    /// Sampling mode.
    pub mode: NoiseMode,
}

impl DeltaNoise {
    /// The exact operator: δ = 0.
    pub fn none() -> Self {
        DeltaNoise { delta: 0.0, seed: 0, mode: NoiseMode::None }
    }

    /// Validated constructor; rejects `delta < 0`.
    pub fn new(delta: f64, seed: u64, mode: NoiseMode) -> Result<Self> {
        ensure_contract!(
            delta.is_finite() && delta >= 0.0,
            "noise bound delta must be finite and >= 0, got {delta}"
        );
        Ok(DeltaNoise { delta, seed, mode })
    }

    /// The additive perturbation applied to `(machine, round, state)`.
    /// Always has magnitude ≤ `delta`.
    pub fn perturbation(&self, machine: usize, round: u64, state: usize) -> f64 {
        if self.delta == 0.0 || matches!(self.mode, NoiseMode::None) {
            return 0.0;
        }
        match self.mode {
            NoiseMode::None => 0.0,
            NoiseMode::UniformBounded => {
                let bits = keyed_hash(self.seed, machine as u64, round, state as u64);
                // 53-bit mantissa → u ∈ [0,1); map to [-δ, δ).
                let u = (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                self.delta * (2.0 * u - 1.0)
            }
            NoiseMode::WorstCaseSign => {
                // Round index deliberately excluded: see `NoiseMode`.
                let bits = keyed_hash(self.seed, machine as u64, 0, state as u64);
                if bits & 1 == 0 {
                    self.delta
                } else {
                    -self.delta
                }
            }
        }
    }
}

/// SplitMix64 finalizer: a well-mixed 64-bit hash step.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a `(seed, machine, round, state)` key into 64 uniform bits.
pub(crate) fn keyed_hash(seed: u64, machine: u64, round: u64, state: u64) -> u64 {
    let mut z = splitmix64(seed);
    z = splitmix64(z ^ machine);
    z = splitmix64(z ^ round);
    z = splitmix64(z ^ state);
    z
}

// ---------------------------------------------------------------------------
// Bellman operators
// ---------------------------------------------------------------------------

/// One exact backup of a single state, reading values through `lookup`.
///
/// Ties in the max over actions break toward the lowest action index, making
/// every execution reproducible. All protocol simulators and the centralized
/// oracle call this same kernel, so identical inputs produce bit-identical
/// outputs across execution styles.
#[inline]
pub fn backup_state<F: Fn(usize) -> f64>(mdp: &Mdp, s: usize, lookup: &F) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for a in 0..mdp.n_actions() {
        let mut expectation = 0.0;
        for &(sp, p) in mdp.transitions(s, a) {
            expectation += p * lookup(sp);
        }
        let q = mdp.reward(s, a) + mdp.gamma() * expectation;
        if q > best {
            best = q;
        }
    }
    best
}

/// Apply the exact Bellman optimality operator 𝒯 to `v`.
///
/// With `states = Some(subset)` only the listed states are backed up; all
/// other entries are copied through unchanged.
pub fn bellman_apply(mdp: &Mdp, v: &ValueTable, states: Option<&[usize]>) -> Result<ValueTable> {
    ensure_contract!(
        v.len() == mdp.n_states(),
        "value table has {} entries but MDP has {} states",
        v.len(),
        mdp.n_states()
    );
    let lookup = |sp: usize| v[sp];
    let mut out = v.clone();
    match states {
        None => {
            for s in 0..mdp.n_states() {
                out[s] = backup_state(mdp, s, &lookup);
            }
        }
        Some(subset) => {
            for &s in subset {
                ensure_contract!(s < mdp.n_states(), "backup state {s} out of range");
                out[s] = backup_state(mdp, s, &lookup);
            }
        }
    }
    Ok(out)
}

/// Apply the δ-perturbed operator `𝒯̃`: exact backup plus a reproducible
/// perturbation of magnitude ≤ δ per state, keyed by
/// `(noise.seed, machine_id, round, state)`.
pub fn bellman_apply_noisy(
    mdp: &Mdp,
    v: &ValueTable,
    noise: &DeltaNoise,
    machine_id: usize,
    round: u64,
    states: Option<&[usize]>,
) -> Result<ValueTable> {
    ensure_contract!(noise.delta >= 0.0, "noise bound delta must be >= 0");
    let mut out = bellman_apply(mdp, v, states)?;
    if noise.delta == 0.0 || matches!(noise.mode, NoiseMode::None) {
        return Ok(out);
    }
    match states {
        None => {
            for s in 0..mdp.n_states() {
                out[s] += noise.perturbation(machine_id, round, s);
            }
        }
        Some(subset) => {
            for &s in subset {
                out[s] += noise.perturbation(machine_id, round, s);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Result of the value-iteration oracle.
#[derive(Clone, Debug)]
pub struct VStarSolution {
    /// Value table with `‖values − V⋆‖∞ ≤ tol` certified by contraction.
    pub values: ValueTable,
    /// Number of Bellman applications performed.
    pub iterations: usize,
    /// Final sup-norm change between successive iterates.
    pub final_change: f64,
}

/// High-precision `V⋆` oracle: value iteration from zero until the sup-norm
/// change drops to `tol·(1−γ)/γ`.
///
/// By the contraction property, successive change `c` certifies
/// `‖V − V⋆‖∞ ≤ c·γ/(1−γ)`, so the returned table is within `tol` of the
/// true fixed point — the stopping rule is an accuracy certificate, not a
/// heuristic iteration cap.
pub fn solve_vstar(mdp: &Mdp, tol: f64) -> Result<VStarSolution> {
    ensure_contract!(tol.is_finite() && tol > 0.0, "tolerance must be positive, got {tol}");
    let gamma = mdp.gamma();
    let threshold = tol * (1.0 - gamma) / gamma;
    let mut v = ValueTable::zeros(mdp.n_states());
    let mut iterations = 0;
    loop {
        let next = bellman_apply(mdp, &v, None)?;
        let change = next.sup_dist(&v);
        v = next;
        iterations += 1;
        if change <= threshold {
            return Ok(VStarSolution { values: v, iterations, final_change: change });
        }
    }
}

/// Truncated optimal values `V⋆,(T) = 𝒯^T 0`: exactly `T` Bellman
/// applications to the all-zero table.
pub fn truncated_vstar(mdp: &Mdp, horizon: usize) -> Result<ValueTable> {
    let mut v = ValueTable::zeros(mdp.n_states());
    for _ in 0..horizon {
        v = bellman_apply(mdp, &v, None)?;
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
