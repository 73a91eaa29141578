//! Configuration, file formats, presets, and the experiment drivers behind
//! the `shardvi` command-line interface.
//!
//! The harness composes generators, protocol runners, and bound checkers
//! into reproducible sweeps:
//!
//! - [`cmd_run`] executes the full (topology × algorithm × seed) cross
//!   product of an [`ExperimentConfig`], writes one CSV per run, and
//!   aggregates a mean ± std summary table plus a manifest tying every
//!   number to its seed, config hash, and crate version.
//! - [`cmd_analyze`] loads an instance from its MDP JSON and partition
//!   files and reports the graph quantities that govern convergence,
//!   together with closed-form predicted round budgets.
//! - [`cmd_verify`] replays the verifier suites (locality pairs, bit
//!   lower bounds, asynchronous error bounds, gossip recursion) at small
//!   scale and reports pass/fail per check.
//! - [`cmd_gen`] writes instance families to disk in the two-file format
//!   (`<stem>.mdp.json` + `<stem>.partition.txt`).
//!
//! Everything is deterministic: runs are dispatched concurrently but keyed
//! and sorted by run id, files are written exactly once, and a rerun of the
//! same config reproduces every artifact byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::accounting::{
    check_gossip_recursion, compare_bounds, verify_bit_lowerbound, BitProtocol, BoundKind,
    BoundParams, DeltaSeries,
};
use crate::async_engine::{batch_lightcone_check, run_async_sdbp, DelayMode, DelaySchedule};
use crate::depgraph::{
    discounted_radius, mh_matrix, ConductanceConvention, DepGraph, GraphSummary, Laziness,
    Partition, ShardedMdp,
};
use crate::error::{ensure_contract, Error, Result};
use crate::instances::{
    gen_fed_tree, gen_thm1_pair_with_decoy, gen_thm2_family, gen_topology_mdp, TopologyKind,
    TopologySpec,
};
use crate::mdp_core::{solve_vstar, DeltaNoise, Mdp, NoiseMode};
use crate::protocols::bandwidth::run_sdbp_bandwidth;
use crate::protocols::broadcast::run_broadcast;
use crate::protocols::gossip::{run_gossip_fvi, GossipOptions};
use crate::protocols::indist::{indistinguishability_check, IndistProtocol};
use crate::protocols::sdbp::run_sdbp;
use crate::protocols::{Algorithm, LocalSweeps, RunOptions, DEFAULT_VALUE_BITS};

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

/// A declarative description of one experiment sweep.
///
/// Serializes to a single human-editable TOML document; parsing is strict
/// (unknown keys are rejected) and [`ExperimentConfig::validate`] checks
/// every cross-field precondition up front, so a config that loads cleanly
/// will not fail halfway through a sweep. The document round-trips
/// losslessly: `from_toml(to_toml(c)) == c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Human-readable sweep name (also used in report headers).
    pub name: String,
    /// Machine count `M`, shared by every topology in the sweep.
    pub machines: usize,
    /// Owned states per machine.
    pub states_per_machine: usize,
    /// Topologies to sweep (the machine-graph shapes).
    pub topologies: Vec<TopologyKind>,
    /// Protocols to run on every (topology, seed) instance.
    pub algorithms: Vec<Algorithm>,
    /// Discount factor γ.
    pub gamma: f64,
    /// Target accuracy ε for `rounds_to_target`.
    pub epsilon: f64,
    /// Per-backup perturbation bound δ (0 = exact local operators).
    #[serde(default)]
    pub delta: f64,
    /// How δ-perturbations are drawn; irrelevant when `delta = 0`.
    #[serde(default = "default_noise_mode")]
    pub noise_mode: NoiseMode,
    /// Delay bound `D`; required when `async_sdbp` is among the algorithms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_bound: Option<usize>,
    /// Delay schedule for asynchronous runs (default adversarial maximum).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_mode: Option<DelayMode>,
    /// Per-edge per-round bit cap; required for `sdbp_bandwidth`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_bits: Option<u64>,
    /// Instance seeds; one full run matrix per seed.
    pub seeds: Vec<u64>,
    /// Round budget per run; exceeding it is recorded, not an error.
    pub round_budget: usize,
    /// Directory for CSVs, summary, and manifest (created if missing).
    pub output_dir: String,
}

fn default_noise_mode() -> NoiseMode {
    NoiseMode::UniformBounded
}

impl ExperimentConfig {
    /// Parse and validate a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            location: "experiment config".to_string(),
            message: e.message().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Serialize to TOML. The output parses back to an equal config.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Contract(format!("config does not serialize: {e}")))
    }

    /// SHA-256 of the canonical TOML serialization, as lowercase hex.
    /// Identifies the exact sweep in manifests.
    pub fn hash(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml()?.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }

    /// Check every field and cross-field precondition.
    pub fn validate(&self) -> Result<()> {
        ensure_contract!(!self.name.is_empty(), "config needs a non-empty name");
        ensure_contract!(self.machines >= 2, "sweeps need M >= 2 machines, got {}", self.machines);
        ensure_contract!(self.states_per_machine >= 1, "states_per_machine must be >= 1");
        ensure_contract!(!self.topologies.is_empty(), "config lists no topologies");
        ensure_contract!(!self.algorithms.is_empty(), "config lists no algorithms");
        ensure_contract!(!self.seeds.is_empty(), "config lists no seeds");
        ensure_contract!(distinct(&self.topologies), "duplicate topology in config");
        ensure_contract!(distinct(&self.algorithms), "duplicate algorithm in config");
        ensure_contract!(distinct(&self.seeds), "duplicate seed in config");
        ensure_contract!(
            self.gamma.is_finite() && 0.0 < self.gamma && self.gamma < 1.0,
            "gamma must lie strictly in (0,1), got {}",
            self.gamma
        );
        ensure_contract!(
            self.epsilon.is_finite() && 0.0 < self.epsilon && self.epsilon < 0.5,
            "epsilon must lie strictly in (0, 1/2), got {}",
            self.epsilon
        );
        ensure_contract!(
            self.delta.is_finite() && self.delta >= 0.0,
            "delta must be finite and >= 0, got {}",
            self.delta
        );
        ensure_contract!(self.round_budget >= 1, "round budget must be >= 1");
        ensure_contract!(!self.output_dir.is_empty(), "config needs an output directory");
        for kind in &self.topologies {
            // Surface shape constraints at load time rather than mid-sweep.
            self.spec_for(*kind, 0)?.machine_edges()?;
        }
        if self.algorithms.contains(&Algorithm::AsyncSdbp) {
            let d = self.delay_bound.ok_or_else(|| {
                Error::Contract("async_sdbp runs need delay_bound in the config".to_string())
            })?;
            ensure_contract!(d >= 1, "delay_bound must be >= 1, got {d}");
        }
        if self.algorithms.contains(&Algorithm::SdbpBandwidth) {
            let bits = self.bandwidth_bits.ok_or_else(|| {
                Error::Contract("sdbp_bandwidth runs need bandwidth_bits in the config".to_string())
            })?;
            ensure_contract!(
                bits >= DEFAULT_VALUE_BITS,
                "bandwidth_bits = {bits} cannot carry one {DEFAULT_VALUE_BITS}-bit value"
            );
            ensure_contract!(
                self.delta == 0.0,
                "bandwidth-capped runs model exact local operators; set delta = 0"
            );
        }
        Ok(())
    }

    /// The concrete topology spec for `kind` under this config. Expander
    /// wiring is keyed by the run seed, so each seed draws a fresh sample;
    /// all other shapes ignore the seed.
    pub fn spec_for(&self, kind: TopologyKind, seed: u64) -> Result<TopologySpec> {
        let m = self.machines;
        Ok(match kind {
            TopologyKind::Ring => TopologySpec::ring(m),
            TopologyKind::Grid => TopologySpec::grid(m),
            TopologyKind::Star => TopologySpec::star(m),
            TopologyKind::Expander => TopologySpec::expander(m, seed),
            TopologyKind::Path => TopologySpec::path(m),
            TopologyKind::Tree => {
                return Err(Error::Contract(
                    "tree topologies are generated via `gen fed-tree`, not run sweeps".to_string(),
                ))
            }
        })
    }

    /// The delay schedule for asynchronous runs under `seed`.
    fn schedule_for(&self, seed: u64) -> Result<DelaySchedule> {
        let d = self.delay_bound.expect("validated");
        match self.delay_mode.unwrap_or(DelayMode::AdversarialMax) {
            DelayMode::AdversarialMax => DelaySchedule::adversarial(d),
            DelayMode::UniformRandom => DelaySchedule::uniform(d, seed),
            DelayMode::PerEdgeFixed => DelaySchedule::per_edge(d, seed),
        }
    }
}

fn distinct<T: PartialEq>(items: &[T]) -> bool {
    items.iter().enumerate().all(|(i, x)| !items[..i].contains(x))
}

// ---------------------------------------------------------------------------
// Closed-form predicted round budgets
// ---------------------------------------------------------------------------

/// Smallest `T` with `γ^T/(1−γ) ≤ ε`: the direct-propagation round budget
/// implied by the error bound `γ^T/(1−γ) + δ/(1−γ)` at `δ = 0`.
pub fn thm5_round_budget(gamma: f64, epsilon: f64) -> Result<usize> {
    ensure_contract!(
        gamma.is_finite() && 0.0 < gamma && gamma < 1.0,
        "gamma must lie strictly in (0,1), got {gamma}"
    );
    ensure_contract!(
        epsilon.is_finite() && epsilon > 0.0,
        "epsilon must be positive, got {epsilon}"
    );
    let mut t = 0usize;
    let mut bound = 1.0 / (1.0 - gamma);
    while bound > epsilon {
        bound *= gamma;
        t += 1;
    }
    Ok(t)
}

/// Bounded-delay budget: `D` wall-clock rounds per synchronous round, so
/// `D · thm5_round_budget` rounds reach the same `γ^⌊T/D⌋/(1−γ)` bound.
pub fn thm7_round_budget(gamma: f64, epsilon: f64, delay_bound: usize) -> Result<usize> {
    ensure_contract!(delay_bound >= 1, "delay bound D must be >= 1, got {delay_bound}");
    Ok(delay_bound * thm5_round_budget(gamma, epsilon)?)
}

/// Gossip budget from the potential contraction `B_{t+1} ≤ ρ B_t` with
/// `ρ = 1 − (1/8)(1−γ)·gap`: smallest `T` with `ρ^T · B₀ ≤ ε`, where
/// `B₀ = E₀` under common zero initialization (`D₀ = 0`).
pub fn thm8_round_budget(
    gamma: f64,
    epsilon: f64,
    gap: f64,
    initial_error: f64,
) -> Result<usize> {
    ensure_contract!(
        gamma.is_finite() && 0.0 < gamma && gamma < 1.0,
        "gamma must lie strictly in (0,1), got {gamma}"
    );
    ensure_contract!(
        epsilon.is_finite() && epsilon > 0.0,
        "epsilon must be positive, got {epsilon}"
    );
    ensure_contract!(
        gap.is_finite() && 0.0 < gap && gap <= 1.0,
        "spectral gap must lie in (0, 1], got {gap}"
    );
    ensure_contract!(
        initial_error.is_finite() && initial_error >= 0.0,
        "initial error must be finite and >= 0, got {initial_error}"
    );
    let rho = 1.0 - (1.0 - gamma) * gap / 8.0;
    let mut t = 0usize;
    let mut bound = initial_error;
    while bound > epsilon {
        bound *= rho;
        t += 1;
        ensure_contract!(
            t <= 100_000_000,
            "gossip budget exceeds 10^8 rounds at gap {gap}; \
             refusing to predict further"
        );
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Instance files
// ---------------------------------------------------------------------------

/// Write `data` to `dir` as `<stem>.mdp.json` + `<stem>.partition.txt`.
/// Returns the two paths (MDP first).
pub fn write_instance(dir: &Path, stem: &str, data: &ShardedMdp) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let mdp_path = dir.join(format!("{stem}.mdp.json"));
    let partition_path = dir.join(format!("{stem}.partition.txt"));
    fs::write(&mdp_path, data.mdp.to_json()?)?;
    fs::write(&partition_path, data.partition.to_text())?;
    Ok((mdp_path, partition_path))
}

/// Load an instance from its MDP JSON and partition files. Parse failures
/// carry the offending file in their location.
pub fn load_instance(mdp_path: &Path, partition_path: &Path) -> Result<ShardedMdp> {
    let mdp_text = fs::read_to_string(mdp_path)?;
    let mdp = Mdp::from_json(&mdp_text).map_err(|e| locate(e, mdp_path))?;
    let partition_text = fs::read_to_string(partition_path)?;
    let partition =
        Partition::from_text(&partition_text).map_err(|e| locate(e, partition_path))?;
    ShardedMdp::new(mdp, partition)
}

/// Prefix a parse error's location with the file it came from.
fn locate(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}: {location}", path.display()),
            message,
        },
        Error::Json(inner) => Error::Parse {
            location: format!("{}: line {}", path.display(), inner.line()),
            message: inner.to_string(),
        },
        other => other,
    }
}

// ---------------------------------------------------------------------------
// cmd_run
// ---------------------------------------------------------------------------

/// Outcome of a single (topology, algorithm, seed) execution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    /// Topology label.
    pub topology: String,
    /// Protocol.
    pub algorithm: Algorithm,
    /// Instance seed.
    pub seed: u64,
    /// Per-round CSV file name (relative to the output directory).
    pub csv: String,
    /// First round with `sup_error ≤ ε`, if reached within budget.
    pub rounds_to_target: Option<usize>,
    /// The budget ran out before the target.
    pub budget_exceeded: bool,
    /// Rounds actually executed.
    pub rounds_run: usize,
    /// `‖V − V⋆‖∞` after the last round.
    pub final_sup_error: f64,
}

/// Per-(topology, seed) graph quantities measured on the generated instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct GraphRecord {
    topology: String,
    seed: u64,
    diameter: usize,
    gap: f64,
    phi_graph: f64,
    lower_bound: usize,
}

/// Ties every emitted number to its provenance: seed list, config hash,
/// and crate version, plus the full config inline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    /// Crate version that produced the artifacts.
    pub version: String,
    /// SHA-256 of the canonical config TOML.
    pub config_hash: String,
    /// The full sweep configuration.
    pub config: ExperimentConfig,
    /// Seeds executed.
    pub seeds: Vec<u64>,
    /// One record per run, sorted by (topology, algorithm, seed).
    pub runs: Vec<RunRecord>,
}

/// One aggregate cell: `rounds_to_target` over seeds for a (topology,
/// algorithm) pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AggregateCell {
    /// Seeds that hit the target.
    pub converged_seeds: usize,
    /// Seeds that exhausted the budget.
    pub exceeded_seeds: usize,
    /// Mean rounds over converged seeds (absent when none converged).
    pub mean: Option<f64>,
    /// Sample standard deviation over converged seeds.
    pub std: Option<f64>,
    /// Rendered cell, e.g. `"156 ± 0"` or `"> 50000"`.
    pub display: String,
}

/// One summary row (topology across all algorithms).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryRow {
    /// Topology label.
    pub topology: String,
    /// Mean graph-volume conductance over seeds.
    pub phi: f64,
    /// Mean lazy-MH spectral gap over seeds.
    pub gap: f64,
    /// Mean round lower bound `min{diam, L_ε}` over seeds.
    pub lower_bound: f64,
    /// Cells keyed by algorithm label.
    pub cells: BTreeMap<String, AggregateCell>,
}

/// Everything `cmd_run` produced, already written to disk.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    /// Output directory.
    pub dir: PathBuf,
    /// Aggregate rows, one per topology (config order).
    pub summary: Vec<SummaryRow>,
    /// Rendered markdown summary table.
    pub summary_markdown: String,
    /// The manifest, as written to `manifest.json`.
    pub manifest: Manifest,
}

/// Execute the full cross product of `config` and write artifacts to its
/// output directory (or `dir_override`).
///
/// Per-run CSVs are written by concurrent workers keyed by run id — each
/// worker owns its file, so nothing is ever appended concurrently — and
/// all aggregation happens after the join. Budget exhaustion is recorded
/// in the summary (`"> budget"`), never an error.
pub fn cmd_run(config: &ExperimentConfig, dir_override: Option<&Path>) -> Result<RunArtifacts> {
    config.validate()?;
    let dir: PathBuf =
        dir_override.map_or_else(|| PathBuf::from(&config.output_dir), Path::to_path_buf);
    fs::create_dir_all(&dir)?;

    // One work item per (topology, seed): generates the instance once and
    // runs every algorithm on it.
    let items: Vec<(TopologyKind, u64)> = config
        .topologies
        .iter()
        .flat_map(|&kind| config.seeds.iter().map(move |&seed| (kind, seed)))
        .collect();

    let worker = |&(kind, seed): &(TopologyKind, u64)| -> Result<(GraphRecord, Vec<RunRecord>)> {
        let spec = config.spec_for(kind, seed)?;
        let data = gen_topology_mdp(&spec, config.states_per_machine, config.gamma, seed)?;
        let graph = DepGraph::build(&data)?;
        let w = mh_matrix(&graph, Laziness::LazyHalf)?;
        let diameter = graph.diameter();
        let graph_record = GraphRecord {
            topology: spec.label().to_string(),
            seed,
            diameter,
            gap: w.gap(),
            phi_graph: graph.conductance_sweep(ConductanceConvention::GraphVolume)?.phi,
            lower_bound: diameter.min(discounted_radius(config.gamma, config.epsilon)?),
        };
        let noise = DeltaNoise::new(config.delta, seed, config.noise_mode)?;
        let opts = RunOptions::targeting(config.epsilon);
        let mut records = Vec::new();
        for &algorithm in &config.algorithms {
            let report = match algorithm {
                Algorithm::Sdbp => {
                    run_sdbp(&data, &graph, &noise, config.round_budget, &opts)?
                }
                Algorithm::Broadcast => {
                    run_broadcast(&data, &noise, config.round_budget, &opts)?
                }
                Algorithm::GossipFvi => run_gossip_fvi(
                    &data,
                    &graph,
                    &w,
                    &noise,
                    config.round_budget,
                    &opts,
                    &GossipOptions::default(),
                )?,
                Algorithm::AsyncSdbp => run_async_sdbp(
                    &data,
                    &graph,
                    &noise,
                    &config.schedule_for(seed)?,
                    config.round_budget,
                    &opts,
                )?,
                Algorithm::SdbpBandwidth => run_sdbp_bandwidth(
                    &data,
                    &graph,
                    config.bandwidth_bits.expect("validated"),
                    config.round_budget,
                    &opts,
                )?,
            };
            let csv = format!("{}_{}_seed{}.csv", spec.label(), algorithm.label(), seed);
            fs::write(dir.join(&csv), report.to_csv())?;
            records.push(RunRecord {
                topology: spec.label().to_string(),
                algorithm,
                seed,
                csv,
                rounds_to_target: report.rounds_to_target,
                budget_exceeded: report.budget_exceeded,
                rounds_run: report.rounds_run(),
                final_sup_error: report.rows.last().map_or(f64::NAN, |r| r.sup_error),
            });
        }
        Ok((graph_record, records))
    };

    let results: Vec<(GraphRecord, Vec<RunRecord>)> =
        items.par_iter().map(worker).collect::<Result<_>>()?;

    let graph_records: Vec<&GraphRecord> = results.iter().map(|(g, _)| g).collect();
    let mut runs: Vec<RunRecord> = results.iter().flat_map(|(_, r)| r.clone()).collect();
    runs.sort_by(|a, b| {
        (&a.topology, a.algorithm.label(), a.seed).cmp(&(&b.topology, b.algorithm.label(), b.seed))
    });

    let summary = aggregate(config, &graph_records, &runs);
    let summary_markdown = render_summary_markdown(config, &summary);

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash()?,
        config: config.clone(),
        seeds: config.seeds.clone(),
        runs,
    };

    fs::write(dir.join("summary.md"), &summary_markdown)?;
    fs::write(dir.join("summary.json"), to_json_pretty(&summary)?)?;
    fs::write(dir.join("manifest.json"), to_json_pretty(&manifest)?)?;

    Ok(RunArtifacts { dir, summary, summary_markdown, manifest })
}

fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

/// Collapse per-run records into one row per topology.
fn aggregate(
    config: &ExperimentConfig,
    graphs: &[&GraphRecord],
    runs: &[RunRecord],
) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &kind in &config.topologies {
        let label = match kind {
            TopologyKind::Ring => "ring",
            TopologyKind::Grid => "grid",
            TopologyKind::Star => "star",
            TopologyKind::Expander => "expander",
            TopologyKind::Path => "path",
            TopologyKind::Tree => "tree",
        };
        let topo_graphs: Vec<&&GraphRecord> =
            graphs.iter().filter(|g| g.topology == label).collect();
        let mean_of = |f: &dyn Fn(&GraphRecord) -> f64| -> f64 {
            topo_graphs.iter().map(|g| f(g)).sum::<f64>() / topo_graphs.len() as f64
        };
        let mut cells = BTreeMap::new();
        for &algorithm in &config.algorithms {
            let cell_runs: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.topology == label && r.algorithm == algorithm)
                .collect();
            cells.insert(
                algorithm.label().to_string(),
                aggregate_cell(&cell_runs, config.round_budget),
            );
        }
        rows.push(SummaryRow {
            topology: label.to_string(),
            phi: mean_of(&|g| g.phi_graph),
            gap: mean_of(&|g| g.gap),
            lower_bound: mean_of(&|g| g.lower_bound as f64),
            cells,
        });
    }
    rows
}

fn aggregate_cell(cell_runs: &[&RunRecord], budget: usize) -> AggregateCell {
    let converged: Vec<f64> = cell_runs
        .iter()
        .filter_map(|r| r.rounds_to_target)
        .map(|t| t as f64)
        .collect();
    let exceeded = cell_runs.iter().filter(|r| r.budget_exceeded).count();
    let (mean, std) = if converged.is_empty() {
        (None, None)
    } else {
        let n = converged.len() as f64;
        let mean = converged.iter().sum::<f64>() / n;
        let var = if converged.len() > 1 {
            converged.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (Some(mean), Some(var.sqrt()))
    };
    let display = if exceeded == cell_runs.len() {
        format!("> {budget}")
    } else if exceeded > 0 {
        format!("> {budget} ({exceeded}/{} seeds)", cell_runs.len())
    } else {
        format!("{} ± {}", fmt_stat(mean.unwrap()), fmt_stat(std.unwrap()))
    };
    AggregateCell {
        converged_seeds: converged.len(),
        exceeded_seeds: exceeded,
        mean,
        std,
        display,
    }
}

/// Integral statistics print without a decimal point (`156`, not `156.0`).
fn fmt_stat(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.1}")
    }
}

fn render_summary_markdown(config: &ExperimentConfig, rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {} — M = {}, γ = {}, ε = {}, δ = {}, {} seeds, budget {}",
        config.name,
        config.machines,
        config.gamma,
        config.epsilon,
        config.delta,
        config.seeds.len(),
        config.round_budget
    );
    out.push('\n');
    let algs: Vec<&str> = config.algorithms.iter().map(|a| a.label()).collect();
    let _ = writeln!(out, "| Topology | Φ | gap(W) | {} | LB |", algs.join(" | "));
    let _ = writeln!(out, "|---|---|---|{}---|", "---|".repeat(algs.len()));
    for row in rows {
        let cells: Vec<String> =
            algs.iter().map(|a| row.cells[*a].display.clone()).collect();
        let _ = writeln!(
            out,
            "| {} | {:.3} | {:.4} | {} | {} |",
            row.topology,
            row.phi,
            row.gap,
            cells.join(" | "),
            fmt_stat(row.lower_bound)
        );
    }
    out
}

// ---------------------------------------------------------------------------
// cmd_analyze
// ---------------------------------------------------------------------------

/// Graph analysis of one instance, plus predicted round budgets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalyzeReport {
    /// Machine count.
    #[serde(rename = "M")]
    pub m: usize,
    /// Global state count.
    pub n_states: usize,
    /// Support-graph diameter.
    pub diameter: usize,
    /// Conductance, graph-volume normalization.
    pub phi_graph: f64,
    /// Conductance, min-side-fraction normalization.
    pub phi_paper: f64,
    /// Spectral gap of the lazy MH matrix.
    pub gap: f64,
    /// Discount factor (from the MDP).
    pub gamma: f64,
    /// Accuracy the budgets target.
    pub epsilon: f64,
    /// Discounted dependency radius `L_ε`.
    pub l_eps: usize,
    /// `‖V⋆‖∞`, the zero-initialization error `E₀`.
    pub initial_error: f64,
    /// Predicted direct-propagation budget (smallest `T` with
    /// `γ^T/(1−γ) ≤ ε`).
    pub thm5_rounds: usize,
    /// Delay bound used for the asynchronous prediction.
    pub delay_bound: usize,
    /// Predicted bounded-delay budget (`D ×` the direct budget).
    pub thm7_rounds: usize,
    /// Predicted gossip budget from the potential contraction.
    pub thm8_rounds: usize,
    /// Present on hub-dominated graphs where high conductance coexists
    /// with a small spectral gap.
    pub hub_annotation: Option<String>,
}

impl AnalyzeReport {
    /// Human-readable rendering.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "machines            M    = {}", self.m);
        let _ = writeln!(out, "states              n    = {}", self.n_states);
        let _ = writeln!(out, "diameter            diam = {}", self.diameter);
        let _ = writeln!(out, "conductance (vol)   Φ    = {:.4}", self.phi_graph);
        let _ = writeln!(out, "conductance (frac)  Φ'   = {:.4}", self.phi_paper);
        let _ = writeln!(out, "spectral gap        gap  = {:.5}", self.gap);
        let _ = writeln!(out, "discount            γ    = {}", self.gamma);
        let _ = writeln!(out, "target accuracy     ε    = {}", self.epsilon);
        let _ = writeln!(out, "locality radius     L_ε  = {}", self.l_eps);
        let _ = writeln!(out, "initial error       E₀   = {:.4}", self.initial_error);
        let _ = writeln!(out, "predicted rounds, direct propagation : {}", self.thm5_rounds);
        let _ = writeln!(
            out,
            "predicted rounds, delay bound D = {}  : {}",
            self.delay_bound, self.thm7_rounds
        );
        let _ = writeln!(out, "predicted rounds, gossip averaging   : {}", self.thm8_rounds);
        if let Some(note) = &self.hub_annotation {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }
}

/// Analyze a loaded instance: graph quantities and predicted budgets for
/// accuracy `epsilon`, with `delay_bound` feeding the asynchronous
/// prediction.
pub fn cmd_analyze(data: &ShardedMdp, epsilon: f64, delay_bound: usize) -> Result<AnalyzeReport> {
    let graph = DepGraph::build(data)?;
    let summary = GraphSummary::compute(&graph)?;
    let gamma = data.mdp.gamma();
    let initial_error = solve_vstar(&data.mdp, 1e-10)?.values.sup_norm();
    let thm5 = thm5_round_budget(gamma, epsilon)?;
    // Hub-dominated graphs (a star and its relatives) have near-maximal
    // conductance yet a Θ(1/M²) spectral gap: every sweep cut crosses many
    // edges, but the lazy MH hub row spreads its mass over all leaves, so
    // averaging mixes slowly while direct propagation crosses the graph in
    // `diameter` rounds. High Φ therefore predicts nothing about gossip.
    let hub_annotation = (summary.phi_graph >= 0.5 && summary.gap < summary.phi_graph / 10.0)
        .then(|| {
            format!(
                "maximal conductance (Φ = {:.3}) with a small spectral gap (gap = {:.4}): \
                 averaging-based budgets blow up on hub topologies even though direct \
                 propagation needs only ~diameter = {} exchanges",
                summary.phi_graph, summary.gap, summary.diameter
            )
        });
    Ok(AnalyzeReport {
        m: summary.m,
        n_states: data.mdp.n_states(),
        diameter: summary.diameter,
        phi_graph: summary.phi_graph,
        phi_paper: summary.phi_paper,
        gap: summary.gap,
        gamma,
        epsilon,
        l_eps: discounted_radius(gamma, epsilon)?,
        initial_error,
        thm5_rounds: thm5,
        delay_bound,
        thm7_rounds: delay_bound * thm5,
        thm8_rounds: thm8_round_budget(gamma, epsilon, summary.gap, initial_error)?,
        hub_annotation,
    })
}

// ---------------------------------------------------------------------------
// cmd_verify
// ---------------------------------------------------------------------------

/// Which verifier suite to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifySuite {
    /// Locality pairs: transcript/output indistinguishability at radius
    /// `L − 1`, divergence at radius `L`.
    Locality,
    /// Bit lower bounds: transcript enumeration over the chain families.
    Bits,
    /// Asynchronous error bounds and batch light cones.
    Async,
    /// The gossip two-term recursion with the measured per-round `δ_t`.
    GossipRecursion,
    /// All of the above.
    All,
}

/// One named check inside a suite.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyCheck {
    /// Stable check name.
    pub name: String,
    /// Whether the check held.
    pub passed: bool,
    /// One-line evidence (measured values, witnesses).
    pub detail: String,
}

/// Suite outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifySummary {
    /// Suite that ran.
    pub suite: VerifySuite,
    /// Individual checks, in execution order.
    pub checks: Vec<VerifyCheck>,
    /// Conjunction of all checks.
    pub all_passed: bool,
}

impl VerifySummary {
    /// One `pass`/`FAIL` line per check.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for check in &self.checks {
            let _ = writeln!(
                out,
                "[{}] {} — {}",
                if check.passed { "pass" } else { "FAIL" },
                check.name,
                check.detail
            );
        }
        let _ = writeln!(
            out,
            "{}: {}/{} checks passed",
            if self.all_passed { "ok" } else { "FAILED" },
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len()
        );
        out
    }
}

/// Run the named verifier suite at small scale.
pub fn cmd_verify(suite: VerifySuite) -> Result<VerifySummary> {
    let mut checks = Vec::new();
    match suite {
        VerifySuite::Locality => verify_locality(&mut checks)?,
        VerifySuite::Bits => verify_bits(&mut checks)?,
        VerifySuite::Async => verify_async(&mut checks)?,
        VerifySuite::GossipRecursion => verify_gossip_recursion(&mut checks)?,
        VerifySuite::All => {
            verify_locality(&mut checks)?;
            verify_bits(&mut checks)?;
            verify_async(&mut checks)?;
            verify_gossip_recursion(&mut checks)?;
        }
    }
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerifySummary { suite, checks, all_passed })
}

fn verify_locality(checks: &mut Vec<VerifyCheck>) -> Result<()> {
    let gamma = 0.9;
    let noise = DeltaNoise::none();
    for chain_len in 1..=6usize {
        let pair = gen_thm1_pair_with_decoy(chain_len, gamma, true)?;
        for (sweeps, tag) in [
            (LocalSweeps::Single, "single"),
            (LocalSweeps::ToConvergence, "to_convergence"),
        ] {
            let verdict = indistinguishability_check(
                IndistProtocol::Sdbp { local_sweeps: sweeps },
                &pair.zero,
                &pair.rewarded,
                pair.observer_machine,
                chain_len - 1,
                &noise,
            )?;
            checks.push(VerifyCheck {
                name: format!("locality_pair_L{chain_len}_radius{}_{tag}", chain_len - 1),
                passed: verdict.passed && verdict.guaranteed,
                detail: format!(
                    "transcripts and outputs bit-identical through {} rounds \
                     (locality-guaranteed: {})",
                    chain_len - 1,
                    verdict.guaranteed
                ),
            });
        }
        let at_l = indistinguishability_check(
            IndistProtocol::Sdbp { local_sweeps: LocalSweeps::Single },
            &pair.zero,
            &pair.rewarded,
            pair.observer_machine,
            chain_len,
            &noise,
        )?;
        checks.push(VerifyCheck {
            name: format!("locality_pair_L{chain_len}_radius{chain_len}_diverges"),
            passed: !at_l.passed,
            detail: match &at_l.first_divergence {
                Some(d) => format!("divergence observed as required: {d:?}"),
                None => "no divergence at radius L — locality simulator broken".to_string(),
            },
        });
    }
    Ok(())
}

fn verify_bits(checks: &mut Vec<VerifyCheck>) -> Result<()> {
    let exact = verify_bit_lowerbound(3, 4, 0.9, BitProtocol::Sdbp, DEFAULT_VALUE_BITS, None)?;
    checks.push(VerifyCheck {
        name: "bits_chain_L3_m4_all_cuts_saturated".to_string(),
        passed: exact.all_cuts_full && exact.correctness_failures.is_empty(),
        detail: format!(
            "distinct transcripts per cut {:?} over {} instances (floor {} bits, decode \
             failures {})",
            exact.distinct_per_cut,
            exact.n_instances,
            exact.info_floor_bits,
            exact.correctness_failures.len()
        ),
    });
    let capped = verify_bit_lowerbound(
        3,
        3,
        0.9,
        BitProtocol::SdbpBandwidth { bits_per_edge_round: 2 * DEFAULT_VALUE_BITS },
        DEFAULT_VALUE_BITS,
        None,
    )?;
    checks.push(VerifyCheck {
        name: "bits_bandwidth_capped_L3_m3_all_cuts_saturated".to_string(),
        passed: capped.all_cuts_full && capped.correctness_failures.is_empty(),
        detail: format!(
            "cap 2 values/round: distinct transcripts per cut {:?}, decode failures {}",
            capped.distinct_per_cut,
            capped.correctness_failures.len()
        ),
    });
    Ok(())
}

fn verify_async(checks: &mut Vec<VerifyCheck>) -> Result<()> {
    let data = gen_topology_mdp(&TopologySpec::ring(8), 4, 0.9, 1)?;
    let graph = DepGraph::build(&data)?;
    let noise = DeltaNoise::new(0.02, 1, NoiseMode::UniformBounded)?;
    for (schedule, tag) in [
        (DelaySchedule::adversarial(2)?, "adversarial_d2"),
        (DelaySchedule::uniform(4, 1)?, "uniform_d4"),
    ] {
        let report =
            run_async_sdbp(&data, &graph, &noise, &schedule, 80, &RunOptions::default())?;
        let mut params = BoundParams::new(0.9, 0.02);
        params.delay_bound = Some(schedule.d());
        let table = compare_bounds(&report, BoundKind::Thm7Async, &params)?;
        checks.push(VerifyCheck {
            name: format!("async_error_bound_{tag}"),
            passed: table.all_satisfied,
            detail: format!(
                "sup_error ≤ γ^⌊t/D⌋/(1−γ) + δ/(1−γ) for 80 rounds (min slack {:.3e})",
                table.min_slack
            ),
        });
    }
    let schedule = DelaySchedule::adversarial(2)?;
    let run = run_async_sdbp(&data, &graph, &DeltaNoise::none(), &schedule, 8, &RunOptions::default())?;
    for batch in 1..=3usize {
        let verdict =
            batch_lightcone_check(&data, &graph, &DeltaNoise::none(), &schedule, &run, 0, batch)?;
        checks.push(VerifyCheck {
            name: format!("async_batch_lightcone_b{batch}"),
            passed: verdict.passed,
            detail: match verdict.witness {
                None => format!("far rewards cannot reach machine 0 within {batch} batches"),
                Some((state, l, r)) => {
                    format!("cone violated at state {state}: {l} vs {r}")
                }
            },
        });
    }
    let sync = run_sdbp(&data, &graph, &noise, 30, &RunOptions::default())?;
    let d1 = run_async_sdbp(
        &data,
        &graph,
        &noise,
        &DelaySchedule::uniform(1, 9)?,
        30,
        &RunOptions::default(),
    )?;
    let identical = sync
        .final_values
        .as_slice()
        .iter()
        .zip(d1.final_values.as_slice())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    checks.push(VerifyCheck {
        name: "async_d1_equals_synchronous_bitwise".to_string(),
        passed: identical,
        detail: "delay bound 1 reproduces the synchronous trace".to_string(),
    });
    Ok(())
}

fn verify_gossip_recursion(checks: &mut Vec<VerifyCheck>) -> Result<()> {
    let data = gen_topology_mdp(&TopologySpec::ring(16), 4, 0.9, 1)?;
    let graph = DepGraph::build(&data)?;
    let w = mh_matrix(&graph, Laziness::LazyHalf)?;
    let opts = RunOptions::default();
    let gossip_opts = GossipOptions { measure_local_error: true, ..Default::default() };
    let report =
        run_gossip_fvi(&data, &graph, &w, &DeltaNoise::none(), 400, &opts, &gossip_opts)?;
    let initial_error = solve_vstar(&data.mdp, 1e-10)?.values.sup_norm();
    let recursion =
        check_gossip_recursion(&report, 0.9, w.gap(), initial_error, DeltaSeries::Measured)?;
    checks.push(VerifyCheck {
        name: "gossip_recursion_ring16_measured_delta".to_string(),
        passed: recursion.all_e && recursion.all_d && recursion.all_b,
        detail: match &recursion.first_violation {
            None => format!(
                "E/D recursion and potential step hold for all {} rounds",
                recursion.rows.len()
            ),
            Some((round, which)) => format!("first violation at round {round}: {which}"),
        },
    });
    Ok(())
}

// ---------------------------------------------------------------------------
// cmd_gen
// ---------------------------------------------------------------------------

/// Instance family selector for [`cmd_gen`].
#[derive(Clone, Debug)]
pub enum GenFamily {
    /// Random MDP over a machine topology.
    Topology {
        /// Machine-graph shape.
        spec: TopologySpec,
        /// Owned states per machine.
        states_per_machine: usize,
        /// Discount factor.
        gamma: f64,
        /// Instance seed.
        seed: u64,
    },
    /// The length-`L` locality pair (zero and rewarded variants).
    LocalityPair {
        /// Hop distance between observer and reward.
        chain_len: usize,
        /// Discount factor.
        gamma: f64,
        /// Add the identical-dynamics decoy action.
        decoy: bool,
    },
    /// One member of the `m`-chain bit family.
    BitFamily {
        /// Chain length `L`.
        chain_len: usize,
        /// Discount factor.
        gamma: f64,
        /// The encoded bits.
        bits: Vec<bool>,
    },
    /// The federated-tree instance.
    FedTree {
        /// Tree depth.
        depth: usize,
        /// Branching factor.
        branching: usize,
        /// Discount factor.
        gamma: f64,
        /// The encoded bits.
        bits: Vec<bool>,
    },
}

/// Render bits as a `0`/`1` string for file stems (chain 0 first).
fn bit_stem(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Generate the requested family and write each instance as
/// `<stem>.mdp.json` + `<stem>.partition.txt` under `dir`. Returns all
/// written paths.
pub fn cmd_gen(family: &GenFamily, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut emit = |paths: (PathBuf, PathBuf)| {
        written.push(paths.0);
        written.push(paths.1);
    };
    match family {
        GenFamily::Topology { spec, states_per_machine, gamma, seed } => {
            let data = gen_topology_mdp(spec, *states_per_machine, *gamma, *seed)?;
            let stem = format!(
                "{}{}_s{}_seed{}",
                spec.label(),
                spec.m,
                states_per_machine,
                seed
            );
            emit(write_instance(dir, &stem, &data)?);
        }
        GenFamily::LocalityPair { chain_len, gamma, decoy } => {
            let pair = gen_thm1_pair_with_decoy(*chain_len, *gamma, *decoy)?;
            emit(write_instance(dir, &format!("locality_L{chain_len}_zero"), &pair.zero)?);
            emit(write_instance(
                dir,
                &format!("locality_L{chain_len}_rewarded"),
                &pair.rewarded,
            )?);
        }
        GenFamily::BitFamily { chain_len, gamma, bits } => {
            let instance = gen_thm2_family(*chain_len, bits.len(), *gamma, bits)?;
            let stem = format!("bits_L{chain_len}_m{}_b{}", bits.len(), bit_stem(bits));
            emit(write_instance(dir, &stem, &instance.data)?);
        }
        GenFamily::FedTree { depth, branching, gamma, bits } => {
            let instance = gen_fed_tree(*depth, *branching, bits.len(), *gamma, bits)?;
            let stem = format!(
                "fed_tree_d{depth}_k{branching}_m{}_b{}",
                bits.len(),
                bit_stem(bits)
            );
            emit(write_instance(dir, &stem, &instance.data)?);
        }
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Preset names to their TOML documents, compiled into the binary.
const PRESETS: &[(&str, &str)] = &[
    ("smoke", include_str!("../presets/smoke.toml")),
    ("table1-m16", include_str!("../presets/table1_m16.toml")),
    ("table1-m64", include_str!("../presets/table1_m64.toml")),
    ("ring-m64", include_str!("../presets/ring_m64.toml")),
    ("grid-m64", include_str!("../presets/grid_m64.toml")),
    ("star-m64", include_str!("../presets/star_m64.toml")),
    ("expander-m64", include_str!("../presets/expander_m64.toml")),
    ("delta-floor", include_str!("../presets/delta_floor.toml")),
    ("async-m16", include_str!("../presets/async_m16.toml")),
];

/// Names of the built-in presets, in display order.
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(name, _)| *name).collect()
}

/// Load and validate a built-in preset by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let Some((_, text)) = PRESETS.iter().find(|(n, _)| *n == name) else {
        return Err(Error::Config(format!(
            "unknown preset {name:?}; available: {}",
            preset_names().join(", ")
        )));
    };
    ExperimentConfig::from_toml(text)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
