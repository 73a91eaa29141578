//! What governs gossip speed — and what doesn't.
//!
//! For boundary-exchange protocols the machine-graph *diameter* sets the
//! clock. For gossip averaging it is the *spectral gap* of the lazy
//! Metropolis–Hastings walk, and conductance is not a reliable proxy: the
//! star has the best possible conductance and the worst gap, because every
//! averaging path is forced through one hub whose MH weights are tiny.
//!
//! The last section checks the closed-form gossip budget (the smallest `T`
//! with `ρ^T·E₀ ≤ ε`, `ρ = 1 − (1−γ)·gap/8`) against a measured run: the
//! prediction is sound but loose, as potential-function constants are.

use shardvi::harness::thm8_round_budget;
use shardvi::{
    gen_topology_mdp, mh_matrix, run_gossip_fvi, solve_vstar, DeltaNoise, DepGraph,
    GossipOptions, GraphSummary, Laziness, RunOptions, TopologySpec,
};

fn main() -> shardvi::Result<()> {
    let (gamma, epsilon) = (0.95_f64, 0.01_f64);
    println!("machine graphs at M = 64 (γ = {gamma}, ε = {epsilon}):\n");
    println!(
        "{:>9} {:>5} {:>10} {:>7} {:>7} {:>12}",
        "topology", "diam", "gap(W)", "Φ_vol", "Φ_frac", "thm8 budget"
    );
    let specs = [
        TopologySpec::ring(64),
        TopologySpec::grid(64),
        TopologySpec::star(64),
        TopologySpec::expander(64, 1),
    ];
    for spec in &specs {
        let data = gen_topology_mdp(spec, 2, gamma, 1)?;
        let graph = DepGraph::build(&data)?;
        let summary = GraphSummary::compute(&graph)?;
        let initial_error = solve_vstar(&data.mdp, 1e-10)?.values.sup_norm();
        let budget = thm8_round_budget(gamma, epsilon, summary.gap, initial_error)?;
        println!(
            "{:>9} {:>5} {:>10.6} {:>7.3} {:>7.3} {:>12}",
            spec.label(),
            summary.diameter,
            summary.gap,
            summary.phi_graph,
            summary.phi_paper,
            budget
        );
        match spec.label() {
            "ring" => assert!((summary.gap - 2.407637e-3).abs() < 1e-6),
            "grid" => assert!((summary.gap - 2.055621e-2).abs() < 1e-6),
            "star" => {
                assert!((summary.gap - 7.936508e-3).abs() < 1e-6);
                assert!((summary.phi_graph - 1.0).abs() < 1e-12, "star cut is total");
            }
            _ => {}
        }
    }
    println!("\nThe star: maximal conductance, near-minimal gap — hub averaging is slow.");

    println!("\npredicted vs measured gossip rounds, ring M = 16:");
    let data = gen_topology_mdp(&TopologySpec::ring(16), 4, gamma, 1)?;
    let graph = DepGraph::build(&data)?;
    let summary = GraphSummary::compute(&graph)?;
    let initial_error = solve_vstar(&data.mdp, 1e-10)?.values.sup_norm();
    let predicted = thm8_round_budget(gamma, epsilon, summary.gap, initial_error)?;
    let w = mh_matrix(&graph, Laziness::LazyHalf)?;
    let report = run_gossip_fvi(
        &data,
        &graph,
        &w,
        &DeltaNoise::none(),
        predicted,
        &RunOptions::targeting(epsilon),
        &GossipOptions::default(),
    )?;
    let measured = report.rounds_to_target.expect("gossip reaches ε inside its own budget");
    assert!(measured <= predicted, "the budget must be an upper bound");
    println!(
        "  gap {:.4}  predicted {predicted}  measured {measured}  (bound is ~{:.0}× loose)",
        summary.gap,
        predicted as f64 / measured as f64
    );
    Ok(())
}
