//! Bounded staleness: delays up to `D` slow convergence by at most a factor
//! of `D`, and the per-round error never escapes the stretched envelope
//! `γ^⌊t/D⌋/(1−γ) + δ/(1−γ)`.
//!
//! The adversarial scheduler holds every message for the full `D` rounds —
//! the worst case the envelope is written against — while uniform random
//! delays land well inside it. A delay bound of 1 *is* the synchronous
//! protocol: the traces agree bit for bit.

use shardvi::{
    compare_bounds, gen_topology_mdp, run_async_sdbp, run_sdbp, BoundKind, BoundParams,
    DelaySchedule, DeltaNoise, DepGraph, NoiseMode, RunOptions, TopologySpec,
};

fn main() -> shardvi::Result<()> {
    let (gamma, epsilon) = (0.95_f64, 0.01_f64);
    let data = gen_topology_mdp(&TopologySpec::ring(16), 4, gamma, 1)?;
    let graph = DepGraph::build(&data)?;
    let opts = RunOptions::targeting(epsilon);
    let budget = 2000;

    let sync = run_sdbp(&data, &graph, &DeltaNoise::none(), budget, &opts)?;
    let sync_rounds = sync.rounds_to_target.expect("noiseless run reaches ε");
    println!("ring, M = 16, γ = {gamma}, ε = {epsilon}");
    println!("synchronous rounds to ε: {sync_rounds}\n");

    println!(
        "{:>3} {:>18} {:>14} {:>16}",
        "D", "adversarial-max", "uniform", "predicted budget"
    );
    for d in [1usize, 2, 4] {
        let adversarial = run_async_sdbp(
            &data,
            &graph,
            &DeltaNoise::none(),
            &DelaySchedule::adversarial(d)?,
            budget,
            &opts,
        )?;
        let uniform = run_async_sdbp(
            &data,
            &graph,
            &DeltaNoise::none(),
            &DelaySchedule::uniform(d, 7)?,
            budget,
            &opts,
        )?;
        let adv_rounds = adversarial.rounds_to_target.expect("bounded delay still converges");
        let uni_rounds = uniform.rounds_to_target.expect("bounded delay still converges");
        // Smallest T with γ^⌊T/D⌋/(1−γ) ≤ ε — the guaranteed budget.
        let budget_rounds = shardvi::harness::thm7_round_budget(gamma, epsilon, d)?;
        assert!(adv_rounds >= sync_rounds, "delays cannot help");
        assert!(adv_rounds <= budget_rounds, "stretch stays within the D-fold envelope");
        assert!(uni_rounds <= adv_rounds, "the adversary is the worst scheduler here");
        println!("{:>3} {:>18} {:>14} {:>16}", d, adv_rounds, uni_rounds, budget_rounds);
        if d == 1 {
            let identical = sync
                .final_values
                .as_slice()
                .iter()
                .zip(uniform.final_values.as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(identical, "D = 1 must replay the synchronous trace");
        }
    }
    println!("\nD = 1 reproduces the synchronous trace bit for bit.");

    // Under persistent noise the same envelope holds round by round.
    let delta = 0.02;
    let noise = DeltaNoise::new(delta, 1, NoiseMode::UniformBounded)?;
    println!("\nper-round envelope with δ = {delta} over 80 rounds:");
    for (schedule, label) in [
        (DelaySchedule::adversarial(2)?, "adversarial D=2"),
        (DelaySchedule::uniform(4, 7)?, "uniform D=4    "),
    ] {
        let report =
            run_async_sdbp(&data, &graph, &noise, &schedule, 80, &RunOptions::default())?;
        let mut params = BoundParams::new(gamma, delta);
        params.delay_bound = Some(schedule.d());
        let table = compare_bounds(&report, BoundKind::Thm7Async, &params)?;
        assert!(table.all_satisfied, "error escaped the stretched envelope");
        println!(
            "  {label}  all 80 rounds inside the bound, min slack {:.3e}",
            table.min_slack
        );
    }
    Ok(())
}
