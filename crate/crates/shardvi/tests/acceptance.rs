//! The acceptance gate: nine numbered criteria, one test per criterion
//! (criteria 5 and 9 are split into their independently meaningful
//! clauses). Every test prints a single `criterion N [pass] — …` line;
//! run with `cargo test --test acceptance -- --nocapture --test-threads=1`
//! for the full report in order.
//!
//! Two clauses fail, and are meant to: they assert statements whose honest
//! measurement comes out the other way, and their failure messages carry
//! the measured witnesses. See `criterion_5_recursion_as_stated_with_
//! configured_delta` and `criterion_9_gossip_exceeds_sdbp_under_the_same_
//! noise` for the details.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shardvi::instances::gen_thm1_pair_with_decoy;
use shardvi::{
    batch_lightcone_check, bellman_apply, check_gossip_recursion, compare_bounds,
    gen_thm1_pair, gen_topology_mdp, indistinguishability_check, mh_matrix, run_broadcast,
    run_gossip_fvi, run_sdbp, run_sdbp_bandwidth, solve_vstar, verify_bit_lowerbound,
    BitProtocol, BoundKind, BoundParams, DelaySchedule, DeltaNoise, DeltaSeries, DepGraph,
    GossipOptions, GraphSummary, IndistProtocol, Laziness, LocalSweeps, NoiseMode, RunOptions,
    RunReport, ShardedMdp, TopologySpec, ValueTable,
};

const GAMMA: f64 = 0.95;
const EPSILON: f64 = 0.01;

fn build(spec: &TopologySpec, spm: usize, gamma: f64, seed: u64) -> (ShardedMdp, DepGraph) {
    let data = gen_topology_mdp(spec, spm, gamma, seed).expect("instance generation");
    let graph = DepGraph::build(&data).expect("graph construction");
    (data, graph)
}

fn table1_specs(m: usize, seed: u64) -> [TopologySpec; 4] {
    [
        TopologySpec::ring(m),
        TopologySpec::grid(m),
        TopologySpec::star(m),
        TopologySpec::expander(m, seed),
    ]
}

// -------------------------------------------------------------------------
// 1. Exactness: assembled boundary exchange is centralized value iteration.
// -------------------------------------------------------------------------

#[test]
fn criterion_1_sdbp_matches_centralized_value_iteration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut iterates_checked = 0usize;
    let mut worst = 0.0_f64;
    // A run truncated at T is, by determinism, the first T rounds of any
    // longer run — so checking each prefix's final table checks every round.
    let mut check_instance = |data: &ShardedMdp, graph: &DepGraph, rounds: usize| {
        let mut reference = ValueTable::zeros(data.mdp.n_states());
        for t in 1..=rounds {
            reference = bellman_apply(&data.mdp, &reference, None).expect("bellman step");
            let run = run_sdbp(data, graph, &DeltaNoise::none(), t, &RunOptions::default())
                .expect("sdbp run");
            let dist = run.final_values.sup_dist(&reference);
            assert!(
                dist <= 1e-12,
                "criterion 1 [FAIL] — assembled iterate differs from the \
                 centralized one by {dist:.3e} at round {t} (M = {})",
                data.partition.n_machines()
            );
            worst = worst.max(dist);
            iterates_checked += 1;
        }
    };
    for i in 0..100u64 {
        let spec = match i % 4 {
            0 => TopologySpec::ring(rng.gen_range(3..=16)),
            1 => TopologySpec::grid(*[4usize, 9, 16].choose(&mut rng).unwrap()),
            2 => TopologySpec::star(rng.gen_range(3..=16)),
            _ => TopologySpec::expander(rng.gen_range(5..=16), 1000 + i),
        };
        let spm = rng.gen_range(1..=(128 / spec.m).min(8));
        let gamma = rng.gen_range(0.5..0.98);
        let (data, graph) = build(&spec, spm, gamma, i);
        assert!(data.mdp.n_states() <= 128 && spec.m <= 16);
        check_instance(&data, &graph, 12);
    }
    for spec in table1_specs(16, 1) {
        let (data, graph) = build(&spec, 8, GAMMA, 1);
        check_instance(&data, &graph, 25);
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "criterion 1 [FAIL] — exactness matrix took {elapsed:.0}s (≥ 60s)");
    println!(
        "criterion 1 [pass] — {iterates_checked} per-round iterates over 100 random + 4 \
         canonical instances match centralized value iteration (worst gap {worst:.2e}, \
         {elapsed:.1}s)"
    );
}

// -------------------------------------------------------------------------
// 2. Topology independence of boundary exchange.
// -------------------------------------------------------------------------

#[test]
fn criterion_2_sdbp_and_broadcast_agree_on_rounds() {
    let opts = RunOptions::targeting(EPSILON);
    let mut pairs = 0usize;
    for m in [16usize, 64] {
        for seed in 1..=5u64 {
            for spec in table1_specs(m, seed) {
                let (data, graph) = build(&spec, 4, GAMMA, seed);
                let sdbp = run_sdbp(&data, &graph, &DeltaNoise::none(), 2000, &opts)
                    .expect("sdbp run");
                let broadcast = run_broadcast(&data, &DeltaNoise::none(), 2000, &opts)
                    .expect("broadcast run");
                let (a, b) = (sdbp.rounds_to_target, broadcast.rounds_to_target);
                assert!(
                    a.is_some() && a == b,
                    "criterion 2 [FAIL] — {} M={m} seed {seed}: sdbp {a:?} vs broadcast {b:?}",
                    spec.label()
                );
                pairs += 1;
            }
        }
    }
    println!(
        "criterion 2 [pass] — rounds_to_target(sdbp) == rounds_to_target(broadcast) on all \
         {pairs} (topology, M, seed) cells at γ = {GAMMA}, ε = {EPSILON}"
    );
}

// -------------------------------------------------------------------------
// 3. Spectral gaps and conductance of the canonical machine graphs.
// -------------------------------------------------------------------------

#[test]
fn criterion_3_spectral_gaps_and_conductance() {
    let summary = |spec: &TopologySpec| {
        let (_, graph) = build(spec, 1, GAMMA, 1);
        GraphSummary::compute(&graph).expect("graph summary")
    };
    let ring = summary(&TopologySpec::ring(64));
    let grid = summary(&TopologySpec::grid(64));
    let star = summary(&TopologySpec::star(64));
    let checks: [(&str, f64, f64, f64); 5] = [
        ("ring gap", ring.gap, 0.00241, 1e-4),
        ("star gap", star.gap, 0.00794, 1e-4),
        ("grid gap", grid.gap, 0.0206, 0.05 * 0.0206),
        ("ring Φ", ring.phi_graph, 0.031, 0.002),
        ("star Φ", star.phi_graph, 1.0, 0.0),
    ];
    for (name, got, want, tol) in checks {
        assert!(
            (got - want).abs() <= tol,
            "criterion 3 [FAIL] — {name} = {got:.6}, expected {want} ± {tol}"
        );
    }
    println!(
        "criterion 3 [pass] — M = 64 lazy-walk gaps ring {:.6} / star {:.6} / grid {:.6} and \
         conductances ring {:.3} / star {:.3} within pinned tolerances",
        ring.gap, star.gap, grid.gap, ring.phi_graph, star.phi_graph
    );
}

// -------------------------------------------------------------------------
// 4. Gossip round ordering across topologies; star exhausts its budget.
// -------------------------------------------------------------------------

fn gossip_rounds(spec: &TopologySpec, seed: u64, budget: usize) -> Option<usize> {
    let (data, graph) = build(spec, 4, GAMMA, seed);
    let w = mh_matrix(&graph, Laziness::LazyHalf).expect("mixing matrix");
    let report = run_gossip_fvi(
        &data,
        &graph,
        &w,
        &DeltaNoise::none(),
        budget,
        &RunOptions::targeting(EPSILON),
        &GossipOptions::default(),
    )
    .expect("gossip run");
    report.rounds_to_target
}

#[test]
fn criterion_4_gossip_ordering_and_star_budget() {
    // M = 16: the ordering must hold on seed means and the star must still
    // converge inside its budget. Must finish well inside five minutes.
    let start = Instant::now();
    let mean = |spec: &TopologySpec| -> f64 {
        (1..=5u64)
            .map(|seed| {
                gossip_rounds(spec, seed, 20_000).expect("M = 16 runs converge") as f64
            })
            .sum::<f64>()
            / 5.0
    };
    let (expander, grid, ring) = (
        mean(&TopologySpec::expander(16, 1)),
        mean(&TopologySpec::grid(16)),
        mean(&TopologySpec::ring(16)),
    );
    let star: Vec<usize> = (1..=5u64)
        .map(|seed| gossip_rounds(&TopologySpec::star(16), seed, 20_000).expect("star converges"))
        .collect();
    assert!(
        expander < grid && grid < ring,
        "criterion 4 [FAIL] — M = 16 mean ordering broken: expander {expander:.0}, \
         grid {grid:.0}, ring {ring:.0}"
    );
    let small = start.elapsed().as_secs_f64();
    assert!(small < 300.0, "criterion 4 [FAIL] — M = 16 matrix took {small:.0}s (≥ 5 min)");

    // M = 64: strict per-seed ordering, star exceeds 50,000 rounds.
    for seed in 1..=5u64 {
        let expander = gossip_rounds(&TopologySpec::expander(64, seed), seed, 50_000);
        let grid = gossip_rounds(&TopologySpec::grid(64), seed, 50_000);
        let ring = gossip_rounds(&TopologySpec::ring(64), seed, 50_000);
        let star = gossip_rounds(&TopologySpec::star(64), seed, 50_000);
        assert!(
            expander.unwrap() < grid.unwrap() && grid.unwrap() < ring.unwrap(),
            "criterion 4 [FAIL] — M = 64 seed {seed} ordering broken: \
             expander {expander:?}, grid {grid:?}, ring {ring:?}"
        );
        assert!(
            star.is_none(),
            "criterion 4 [FAIL] — M = 64 seed {seed}: star converged in {star:?} \
             rounds, expected budget exhaustion"
        );
    }
    println!(
        "criterion 4 [pass] — gossip ordering expander < grid < ring (M = 16 means \
         {expander:.0}/{grid:.0}/{ring:.0} in {small:.0}s, star means {:.0}; M = 64 strict \
         per-seed) and star exhausts the 50,000 budget on every M = 64 seed ({:.0}s total)",
        star.iter().sum::<usize>() as f64 / 5.0,
        start.elapsed().as_secs_f64()
    );
}

// -------------------------------------------------------------------------
// 5. The two-dimensional error/disagreement recursion on gossip runs.
// -------------------------------------------------------------------------

fn measured_gossip_run(spec: &TopologySpec, budget: usize) -> (RunReport, f64, f64) {
    let (data, graph) = build(spec, 4, 0.9, 1);
    let w = mh_matrix(&graph, Laziness::LazyHalf).expect("mixing matrix");
    let report = run_gossip_fvi(
        &data,
        &graph,
        &w,
        &DeltaNoise::none(),
        budget,
        &RunOptions::targeting(EPSILON),
        &GossipOptions { measure_local_error: true, ..Default::default() },
    )
    .expect("gossip run");
    let initial_error = solve_vstar(&data.mdp, 1e-10).expect("oracle").values.sup_norm();
    (report, w.gap(), initial_error)
}

#[test]
fn criterion_5_recursion_holds_with_measured_local_error() {
    // The sound reading: feed the recursion the per-round measured
    // local-step inconsistency δ_t. Every inequality holds on every round
    // of every matrix topology.
    let mut rounds_checked = 0usize;
    for spec in table1_specs(16, 1) {
        let (report, gap, e0) = measured_gossip_run(&spec, 20_000);
        let rec = check_gossip_recursion(&report, 0.9, gap, e0, DeltaSeries::Measured)
            .expect("recursion check");
        assert!(
            rec.all_e && rec.all_d && rec.all_b,
            "criterion 5 [FAIL] — measured-δ recursion violated on {} at {:?}",
            spec.label(),
            rec.first_violation
        );
        rounds_checked += rec.rows.len();
    }
    println!(
        "criterion 5 [pass] — E/D recursion and potential step hold with measured δ_t on \
         all four topologies, {rounds_checked} round-inequalities checked"
    );
}

#[test]
fn criterion_5_recursion_as_stated_with_configured_delta() {
    // The recursion as literally stated, with δ = the configured noise
    // magnitude (zero here). This fails — and the failure is real, not a
    // bug: an owned-slice local step passes every non-owned coordinate
    // through unchanged, so its effective Bellman inconsistency is *not*
    // uniformly bounded by the configured δ. The measured-δ companion test
    // shows the recursion itself is sound once δ_t is instrumented.
    let (report, gap, e0) = measured_gossip_run(&TopologySpec::ring(16), 20_000);
    let measured_delta_1 = report.measured_local_error.as_ref().expect("instrumented")[0];
    let rec = check_gossip_recursion(&report, 0.9, gap, e0, DeltaSeries::Configured(0.0))
        .expect("recursion check");
    assert!(
        rec.all_e && rec.all_d && rec.all_b,
        "criterion 5 [FAIL] — configured-δ recursion is violated at {:?}: with δ = 0 the \
         bound expects an exact Bellman step, but the owned-slice step's measured \
         inconsistency is already δ_1 = {measured_delta_1:.3} on the ring (E_0 = {e0:.3}). \
         The companion measured-δ test passes on every topology.",
        rec.first_violation
    );
    println!("criterion 5 [pass] — configured-δ recursion holds on the matrix");
}

// -------------------------------------------------------------------------
// 6. Locality: L − 1 rounds reveal nothing, round L reveals exactly γ^L.
// -------------------------------------------------------------------------

#[test]
fn criterion_6_locality_radius_is_tight() {
    let gamma = 0.9_f64;
    let noise = DeltaNoise::none();
    for chain_len in 1..=8usize {
        for decoy in [false, true] {
            let pair = if decoy {
                gen_thm1_pair_with_decoy(chain_len, gamma, true).expect("pair")
            } else {
                gen_thm1_pair(chain_len, gamma).expect("pair")
            };
            for sweeps in [LocalSweeps::Single, LocalSweeps::ToConvergence] {
                let verdict = indistinguishability_check(
                    IndistProtocol::Sdbp { local_sweeps: sweeps },
                    &pair.zero,
                    &pair.rewarded,
                    pair.observer_machine,
                    chain_len - 1,
                    &noise,
                )
                .expect("check");
                assert!(
                    verdict.passed && verdict.guaranteed,
                    "criterion 6 [FAIL] — L = {chain_len}, decoy = {decoy}, {sweeps:?}: \
                     replays must be indistinguishable through round L − 1, diverged at \
                     {:?}",
                    verdict.first_divergence
                );
            }
            let at_l = indistinguishability_check(
                IndistProtocol::Sdbp { local_sweeps: LocalSweeps::ToConvergence },
                &pair.zero,
                &pair.rewarded,
                pair.observer_machine,
                chain_len,
                &noise,
            )
            .expect("check");
            assert!(!at_l.passed, "criterion 6 [FAIL] — round L must reveal the reward");
            let gap = at_l
                .output_left
                .iter()
                .zip(&at_l.output_right)
                .map(|(l, r)| (l - r).abs())
                .fold(0.0_f64, f64::max);
            let expect = gamma.powi(chain_len as i32);
            assert!(
                (gap - expect).abs() <= 1e-9,
                "criterion 6 [FAIL] — L = {chain_len}, decoy = {decoy}: output gap {gap:.12} \
                 vs γ^L = {expect:.12}"
            );
        }
    }
    println!(
        "criterion 6 [pass] — all pairs L ∈ 1..=8 (with and without decoy rewards, single \
         and to-convergence local compute) indistinguishable at R = L − 1 and split by \
         exactly γ^L ± 1e-9 at R = L"
    );
}

// -------------------------------------------------------------------------
// 7. Bit bounds: every cut carries all 2^m transcripts; capped rounds stay
//    within factor two of max{L, ⌈m·w/B⌉}.
// -------------------------------------------------------------------------

#[test]
fn criterion_7_transcript_counting_and_bandwidth_factor() {
    let start = Instant::now();
    let gamma = 0.9;
    let width = 64u64;
    let mut families = 0usize;
    let mut capped_runs = 0usize;
    for chain_len in 2..=4usize {
        for m in 1..=6usize {
            let report =
                verify_bit_lowerbound(chain_len, m, gamma, BitProtocol::Sdbp, width, None)
                    .expect("enumeration");
            assert!(
                report.distinct_per_cut.iter().all(|&c| c == 1 << m)
                    && report.correctness_failures.is_empty(),
                "criterion 7 [FAIL] — L = {chain_len}, m = {m}: distinct per cut \
                 {:?}, expected {} at every cut (decode failures: {:?})",
                report.distinct_per_cut,
                1 << m,
                report.correctness_failures
            );
            families += 1;
            let instance = shardvi::gen_thm2_family(chain_len, m, gamma, &vec![true; m])
                .expect("instance");
            let graph = DepGraph::build(&instance.data).expect("graph");
            let opts = RunOptions {
                local_sweeps: LocalSweeps::ToConvergence,
                ..RunOptions::default()
            };
            for c in [1usize, 2, m] {
                let run = run_sdbp_bandwidth(
                    &instance.data,
                    &graph,
                    c as u64 * width,
                    200,
                    &opts,
                )
                .expect("capped run");
                let rounds = run.rounds_to_exact.expect("capped run converges");
                let bound = 2 * chain_len.max(m.div_ceil(c));
                assert!(
                    rounds <= bound,
                    "criterion 7 [FAIL] — L = {chain_len}, m = {m}, cap {c} values: \
                     {rounds} rounds exceeds 2·max{{L, ⌈m·w/B⌉}} = {bound}"
                );
                capped_runs += 1;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "criterion 7 [FAIL] — enumeration took {elapsed:.0}s (≥ 60s)");
    println!(
        "criterion 7 [pass] — {families} families saturate 2^m transcripts at every cut; \
         {capped_runs} bandwidth-capped decodes stay within factor 2 of \
         max{{L, ⌈m·w/B⌉}} ({elapsed:.1}s)"
    );
}

// -------------------------------------------------------------------------
// 8. Bounded delay: stretched envelope, batch light cone, D = 1 identity.
// -------------------------------------------------------------------------

#[test]
fn criterion_8_bounded_delay_envelope_lightcone_and_d1_identity() {
    let gamma = 0.9;
    let delta = 0.02;
    let (data, graph) = build(&TopologySpec::ring(16), 4, gamma, 1);
    let noise = DeltaNoise::new(delta, 1, NoiseMode::UniformBounded).expect("noise");
    let mut envelopes = 0usize;
    for d in [1usize, 2, 4] {
        for schedule in
            [DelaySchedule::adversarial(d).unwrap(), DelaySchedule::uniform(d, 7).unwrap()]
        {
            let report = shardvi::run_async_sdbp(
                &data,
                &graph,
                &noise,
                &schedule,
                80,
                &RunOptions::default(),
            )
            .expect("async run");
            let mut params = BoundParams::new(gamma, delta);
            params.delay_bound = Some(d);
            let table =
                compare_bounds(&report, BoundKind::Thm7Async, &params).expect("bound table");
            assert!(
                table.all_satisfied,
                "criterion 8 [FAIL] — D = {d}, {:?}: sup error escaped \
                 γ^⌊t/D⌋/(1−γ) + δ/(1−γ) (min slack {:.3e})",
                schedule.mode(),
                table.min_slack
            );
            envelopes += 1;
        }
    }

    let schedule = DelaySchedule::adversarial(2).unwrap();
    let clean = shardvi::run_async_sdbp(
        &data,
        &graph,
        &DeltaNoise::none(),
        &schedule,
        12,
        &RunOptions::default(),
    )
    .expect("async run");
    for b in 1..=5usize {
        let verdict =
            batch_lightcone_check(&data, &graph, &DeltaNoise::none(), &schedule, &clean, 0, b)
                .expect("light cone check");
        assert!(
            verdict.passed,
            "criterion 8 [FAIL] — batch light cone violated at b = {b}: {:?}",
            verdict.witness
        );
    }

    let sync = run_sdbp(&data, &graph, &noise, 30, &RunOptions::default()).expect("sync run");
    let d1 = shardvi::run_async_sdbp(
        &data,
        &graph,
        &noise,
        &DelaySchedule::uniform(1, 9).unwrap(),
        30,
        &RunOptions::default(),
    )
    .expect("async run");
    let tables_match = sync
        .final_values
        .as_slice()
        .iter()
        .zip(d1.final_values.as_slice())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    let rows_match = sync
        .rows
        .iter()
        .zip(&d1.rows)
        .all(|(a, b)| a.sup_error.to_bits() == b.sup_error.to_bits());
    assert!(
        tables_match && rows_match && sync.rows.len() == d1.rows.len(),
        "criterion 8 [FAIL] — D = 1 trace differs from the synchronous one"
    );
    println!(
        "criterion 8 [pass] — {envelopes} delay runs inside the stretched envelope, batch \
         light cone holds for b ≤ 5, and D = 1 replays the synchronous trace bitwise"
    );
}

// -------------------------------------------------------------------------
// 9. The δ/(1−γ) floor under persistent worst-case-sign noise.
// -------------------------------------------------------------------------

fn floor_runs() -> (f64, f64) {
    let (data, graph) = build(&TopologySpec::ring(16), 4, 0.9, 1);
    let noise = DeltaNoise::new(0.05, 1, NoiseMode::WorstCaseSign).expect("noise");
    let sdbp = run_sdbp(&data, &graph, &noise, 4000, &RunOptions::default()).expect("sdbp");
    let w = mh_matrix(&graph, Laziness::LazyHalf).expect("mixing matrix");
    let gossip = run_gossip_fvi(
        &data,
        &graph,
        &w,
        &noise,
        4000,
        &RunOptions::default(),
        &GossipOptions::default(),
    )
    .expect("gossip");
    (sdbp.rows.last().unwrap().sup_error, gossip.rows.last().unwrap().sup_error)
}

#[test]
fn criterion_9_worst_case_noise_pins_the_sdbp_floor() {
    let (sdbp, _) = floor_runs();
    // δ/(1−γ) = 0.5; the V⋆ oracle itself carries ~1e-10 uncertainty.
    assert!(
        sdbp <= 0.5 + 1e-9 && sdbp > 0.01,
        "criterion 9 [FAIL] — sdbp steady-state sup error {sdbp:.12} outside (0.01, 0.5]"
    );
    println!(
        "criterion 9 [pass] — persistent sign noise pins sdbp at {sdbp:.12} \
         (= δ/(1−γ) to oracle precision, and far above 0.01: the noise binds)"
    );
}

#[test]
fn criterion_9_gossip_exceeds_sdbp_under_the_same_noise() {
    // This is the criterion's second clause, asserted as stated — and it
    // fails, for a structural reason the failure message documents: under
    // persistent owner-side perturbation the noisy fixed points of the two
    // protocols *coincide* (any all-equal-tables gossip fixed point must
    // satisfy the same per-owner perturbed Bellman equation as the
    // boundary-exchange one), so gossip converges up to the same floor from
    // below and can never sit strictly above it. Redrawing the noise each
    // round flips the comparison the other way: averaging then filters it.
    let (sdbp, gossip) = floor_runs();
    assert!(
        gossip > sdbp,
        "criterion 9 [FAIL] — gossip steady-state error {gossip:.12} does not exceed \
         sdbp's {sdbp:.12}: both protocols share the same noisy fixed point at \
         δ/(1−γ), which gossip approaches from below"
    );
    println!("criterion 9 [pass] — gossip steady-state error {gossip:.12} exceeds sdbp");
}
