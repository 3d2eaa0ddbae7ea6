//! Acceptance suite: one PASS/FAIL line per criterion, then a single
//! assertion that all of them passed.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::DMatrix;
use timedreach::grid::{value_iterate, GridOutcome, GridSpec};
use timedreach::markov::{dtmc_reachability, transient_matrix, Dtmc};
use timedreach::muller::{
    check_muller, qualitative_check, MullerEngine, MullerMode, QualitativeMode,
};
use timedreach::region::{embedded_jump_probability, MassPiece};
use timedreach::sim::{simulate_acceptance, SimConfig};
use timedreach::single_clock::solve_single_clock;
use timedreach::timed::validate_dta;
use timedreach::{build_product, models, ClockValuation, Ctmc, Dmta, Dta, LocId, RegionGraph};

const MULLER_TOL: f64 = 1e-6;
const MULLER_TIME: Duration = Duration::from_secs(1);
const EMBEDDED_JUMP_TOL: f64 = 1e-12;
const CLOSED_FORM_TOL: f64 = 1e-9;
const UNTIMED_TOL: f64 = 1e-9;
const UNTIMED_MODELS: u64 = 25;
const CROSS_ENGINE_TOL: f64 = 5e-3;
const CROSS_GRID_STEP: f64 = 0.005;
const SINGLE_CLOCK_TIME: Duration = Duration::from_secs(1);
const GRID_TIME: Duration = Duration::from_secs(30);
const MC_TIME: Duration = Duration::from_secs(60);
const MC_SAMPLES: u64 = 1_000_000;
const MC_SEED: u64 = 20_240_601;
const ROBOT_TOL: f64 = 1e-2;
const ROBOT_GRID_STEP: f64 = 0.01;
const POSITIVE_THRESHOLD: f64 = 1e-9;
const ALMOST_SURE_THRESHOLD: f64 = 1.0 - 1e-6;
const SEMIGROUP_TOL: f64 = 1e-6;
const FD_STEP: f64 = 1e-4;
const TRANSIENT_CHAINS: u64 = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Grid run on `C x A` that keeps the raw outcome for the fixpoint checks.
fn grid_run(c: &Ctmc, a: &Dta, step: f64) -> GridOutcome {
    let m = build_product(c, &validate_dta(a).unwrap().dta).unwrap();
    let g = RegionGraph::simplified(&m).unwrap();
    value_iterate(&m, &g, &g.accepting(), &GridSpec::with_step(step)).unwrap()
}

fn muller_example() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for r0 in [0.5, 1.0, 2.0] {
        let c = models::two_cycle_chain(r0, 2.0, 3.0, 4.0);
        let start = Instant::now();
        let r = check_muller(
            &c,
            &models::two_cycle_muller_dta(),
            &MullerEngine::SingleClock { epsilon: 1e-12 },
            MullerMode::Exact,
        )
        .unwrap();
        slowest = slowest.max(start.elapsed());
        worst = worst.max((r.probability - (1.0 - (-r0).exp())).abs());
    }
    outcome(
        worst <= MULLER_TOL && slowest < MULLER_TIME,
        format!("max error {worst:.2e}, slowest run {slowest:.2?}"),
    )
}

fn embedded_jump() -> Outcome {
    let p = embedded_jump_probability(
        2.0,
        5.0,
        &[MassPiece {
            until: 2.0,
            mass: 1.0 / 3.0,
        }],
        1.0,
    );
    let err = (p - (1.0 / 3.0 + 2.0 / 3.0 * (-10.0f64).exp())).abs();
    outcome(err <= EMBEDDED_JUMP_TOL, format!("error {err:.2e}"))
}

fn one_transition() -> Outcome {
    let mut worst: f64 = 0.0;
    for (rate, bound) in [(1.0, 1), (2.0, 1), (1.0, 3)] {
        let (c, a) = models::one_transition(rate, bound);
        let p = solve_single_clock(&c, &a, 1e-13).unwrap().probability;
        worst = worst.max((p - (1.0 - (-rate * bound as f64).exp())).abs());
    }
    outcome(worst <= CLOSED_FORM_TOL, format!("max error {worst:.2e}"))
}

/// Embedded DTMC of a guard-free product, with a reject sink for jumps
/// that find no edge.
fn embedded_product(m: &Dmta) -> Dtmc {
    let n = m.num_locations();
    let mut p = DMatrix::zeros(n + 1, n + 1);
    p[(n, n)] = 1.0;
    for l in 0..n {
        let edges: Vec<_> = m.outgoing(LocId(l)).collect();
        if m.is_accepting(LocId(l)) || m.rate(LocId(l)) == 0.0 {
            p[(l, l)] = 1.0;
        } else if edges.is_empty() {
            p[(l, n)] = 1.0;
        } else {
            assert_eq!(edges.len(), 1, "guard-free automaton is deterministic");
            for &(t, q) in &edges[0].targets {
                p[(l, t.0)] += q;
            }
        }
    }
    Dtmc::new(p, m.initial().0).unwrap()
}

fn untimed_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut nonzero = 0;
    for seed in 0..UNTIMED_MODELS {
        let mut r = rng(seed);
        let c = random_chain(&mut r, 10, &["a", "b", "c"]);
        let a = random_guard_free_dta(&mut r, &["a", "b", "c"]);
        let exact = solve_single_clock(&c, &a, 1e-13).unwrap().probability;
        let m = build_product(&c, &validate_dta(&a).unwrap().dta).unwrap();
        let targets: Vec<usize> = (0..m.num_locations())
            .filter(|&l| m.is_accepting(LocId(l)))
            .collect();
        let reach = if targets.is_empty() {
            0.0
        } else {
            let d = embedded_product(&m);
            dtmc_reachability(&d, &targets).unwrap()[d.initial()]
        };
        worst = worst.max((exact - reach).abs());
        nonzero += (exact > 0.0) as u32;
    }
    outcome(
        worst <= UNTIMED_TOL,
        format!("{UNTIMED_MODELS} models ({nonzero} with positive probability), max difference {worst:.2e}"),
    )
}

fn cross_engine(grids: &mut Vec<(&'static str, GridOutcome)>) -> Outcome {
    let c = models::branching_chain(1.0, 2.0, 3.0, 4.0);
    let a = models::reset_loop_dta();
    let start = Instant::now();
    let exact = solve_single_clock(&c, &a, 1e-12).unwrap().probability;
    let t_exact = start.elapsed();
    let start = Instant::now();
    let grid = grid_run(&c, &a, CROSS_GRID_STEP);
    let t_grid = start.elapsed();
    let start = Instant::now();
    let mc = simulate_acceptance(
        &c,
        &a,
        &SimConfig {
            samples: MC_SAMPLES,
            seed: MC_SEED,
            ..SimConfig::default()
        },
    )
    .unwrap();
    let t_mc = start.elapsed();
    let (dg, dm) = ((exact - grid.value).abs(), (exact - mc.p_hat).abs());
    let pass = dg <= CROSS_ENGINE_TOL
        && dm <= CROSS_ENGINE_TOL
        && t_exact < SINGLE_CLOCK_TIME
        && t_grid < GRID_TIME
        && t_mc < MC_TIME;
    let detail = format!(
        "single-clock {:.6} ({t_exact:.2?}), grid {:.6} ({t_grid:.2?}), MC {:.6} ({t_mc:.2?})",
        exact, grid.value, mc.p_hat
    );
    grids.push(("running example", grid));
    outcome(pass, detail)
}

fn robot(grids: &mut Vec<(&'static str, GridOutcome)>) -> Outcome {
    let c = models::robot_map();
    let a = models::robot_dta();
    let grid = grid_run(&c, &a, ROBOT_GRID_STEP);
    let mc = simulate_acceptance(
        &c,
        &a,
        &SimConfig {
            samples: MC_SAMPLES,
            seed: MC_SEED,
            ..SimConfig::default()
        },
    )
    .unwrap();
    let d = (grid.value - mc.p_hat).abs();
    let detail = format!(
        "grid {:.6}, MC {:.6} +/- {:.1e}, difference {d:.2e}",
        grid.value, mc.p_hat, mc.half_width
    );
    grids.push(("robot", grid));
    outcome(d <= ROBOT_TOL, detail)
}

fn least_fixpoint(grids: &mut Vec<(&'static str, GridOutcome)>) -> Outcome {
    let m = models::two_clock_dmta(1.0, 2.0);
    let g = RegionGraph::simplified(&m).unwrap();
    grids.push((
        "two-clock",
        value_iterate(&m, &g, &g.accepting(), &GridSpec::with_step(0.01)).unwrap(),
    ));
    let bad: Vec<String> = grids
        .iter()
        .filter(|(_, o)| o.monotone_violations > 0 || o.max_value > 1.0)
        .map(|(n, o)| format!("{n}: {} decreases, max {}", o.monotone_violations, o.max_value))
        .collect();
    let names: Vec<&str> = grids.iter().map(|(n, _)| *n).collect();
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("grid runs checked: {}", names.join(", "))
        } else {
            bad.join("; ")
        },
    )
}

fn qualitative_consistency() -> Outcome {
    let mut cases: Vec<(String, Ctmc, Dta, f64)> = Vec::new();
    let exact = |c: &Ctmc, a: &Dta| solve_single_clock(c, a, 1e-12).unwrap().probability;
    let c = models::branching_chain(1.0, 2.0, 3.0, 4.0);
    let a = models::reset_loop_dta();
    cases.push(("running example".into(), c.clone(), a.clone(), exact(&c, &a)));
    for (rate, bound) in [(1.0, 1), (2.0, 3)] {
        let (c, a) = models::one_transition(rate, bound);
        cases.push((format!("one transition {rate}/{bound}"), c.clone(), a.clone(), exact(&c, &a)));
    }
    let c = models::two_state_cycle(1.0, 1.0);
    let a = Dta::builder()
        .clock("x")
        .location("q0")
        .location("qf")
        .initial("q0")
        .accepting(&["qf"])
        .edge("q0", &["a"], &[], &[], "q0")
        .edge("q0", &["b"], &[], &[], "qf")
        .build()
        .unwrap();
    cases.push(("certain acceptance".into(), c.clone(), a.clone(), exact(&c, &a)));
    for r0 in [0.5, 2.0] {
        let c = models::two_cycle_chain(r0, 2.0, 3.0, 4.0);
        let a = models::two_cycle_muller_dta();
        let p = check_muller(&c, &a, &MullerEngine::SingleClock { epsilon: 1e-12 }, MullerMode::Exact)
            .unwrap()
            .probability;
        cases.push((format!("Muller r0={r0}"), c, a, p));
    }
    for seed in 0..20 {
        let mut r = rng(500 + seed);
        let c = random_chain(&mut r, 6, &["a", "b"]);
        let a = random_single_clock_dta(&mut r, &["a", "b"], 2, 1);
        let p = exact(&c, &a);
        cases.push((format!("random {seed}"), c, a, p));
    }
    let mut bad = Vec::new();
    let mut sure = 0;
    for (name, c, a, p) in &cases {
        let pos = qualitative_check(c, a, QualitativeMode::Positive, MullerMode::Exact).unwrap().0;
        let all = qualitative_check(c, a, QualitativeMode::AlmostSure, MullerMode::Exact).unwrap().0;
        if pos.holds != (*p > POSITIVE_THRESHOLD) {
            bad.push(format!("{name}: positive={} but p={p:.3e}", pos.holds));
        }
        if all.holds {
            sure += 1;
            if *p < ALMOST_SURE_THRESHOLD {
                bad.push(format!("{name}: almost sure but p={p}"));
            }
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} models, {sure} almost sure", cases.len())
        } else {
            bad.join("; ")
        },
    )
}

fn transient_checks() -> Outcome {
    let (mut semigroup, mut fd_ratio): (f64, f64) = (0.0, 0.0);
    for seed in 0..TRANSIENT_CHAINS {
        let mut r = rng(900 + seed);
        let c = random_chain(&mut r, 8, &["a", "b"]);
        let p1 = transient_matrix(&c, 0.7, 1e-14).unwrap();
        let p2 = transient_matrix(&c, 1.9, 1e-14).unwrap();
        let p12 = transient_matrix(&c, 2.6, 1e-14).unwrap();
        semigroup = semigroup.max((&p1 * &p2 - &p12).abs().max());
        let ph = transient_matrix(&c, 0.7 + FD_STEP, 1e-14).unwrap();
        let q = c.generator();
        let err = ((&ph - &p1) / FD_STEP - &p1 * q.matrix()).abs().max();
        // The remainder is at most h/2 |Q^2| <= 2 h qmax^2.
        let qmax = c.exit_rates().iter().fold(0.0f64, |a, &x| a.max(x));
        fd_ratio = fd_ratio.max(err / (2.0 * FD_STEP * qmax * qmax));
    }
    outcome(
        semigroup <= SEMIGROUP_TOL && fd_ratio <= 1.0,
        format!("semigroup error {semigroup:.2e}, finite-difference error at {fd_ratio:.2} of the O(h) bound"),
    )
}

struct ExpectedGraph {
    /// `(location, sample point, region-graph rate, accepting)`.
    vertices: Vec<(&'static str, Vec<f64>, f64, bool)>,
    delays: Vec<(usize, usize)>,
    markov: Vec<(usize, usize, f64)>,
}

/// Compares `g` with `want` under the vertex matching given by the sample
/// points; returns the differences.
fn compare_graph(m: &Dmta, g: &RegionGraph, want: &ExpectedGraph) -> Vec<String> {
    let mut diffs = Vec::new();
    if g.len() != want.vertices.len() {
        diffs.push(format!("{} vertices, expected {}", g.len(), want.vertices.len()));
    }
    let mut map = Vec::new();
    for (i, (loc, point, rate, acc)) in want.vertices.iter().enumerate() {
        let l = m.location_by_name(loc).expect("location exists");
        let region = g.space().region_of(&ClockValuation::new(point.clone()).unwrap());
        let Some(v) = g.vertex_of(l, &region) else {
            diffs.push(format!("v{i} ({loc}) missing"));
            return diffs;
        };
        let vx = g.vertex(v);
        if (vx.rate - rate).abs() > 1e-12 || vx.accepting != *acc {
            diffs.push(format!("v{i}: rate {} accepting {}", vx.rate, vx.accepting));
        }
        map.push(v.0);
    }
    let delays: BTreeSet<(usize, usize)> = g
        .vertices()
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.delay.map(|d| (i, d.0)))
        .collect();
    let want_delays: BTreeSet<(usize, usize)> = want.delays.iter().map(|&(a, b)| (map[a], map[b])).collect();
    for (a, b) in want_delays.difference(&delays) {
        diffs.push(format!("missing delay edge {a} -> {b}"));
    }
    for (a, b) in delays.difference(&want_delays) {
        diffs.push(format!("extra delay edge {a} -> {b}"));
    }
    let markov: BTreeSet<(usize, usize, u64)> = g
        .vertices()
        .iter()
        .enumerate()
        .flat_map(|(i, v)| v.markov.iter().map(move |e| (i, e.target.0, (e.prob * 1e9).round() as u64)))
        .collect();
    let want_markov: BTreeSet<(usize, usize, u64)> = want
        .markov
        .iter()
        .map(|&(a, b, p)| (map[a], map[b], (p * 1e9).round() as u64))
        .collect();
    for e in want_markov.symmetric_difference(&markov) {
        diffs.push(format!("Markovian edge {e:?} differs"));
    }
    diffs
}

fn region_graphs() -> Outcome {
    let (r0, r1, r2, r3) = (1.0, 2.0, 3.0, 4.0);
    let single = ExpectedGraph {
        vertices: vec![
            ("<s0,q0>", vec![0.5], r0, false),
            ("<s0,q0>", vec![1.5], r0, false),
            ("<s1,q0>", vec![0.5], r1, false),
            ("<s1,q0>", vec![1.5], r1, false),
            ("<s2,q0>", vec![0.5], 0.0, false),
            ("<s2,q0>", vec![1.5], r2, false),
            ("<s2,q0>", vec![2.5], r2, false),
            ("<s2,q1>", vec![1.5], 0.0, true),
            ("<s2,q1>", vec![2.5], 0.0, true),
        ],
        delays: vec![(0, 1), (2, 3), (4, 5), (5, 6), (7, 8)],
        markov: vec![
            (0, 2, 1.0),
            (1, 2, 1.0),
            (2, 0, 0.5),
            (2, 4, 0.2),
            (3, 0, 0.5),
            (3, 4, 0.2),
            (5, 7, 1.0),
            (6, 8, 1.0),
        ],
    };
    let m1 = build_product(&models::branching_chain(r0, r1, r2, r3), &models::reset_loop_dta()).unwrap();
    let g1 = RegionGraph::simplified(&m1).unwrap().pruned();
    let d1 = compare_graph(&m1, &g1, &single);
    let two = ExpectedGraph {
        vertices: vec![
            ("l0", vec![0.5, 0.5], 0.0, false),
            ("l0", vec![1.5, 1.5], r0, false),
            ("l0", vec![2.5, 2.5], r0, false),
            ("l1", vec![0.25, 1.5], 0.0, true),
            ("l1", vec![0.25, 2.5], 0.0, true),
        ],
        delays: vec![(0, 1), (1, 2)],
        markov: vec![(1, 3, 1.0), (2, 4, 1.0)],
    };
    let m2 = models::two_clock_dmta(r0, r1);
    let g2 = RegionGraph::simplified(&m2).unwrap().pruned();
    let d2 = compare_graph(&m2, &g2, &two);
    let describe = |d: &[String]| if d.is_empty() { "isomorphic".to_string() } else { d.join(", ") };
    outcome(
        d1.is_empty() && d2.is_empty(),
        format!("one clock ({} vertices): {}; two clocks ({} vertices): {}", g1.len(), describe(&d1), g2.len(), describe(&d2)),
    )
}

#[test]
fn acceptance_criteria() {
    let mut grids = Vec::new();
    let results = [
        ("Muller example", muller_example()),
        ("embedded jump", embedded_jump()),
        ("one-transition closed form", one_transition()),
        ("untimed equivalence", untimed_equivalence()),
        ("cross-engine agreement", cross_engine(&mut grids)),
        ("two-clock robot", robot(&mut grids)),
        ("least fixpoint", least_fixpoint(&mut grids)),
        ("qualitative consistency", qualitative_consistency()),
        ("transient analysis", transient_checks()),
        ("region graphs", region_graphs()),
    ];
    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "criterion {:>2} {}: {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, (_, o))| !o.pass)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
