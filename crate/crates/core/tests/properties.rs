mod common;

use std::collections::BTreeSet;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use timedreach::grid::{check_grid, value_iterate, GridSpec};
use timedreach::io::{ctmc_to_json, dta_to_json, parse_ctmc, parse_dta};
use timedreach::markov::{bottom_sccs, dtmc_reachability, transient_matrix, Dtmc};
use timedreach::muller::{accepting_bsccs, qualitative_check, MullerMode, QualitativeMode};
use timedreach::region::{PdpState, RegionSpace};
use timedreach::single_clock::{compute_transients, partition_region_graph, solve_single_clock};
use timedreach::timed::{
    guard_enabled_interval, time_bound_transform, validate_dta, Atom, ClockConstraint, ClockId,
    Comparator, DtaEdge,
};
use timedreach::{build_product, Acceptance, ClockValuation, Dta, Error, RegionGraph};

const AB: &[&str] = &["a", "b"];

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transient_semigroup(seed in any::<u64>(), t1 in 0.0f64..3.0, t2 in 0.0f64..3.0) {
        let c = random_chain(&mut rng(seed), 8, AB);
        let a = transient_matrix(&c, t1, 1e-13).unwrap();
        let b = transient_matrix(&c, t2, 1e-13).unwrap();
        let ab = transient_matrix(&c, t1 + t2, 1e-13).unwrap();
        prop_assert!(max_abs(&(&a * &b - &ab)) < 1e-6);
    }

    #[test]
    fn transient_forward_equation(seed in any::<u64>(), t in 0.0f64..2.0) {
        let c = random_chain(&mut rng(seed), 8, AB);
        let h = 1e-4;
        let q = c.generator();
        let p = transient_matrix(&c, t, 1e-14).unwrap();
        let ph = transient_matrix(&c, t + h, 1e-14).unwrap();
        let fd = (&ph - &p) / h;
        let qmax = c.exit_rates().iter().fold(0.0f64, |a, &r| a.max(r));
        // Remainder of the first-order expansion: at most h/2 * |Q^2|.
        let bound = h * 2.0 * qmax * qmax + 1e-8;
        prop_assert!(max_abs(&(fd - &p * q.matrix())) < bound);
    }

    #[test]
    fn transient_is_stochastic(seed in any::<u64>(), t in 0.0f64..5.0) {
        let c = random_chain(&mut rng(seed), 8, AB);
        let p = transient_matrix(&c, t, 1e-12).unwrap();
        for i in 0..p.nrows() {
            prop_assert!(p.row(i).iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
            prop_assert!((p.row(i).sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn reachability_is_a_fixpoint(seed in any::<u64>()) {
        let mut r = rng(seed);
        let c = random_chain(&mut r, 10, AB);
        let d = Dtmc::new(c.jump_matrix().clone(), 0).unwrap();
        let mut targets: Vec<usize> = (0..c.num_states()).filter(|_| r.random_bool(0.3)).collect();
        if targets.is_empty() {
            targets.push(c.num_states() - 1);
        }
        let x = dtmc_reachability(&d, &targets).unwrap();
        let px = d.jump_matrix() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..x.len() {
            prop_assert!((0.0..=1.0).contains(&x[i]));
            if targets.contains(&i) {
                prop_assert_eq!(x[i], 1.0);
            } else if x[i] > 0.0 {
                prop_assert!((x[i] - px[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bottom_sccs_are_closed(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..12usize);
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|_| (0..n).filter(|_| r.random_bool(0.2)).collect())
            .collect();
        let bsccs = bottom_sccs(&adj);
        let mut in_bottom = vec![false; n];
        for comp in &bsccs {
            let set: BTreeSet<usize> = comp.iter().copied().collect();
            for &v in comp {
                in_bottom[v] = true;
                prop_assert!(!adj[v].is_empty());
                prop_assert!(adj[v].iter().all(|w| set.contains(w)));
            }
        }
        // Any vertex outside a bottom SCC reaches a vertex with an edge leaving
        // its SCC, or is a deadlock.
        for v in 0..n {
            if !in_bottom[v] && !adj[v].is_empty() {
                let mut seen = vec![false; n];
                let mut stack = vec![v];
                let mut escapes = false;
                while let Some(u) = stack.pop() {
                    if std::mem::replace(&mut seen[u], true) {
                        continue;
                    }
                    if adj[u].is_empty() || in_bottom[u] {
                        escapes = true;
                    }
                    stack.extend(adj[u].iter().copied());
                }
                prop_assert!(escapes);
            }
        }
    }

    #[test]
    fn validated_automata_are_deterministic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = arbitrary_dta(&mut r);
        let Ok(v) = validate_dta(&a) else { return Ok(()); };
        let a = v.dta;
        for _ in 0..2000 {
            let q = r.random_range(0..a.locations().len());
            let sym: BTreeSet<String> = [AB[r.random_range(0..2)].to_string()].into();
            let eta = ClockValuation::new((0..a.num_clocks()).map(|_| r.random_range(0.0..4.0)).collect()).unwrap();
            let t = r.random_range(0.0..4.0);
            let after = eta.delayed(t);
            let enabled = a.edges_on(q, &sym).filter(|(_, e)| e.guard.holds(&after)).count();
            prop_assert!(enabled <= 1);
        }
    }

    #[test]
    fn enabled_interval_matches_pointwise(seed in any::<u64>()) {
        let mut r = rng(seed);
        for _ in 0..200 {
            let g = random_guard(&mut r, 2);
            let eta = ClockValuation::new(vec![r.random_range(0.0..4.0), r.random_range(0.0..4.0)]).unwrap();
            let iv = guard_enabled_interval(&g, &eta);
            for _ in 0..10 {
                // Mix integer-aligned delays with generic ones to hit endpoints.
                let tau = if r.random_bool(0.3) {
                    r.random_range(0..5) as f64 - eta.values()[0].fract()
                } else {
                    r.random_range(0.0..5.0)
                };
                if tau < 0.0 {
                    continue;
                }
                let pointwise = g.holds(&eta.delayed(tau));
                let by_interval = iv.as_ref().is_some_and(|iv| iv.contains(tau));
                prop_assert_eq!(pointwise, by_interval, "g={:?} eta={:?} tau={}", g, eta, tau);
            }
        }
    }

    #[test]
    fn time_bound_keeps_determinism(seed in any::<u64>(), t_f in 1u32..40) {
        let a = random_single_clock_dta(&mut rng(seed), AB, 3, 1);
        let b = time_bound_transform(&a, t_f as f64 / 4.0).unwrap();
        prop_assert!(validate_dta(&b.dta).is_ok());
        prop_assert_eq!(b.dta.num_clocks(), 2);
    }

    #[test]
    fn region_successors_cover_delays(seed in any::<u64>()) {
        let mut r = rng(seed);
        let clocks = r.random_range(1..=3usize);
        // One clock: any constants; several clocks: unit cells.
        let bounds: Vec<Vec<u64>> = if clocks == 1 {
            let mut b: Vec<u64> = (1..=4).filter(|_| r.random_bool(0.5)).collect();
            b.insert(0, 0);
            vec![b]
        } else {
            vec![(0..=r.random_range(0..=4)).collect(); clocks]
        };
        let space = RegionSpace::new(bounds).unwrap();
        // Dyadic values keep equal fractional parts equal after addition.
        let dyadic = |r: &mut rand_chacha::ChaCha8Rng, max: u32| r.random_range(0..max * 1024) as f64 / 1024.0;
        for _ in 0..100 {
            let eta = ClockValuation::new((0..clocks).map(|_| {
                if r.random_bool(0.3) { r.random_range(0..5) as f64 } else { dyadic(&mut r, 5) }
            }).collect()).unwrap();
            let delta = dyadic(&mut r, 3);
            let from = space.classic_region_of(&eta);
            let to = space.classic_region_of(&eta.delayed(delta));
            let mut cur = from.clone();
            let mut found = cur == to;
            while !found {
                match space.successor(&cur) {
                    Some(n) if n != cur => {
                        found = n == to;
                        cur = n;
                    }
                    _ => break,
                }
            }
            prop_assert!(found, "{:?} + {} not reached", eta, delta);
        }
    }

    #[test]
    fn pdp_flow_is_translation(seed in any::<u64>(), t in 0.0f64..10.0) {
        let mut r = rng(seed);
        let eta = ClockValuation::new(vec![r.random_range(0.0..3.0), r.random_range(0.0..3.0)]).unwrap();
        let st = PdpState { vertex: timedreach::VertexId(0), valuation: eta.clone() };
        prop_assert_eq!(st.flow(t), eta.delayed(t));
    }

    #[test]
    fn files_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let c = random_chain(&mut r, 10, AB);
        let a = random_two_clock_dta(&mut r, AB, 3);
        prop_assert_eq!(parse_ctmc(&ctmc_to_json(&c), "c").unwrap(), c);
        prop_assert_eq!(parse_dta(&dta_to_json(&a), "a").unwrap(), a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn single_clock_vertex_count(seed in any::<u64>()) {
        let mut r = rng(seed);
        let c = random_chain(&mut r, 6, AB);
        let a = random_single_clock_dta(&mut r, AB, 3, 1);
        let m = build_product(&c, &a).unwrap();
        m.check_determinism().unwrap();
        let g = RegionGraph::simplified(&m).unwrap();
        let regions = m.constants(ClockId(0)).len().max(1);
        prop_assert!(g.len() <= m.num_locations() * regions);
    }

    #[test]
    fn transients_are_substochastic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let c = random_chain(&mut r, 6, AB);
        let a = random_single_clock_dta(&mut r, AB, 3, 1);
        let m = build_product(&c, &validate_dta(&a).unwrap().dta).unwrap();
        let g = RegionGraph::simplified(&m).unwrap().pruned();
        let p = partition_region_graph(&g).unwrap();
        for tr in compute_transients(&p, 1e-12).unwrap() {
            for row in 0..tr.stay.nrows() {
                let sum = tr.stay.row(row).sum() + tr.reset.row(row).sum();
                prop_assert!(sum <= 1.0 + 1e-8);
            }
            prop_assert!(tr.stay.iter().chain(tr.reset.iter()).all(|&x| (-1e-8..=1.0 + 1e-8).contains(&x)));
        }
    }

    #[test]
    fn rate_scaling_covariance(seed in any::<u64>(), k in 2u64..=3) {
        let mut r = rng(seed);
        let c = random_chain(&mut r, 6, AB);
        let a = random_single_clock_dta(&mut r, AB, 2, k);
        let p = solve_single_clock(&c, &a, 1e-13).unwrap().probability;
        let fast = c.with_rates_scaled(k as f64);
        let q = solve_single_clock(&fast, &divide_constants(&a, k), 1e-13).unwrap().probability;
        prop_assert!((p - q).abs() < 1e-8, "{} vs {}", p, q);
    }

    #[test]
    fn qualitative_matches_quantitative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let c = random_chain(&mut r, 6, AB);
        let a = random_single_clock_dta(&mut r, AB, 2, 1);
        let p = solve_single_clock(&c, &a, 1e-12).unwrap().probability;
        let pos = qualitative_check(&c, &a, QualitativeMode::Positive, MullerMode::Exact).unwrap().0;
        let sure = qualitative_check(&c, &a, QualitativeMode::AlmostSure, MullerMode::Exact).unwrap().0;
        prop_assert_eq!(pos.holds, p > 1e-9, "p = {}", p);
        if sure.holds {
            prop_assert!(p >= 1.0 - 1e-6, "p = {}", p);
        }
    }

    #[test]
    fn muller_bsccs_have_no_exits(seed in any::<u64>()) {
        let mut r = rng(seed);
        let c = random_chain(&mut r, 5, AB);
        let a = random_single_clock_dta(&mut r, AB, 2, 1);
        let fam: Vec<BTreeSet<usize>> = (0..2)
            .map(|_| (0..a.locations().len()).filter(|_| r.random_bool(0.5)).collect())
            .collect();
        let a = a.with_acceptance(Acceptance::Muller(fam)).unwrap();
        let m = build_product(&c, &a).unwrap();
        let g = RegionGraph::simplified(&m).unwrap();
        for mode in [MullerMode::Exact, MullerMode::Containment] {
            for b in accepting_bsccs(&m, &g, mode).bsccs {
                let set: BTreeSet<usize> = b.vertices.iter().map(|v| v.0).collect();
                for v in &b.vertices {
                    let vx = g.vertex(*v);
                    prop_assert!(vx.delay.iter().all(|d| set.contains(&d.0)));
                    if vx.location_rate > 0.0 {
                        prop_assert!(vx.markov.iter().all(|e| set.contains(&e.target.0)));
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn grid_agrees_with_single_clock(seed in any::<u64>()) {
        let mut r = rng(seed);
        let c = random_chain(&mut r, 4, AB);
        let a = random_single_clock_dta(&mut r, AB, 2, 1);
        let exact = solve_single_clock(&c, &a, 1e-12).unwrap().probability;
        let spec = GridSpec { max_iterations: Some(5000), ..GridSpec::with_step(0.01) };
        let grid = check_grid(&c, &a, &spec).unwrap().probability;
        prop_assert!((exact - grid).abs() < 2e-2, "{} vs {}", exact, grid);
    }

    #[test]
    fn grid_iterates_increase(seed in any::<u64>()) {
        let mut r = rng(seed);
        let c = random_chain(&mut r, 4, AB);
        let a = random_two_clock_dta(&mut r, AB, 2);
        let m = build_product(&c, &validate_dta(&a).unwrap().dta).unwrap();
        let g = RegionGraph::simplified(&m).unwrap();
        let spec = GridSpec { max_iterations: Some(5000), ..GridSpec::with_step(0.1) };
        match value_iterate(&m, &g, &g.accepting(), &spec) {
            Ok(out) => {
                prop_assert_eq!(out.monotone_violations, 0);
                prop_assert!(out.max_value <= 1.0);
            }
            Err(Error::NonConvergence { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}

/// Guard with up to two atoms per clock and random comparators.
fn random_guard<R: Rng>(r: &mut R, clocks: usize) -> ClockConstraint {
    let ops = [Comparator::Less, Comparator::LessEq, Comparator::Greater, Comparator::GreaterEq];
    let atoms = (0..r.random_range(0..=3))
        .map(|_| Atom {
            clock: ClockId(r.random_range(0..clocks)),
            op: ops[r.random_range(0..4)],
            constant: r.random_range(0..4),
        })
        .collect();
    ClockConstraint::new(atoms)
}

/// Automaton with unconstrained random guards; often nondeterministic.
fn arbitrary_dta<R: Rng>(r: &mut R) -> Dta {
    let edges = (0..r.random_range(1..6))
        .map(|_| DtaEdge {
            from: r.random_range(0..2),
            symbol: [AB[r.random_range(0..2)].to_string()].into(),
            guard: random_guard(r, 2),
            resets: vec![],
            to: r.random_range(0..3),
        })
        .collect();
    Dta::new(
        vec!["x".into(), "y".into()],
        vec!["q0".into(), "q1".into(), "qf".into()],
        0,
        Acceptance::Finite([2].into()),
        edges,
    )
    .unwrap()
}
