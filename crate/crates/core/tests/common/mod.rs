//! Random model generators shared by the integration tests.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timedreach::timed::{Atom, ClockConstraint, DtaEdge};
use timedreach::{Acceptance, Ctmc, Dta};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Chain with `2..=max_states` states, each labelled with one symbol from
/// `symbols`, rates in `[0.3, 4)` and one to three successors.
pub fn random_chain<R: Rng>(rng: &mut R, max_states: usize, symbols: &[&str]) -> Ctmc {
    let n = rng.random_range(2..=max_states);
    let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let mut b = Ctmc::builder();
    for name in &names {
        let sym = *symbols.choose(rng).unwrap();
        b = b.state(name, &[sym], rng.random_range(0.3..4.0));
    }
    for from in &names {
        let k = rng.random_range(1..=3.min(n));
        let targets: Vec<&String> = names.choose_multiple(rng, k).collect();
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let mut left = 1.0;
        for (i, (t, w)) in targets.iter().zip(&weights).enumerate() {
            let p = if i + 1 == k { left } else { w / total };
            left -= p;
            b = b.transition(from, t, p);
        }
    }
    b.initial(&names[0]).build().expect("generated chain is valid")
}

/// Guard partition of `[0, inf)` for one clock: cut points from
/// `1..=max_const`, yielding consecutive disjoint intervals.
fn partition<R: Rng>(rng: &mut R, max_const: u64, scale: u64) -> Vec<Vec<(&'static str, u64)>> {
    let cuts: usize = rng.random_range(0..=2.min(max_const as usize));
    let mut points: Vec<u64> = (1..=max_const).collect::<Vec<_>>().choose_multiple(rng, cuts).copied().collect();
    points.sort_unstable();
    let mut out = Vec::new();
    let mut lo: Option<u64> = None;
    for p in points.iter().copied().map(|p| p * scale).chain([u64::MAX]) {
        let mut g = Vec::new();
        if let Some(l) = lo {
            g.push((">=", l));
        }
        if p != u64::MAX {
            g.push(("<", p));
        }
        out.push(g);
        lo = Some(p);
    }
    out
}

/// Deterministic one-clock automaton with finite acceptance: locations
/// `q0..q{k-1}` and an accepting `qf`. Constants are multiples of `scale`
/// up to `max_const * scale`.
pub fn random_single_clock_dta<R: Rng>(rng: &mut R, symbols: &[&str], max_const: u64, scale: u64) -> Dta {
    let k = rng.random_range(1..=3usize);
    let locs: Vec<String> = (0..k).map(|i| format!("q{i}")).chain(["qf".to_string()]).collect();
    let mut b = Dta::builder().clock("x");
    for l in &locs {
        b = b.location(l);
    }
    b = b.initial("q0").accepting(&["qf"]);
    for from in &locs[..k] {
        for &sym in symbols {
            if rng.random_bool(0.15) {
                continue;
            }
            for guard in partition(rng, max_const, scale) {
                if rng.random_bool(0.15) {
                    continue;
                }
                let to = locs.choose(rng).unwrap();
                let resets: &[&str] = if rng.random_bool(0.4) { &["x"] } else { &[] };
                let atoms: Vec<(&str, &str, u64)> = guard.iter().map(|(op, c)| ("x", *op, *c)).collect();
                b = b.edge(from, &[sym], &atoms, resets, to);
            }
        }
    }
    b.build().expect("generated automaton is valid")
}

/// Automaton without guards: one edge per location and symbol.
pub fn random_guard_free_dta<R: Rng>(rng: &mut R, symbols: &[&str]) -> Dta {
    let k = rng.random_range(1..=3usize);
    let locs: Vec<String> = (0..k).map(|i| format!("q{i}")).chain(["qf".to_string()]).collect();
    let mut b = Dta::builder().clock("x");
    for l in &locs {
        b = b.location(l);
    }
    b = b.initial("q0").accepting(&["qf"]);
    for from in &locs[..k] {
        for &sym in symbols {
            if rng.random_bool(0.2) {
                continue;
            }
            b = b.edge(from, &[sym], &[], &[], locs.choose(rng).unwrap());
        }
    }
    b.build().expect("generated automaton is valid")
}

/// Two-clock automaton whose guards are products of per-clock partitions,
/// so it is deterministic by construction.
pub fn random_two_clock_dta<R: Rng>(rng: &mut R, symbols: &[&str], max_const: u64) -> Dta {
    let locs = ["q0", "q1", "qf"];
    let mut b = Dta::builder().clock("x").clock("y");
    for l in locs {
        b = b.location(l);
    }
    b = b.initial("q0").accepting(&["qf"]);
    for from in &locs[..2] {
        for &sym in symbols {
            let px = partition(rng, max_const, 1);
            let py = partition(rng, max_const, 1);
            for gx in &px {
                for gy in &py {
                    if rng.random_bool(0.25) {
                        continue;
                    }
                    let atoms: Vec<(&str, &str, u64)> = gx
                        .iter()
                        .map(|(op, c)| ("x", *op, *c))
                        .chain(gy.iter().map(|(op, c)| ("y", *op, *c)))
                        .collect();
                    let resets: Vec<&str> = ["x", "y"].into_iter().filter(|_| rng.random_bool(0.3)).collect();
                    b = b.edge(from, &[sym], &atoms, &resets, locs.choose(rng).unwrap());
                }
            }
        }
    }
    b.build().expect("generated automaton is valid")
}

/// Same automaton with every guard constant divided by `k`.
pub fn divide_constants(a: &Dta, k: u64) -> Dta {
    let edges = a
        .edges()
        .iter()
        .map(|e| DtaEdge {
            guard: ClockConstraint::new(
                e.guard
                    .atoms()
                    .iter()
                    .map(|at| {
                        assert_eq!(at.constant % k, 0);
                        Atom {
                            constant: at.constant / k,
                            ..*at
                        }
                    })
                    .collect(),
            ),
            ..e.clone()
        })
        .collect();
    Dta::new(
        a.clocks().to_vec(),
        a.locations().to_vec(),
        a.initial(),
        a.acceptance().clone(),
        edges,
    )
    .unwrap()
}

pub fn is_finite(a: &Dta) -> bool {
    matches!(a.acceptance(), Acceptance::Finite(_))
}
