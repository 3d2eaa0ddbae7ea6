//! Small reference models used by tests, benchmarks and the documentation.

use crate::markov::Ctmc;
use crate::product::{Dmta, LocId, ProductEdge};
use crate::timed::{ClockConstraint, ClockId, Comparator, Dta};

/// Four-state chain: `s0 -> s1`, `s1 -> {s0: 0.5, s2: 0.2, s3: 0.3}`,
/// `s2` and `s3` absorbing in the jump matrix. Labels `a, a, b, c`.
pub fn branching_chain(r0: f64, r1: f64, r2: f64, r3: f64) -> Ctmc {
    Ctmc::builder()
        .state("s0", &["a"], r0)
        .state("s1", &["a"], r1)
        .state("s2", &["b"], r2)
        .state("s3", &["c"], r3)
        .transition("s0", "s1", 1.0)
        .transition("s1", "s0", 0.5)
        .transition("s1", "s2", 0.2)
        .transition("s1", "s3", 0.3)
        .transition("s2", "s2", 1.0)
        .transition("s3", "s3", 1.0)
        .initial("s0")
        .build()
        .expect("valid chain")
}

/// One clock: loop on `a` while `x < 1`, loop with reset on `a` while
/// `1 < x < 2`, accept on `b` once `x > 1`.
pub fn reset_loop_dta() -> Dta {
    Dta::builder()
        .clock("x")
        .location("q0")
        .location("q1")
        .initial("q0")
        .accepting(&["q1"])
        .edge("q0", &["a"], &[("x", "<", 1)], &[], "q0")
        .edge("q0", &["a"], &[("x", ">", 1), ("x", "<", 2)], &["x"], "q0")
        .edge("q0", &["b"], &[("x", ">", 1)], &[], "q1")
        .build()
        .expect("valid automaton")
}

/// Muller automaton alternating `q0 <-> q2` (fast `a`, then `b`) or
/// `q0 <-> q1` (slow `a`, then `c`); accepts runs that settle on `{q0, q2}`.
pub fn alternating_muller_dta() -> Dta {
    Dta::builder()
        .clock("x")
        .location("q0")
        .location("q1")
        .location("q2")
        .initial("q0")
        .muller(&[&["q0", "q2"]])
        .edge("q0", &["a"], &[("x", "<", 1)], &[], "q2")
        .edge("q2", &["b"], &[], &["x"], "q0")
        .edge("q0", &["a"], &[("x", ">", 1), ("x", "<", 2)], &["x"], "q1")
        .edge("q1", &["c"], &[], &["x"], "q0")
        .build()
        .expect("valid automaton")
}

/// Chain with two cycles `s1 -> s2 -> {s1, s3}`, `s3 -> s2`, entered from
/// `s0` (label `b`). Labels `b, c, a, c`.
pub fn two_cycle_chain(r0: f64, r1: f64, r2: f64, r3: f64) -> Ctmc {
    Ctmc::builder()
        .state("s0", &["b"], r0)
        .state("s1", &["c"], r1)
        .state("s2", &["a"], r2)
        .state("s3", &["c"], r3)
        .transition("s0", "s1", 0.4)
        .transition("s0", "s3", 0.6)
        .transition("s1", "s2", 1.0)
        .transition("s2", "s1", 0.3)
        .transition("s2", "s3", 0.7)
        .transition("s3", "s2", 1.0)
        .initial("s0")
        .build()
        .expect("valid chain")
}

/// Muller automaton for [`two_cycle_chain`]: a fast first `b` enters the
/// `{q1, q2}` cycle (which can be sustained forever), a slow one enters the
/// `{q3, q4}` cycle (which eventually gets stuck).
pub fn two_cycle_muller_dta() -> Dta {
    Dta::builder()
        .clock("x")
        .location("q0")
        .location("q1")
        .location("q2")
        .location("q3")
        .location("q4")
        .initial("q0")
        .muller(&[&["q1", "q2"], &["q3", "q4"]])
        .edge("q0", &["b"], &[("x", ">", 1), ("x", "<", 2)], &[], "q3")
        .edge("q0", &["b"], &[("x", "<", 1)], &["x"], "q1")
        .edge("q3", &["c"], &[("x", "<", 2)], &["x"], "q4")
        .edge("q4", &["a"], &[("x", ">", 1)], &[], "q3")
        .edge("q1", &["c"], &[("x", ">", 1)], &[], "q2")
        .edge("q2", &["a"], &[("x", ">", 2)], &["x"], "q1")
        .build()
        .expect("valid automaton")
}

/// Two-state alternating chain `s0 <-> s1` with labels `a`, `b`.
pub fn two_state_cycle(r0: f64, r1: f64) -> Ctmc {
    Ctmc::builder()
        .state("s0", &["a"], r0)
        .state("s1", &["b"], r1)
        .transition("s0", "s1", 1.0)
        .transition("s1", "s0", 1.0)
        .initial("s0")
        .build()
        .expect("valid chain")
}

/// Two clocks: leave `q0` on `a` once `x2 > 1` (resetting `x1`); the
/// accepting `q1` would return on `b` while `x1 < 2`.
pub fn two_clock_dta() -> Dta {
    Dta::builder()
        .clock("x1")
        .clock("x2")
        .location("q0")
        .location("q1")
        .initial("q0")
        .accepting(&["q1"])
        .edge("q0", &["a"], &[("x2", ">", 1)], &["x1"], "q1")
        .edge("q1", &["b"], &[("x1", "<", 2)], &["x2"], "q0")
        .build()
        .expect("valid automaton")
}

/// Two-clock DMTA given directly: `l0` (rate `r0`) jumps to the accepting
/// `l1` once `x2 > 1`, resetting `x1`; `l1` (rate `r1`) returns while
/// `x1 < 2`, resetting `x2`.
pub fn two_clock_dmta(r0: f64, r1: f64) -> Dmta {
    let (x1, x2) = (ClockId(0), ClockId(1));
    let edges = vec![
        ProductEdge {
            source: LocId(0),
            guard: ClockConstraint::always().with(x2, Comparator::Greater, 1),
            resets: vec![x1],
            targets: vec![(LocId(1), 1.0)],
            origin: 0,
        },
        ProductEdge {
            source: LocId(1),
            guard: ClockConstraint::always().with(x1, Comparator::Less, 2),
            resets: vec![x2],
            targets: vec![(LocId(0), 1.0)],
            origin: 1,
        },
    ];
    Dmta::new(
        vec!["x1".into(), "x2".into()],
        vec!["l0".into(), "l1".into()],
        vec![r0, r1],
        LocId(0),
        edges,
        vec![false, true],
    )
    .expect("valid DMTA")
}

/// Chain `s0 -> s1` with rate `rate` out of `s0`, and the automaton that
/// accepts iff the jump happens before `x = bound`.
pub fn one_transition(rate: f64, bound: u64) -> (Ctmc, Dta) {
    let c = Ctmc::builder()
        .state("s0", &["a"], rate)
        .state("s1", &["b"], 1.0)
        .transition("s0", "s1", 1.0)
        .transition("s1", "s1", 1.0)
        .initial("s0")
        .build()
        .expect("valid chain");
    let a = Dta::builder()
        .clock("x")
        .location("q0")
        .location("qf")
        .initial("q0")
        .accepting(&["qf"])
        .edge("q0", &["a"], &[("x", "<", bound)], &[], "qf")
        .build()
        .expect("valid automaton");
    (c, a)
}

/// Robot moving on a 3x3 map. It starts in the bottom-left cell, the goal
/// is the top-right cell (label `b`), and two cells are gray (label `g`).
/// From each cell the robot moves to a uniformly chosen neighbour after an
/// exponential sojourn; the goal cell loops on itself.
pub fn robot_map() -> Ctmc {
    let gray = [(1, 1), (2, 1)];
    let goal = (0, 2);
    let name = |r: usize, c: usize| format!("z{r}{c}");
    let mut b = Ctmc::builder();
    let mut names = Vec::new();
    for r in 0..3 {
        for c in 0..3 {
            names.push(name(r, c));
        }
    }
    for r in 0..3 {
        for c in 0..3 {
            let labels: &[&str] = if (r, c) == goal {
                &["b"]
            } else if gray.contains(&(r, c)) {
                &["g"]
            } else {
                &[]
            };
            let rate = 1.0 + 0.25 * (r + c) as f64;
            b = b.state(&names[r * 3 + c], labels, rate);
        }
    }
    for r in 0..3usize {
        for c in 0..3usize {
            let from = name(r, c);
            if (r, c) == goal {
                b = b.transition(&from, &from, 1.0);
                continue;
            }
            let mut nbrs = Vec::new();
            if r > 0 {
                nbrs.push((r - 1, c));
            }
            if r < 2 {
                nbrs.push((r + 1, c));
            }
            if c > 0 {
                nbrs.push((r, c - 1));
            }
            if c < 2 {
                nbrs.push((r, c + 1));
            }
            let p = 1.0 / nbrs.len() as f64;
            for (nr, nc) in nbrs {
                b = b.transition(&from, &name(nr, nc), p);
            }
        }
    }
    b.initial(&name(2, 0)).build().expect("valid chain")
}

/// Reach the goal within 10 time units (clock `y`), and after leaving a
/// gray cell, leave the next cell within 2 time units (clock `x`).
pub fn robot_dta() -> Dta {
    Dta::builder()
        .clock("x")
        .clock("y")
        .location("q0")
        .location("q1")
        .location("q2")
        .initial("q0")
        .accepting(&["q2"])
        .edge("q0", &[], &[], &[], "q0")
        .edge("q0", &["g"], &[], &["x"], "q1")
        .edge("q1", &["g"], &[("x", "<", 2)], &[], "q1")
        .edge("q1", &[], &[("x", "<", 2)], &["x"], "q0")
        .edge("q0", &["b"], &[("y", "<", 10)], &[], "q2")
        .edge("q1", &["b"], &[("y", "<", 10)], &[], "q2")
        .build()
        .expect("valid automaton")
}
