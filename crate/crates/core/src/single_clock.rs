//! Exact reachability for one-clock automata.
//!
//! The simplified region graph is split by clock interval `[c_i, c_{i+1})`.
//! Inside an interval the clock only matters through resets, so each
//! interval is a plain CTMC run for `c_{i+1} - c_i` time units; resets leave
//! the interval into absorbing copies of the first interval's vertices.
//! The per-interval transient matrices then tie the entry values of all
//! vertices together in one linear system.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::markov::{solve_least_fixpoint, transient_from_parts, Ctmc};
use crate::product::build_product;
use crate::region::{RegionGraph, VertexId};
use crate::report::{GraphStats, Method, PhaseTimer, VerificationReport};
use crate::timed::{validate_dta, Acceptance, ClockId, Dta};

/// Default truncation error of uniformization, shared by all intervals.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Region graph vertices grouped by clock interval.
#[derive(Debug, Clone)]
pub struct Partition {
    constants: Vec<u64>,
    groups: Vec<Vec<VertexId>>,
    /// `(group, index within group)` per vertex.
    position: Vec<(usize, usize)>,
    accepting: Vec<Vec<bool>>,
    rates: Vec<Vec<f64>>,
    /// Markovian edges without reset, inside one group: `(from, to, prob)`.
    markov: Vec<Vec<(usize, usize, f64)>>,
    /// Markovian edges with reset into group 0: `(from, to in group 0, prob)`.
    resets: Vec<Vec<(usize, usize, f64)>>,
    /// Delay edges into the next group: `(from, to in group i+1)`.
    delays: Vec<Vec<(usize, usize)>>,
}

impl Partition {
    /// Index `m` of the last (unbounded) interval.
    pub fn last(&self) -> usize {
        self.groups.len() - 1
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn constants(&self) -> &[u64] {
        &self.constants
    }

    pub fn vertices(&self, i: usize) -> &[VertexId] {
        &self.groups[i]
    }

    pub fn accepting(&self, i: usize) -> &[bool] {
        &self.accepting[i]
    }

    /// `c_{i+1} - c_i`; infinite for the last interval.
    pub fn width(&self, i: usize) -> f64 {
        match self.constants.get(i + 1) {
            Some(&hi) => (hi - self.constants[i]) as f64,
            None => f64::INFINITY,
        }
    }

    pub fn markov_edges(&self, i: usize) -> &[(usize, usize, f64)] {
        &self.markov[i]
    }

    pub fn reset_edges(&self, i: usize) -> &[(usize, usize, f64)] {
        &self.resets[i]
    }

    pub fn delay_edges(&self, i: usize) -> &[(usize, usize)] {
        &self.delays[i]
    }

    /// `(group, index)` of a region graph vertex.
    pub fn position(&self, v: VertexId) -> (usize, usize) {
        self.position[v.0]
    }
}

/// Splits a simplified one-clock region graph by clock interval. Accepting
/// vertices become absorbing: their outgoing edges are dropped.
pub fn partition_region_graph(g: &RegionGraph) -> Result<Partition> {
    let space = g.space();
    if space.num_clocks() > 1 {
        return Err(Error::Unsupported(format!(
            "interval partitioning needs at most one clock, got {}",
            space.num_clocks()
        )));
    }
    let constants = if space.num_clocks() == 1 {
        space.bounds(ClockId(0)).to_vec()
    } else {
        vec![0]
    };
    let m = constants.len() - 1;
    let mut groups = vec![Vec::new(); m + 1];
    let mut position = Vec::with_capacity(g.len());
    for (idx, v) in g.vertices().iter().enumerate() {
        if v.region.is_boundary() {
            return Err(Error::InvalidArgument(
                "partitioning needs a simplified region graph".into(),
            ));
        }
        let i = if space.num_clocks() == 0 {
            m
        } else {
            v.region.cell(ClockId(0)).map_or(m, |k| k as usize)
        };
        position.push((i, groups[i].len()));
        groups[i].push(VertexId(idx));
    }
    let mut accepting = Vec::with_capacity(m + 1);
    let mut rates = Vec::with_capacity(m + 1);
    let mut markov = vec![Vec::new(); m + 1];
    let mut resets = vec![Vec::new(); m + 1];
    let mut delays = vec![Vec::new(); m + 1];
    for (i, group) in groups.iter().enumerate() {
        accepting.push(group.iter().map(|&v| g.vertex(v).accepting).collect::<Vec<_>>());
        rates.push(group.iter().map(|&v| g.vertex(v).location_rate).collect());
        for (a, &v) in group.iter().enumerate() {
            let vx = g.vertex(v);
            if vx.accepting {
                continue;
            }
            for e in &vx.markov {
                let (j, b) = position[e.target.0];
                if e.resets.is_empty() {
                    if j != i {
                        return Err(Error::Numerical(format!(
                            "edge without reset leaves interval {i} for {j}"
                        )));
                    }
                    markov[i].push((a, b, e.prob));
                } else {
                    if j != 0 {
                        return Err(Error::Numerical(format!(
                            "reset edge targets interval {j}, expected 0"
                        )));
                    }
                    resets[i].push((a, b, e.prob));
                }
            }
            if let Some(d) = vx.delay {
                let (j, b) = position[d.0];
                if i == m || j != i + 1 {
                    return Err(Error::Numerical(format!(
                        "delay edge from interval {i} into interval {j}"
                    )));
                }
                delays[i].push((a, b));
            }
        }
    }
    Ok(Partition {
        constants,
        groups,
        position,
        accepting,
        rates,
        markov,
        resets,
        delays,
    })
}

/// Jump matrix and rates of the chain for interval `i`: the group's
/// vertices, then absorbing copies of group 0, then an absorbing reject
/// state that collects the mass of jumps without an enabled edge.
fn augmented_parts(p: &Partition, i: usize) -> (DMatrix<f64>, Vec<f64>) {
    let k = p.groups[i].len();
    let k0 = p.groups[0].len();
    let n = k + k0 + 1;
    let reject = n - 1;
    let mut jump = DMatrix::zeros(n, n);
    let mut rates = vec![0.0; n];
    for a in 0..k {
        if !p.accepting[i][a] && p.rates[i][a] > 0.0 {
            rates[a] = p.rates[i][a];
        }
    }
    for &(a, b, prob) in &p.markov[i] {
        jump[(a, b)] += prob;
    }
    for &(a, b, prob) in &p.resets[i] {
        jump[(a, k + b)] += prob;
    }
    for s in 0..n {
        if rates[s] == 0.0 {
            jump.row_mut(s).fill(0.0);
            jump[(s, s)] = 1.0;
        } else {
            let out: f64 = jump.row(s).sum();
            jump[(s, reject)] = (1.0 - out).max(0.0);
        }
    }
    (jump, rates)
}

/// The chain of interval `i` as a [`Ctmc`]; states `v<id>`, `v<id>'` for the
/// absorbing copies of group 0, and `reject`.
pub fn augmented_ctmc(p: &Partition, i: usize) -> Result<Ctmc> {
    if i >= p.last() {
        return Err(Error::InvalidArgument(format!(
            "interval {i} has no finite width"
        )));
    }
    let (jump, rates) = augmented_parts(p, i);
    let names: Vec<String> = p.groups[i]
        .iter()
        .map(|v| format!("v{}", v.0))
        .chain(p.groups[0].iter().map(|v| format!("v{}'", v.0)))
        .chain(std::iter::once("reject".to_string()))
        .collect();
    let labels = vec![Default::default(); names.len()];
    Ctmc::new(names, labels, jump, rates, 0)
}

/// Transient matrices of one bounded interval.
#[derive(Debug, Clone)]
pub struct IntervalTransient {
    /// `k_i x k_i`: still inside the interval's group at its end.
    pub stay: DMatrix<f64>,
    /// `k_i x k_0`: absorbed in group 0 by a reset.
    pub reset: DMatrix<f64>,
}

/// Transients for all bounded intervals, computed in parallel; `eps` is
/// split evenly over them.
pub fn compute_transients(p: &Partition, eps: f64) -> Result<Vec<IntervalTransient>> {
    let m = p.last();
    let share = eps / (m.max(1)) as f64;
    (0..m)
        .into_par_iter()
        .map(|i| {
            let k = p.groups[i].len();
            let k0 = p.groups[0].len();
            let (jump, rates) = augmented_parts(p, i);
            let pi = transient_from_parts(&jump, &rates, p.width(i), share)?;
            Ok(IntervalTransient {
                stay: pi.view((0, 0), (k, k)).into_owned(),
                reset: pi.view((0, k), (k, k0)).into_owned(),
            })
        })
        .collect()
}

/// Entry values of all vertices, indexed by vertex id.
#[derive(Debug, Clone)]
pub struct Solution {
    pub values: Vec<f64>,
}

const RANGE_TOL: f64 = 1e-9;

/// Builds `x = A x + b` over all vertices and takes its least solution.
///
/// For a vertex of a bounded interval, `x_v` sums the transient mass that
/// stays in the group (worth 1 on accepting vertices, otherwise the value of
/// the delay successor) and the mass absorbed by resets. In the last
/// interval only jumps remain, weighted by their branch probabilities.
pub fn assemble_and_solve(p: &Partition, transients: &[IntervalTransient]) -> Result<Solution> {
    let n = p.position.len();
    let m = p.last();
    let mut a = DMatrix::zeros(n, n);
    let mut b = vec![0.0; n];
    let mut pinned = vec![false; n];
    let global = |i: usize, local: usize| p.groups[i][local].0;
    let add = |a: &mut DMatrix<f64>, b: &mut Vec<f64>, row: usize, i: usize, local: usize, w: f64| {
        if p.accepting[i][local] {
            b[row] += w;
        } else {
            a[(row, global(i, local))] += w;
        }
    };
    for i in 0..=m {
        let delay_of: Vec<Option<usize>> = {
            let mut d = vec![None; p.groups[i].len()];
            for &(from, to) in &p.delays[i] {
                d[from] = Some(to);
            }
            d
        };
        for (local, &v) in p.groups[i].iter().enumerate() {
            let row = v.0;
            if p.accepting[i][local] {
                pinned[row] = true;
                continue;
            }
            if i < m {
                let t = &transients[i];
                for u in 0..p.groups[i].len() {
                    let w = t.stay[(local, u)];
                    if w == 0.0 {
                        continue;
                    }
                    if p.accepting[i][u] {
                        b[row] += w;
                    } else if let Some(next) = delay_of[u] {
                        add(&mut a, &mut b, row, i + 1, next, w);
                    }
                }
                for u0 in 0..p.groups[0].len() {
                    let w = t.reset[(local, u0)];
                    if w != 0.0 {
                        add(&mut a, &mut b, row, 0, u0, w);
                    }
                }
            } else if p.rates[i][local] > 0.0 {
                for &(_, to, prob) in p.markov[i].iter().filter(|e| e.0 == local) {
                    add(&mut a, &mut b, row, i, to, prob);
                }
                for &(_, to, prob) in p.resets[i].iter().filter(|e| e.0 == local) {
                    add(&mut a, &mut b, row, 0, to, prob);
                }
            }
        }
    }
    let mut x = solve_least_fixpoint(&a, &b, &pinned)?;
    for (v, val) in x.iter_mut().enumerate() {
        if pinned[v] {
            *val = 1.0;
        }
        if !(*val >= -RANGE_TOL && *val <= 1.0 + RANGE_TOL) {
            return Err(Error::Numerical(format!(
                "vertex {v} got value {val} outside [0,1]"
            )));
        }
        *val = val.clamp(0.0, 1.0);
    }
    Ok(Solution { values: x })
}

/// Result of the interval engine on a region graph.
#[derive(Debug, Clone)]
pub struct GraphOutcome {
    pub probability: f64,
    pub vertices: usize,
    pub edges: usize,
    pub groups: usize,
}

/// Probability of reaching an accepting vertex from the initial vertex of a
/// simplified one-clock region graph. The graph is pruned first.
pub fn solve_region_graph(g: &RegionGraph, eps: f64) -> Result<GraphOutcome> {
    solve_region_graph_timed(g, eps, &mut PhaseTimer::start())
}

fn solve_region_graph_timed(g: &RegionGraph, eps: f64, timer: &mut PhaseTimer) -> Result<GraphOutcome> {
    let pruned = g.pruned();
    timer.lap("prune");
    let Some(init) = pruned.initial() else {
        return Ok(GraphOutcome {
            probability: 0.0,
            vertices: 0,
            edges: 0,
            groups: 0,
        });
    };
    let mut outcome = GraphOutcome {
        probability: 1.0,
        vertices: pruned.len(),
        edges: pruned.num_edges(),
        groups: 0,
    };
    if pruned.vertex(init).accepting {
        return Ok(outcome);
    }
    let p = partition_region_graph(&pruned)?;
    timer.lap("partition");
    let t = compute_transients(&p, eps)?;
    timer.lap("transients");
    let sol = assemble_and_solve(&p, &t)?;
    timer.lap("solve");
    outcome.groups = p.num_groups();
    outcome.probability = sol.values[init.0];
    Ok(outcome)
}

/// Full pipeline for a one-clock automaton with finite acceptance.
pub fn solve_single_clock(c: &crate::Ctmc, a: &Dta, eps: f64) -> Result<VerificationReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon {eps} must lie in (0,1)")));
    }
    if a.num_clocks() > 1 {
        return Err(Error::Unsupported(format!(
            "the single-clock engine needs at most one clock, the automaton has {}",
            a.num_clocks()
        )));
    }
    if !matches!(a.acceptance(), Acceptance::Finite(_)) {
        return Err(Error::Unsupported(
            "the single-clock engine needs finite acceptance".into(),
        ));
    }
    let mut timer = PhaseTimer::start();
    let validated = validate_dta(a)?;
    let m = build_product(c, &validated.dta)?;
    timer.lap("product");
    let g = RegionGraph::simplified(&m)?;
    timer.lap("region_graph");
    let out = solve_region_graph_timed(&g, eps, &mut timer)?;
    let mut report = VerificationReport::new(Method::SingleClock, "finite", out.probability);
    report.error_bound = Some(eps);
    report.stats = GraphStats {
        locations: m.num_locations(),
        vertices: out.vertices,
        edges: out.edges,
        subgraphs: Some(out.groups),
        accepting_bsccs: None,
    };
    report.timings_ms = timer.phases;
    report.warnings = validated.warnings;
    Ok(report)
}
