//! Muller acceptance through accepting bottom SCCs of the region graph, and
//! qualitative (graph-only) checks.
//!
//! A run that enters a bottom SCC stays there and visits each of its
//! vertices infinitely often, so the Muller probability is the probability
//! of reaching an accepting bottom SCC.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::grid::{grid_report, value_iterate, GridSpec};
use crate::markov::{bottom_sccs, Ctmc};
use crate::product::{build_product, Dmta, ProductAcceptance};
use crate::region::{RegionGraph, VertexId};
use crate::report::{GraphStats, Method, PhaseTimer, QualitativeSummary, VerificationReport};
use crate::single_clock::solve_region_graph;
use crate::timed::{validate_dta, Acceptance, Dta};

/// How a bottom SCC is matched against a family member `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MullerMode {
    /// The automaton locations occurring in the SCC are exactly `F`.
    #[default]
    Exact,
    /// Every vertex's automaton location lies in `F`.
    Containment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptingBscc {
    pub vertices: Vec<VertexId>,
    /// Index of the matching family member.
    pub member: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptingBsccSet {
    pub bsccs: Vec<AcceptingBscc>,
    /// Membership flag per vertex of the union of all accepting SCCs.
    pub union: Vec<bool>,
}

/// Successor lists used by the graph analyses: Markovian edges of vertices
/// that never jump are dropped, and a vertex that jumps without any enabled
/// edge gets an edge to an extra reject vertex (the last index).
fn jump_aware_adjacency(g: &RegionGraph) -> Vec<Vec<usize>> {
    let reject = g.len();
    let mut adj: Vec<Vec<usize>> = g
        .vertices()
        .iter()
        .map(|v| {
            let mut s: Vec<usize> = v.delay.iter().map(|d| d.0).collect();
            if v.location_rate > 0.0 {
                if v.markov.is_empty() {
                    if !v.accepting {
                        s.push(reject);
                    }
                } else {
                    s.extend(v.markov.iter().map(|e| e.target.0));
                }
            }
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect();
    adj.push(Vec::new());
    adj
}

/// Successor lists under the region-graph rate rule: a vertex without an
/// enabled Markovian edge only lets time pass.
fn rate_rule_adjacency(g: &RegionGraph) -> Vec<Vec<usize>> {
    g.vertices()
        .iter()
        .map(|v| {
            let mut s: Vec<usize> = v.delay.iter().map(|d| d.0).collect();
            if v.location_rate > 0.0 {
                s.extend(v.markov.iter().map(|e| e.target.0));
            }
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect()
}

/// Vertices of `vertices` where the chain can jump but no edge is enabled.
pub fn blocking_vertices(g: &RegionGraph, vertices: &[VertexId]) -> Vec<VertexId> {
    vertices
        .iter()
        .copied()
        .filter(|v| {
            let vx = g.vertex(*v);
            vx.location_rate > 0.0 && vx.markov.is_empty()
        })
        .collect()
}

/// Accepting bottom SCCs of a simplified region graph of `m`. SCCs are
/// taken under the region-graph rate rule, so a vertex where a jump would
/// find no enabled edge does not leave its SCC; see [`blocking_vertices`].
pub fn accepting_bsccs(m: &Dmta, g: &RegionGraph, mode: MullerMode) -> AcceptingBsccSet {
    let family = match m.acceptance() {
        ProductAcceptance::Muller(f) => f.clone(),
        ProductAcceptance::Finite(_) => Vec::new(),
    };
    let mut union = vec![false; g.len()];
    let mut bsccs = Vec::new();
    if family.is_empty() {
        return AcceptingBsccSet { bsccs, union };
    }
    for comp in bottom_sccs(&rate_rule_adjacency(g)) {
        let locs: BTreeSet<usize> = comp
            .iter()
            .map(|&v| m.pair(g.vertex(VertexId(v)).location).1)
            .collect();
        let matched = family.iter().position(|f| match mode {
            MullerMode::Exact => *f == locs,
            MullerMode::Containment => locs.is_subset(f),
        });
        if let Some(member) = matched {
            for &v in &comp {
                union[v] = true;
            }
            bsccs.push(AcceptingBscc {
                vertices: comp.into_iter().map(VertexId).collect(),
                member,
            });
        }
    }
    AcceptingBsccSet { bsccs, union }
}

/// Per vertex: `Some(accepting)` for members of a bottom SCC, else `None`.
pub fn bscc_membership(m: &Dmta, g: &RegionGraph, mode: MullerMode) -> Vec<Option<bool>> {
    let accepting = accepting_bsccs(m, g, mode).union;
    let mut out = vec![None; g.len()];
    for comp in bottom_sccs(&rate_rule_adjacency(g)) {
        for v in comp {
            out[v] = Some(accepting[v]);
        }
    }
    out
}

/// Engine used for the reachability part of a Muller check.
#[derive(Debug, Clone, PartialEq)]
pub enum MullerEngine {
    SingleClock { epsilon: f64 },
    Grid(GridSpec),
}

/// Probability that the run of `a` on `c` is Muller-accepting.
pub fn check_muller(c: &Ctmc, a: &Dta, engine: &MullerEngine, mode: MullerMode) -> Result<VerificationReport> {
    if !matches!(a.acceptance(), Acceptance::Muller(_)) {
        return Err(Error::Unsupported(
            "the Muller check needs a Muller acceptance family".into(),
        ));
    }
    if matches!(engine, MullerEngine::SingleClock { .. }) && a.num_clocks() > 1 {
        return Err(Error::Unsupported(format!(
            "the single-clock engine needs at most one clock, the automaton has {}",
            a.num_clocks()
        )));
    }
    let mut timer = PhaseTimer::start();
    let validated = validate_dta(a)?;
    let m = build_product(c, &validated.dta)?;
    timer.lap("product");
    let g = RegionGraph::simplified(&m)?;
    timer.lap("region_graph");
    let set = accepting_bsccs(&m, &g, mode);
    let other = accepting_bsccs(
        &m,
        &g,
        match mode {
            MullerMode::Exact => MullerMode::Containment,
            MullerMode::Containment => MullerMode::Exact,
        },
    );
    timer.lap("bsccs");
    let mut warnings = validated.warnings;
    let blocking: usize = set
        .bsccs
        .iter()
        .map(|b| blocking_vertices(&g, &b.vertices).len())
        .sum();
    if blocking > 0 {
        warnings.push(format!(
            "{blocking} vertices of accepting bottom SCCs have no enabled edge for a jump; \
             following the region graph, such jumps are not counted as leaving the SCC"
        ));
    }
    if other.union != set.union {
        warnings.push(
            "exact and containment matching of bottom SCCs disagree on this model".into(),
        );
    }
    let mut report = match engine {
        MullerEngine::SingleClock { epsilon } => {
            let marked = g.with_accepting(&set.union);
            let out = solve_region_graph(&marked, *epsilon)?;
            timer.lap("solve");
            let mut r = VerificationReport::new(Method::SingleClock, "muller", out.probability);
            r.error_bound = Some(*epsilon);
            r.stats = GraphStats {
                locations: m.num_locations(),
                vertices: g.len(),
                edges: g.num_edges(),
                subgraphs: Some(out.groups),
                accepting_bsccs: None,
            };
            r.timings_ms = timer.phases;
            r
        }
        MullerEngine::Grid(spec) => {
            let out = value_iterate(&m, &g, &set.union, spec)?;
            timer.lap("value_iteration");
            grid_report(&m, &g, &out, spec, "muller", timer)
        }
    };
    report.stats.accepting_bsccs = Some(set.bsccs.len());
    report.warnings.extend(warnings);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualitativeMode {
    /// Acceptance has positive probability.
    Positive,
    /// Acceptance has probability one.
    AlmostSure,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// Path of vertices from the initial vertex to a target.
    Path(Vec<VertexId>),
    /// A vertex reachable while avoiding the targets from which no target
    /// is reachable; `None` stands for the reject sink.
    Violation(Option<VertexId>),
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualitativeOutcome {
    pub holds: bool,
    pub witness: Witness,
}

/// Graph-only check on the simplified region graph with the given targets.
pub fn qualitative_on_graph(g: &RegionGraph, targets: &[bool], mode: QualitativeMode) -> QualitativeOutcome {
    let Some(init) = g.initial() else {
        return QualitativeOutcome {
            holds: false,
            witness: Witness::None,
        };
    };
    let n = g.len();
    let mut adj = jump_aware_adjacency(g);
    for v in 0..n {
        if targets[v] {
            adj[v].clear();
        }
    }
    let is_target = |v: usize| v < n && targets[v];
    // Forward search that does not expand targets.
    let mut parent = vec![usize::MAX; n + 1];
    let mut seen = vec![false; n + 1];
    seen[init.0] = true;
    let mut queue = VecDeque::from([init.0]);
    let mut found = None;
    while let Some(u) = queue.pop_front() {
        if is_target(u) {
            found.get_or_insert(u);
            continue;
        }
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = u;
                queue.push_back(w);
            }
        }
    }
    match mode {
        QualitativeMode::Positive => match found {
            Some(t) => {
                let mut path = vec![VertexId(t)];
                let mut cur = t;
                while parent[cur] != usize::MAX {
                    cur = parent[cur];
                    path.push(VertexId(cur));
                }
                path.reverse();
                QualitativeOutcome {
                    holds: true,
                    witness: Witness::Path(path),
                }
            }
            None => QualitativeOutcome {
                holds: false,
                witness: Witness::None,
            },
        },
        QualitativeMode::AlmostSure => {
            let mut pred = vec![Vec::new(); n + 1];
            for (u, succ) in adj.iter().enumerate() {
                for &w in succ {
                    pred[w].push(u);
                }
            }
            let mut good = vec![false; n + 1];
            let mut queue: VecDeque<usize> = (0..n).filter(|&v| targets[v]).collect();
            for &v in &queue {
                good[v] = true;
            }
            while let Some(v) = queue.pop_front() {
                for &u in &pred[v] {
                    if !good[u] {
                        good[u] = true;
                        queue.push_back(u);
                    }
                }
            }
            match (0..=n).find(|&v| seen[v] && !good[v]) {
                Some(v) => QualitativeOutcome {
                    holds: false,
                    witness: Witness::Violation((v < n).then_some(VertexId(v))),
                },
                None => QualitativeOutcome {
                    holds: true,
                    witness: Witness::None,
                },
            }
        }
    }
}

/// Positive or almost-sure acceptance of `a` on `c`, from graph analysis
/// alone. Muller automata use their accepting bottom SCCs as targets.
pub fn qualitative_check(
    c: &Ctmc,
    a: &Dta,
    mode: QualitativeMode,
    muller_mode: MullerMode,
) -> Result<(QualitativeOutcome, VerificationReport)> {
    let mut timer = PhaseTimer::start();
    let validated = validate_dta(a)?;
    let m = build_product(c, &validated.dta)?;
    let g = RegionGraph::simplified(&m)?;
    timer.lap("region_graph");
    let (targets, acceptance) = match a.acceptance() {
        Acceptance::Finite(_) => (g.accepting(), "finite"),
        Acceptance::Muller(_) => (accepting_bsccs(&m, &g, muller_mode).union, "muller"),
    };
    let outcome = qualitative_on_graph(&g, &targets, mode);
    timer.lap("graph_search");
    let describe = |v: VertexId| {
        format!(
            "{} [{}]",
            g.location_name(g.vertex(v).location),
            g.describe_region(v)
        )
    };
    let witness = match &outcome.witness {
        Witness::Path(p) => p.iter().map(|&v| describe(v)).collect::<Vec<_>>().join(" -> "),
        Witness::Violation(Some(v)) => format!("cannot reach acceptance from {}", describe(*v)),
        Witness::Violation(None) => "a jump can find no enabled edge".into(),
        Witness::None => String::new(),
    };
    let mut report = VerificationReport::new(
        Method::Qualitative,
        acceptance,
        if outcome.holds { 1.0 } else { 0.0 },
    );
    report.qualitative = Some(QualitativeSummary {
        mode: match mode {
            QualitativeMode::Positive => "positive".into(),
            QualitativeMode::AlmostSure => "almost_sure".into(),
        },
        holds: outcome.holds,
        witness,
    });
    report.stats = GraphStats {
        locations: m.num_locations(),
        vertices: g.len(),
        edges: g.num_edges(),
        subgraphs: None,
        accepting_bsccs: None,
    };
    report.timings_ms = timer.phases;
    report.warnings = validated.warnings;
    Ok((outcome, report))
}
