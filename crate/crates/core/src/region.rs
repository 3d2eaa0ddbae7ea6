//! Clock regions, region graphs of a DMTA and the piecewise-deterministic
//! process view of a region graph.
//!
//! Regions are built in the classic way (points where some clock sits on a
//! bound are regions of their own) and then merged: each such boundary
//! region is contracted into its time successor, so every remaining region
//! has positive duration. Vertices of accepting locations get no outgoing
//! edges.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::product::{Dmta, LocId};
use crate::timed::{ClockConstraint, ClockId, ClockValuation};

/// Per-clock region bounds `0 = b_0 < b_1 < ... < b_K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionSpace {
    bounds: Vec<Vec<u64>>,
}

/// Equivalence class of clock valuations.
///
/// `cells[x] = Some(k)` places clock `x` in `[b_k, b_{k+1})` (exactly at
/// `b_k` when it belongs to the zero class); `None` means above `b_K`.
/// `classes` orders the bounded clocks by their offset within the cell;
/// with `zero_first` the first class sits exactly on its bounds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Region {
    cells: Vec<Option<u32>>,
    classes: Vec<Vec<usize>>,
    zero_first: bool,
}

impl Region {
    /// Some clock sits exactly on a bound: the region has zero duration.
    pub fn is_boundary(&self) -> bool {
        self.zero_first
    }

    /// Every clock is above its largest bound.
    pub fn is_unbounded(&self) -> bool {
        self.cells.iter().all(|c| c.is_none())
    }

    /// Cell index of a clock, `None` above the last bound.
    pub fn cell(&self, x: ClockId) -> Option<u32> {
        self.cells[x.0]
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }
}

impl RegionSpace {
    pub fn new(bounds: Vec<Vec<u64>>) -> Result<Self> {
        for b in &bounds {
            if b.first() != Some(&0) || b.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "region bounds {b:?} must start at 0 and increase"
                )));
            }
        }
        // Fractional orderings only make sense for unit cells.
        let unit = |b: &Vec<u64>| b.iter().enumerate().all(|(i, &c)| c == i as u64);
        if bounds.len() > 1 && !bounds.iter().all(unit) {
            return Err(Error::InvalidArgument(
                "with several clocks, region bounds must be 0, 1, ..., c".into(),
            ));
        }
        Ok(RegionSpace { bounds })
    }

    /// Bounds for a DMTA. With one clock the bounds are the constants that
    /// occur in guards; with several clocks every integer up to the largest
    /// constant of any clock.
    pub fn for_dmta(m: &Dmta) -> Self {
        let n = m.num_clocks();
        let bounds = if n <= 1 {
            (0..n).map(|x| m.constants(ClockId(x))).collect()
        } else {
            let cmax = m.max_constants().into_iter().max().unwrap_or(0);
            vec![(0..=cmax).collect(); n]
        };
        RegionSpace { bounds }
    }

    pub fn num_clocks(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self, x: ClockId) -> &[u64] {
        &self.bounds[x.0]
    }

    fn last(&self, x: usize) -> u32 {
        (self.bounds[x].len() - 1) as u32
    }

    /// Region of the all-zero valuation (a boundary region when clocks exist).
    pub fn zero(&self) -> Region {
        let n = self.num_clocks();
        Region {
            cells: vec![Some(0); n],
            classes: if n > 0 { vec![(0..n).collect()] } else { vec![] },
            zero_first: n > 0,
        }
    }

    /// Time successor, or `None` when all clocks are above their bounds.
    pub fn successor(&self, r: &Region) -> Option<Region> {
        let mut next = r.clone();
        if r.zero_first {
            next.zero_first = false;
            let first = next.classes.remove(0);
            let mut stay = Vec::new();
            for x in first {
                if next.cells[x] == Some(self.last(x)) {
                    next.cells[x] = None;
                } else {
                    stay.push(x);
                }
            }
            if !stay.is_empty() {
                next.classes.insert(0, stay);
            }
            return Some(next);
        }
        let last = next.classes.pop()?;
        for &x in &last {
            next.cells[x] = next.cells[x].map(|k| k + 1);
        }
        next.classes.insert(0, last);
        next.zero_first = true;
        Some(next)
    }

    /// Region after resetting `clocks` to zero.
    pub fn reset(&self, r: &Region, clocks: &[ClockId]) -> Region {
        if clocks.is_empty() {
            return r.clone();
        }
        let mut next = r.clone();
        let reset: Vec<usize> = clocks.iter().map(|x| x.0).collect();
        for class in &mut next.classes {
            class.retain(|x| !reset.contains(x));
        }
        let had_zero = next.zero_first && !next.classes.is_empty() && !next.classes[0].is_empty();
        next.classes.retain(|c| !c.is_empty());
        for &x in &reset {
            next.cells[x] = Some(0);
        }
        if had_zero {
            next.classes[0].extend(reset);
            next.classes[0].sort_unstable();
            next.classes[0].dedup();
        } else {
            let mut z = reset;
            z.sort_unstable();
            z.dedup();
            next.classes.insert(0, z);
        }
        next.zero_first = true;
        next
    }

    /// Boundary regions are contracted into their successor.
    pub fn merge(&self, r: &Region) -> Region {
        if r.zero_first {
            self.successor(r).expect("boundary regions have a successor")
        } else {
            r.clone()
        }
    }

    /// A value of clock `x` inside region `r`, on the right side of every bound.
    fn witness(&self, r: &Region, x: usize) -> f64 {
        let b = &self.bounds[x];
        match r.cells[x] {
            None => *b.last().unwrap() as f64 + 1.0,
            Some(k) => {
                let k = k as usize;
                if r.zero_first && r.classes[0].contains(&x) {
                    b[k] as f64
                } else {
                    0.5 * (b[k] + b[k + 1]) as f64
                }
            }
        }
    }

    /// Whether every valuation of `r` satisfies `g`. Exact as long as all
    /// constants of `g` are bounds of this space.
    pub fn satisfies(&self, r: &Region, g: &ClockConstraint) -> bool {
        g.atoms().iter().all(|a| {
            a.op.holds(self.witness(r, a.clock.0), a.constant as f64)
        })
    }

    /// Classic region (boundary regions kept) containing `eta`.
    pub fn classic_region_of(&self, eta: &ClockValuation) -> Region {
        let placed = eta.values().iter().enumerate().map(|(x, &v)| {
            let b = &self.bounds[x];
            let top = *b.last().unwrap() as f64;
            if v > top {
                (None, 0.0)
            } else {
                let k = b.partition_point(|&c| c as f64 <= v) - 1;
                (Some(k as u32), v - b[k] as f64)
            }
        });
        assemble(placed.collect())
    }

    /// Classic region for integer clock values in units of `1/denominator`;
    /// exact, used on grid points.
    pub fn classic_region_of_units(&self, units: &[i64], denominator: i64) -> Region {
        let placed = units.iter().enumerate().map(|(x, &v)| {
            let b = &self.bounds[x];
            let top = *b.last().unwrap() as i64 * denominator;
            if v > top {
                (None, 0)
            } else {
                let k = b.partition_point(|&c| c as i64 * denominator <= v) - 1;
                (Some(k as u32), v - b[k] as i64 * denominator)
            }
        });
        assemble(placed.collect())
    }

    /// Canonical merged region containing `eta`.
    pub fn region_of(&self, eta: &ClockValuation) -> Region {
        self.merge(&self.classic_region_of(eta))
    }

    /// Time until `eta`, inside region `r`, leaves the region.
    pub fn boundary_hit_time(&self, r: &Region, eta: &ClockValuation) -> f64 {
        r.cells
            .iter()
            .enumerate()
            .filter_map(|(x, c)| {
                c.map(|k| {
                    let b = &self.bounds[x];
                    match b.get(k as usize + 1) {
                        Some(&next) => next as f64 - eta.get(ClockId(x)),
                        None => 0.0,
                    }
                })
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Uniformly drawn valuation inside `r` (for property tests).
    pub fn sample_point<R: Rng + ?Sized>(&self, r: &Region, rng: &mut R) -> ClockValuation {
        let n = self.num_clocks();
        // Dyadic offsets keep `b + offset - b == offset` exact, so equal
        // fractional parts stay equal after the shift.
        const DENOM: u32 = 1 << 20;
        let mut picks = std::collections::BTreeSet::new();
        while picks.len() < r.classes.len() {
            picks.insert(rng.random_range(1..DENOM));
        }
        let mut offsets: Vec<f64> = picks.into_iter().map(|k| k as f64 / DENOM as f64).collect();
        if r.zero_first {
            offsets[0] = 0.0;
        }
        let mut vals = vec![0.0; n];
        for (i, class) in r.classes.iter().enumerate() {
            for &x in class {
                let b = &self.bounds[x];
                let k = r.cells[x].unwrap() as usize;
                vals[x] = match b.get(k + 1) {
                    Some(&next) => b[k] as f64 + offsets[i] * (next - b[k]) as f64,
                    None => b[k] as f64,
                };
            }
        }
        for x in 0..n {
            if r.cells[x].is_none() {
                vals[x] = *self.bounds[x].last().unwrap() as f64 + 1e-9 + 5.0 * rng.random::<f64>();
            }
        }
        ClockValuation::new(vals).expect("nonnegative")
    }

    /// Human-readable description; merged regions read half-open from below.
    pub fn describe(&self, r: &Region, clocks: &[String]) -> String {
        let n = self.num_clocks();
        if n == 0 {
            return "true".into();
        }
        let mut parts = Vec::new();
        for x in 0..n {
            let b = &self.bounds[x];
            let name = &clocks[x];
            parts.push(match r.cells[x] {
                None => format!("{name}>={}", b.last().unwrap()),
                Some(k) => {
                    let k = k as usize;
                    let on_bound = r.zero_first && r.classes[0].contains(&x);
                    match (on_bound, b.get(k + 1)) {
                        (true, _) | (false, None) => format!("{name}={}", b[k]),
                        (false, Some(next)) => format!("{}<={name}<{next}", b[k]),
                    }
                }
            });
        }
        if n > 1 && r.classes.len() + usize::from(r.zero_first) > 1 || r.classes.iter().any(|c| c.len() > 1) {
            let order: Vec<String> = r
                .classes
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|&x| format!("frac({})", clocks[x]))
                        .collect::<Vec<_>>()
                        .join("=")
                })
                .collect();
            if n > 1 {
                parts.push(order.join("<"));
            }
        }
        parts.join(", ")
    }
}

fn assemble<T: PartialOrd + Copy + Default>(placed: Vec<(Option<u32>, T)>) -> Region {
    let cells: Vec<Option<u32>> = placed.iter().map(|p| p.0).collect();
    let mut bounded: Vec<(T, usize)> = placed
        .iter()
        .enumerate()
        .filter(|(_, p)| p.0.is_some())
        .map(|(x, p)| (p.1, x))
        .collect();
    bounded.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut keys: Vec<T> = Vec::new();
    for (key, x) in bounded {
        if keys.last() == Some(&key) {
            classes.last_mut().unwrap().push(x);
        } else {
            keys.push(key);
            classes.push(vec![x]);
        }
    }
    let zero_first = keys.first() == Some(&T::default());
    Region {
        cells,
        classes,
        zero_first,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovEdge {
    pub target: VertexId,
    pub prob: f64,
    pub resets: Vec<ClockId>,
    /// Index of the DMTA edge this edge comes from.
    pub origin: usize,
}

#[derive(Debug, Clone)]
pub struct Vertex {
    pub location: LocId,
    pub region: Region,
    /// Exit rate of the region graph: the location rate if the vertex has a
    /// Markovian edge, otherwise 0.
    pub rate: f64,
    /// Exit rate of the underlying location. Quantitative engines use this
    /// one: a jump that finds no enabled edge rejects the run.
    pub location_rate: f64,
    pub accepting: bool,
    pub delay: Option<VertexId>,
    pub markov: Vec<MarkovEdge>,
}

/// Region graph over `(location, region)` vertices.
#[derive(Debug, Clone)]
pub struct RegionGraph {
    space: RegionSpace,
    clocks: Vec<String>,
    location_names: Vec<String>,
    vertices: Vec<Vertex>,
    initial: Option<VertexId>,
    index: HashMap<(LocId, Region), VertexId>,
}

/// Builds the classic region graph reachable from `(l0, 0)`.
pub fn build_region_graph(m: &Dmta) -> RegionGraph {
    build_with_space(m, RegionSpace::for_dmta(m))
}

pub fn build_with_space(m: &Dmta, space: RegionSpace) -> RegionGraph {
    let mut index: HashMap<(LocId, Region), VertexId> = HashMap::new();
    let mut keys: Vec<(LocId, Region)> = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern = |key: (LocId, Region), keys: &mut Vec<(LocId, Region)>, queue: &mut VecDeque<usize>| {
        *index.entry(key.clone()).or_insert_with(|| {
            keys.push(key);
            queue.push_back(keys.len() - 1);
            VertexId(keys.len() - 1)
        })
    };
    intern((m.initial(), space.zero()), &mut keys, &mut queue);
    let mut vertices: Vec<Vertex> = Vec::new();
    while let Some(v) = queue.pop_front() {
        let (loc, region) = keys[v].clone();
        // Accepting vertices are absorbing: reachability is decided on entry.
        // Boundary ones keep their delay edge, which merging contracts.
        let accepting = m.is_accepting(loc);
        let delay = if accepting && !region.is_boundary() {
            None
        } else {
            space
                .successor(&region)
                .map(|r| intern((loc, r), &mut keys, &mut queue))
        };
        let mut markov = Vec::new();
        let out = m.edges().iter().enumerate().filter(|(_, e)| e.source == loc && !accepting);
        for (origin, e) in out {
            if !space.satisfies(&region, &e.guard) {
                continue;
            }
            let reset = space.reset(&region, &e.resets);
            for &(target, prob) in &e.targets {
                let t = intern((target, reset.clone()), &mut keys, &mut queue);
                markov.push(MarkovEdge {
                    target: t,
                    prob,
                    resets: e.resets.clone(),
                    origin,
                });
            }
        }
        let location_rate = m.rate(loc);
        let vertex = Vertex {
            location: loc,
            region,
            rate: if markov.is_empty() { 0.0 } else { location_rate },
            location_rate,
            accepting,
            delay,
            markov,
        };
        if v == vertices.len() {
            vertices.push(vertex);
        } else {
            unreachable!("vertices are processed in creation order");
        }
    }
    let location_names = (0..m.num_locations())
        .map(|l| m.name(LocId(l)).to_string())
        .collect();
    RegionGraph::from_parts(
        space,
        m.clocks().to_vec(),
        location_names,
        vertices,
        Some(VertexId(0)),
    )
}

/// Contracts boundary vertices into their time successors and drops the
/// Markovian edges leaving them; keeps the part reachable from the merged
/// initial vertex.
pub fn simplify_region_graph(g: &RegionGraph) -> Result<RegionGraph> {
    let rep = |v: VertexId| -> Result<VertexId> {
        let vx = &g.vertices[v.0];
        if vx.region.is_boundary() {
            vx.delay.ok_or_else(|| {
                Error::Numerical(format!("boundary vertex {} has no delay successor", v.0))
            })
        } else {
            Ok(v)
        }
    };
    let Some(init) = g.initial else {
        return Ok(g.clone());
    };
    let start = rep(init)?;
    let mut new_id: HashMap<VertexId, VertexId> = HashMap::new();
    let mut order = vec![start];
    new_id.insert(start, VertexId(0));
    let mut i = 0;
    while i < order.len() {
        let v = &g.vertices[order[i].0];
        let succ = v
            .delay
            .into_iter()
            .chain(v.markov.iter().map(|e| e.target));
        for t in succ {
            let t = rep(t)?;
            if !new_id.contains_key(&t) {
                new_id.insert(t, VertexId(order.len()));
                order.push(t);
            }
        }
        i += 1;
    }
    let mut vertices = Vec::with_capacity(order.len());
    for &old in &order {
        let v = &g.vertices[old.0];
        let delay = match v.delay {
            Some(d) => Some(new_id[&rep(d)?]),
            None => None,
        };
        let markov = v
            .markov
            .iter()
            .map(|e| {
                Ok(MarkovEdge {
                    target: new_id[&rep(e.target)?],
                    ..e.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        vertices.push(Vertex {
            delay,
            markov,
            ..v.clone()
        });
    }
    Ok(RegionGraph::from_parts(
        g.space.clone(),
        g.clocks.clone(),
        g.location_names.clone(),
        vertices,
        Some(VertexId(0)),
    ))
}

impl RegionGraph {
    fn from_parts(
        space: RegionSpace,
        clocks: Vec<String>,
        location_names: Vec<String>,
        vertices: Vec<Vertex>,
        initial: Option<VertexId>,
    ) -> Self {
        let index = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| ((v.location, v.region.clone()), VertexId(i)))
            .collect();
        RegionGraph {
            space,
            clocks,
            location_names,
            vertices,
            initial,
            index,
        }
    }

    /// Region graph of `m` after merging boundary regions.
    pub fn simplified(m: &Dmta) -> Result<RegionGraph> {
        simplify_region_graph(&build_region_graph(m))
    }

    pub fn space(&self) -> &RegionSpace {
        &self.space
    }

    pub fn clocks(&self) -> &[String] {
        &self.clocks
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v.0]
    }

    /// `None` when the initial vertex was pruned away.
    pub fn initial(&self) -> Option<VertexId> {
        self.initial
    }

    pub fn location_name(&self, l: LocId) -> &str {
        &self.location_names[l.0]
    }

    pub fn vertex_of(&self, loc: LocId, region: &Region) -> Option<VertexId> {
        self.index.get(&(loc, region.clone())).copied()
    }

    pub fn accepting(&self) -> Vec<bool> {
        self.vertices.iter().map(|v| v.accepting).collect()
    }

    pub fn num_edges(&self) -> usize {
        self.vertices
            .iter()
            .map(|v| v.markov.len() + usize::from(v.delay.is_some()))
            .sum()
    }

    /// Same graph with a different accepting set.
    pub fn with_accepting(&self, accepting: &[bool]) -> RegionGraph {
        let mut g = self.clone();
        for (v, &a) in g.vertices.iter_mut().zip(accepting) {
            v.accepting = a;
        }
        g
    }

    /// Successor lists over delay and Markovian edges.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.vertices
            .iter()
            .map(|v| {
                let mut s: Vec<usize> = v
                    .delay
                    .iter()
                    .map(|d| d.0)
                    .chain(v.markov.iter().map(|e| e.target.0))
                    .collect();
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect()
    }

    /// Vertices from which an accepting vertex is reachable.
    pub fn can_reach_accepting(&self) -> Vec<bool> {
        let n = self.len();
        let mut pred = vec![Vec::new(); n];
        for (u, succ) in self.adjacency().iter().enumerate() {
            for &v in succ {
                pred[v].push(u);
            }
        }
        let mut mark: Vec<bool> = self.accepting();
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| mark[v]).collect();
        while let Some(v) = queue.pop_front() {
            for &u in &pred[v] {
                if !mark[u] {
                    mark[u] = true;
                    queue.push_back(u);
                }
            }
        }
        mark
    }

    /// Vertices reachable from the initial vertex.
    pub fn reachable(&self) -> Vec<bool> {
        let adj = self.adjacency();
        let mut mark = vec![false; self.len()];
        let Some(init) = self.initial else {
            return mark;
        };
        mark[init.0] = true;
        let mut queue = VecDeque::from([init.0]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !mark[v] {
                    mark[v] = true;
                    queue.push_back(v);
                }
            }
        }
        mark
    }

    /// Keeps vertices that are reachable from the initial vertex and can
    /// reach an accepting vertex; edges into removed vertices disappear.
    pub fn pruned(&self) -> RegionGraph {
        let fwd = self.reachable();
        let bwd = self.can_reach_accepting();
        let keep: Vec<bool> = fwd.iter().zip(&bwd).map(|(a, b)| *a && *b).collect();
        let mut new_id = vec![None; self.len()];
        let mut count = 0;
        for v in 0..self.len() {
            if keep[v] {
                new_id[v] = Some(VertexId(count));
                count += 1;
            }
        }
        let vertices = self
            .vertices
            .iter()
            .enumerate()
            .filter(|(i, _)| keep[*i])
            .map(|(_, v)| Vertex {
                delay: v.delay.and_then(|d| new_id[d.0]),
                markov: v
                    .markov
                    .iter()
                    .filter_map(|e| {
                        new_id[e.target.0].map(|t| MarkovEdge {
                            target: t,
                            ..e.clone()
                        })
                    })
                    .collect(),
                ..v.clone()
            })
            .collect();
        let initial = self.initial.and_then(|i| new_id[i.0]);
        RegionGraph::from_parts(
            self.space.clone(),
            self.clocks.clone(),
            self.location_names.clone(),
            vertices,
            initial,
        )
    }

    pub fn describe_region(&self, v: VertexId) -> String {
        self.space.describe(&self.vertices[v.0].region, &self.clocks)
    }

    /// Graphviz rendering; vertex labels read `location | region | rate`.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph region_graph {\n  node [shape=box];\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let style = if v.accepting { ", style=bold" } else { "" };
            let _ = writeln!(
                out,
                "  v{i} [label=\"v{i}: {} | {} | {}\"{style}];",
                self.location_names[v.location.0],
                self.describe_region(VertexId(i)),
                v.rate
            );
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if let Some(d) = v.delay {
                let _ = writeln!(out, "  v{i} -> v{} [style=dashed, label=\"delay\"];", d.0);
            }
            for e in &v.markov {
                let resets: Vec<&str> = e.resets.iter().map(|x| self.clocks[x.0].as_str()).collect();
                let _ = writeln!(
                    out,
                    "  v{i} -> v{} [label=\"{} {{{}}}\"];",
                    e.target.0,
                    e.prob,
                    resets.join(",")
                );
            }
        }
        out.push_str("}\n");
        out
    }

    /// Time until the valuation of `st` leaves its vertex's region.
    pub fn boundary_hit_time(&self, st: &PdpState) -> f64 {
        self.space
            .boundary_hit_time(&self.vertices[st.vertex.0].region, &st.valuation)
    }

    /// One-step probability of the embedded jump chain from `st` into
    /// `targets`, with the region-graph rates.
    pub fn jump_probability(&self, st: &PdpState, targets: &[bool]) -> f64 {
        let v = &self.vertices[st.vertex.0];
        let inside: f64 = v
            .markov
            .iter()
            .filter(|e| targets[e.target.0])
            .map(|e| e.prob)
            .sum();
        let at_boundary = match v.delay {
            Some(d) if targets[d.0] => 1.0,
            _ => 0.0,
        };
        let hit = self.boundary_hit_time(st);
        embedded_jump_probability(
            hit,
            v.rate,
            &[MassPiece {
                until: hit,
                mass: inside,
            }],
            at_boundary,
        )
    }

    /// True if some Markovian jump could return to the very same process
    /// state (a self-loop that resets nothing).
    pub fn has_stationary_jumps(&self) -> bool {
        self.vertices.iter().enumerate().any(|(i, v)| {
            v.markov
                .iter()
                .any(|e| e.target.0 == i && e.resets.is_empty() && e.prob > 0.0)
        })
    }
}

/// State of the piecewise-deterministic process: a vertex and a valuation
/// inside its region. Time flows as `eta + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdpState {
    pub vertex: VertexId,
    pub valuation: ClockValuation,
}

impl PdpState {
    pub fn flow(&self, t: f64) -> ClockValuation {
        self.valuation.delayed(t)
    }
}

/// Probability mass `mass` of jumping into the target set for jump times
/// before `until` (and after the previous piece).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassPiece {
    pub until: f64,
    pub mass: f64,
}

/// One-jump probability of the embedded chain: the integral over
/// `[0, hit_time)` of `mass(t) * rate * e^{-rate t}` plus
/// `boundary_mass * e^{-rate * hit_time}` for the forced jump at the
/// boundary. `mass` is piecewise constant as given by `pieces`.
pub fn embedded_jump_probability(
    hit_time: f64,
    rate: f64,
    pieces: &[MassPiece],
    boundary_mass: f64,
) -> f64 {
    let mut total = 0.0;
    let mut start = 0.0_f64;
    for piece in pieces {
        let end = piece.until.min(hit_time);
        if end > start && rate > 0.0 {
            let tail = if end.is_finite() { (-rate * end).exp() } else { 0.0 };
            total += piece.mass * ((-rate * start).exp() - tail);
        }
        start = start.max(end);
    }
    if hit_time.is_finite() {
        total += boundary_mass * (-rate * hit_time).exp();
    }
    total
}
