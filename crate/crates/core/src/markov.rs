//! Finite labelled CTMCs and DTMCs: transient analysis by uniformization,
//! reachability by linear equations, bottom SCCs and path sampling.

use std::collections::{BTreeSet, HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Exp;

use crate::error::{Error, Result};

/// Tolerance on row sums of stochastic matrices.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Set of atomic propositions holding in a state.
pub type Label = BTreeSet<String>;

/// Finite labelled continuous-time Markov chain with a single initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Ctmc {
    names: Vec<String>,
    labels: Vec<Label>,
    jump: DMatrix<f64>,
    rates: Vec<f64>,
    initial: usize,
}

impl Ctmc {
    pub fn new(
        names: Vec<String>,
        labels: Vec<Label>,
        jump: DMatrix<f64>,
        rates: Vec<f64>,
        initial: usize,
    ) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::InvalidModel("CTMC has no states".into()));
        }
        if labels.len() != n || rates.len() != n || jump.nrows() != n || jump.ncols() != n {
            return Err(Error::InvalidModel(format!(
                "dimension mismatch: {n} states, {} labels, {} rates, {}x{} jump matrix",
                labels.len(),
                rates.len(),
                jump.nrows(),
                jump.ncols()
            )));
        }
        if initial >= n {
            return Err(Error::InvalidModel(format!(
                "initial state index {initial} out of range"
            )));
        }
        let mut seen = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if let Some(j) = seen.insert(name.as_str(), i) {
                return Err(Error::InvalidModel(format!(
                    "duplicate state id {name} (states {j} and {i})"
                )));
            }
        }
        for (i, &rate) in rates.iter().enumerate() {
            if !rate.is_finite() || rate < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "state {}: exit rate {rate} must be finite and nonnegative",
                    names[i]
                )));
            }
        }
        check_stochastic(&jump, |i| names[i].clone())?;
        Ok(Ctmc {
            names,
            labels,
            jump,
            rates,
            initial,
        })
    }

    pub fn builder() -> CtmcBuilder {
        CtmcBuilder::default()
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, s: usize) -> &str {
        &self.names[s]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn label(&self, s: usize) -> &Label {
        &self.labels[s]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn jump_matrix(&self) -> &DMatrix<f64> {
        &self.jump
    }

    pub fn rate(&self, s: usize) -> f64 {
        self.rates[s]
    }

    pub fn exit_rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    /// Successors of `s` with positive jump probability.
    pub fn successors(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.num_states())
            .map(move |t| (t, self.jump[(s, t)]))
            .filter(|&(_, p)| p > 0.0)
    }

    /// Same chain with every exit rate multiplied by `factor`.
    pub fn with_rates_scaled(&self, factor: f64) -> Ctmc {
        let mut c = self.clone();
        for r in &mut c.rates {
            *r *= factor;
        }
        c
    }

    /// Infinitesimal generator `Q = E P - E`.
    pub fn generator(&self) -> GeneratorMatrix {
        let n = self.num_states();
        let mut q = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                q[(i, j)] = self.rates[i] * self.jump[(i, j)];
            }
            q[(i, i)] -= self.rates[i];
        }
        GeneratorMatrix(q)
    }
}

fn check_stochastic(m: &DMatrix<f64>, name: impl Fn(usize) -> String) -> Result<()> {
    for i in 0..m.nrows() {
        let mut sum = 0.0;
        for j in 0..m.ncols() {
            let p = m[(i, j)];
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidModel(format!(
                    "state {}: transition probability {p} outside [0,1]",
                    name(i)
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidModel(format!(
                "state {}: outgoing probabilities sum to {sum}, expected 1",
                name(i)
            )));
        }
    }
    Ok(())
}

/// Incremental construction of a [`Ctmc`] by state names.
#[derive(Debug, Default, Clone)]
pub struct CtmcBuilder {
    names: Vec<String>,
    labels: Vec<Label>,
    rates: Vec<f64>,
    transitions: Vec<(String, String, f64)>,
    initial: Option<String>,
}

impl CtmcBuilder {
    pub fn state(mut self, name: &str, labels: &[&str], rate: f64) -> Self {
        self.names.push(name.to_string());
        self.labels
            .push(labels.iter().map(|s| s.to_string()).collect());
        self.rates.push(rate);
        self
    }

    pub fn transition(mut self, from: &str, to: &str, prob: f64) -> Self {
        self.transitions
            .push((from.to_string(), to.to_string(), prob));
        self
    }

    pub fn initial(mut self, name: &str) -> Self {
        self.initial = Some(name.to_string());
        self
    }

    pub fn build(self) -> Result<Ctmc> {
        let n = self.names.len();
        let index = |name: &str| {
            self.names
                .iter()
                .position(|x| x == name)
                .ok_or_else(|| Error::InvalidModel(format!("unknown state {name}")))
        };
        let mut jump = DMatrix::zeros(n, n);
        for (from, to, p) in &self.transitions {
            jump[(index(from)?, index(to)?)] += *p;
        }
        let initial = match &self.initial {
            Some(name) => index(name)?,
            None => 0,
        };
        Ctmc::new(self.names, self.labels, jump, self.rates, initial)
    }
}

/// Discrete-time Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Dtmc {
    jump: DMatrix<f64>,
    initial: usize,
}

impl Dtmc {
    pub fn new(jump: DMatrix<f64>, initial: usize) -> Result<Self> {
        if jump.nrows() != jump.ncols() || initial >= jump.nrows() {
            return Err(Error::InvalidModel("malformed DTMC".into()));
        }
        check_stochastic(&jump, |i| i.to_string())?;
        Ok(Dtmc { jump, initial })
    }

    pub fn jump_matrix(&self) -> &DMatrix<f64> {
        &self.jump
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn num_states(&self) -> usize {
        self.jump.nrows()
    }
}

/// Embedded jump chain: the CTMC with exit rates dropped.
pub fn embedded_dtmc(c: &Ctmc) -> Dtmc {
    Dtmc {
        jump: c.jump.clone(),
        initial: c.initial,
    }
}

/// Generator matrix: rows sum to zero, off-diagonal entries nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix(DMatrix<f64>);

impl GeneratorMatrix {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::InvalidModel("generator must be square".into()));
        }
        for i in 0..q.nrows() {
            let mut sum = 0.0;
            for j in 0..q.ncols() {
                if i != j && q[(i, j)] < 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "generator entry ({i},{j}) is negative"
                    )));
                }
                sum += q[(i, j)];
            }
            if sum.abs() > ROW_SUM_TOL * (1.0 + q[(i, i)].abs()) {
                return Err(Error::InvalidModel(format!(
                    "generator row {i} sums to {sum}"
                )));
            }
        }
        Ok(GeneratorMatrix(q))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Largest Poisson parameter handled in one uniformization step; longer
/// horizons are split and the pieces multiplied.
const MAX_POISSON_MEAN: f64 = 30.0;

/// Transient probability matrix `Pi(t)` by uniformization. Row `j` holds the
/// distribution at time `t` when starting in `j`; each row loses at most
/// `eps` probability mass to truncation.
pub fn transient_matrix(c: &Ctmc, t: f64, eps: f64) -> Result<DMatrix<f64>> {
    transient_from_parts(&c.jump, &c.rates, t, eps)
}

pub(crate) fn transient_from_parts(
    jump: &DMatrix<f64>,
    rates: &[f64],
    t: f64,
    eps: f64,
) -> Result<DMatrix<f64>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "truncation error {eps} must lie in (0,1)"
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time {t} must be finite and nonnegative"
        )));
    }
    let n = rates.len();
    if t == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let max_rate = rates.iter().cloned().fold(0.0, f64::max);
    let q = if max_rate > 0.0 { max_rate } else { 1e-12 };
    let mut unif = DMatrix::zeros(n, n);
    for i in 0..n {
        let ratio = rates[i] / q;
        for j in 0..n {
            unif[(i, j)] = ratio * jump[(i, j)];
        }
        unif[(i, i)] += 1.0 - ratio;
    }
    let pieces = ((q * t) / MAX_POISSON_MEAN).ceil().max(1.0) as u32;
    let lambda = q * t / pieces as f64;
    let piece = poisson_mixture(&unif, lambda, eps / pieces as f64);
    Ok(matrix_power(&piece, pieces))
}

fn poisson_mixture(unif: &DMatrix<f64>, lambda: f64, eps: f64) -> DMatrix<f64> {
    let n = unif.nrows();
    let cap = (lambda + 12.0 * lambda.sqrt() + 60.0) as usize;
    let mut weight = (-lambda).exp();
    let mut term = DMatrix::identity(n, n);
    let mut acc = &term * weight;
    let mut mass = weight;
    let mut k = 0;
    while mass < 1.0 - eps && k < cap {
        k += 1;
        term = &term * unif;
        weight *= lambda / k as f64;
        acc += &term * weight;
        mass += weight;
    }
    acc
}

fn matrix_power(m: &DMatrix<f64>, mut e: u32) -> DMatrix<f64> {
    let n = m.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut base = m.clone();
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

/// States that can reach `targets` in the directed graph of positive entries.
pub(crate) fn can_reach(m: &DMatrix<f64>, targets: &[bool]) -> Vec<bool> {
    let n = m.nrows();
    let mut reach = targets.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| targets[i]).collect();
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !reach[i] && m[(i, j)] > 0.0 {
                reach[i] = true;
                queue.push_back(i);
            }
        }
    }
    reach
}

/// Probability of eventually reaching `targets` from every state.
pub fn dtmc_reachability(d: &Dtmc, targets: &[usize]) -> Result<Vec<f64>> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("target set is empty".into()));
    }
    let n = d.num_states();
    let mut is_target = vec![false; n];
    for &t in targets {
        if t >= n {
            return Err(Error::InvalidArgument(format!("target {t} out of range")));
        }
        is_target[t] = true;
    }
    let b: Vec<f64> = (0..n)
        .map(|i| {
            if is_target[i] {
                0.0
            } else {
                (0..n).filter(|&j| is_target[j]).map(|j| d.jump[(i, j)]).sum()
            }
        })
        .collect();
    let mut a = d.jump.clone();
    for j in 0..n {
        if is_target[j] {
            for i in 0..n {
                a[(i, j)] = 0.0;
            }
        }
    }
    let x = solve_least_fixpoint(&a, &b, &is_target)?;
    // LU leaves rounding noise of a few ulps around 0 and 1.
    Ok((0..n)
        .map(|i| if is_target[i] { 1.0 } else { x[i].clamp(0.0, 1.0) })
        .collect())
}

/// Least solution of `x = A x + b` for a substochastic `A` and `b >= 0`.
/// Unknowns that cannot reach a positive `b` entry are fixed to zero and
/// `pinned` unknowns are excluded; the rest is solved by LU.
pub(crate) fn solve_least_fixpoint(
    a: &DMatrix<f64>,
    b: &[f64],
    pinned: &[bool],
) -> Result<Vec<f64>> {
    let n = b.len();
    let sources: Vec<bool> = (0..n).map(|i| !pinned[i] && b[i] > 0.0).collect();
    let mut restricted = a.clone();
    for i in 0..n {
        if pinned[i] {
            for j in 0..n {
                restricted[(i, j)] = 0.0;
            }
        }
    }
    let live = can_reach(&restricted, &sources);
    let idx: Vec<usize> = (0..n).filter(|&i| live[i] && !pinned[i]).collect();
    let mut x = vec![0.0; n];
    if idx.is_empty() {
        return Ok(x);
    }
    let k = idx.len();
    let mut sys = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for (r, &i) in idx.iter().enumerate() {
        rhs[r] = b[i];
        for (c, &j) in idx.iter().enumerate() {
            sys[(r, c)] = -a[(i, j)];
        }
        sys[(r, r)] += 1.0;
    }
    let sol = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular reachability system".into()))?;
    for (r, &i) in idx.iter().enumerate() {
        x[i] = sol[r];
    }
    Ok(x)
}

/// Bottom strongly connected components of a directed graph given by
/// adjacency lists. Components are returned sorted, each with sorted members.
///
/// Only components that contain at least one edge are reported; a vertex
/// without any successor is a deadlock rather than a recurrent class.
pub fn bottom_sccs(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adjacency.len();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for (u, succ) in adjacency.iter().enumerate() {
        for &v in succ {
            graph.add_edge(nodes[u], nodes[v], ());
        }
    }
    let mut component = vec![usize::MAX; n];
    let sccs = tarjan_scc(&graph);
    for (c, members) in sccs.iter().enumerate() {
        for node in members {
            component[node.index()] = c;
        }
    }
    let mut result: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter_map(|(c, members)| {
            let verts: Vec<usize> = members.iter().map(|x| x.index()).collect();
            let has_edge = verts.iter().any(|&u| !adjacency[u].is_empty());
            let closed = verts
                .iter()
                .all(|&u| adjacency[u].iter().all(|&v| component[v] == c));
            (has_edge && closed).then(|| {
                let mut v = verts;
                v.sort_unstable();
                v
            })
        })
        .collect();
    result.sort();
    result
}

/// Timed path `s0 --t0--> s1 --t1--> ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedPath {
    pub states: Vec<usize>,
    pub sojourns: Vec<f64>,
    /// The last state has exit rate 0, so the path can never be extended.
    pub time_locked: bool,
}

impl TimedPath {
    pub fn transitions(&self) -> usize {
        self.sojourns.len()
    }
}

/// Per-state sampling tables for exponential sojourns and jump targets.
#[derive(Debug, Clone)]
pub struct PathSampler {
    sojourn: Vec<Option<Exp<f64>>>,
    successor: Vec<Option<WeightedIndex<f64>>>,
}

impl PathSampler {
    pub fn new(c: &Ctmc) -> Self {
        let n = c.num_states();
        let sojourn = c
            .rates
            .iter()
            .map(|&r| if r > 0.0 { Exp::new(r).ok() } else { None })
            .collect();
        let successor = (0..n)
            .map(|s| WeightedIndex::new(c.jump.row(s).iter().cloned()).ok())
            .collect();
        PathSampler { sojourn, successor }
    }

    /// Sojourn time in `s`, or `None` if `s` is time-locked.
    pub fn sojourn<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Option<f64> {
        self.sojourn[s].as_ref().map(|d| d.sample(rng))
    }

    pub fn successor<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        self.successor[s]
            .as_ref()
            .map(|d| d.sample(rng))
            .unwrap_or(s)
    }
}

/// Draws a timed path with at most `max_steps` transitions.
pub fn sample_timed_path<R: Rng + ?Sized>(
    c: &Ctmc,
    rng: &mut R,
    max_steps: usize,
) -> Result<TimedPath> {
    if max_steps == 0 {
        return Err(Error::InvalidArgument("max_steps must be at least 1".into()));
    }
    let sampler = PathSampler::new(c);
    let mut path = TimedPath {
        states: vec![c.initial],
        sojourns: Vec::new(),
        time_locked: false,
    };
    let mut s = c.initial;
    while path.sojourns.len() < max_steps {
        let Some(t) = sampler.sojourn(s, rng) else {
            path.time_locked = true;
            break;
        };
        s = sampler.successor(s, rng);
        path.sojourns.push(t);
        path.states.push(s);
    }
    Ok(path)
}
