//! Product of a CTMC with a DTA: a deterministic Markovian timed automaton
//! whose locations pair a chain state with an automaton location.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::markov::{Ctmc, ROW_SUM_TOL};
use crate::timed::{Acceptance, ClockConstraint, ClockId, ClockValuation, Dta, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocId(pub usize);

#[derive(Debug, Clone)]
pub struct ProductEdge {
    pub source: LocId,
    pub guard: ClockConstraint,
    pub resets: Vec<ClockId>,
    /// Target distribution; probabilities sum to 1.
    pub targets: Vec<(LocId, f64)>,
    /// Index of the automaton edge this edge was built from.
    pub origin: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProductAcceptance {
    Finite(Vec<bool>),
    /// Family of automaton-location sets; a product location belongs to a
    /// member when its automaton component does.
    Muller(Vec<BTreeSet<usize>>),
}

/// Deterministic Markovian timed automaton.
#[derive(Debug, Clone)]
pub struct Dmta {
    clocks: Vec<String>,
    names: Vec<String>,
    /// `(chain state, automaton location)` per location, when built as a product.
    pairs: Vec<(usize, usize)>,
    rates: Vec<f64>,
    initial: LocId,
    edges: Vec<ProductEdge>,
    outgoing: Vec<Vec<usize>>,
    acceptance: ProductAcceptance,
}

impl Dmta {
    /// Direct construction with finite acceptance.
    pub fn new(
        clocks: Vec<String>,
        names: Vec<String>,
        rates: Vec<f64>,
        initial: LocId,
        edges: Vec<ProductEdge>,
        accepting: Vec<bool>,
    ) -> Result<Self> {
        let n = names.len();
        if rates.len() != n || accepting.len() != n || initial.0 >= n {
            return Err(Error::InvalidModel("inconsistent DMTA dimensions".into()));
        }
        for (i, e) in edges.iter().enumerate() {
            let sum: f64 = e.targets.iter().map(|t| t.1).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL || e.targets.iter().any(|t| t.0 .0 >= n) {
                return Err(Error::InvalidModel(format!(
                    "edge {i}: target distribution is invalid"
                )));
            }
            if e.source.0 >= n {
                return Err(Error::InvalidModel(format!("edge {i}: unknown source")));
            }
        }
        let pairs = (0..n).map(|i| (i, i)).collect();
        let m = Dmta::assemble(
            clocks,
            names,
            pairs,
            rates,
            initial,
            edges,
            ProductAcceptance::Finite(accepting),
        );
        m.check_determinism()?;
        Ok(m)
    }

    fn assemble(
        clocks: Vec<String>,
        names: Vec<String>,
        pairs: Vec<(usize, usize)>,
        rates: Vec<f64>,
        initial: LocId,
        edges: Vec<ProductEdge>,
        acceptance: ProductAcceptance,
    ) -> Self {
        let mut outgoing = vec![Vec::new(); names.len()];
        for (i, e) in edges.iter().enumerate() {
            outgoing[e.source.0].push(i);
        }
        Dmta {
            clocks,
            names,
            pairs,
            rates,
            initial,
            edges,
            outgoing,
            acceptance,
        }
    }

    pub fn num_locations(&self) -> usize {
        self.names.len()
    }

    pub fn num_clocks(&self) -> usize {
        self.clocks.len()
    }

    pub fn clocks(&self) -> &[String] {
        &self.clocks
    }

    pub fn name(&self, l: LocId) -> &str {
        &self.names[l.0]
    }

    pub fn location_by_name(&self, name: &str) -> Option<LocId> {
        self.names.iter().position(|n| n == name).map(LocId)
    }

    /// `(chain state, automaton location)` of a product location.
    pub fn pair(&self, l: LocId) -> (usize, usize) {
        self.pairs[l.0]
    }

    pub fn location_of_pair(&self, state: usize, q: usize) -> Option<LocId> {
        self.pairs.iter().position(|&p| p == (state, q)).map(LocId)
    }

    pub fn rate(&self, l: LocId) -> f64 {
        self.rates[l.0]
    }

    pub fn initial(&self) -> LocId {
        self.initial
    }

    pub fn edges(&self) -> &[ProductEdge] {
        &self.edges
    }

    pub fn outgoing(&self, l: LocId) -> impl Iterator<Item = &ProductEdge> + '_ {
        self.outgoing[l.0].iter().map(move |&i| &self.edges[i])
    }

    pub fn acceptance(&self) -> &ProductAcceptance {
        &self.acceptance
    }

    pub fn is_accepting(&self, l: LocId) -> bool {
        match &self.acceptance {
            ProductAcceptance::Finite(acc) => acc[l.0],
            ProductAcceptance::Muller(_) => false,
        }
    }

    /// Muller family lifted to product locations (only members of the
    /// reachable product are listed).
    pub fn lifted_family(&self) -> Vec<BTreeSet<LocId>> {
        match &self.acceptance {
            ProductAcceptance::Finite(_) => Vec::new(),
            ProductAcceptance::Muller(fam) => fam
                .iter()
                .map(|f| {
                    (0..self.num_locations())
                        .filter(|&l| f.contains(&self.pairs[l].1))
                        .map(LocId)
                        .collect()
                })
                .collect(),
        }
    }

    /// Largest constant compared against each clock.
    pub fn max_constants(&self) -> Vec<u64> {
        let mut out = vec![0; self.num_clocks()];
        for e in &self.edges {
            for a in e.guard.atoms() {
                out[a.clock.0] = out[a.clock.0].max(a.constant);
            }
        }
        out
    }

    /// Sorted constants of one clock, always including 0.
    pub fn constants(&self, clock: ClockId) -> Vec<u64> {
        let mut set: BTreeSet<u64> = self
            .edges
            .iter()
            .flat_map(|e| e.guard.atoms())
            .filter(|a| a.clock == clock)
            .map(|a| a.constant)
            .collect();
        set.insert(0);
        set.into_iter().collect()
    }

    /// Guards of distinct edges leaving one location must not share interior.
    pub fn check_determinism(&self) -> Result<()> {
        let n = self.num_clocks();
        for (l, out) in self.outgoing.iter().enumerate() {
            for (a, &i) in out.iter().enumerate() {
                for &j in &out[a + 1..] {
                    let bi = self.edges[i].guard.as_box(n);
                    let bj = self.edges[j].guard.as_box(n);
                    if bi.iter().zip(&bj).all(|(x, y)| x.intersect(y).has_interior()) {
                        return Err(Error::InvalidModel(format!(
                            "location {}: edges {i} and {j} overlap",
                            self.names[l]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds the part of `C x A` reachable from `<s0, q0>`. An edge
/// `<s,q> -> <s',q'>` exists iff `q` has an edge on exactly `L(s)` to `q'`
/// and `P(s,s') > 0`; its probability is `P(s,s')`.
pub fn build_product(c: &Ctmc, a: &Dta) -> Result<Dmta> {
    let start = (c.initial(), a.initial());
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pairs = vec![start];
    index.insert(start, 0);
    let mut queue = VecDeque::from([0usize]);
    let mut edges = Vec::new();
    while let Some(l) = queue.pop_front() {
        let (s, q) = pairs[l];
        for (origin, e) in a.edges_on(q, c.label(s)) {
            let mut targets = Vec::new();
            for (s2, p) in c.successors(s) {
                let key = (s2, e.to);
                let id = *index.entry(key).or_insert_with(|| {
                    pairs.push(key);
                    queue.push_back(pairs.len() - 1);
                    pairs.len() - 1
                });
                targets.push((LocId(id), p));
            }
            edges.push(ProductEdge {
                source: LocId(l),
                guard: e.guard.clone(),
                resets: e.resets.clone(),
                targets,
                origin,
            });
        }
    }
    let names = pairs
        .iter()
        .map(|&(s, q)| format!("<{},{}>", c.name(s), a.locations()[q]))
        .collect();
    let rates = pairs.iter().map(|&(s, _)| c.rate(s)).collect();
    let acceptance = match a.acceptance() {
        Acceptance::Finite(f) => {
            ProductAcceptance::Finite(pairs.iter().map(|(_, q)| f.contains(q)).collect())
        }
        Acceptance::Muller(fam) => ProductAcceptance::Muller(fam.clone()),
    };
    let m = Dmta::assemble(
        a.clocks().to_vec(),
        names,
        pairs,
        rates,
        LocId(0),
        edges,
        acceptance,
    );
    debug_assert!(m.check_determinism().is_ok());
    Ok(m)
}

/// Probability that the next jump from `(from, eta)` happens after a delay in
/// `window` and lands in `to`:
/// the integral over `window` of `E e^{-E tau} 1_g(eta + tau) p` summed over
/// edges, in closed form.
pub fn one_jump_probability(
    m: &Dmta,
    from: LocId,
    to: LocId,
    eta: &ClockValuation,
    window: &Interval,
) -> f64 {
    let rate = m.rate(from);
    m.outgoing(from)
        .map(|e| {
            let p: f64 = e.targets.iter().filter(|t| t.0 == to).map(|t| t.1).sum();
            if p == 0.0 {
                return 0.0;
            }
            match e.guard.enabled_interval(eta) {
                Some(iv) => p * exp_mass(rate, &iv.intersect(window)),
                None => 0.0,
            }
        })
        .sum()
}

/// Mass of Exp(rate) on an interval of delays.
fn exp_mass(rate: f64, iv: &Interval) -> f64 {
    if iv.is_empty() || !iv.has_interior() || rate == 0.0 {
        return 0.0;
    }
    let lo = iv.lo.max(0.0);
    let upper = if iv.hi.is_finite() {
        (-rate * iv.hi).exp()
    } else {
        0.0
    };
    ((-rate * lo).exp() - upper).max(0.0)
}

/// Default bound on the number of nested numerical integrations.
pub const DEFAULT_CYLINDER_DEPTH: usize = 4;
const CYLINDER_TOL: f64 = 1e-8;

/// Probability of the cylinder `l0 -I0-> l1 -I1-> ... -> ln` from
/// valuation `eta0`, by the backward recursion over jumps.
///
/// When every delay window lies inside a single edge's guard for all
/// valuations the run can have, the probability is the product of one-jump
/// probabilities. Otherwise the nested integrals are evaluated by adaptive
/// Simpson quadrature, limited to `max_depth` nesting levels.
pub fn cylinder_probability(
    m: &Dmta,
    locations: &[LocId],
    windows: &[Interval],
    eta0: &ClockValuation,
    max_depth: usize,
) -> Result<f64> {
    if locations.is_empty() || windows.len() + 1 != locations.len() {
        return Err(Error::InvalidArgument(
            "cylinder needs n+1 locations and n delay windows".into(),
        ));
    }
    if windows.is_empty() {
        return Ok(1.0);
    }
    if let Some(p) = constant_case(m, locations, windows, eta0) {
        return Ok(p);
    }
    if windows.len() > max_depth {
        return Err(Error::Unsupported(format!(
            "cylinder of length {} exceeds quadrature depth limit {max_depth}",
            windows.len()
        )));
    }
    Ok(nested(m, locations, windows, eta0, CYLINDER_TOL))
}

fn constant_case(
    m: &Dmta,
    locations: &[LocId],
    windows: &[Interval],
    eta0: &ClockValuation,
) -> Option<f64> {
    let mut lo: Vec<f64> = eta0.values().to_vec();
    let mut hi = lo.clone();
    let mut prob = 1.0;
    for (i, w) in windows.iter().enumerate() {
        let (from, to) = (locations[i], locations[i + 1]);
        let w_lo = w.lo.max(0.0);
        let reach_lo: Vec<f64> = lo.iter().map(|v| v + w_lo).collect();
        let reach_hi: Vec<f64> = hi.iter().map(|v| v + w.hi).collect();
        let mut chosen = None;
        for e in m.outgoing(from) {
            let p: f64 = e.targets.iter().filter(|t| t.0 == to).map(|t| t.1).sum();
            if p == 0.0 {
                continue;
            }
            let inside = e.guard.atoms().iter().all(|a| {
                let c = a.constant as f64;
                let (l, h) = (reach_lo[a.clock.0], reach_hi[a.clock.0]);
                match a.op {
                    crate::timed::Comparator::Less | crate::timed::Comparator::LessEq => h <= c,
                    _ => l >= c,
                }
            });
            if inside {
                chosen = Some((e, p));
                break;
            }
        }
        let (e, p) = chosen?;
        prob *= p * exp_mass(m.rate(from), w);
        lo = reach_lo;
        hi = reach_hi;
        for x in &e.resets {
            lo[x.0] = 0.0;
            hi[x.0] = 0.0;
        }
    }
    Some(prob)
}

fn nested(m: &Dmta, locs: &[LocId], windows: &[Interval], eta: &ClockValuation, tol: f64) -> f64 {
    if windows.is_empty() {
        return 1.0;
    }
    let (from, to) = (locs[0], locs[1]);
    let rate = m.rate(from);
    if rate == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for e in m.outgoing(from) {
        let p: f64 = e.targets.iter().filter(|t| t.0 == to).map(|t| t.1).sum();
        if p == 0.0 {
            continue;
        }
        let Some(iv) = e.guard.enabled_interval(eta) else {
            continue;
        };
        let iv = iv.intersect(&windows[0]);
        if iv.is_empty() || !iv.has_interior() {
            continue;
        }
        // Substitute u = e^{-rate tau}: the density becomes uniform and
        // unbounded windows map to finite ones.
        let u_hi = (-rate * iv.lo.max(0.0)).exp();
        let u_lo = if iv.hi.is_finite() {
            (-rate * iv.hi).exp()
        } else {
            0.0
        };
        let inner = |u: f64| {
            let tau = if u > 0.0 { -u.ln() / rate } else { f64::INFINITY };
            let next = eta.delayed(tau).reset(&e.resets);
            nested(m, &locs[1..], &windows[1..], &next, tol)
        };
        total += p * adaptive_simpson(&inner, u_lo, u_hi, tol);
    }
    total
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
