//! Deterministic timed automata: guards, valuations, validation, stepping
//! and the time-bounded transformation.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{DeterminismViolation, Error, Result};
use crate::markov::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClockId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Less,
    LessEq,
    Greater,
    GreaterEq,
}

impl Comparator {
    pub fn holds(self, value: f64, constant: f64) -> bool {
        match self {
            Comparator::Less => value < constant,
            Comparator::LessEq => value <= constant,
            Comparator::Greater => value > constant,
            Comparator::GreaterEq => value >= constant,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Comparator::Less => "<",
            Comparator::LessEq => "<=",
            Comparator::Greater => ">",
            Comparator::GreaterEq => ">=",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "<" => Some(Comparator::Less),
            "<=" => Some(Comparator::LessEq),
            ">" => Some(Comparator::Greater),
            ">=" => Some(Comparator::GreaterEq),
            _ => None,
        }
    }
}

/// Atomic constraint `clock op constant`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub clock: ClockId,
    pub op: Comparator,
    pub constant: u64,
}

/// Real interval with independently open or closed ends; `hi` may be
/// infinite (then open).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub lo_closed: bool,
    pub hi: f64,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, lo_closed: bool, hi: f64, hi_closed: bool) -> Self {
        Interval {
            lo,
            lo_closed,
            hi,
            hi_closed: hi_closed && hi.is_finite(),
        }
    }

    /// `[lo, hi)`
    pub fn half_open(lo: f64, hi: f64) -> Self {
        Interval::new(lo, true, hi, false)
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval::new(lo, true, hi, true)
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Interval::new(lo, false, hi, false)
    }

    /// `[0, inf)`
    pub fn nonnegative() -> Self {
        Interval::new(0.0, true, f64::INFINITY, false)
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn has_interior(&self) -> bool {
        self.lo < self.hi
    }

    pub fn contains(&self, t: f64) -> bool {
        let above = if self.lo_closed { t >= self.lo } else { t > self.lo };
        let below = if self.hi_closed { t <= self.hi } else { t < self.hi };
        above && below
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = if self.lo > other.lo {
            (self.lo, self.lo_closed)
        } else if other.lo > self.lo {
            (other.lo, other.lo_closed)
        } else {
            (self.lo, self.lo_closed && other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi < self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed && other.hi_closed)
        };
        Interval {
            lo,
            lo_closed,
            hi,
            hi_closed,
        }
    }

    fn restrict(&mut self, op: Comparator, bound: f64) {
        let half = match op {
            Comparator::Less => Interval::new(f64::NEG_INFINITY, false, bound, false),
            Comparator::LessEq => Interval::new(f64::NEG_INFINITY, false, bound, true),
            Comparator::Greater => Interval::new(bound, false, f64::INFINITY, false),
            Comparator::GreaterEq => Interval::new(bound, true, f64::INFINITY, false),
        };
        *self = self.intersect(&half);
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "empty");
        }
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            if self.hi.is_finite() {
                self.hi.to_string()
            } else {
                "inf".to_string()
            },
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// Conjunction of atoms; the empty conjunction is `true`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ClockConstraint {
    atoms: Vec<Atom>,
}

impl ClockConstraint {
    pub fn always() -> Self {
        ClockConstraint::default()
    }

    pub fn new(atoms: Vec<Atom>) -> Self {
        ClockConstraint { atoms }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn with(mut self, clock: ClockId, op: Comparator, constant: u64) -> Self {
        self.atoms.push(Atom {
            clock,
            op,
            constant,
        });
        self
    }

    pub fn holds(&self, eta: &ClockValuation) -> bool {
        self.atoms
            .iter()
            .all(|a| a.op.holds(eta.get(a.clock), a.constant as f64))
    }

    /// Values of `clock` allowed by this constraint, within `[0, inf)`.
    pub fn clock_interval(&self, clock: ClockId) -> Interval {
        let mut iv = Interval::nonnegative();
        for a in self.atoms.iter().filter(|a| a.clock == clock) {
            iv.restrict(a.op, a.constant as f64);
        }
        iv
    }

    /// The satisfaction set as a box over `num_clocks` clocks.
    pub fn as_box(&self, num_clocks: usize) -> Vec<Interval> {
        (0..num_clocks)
            .map(|x| self.clock_interval(ClockId(x)))
            .collect()
    }

    /// Delays `tau >= 0` with `eta + tau` satisfying the constraint, or
    /// `None` if there are none. Guards are boxes and all clocks advance
    /// together, so the set is a single interval.
    pub fn enabled_interval(&self, eta: &ClockValuation) -> Option<Interval> {
        let mut iv = Interval::nonnegative();
        for a in &self.atoms {
            iv.restrict(a.op, a.constant as f64 - eta.get(a.clock));
        }
        (!iv.is_empty()).then_some(iv)
    }

    pub fn scaled(&self, factor: u64) -> ClockConstraint {
        ClockConstraint {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    constant: a.constant * factor,
                    ..*a
                })
                .collect(),
        }
    }

    pub fn describe(&self, clocks: &[String]) -> String {
        if self.atoms.is_empty() {
            return "true".into();
        }
        self.atoms
            .iter()
            .map(|a| format!("{}{}{}", clocks[a.clock.0], a.op.as_str(), a.constant))
            .collect::<Vec<_>>()
            .join(" && ")
    }
}

/// Delays from `eta` that enable `g`. Free-function form of
/// [`ClockConstraint::enabled_interval`].
pub fn guard_enabled_interval(g: &ClockConstraint, eta: &ClockValuation) -> Option<Interval> {
    g.enabled_interval(eta)
}

/// Clock valuation; all values nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockValuation(Vec<f64>);

impl ClockValuation {
    pub fn zero(num_clocks: usize) -> Self {
        ClockValuation(vec![0.0; num_clocks])
    }

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "clock values must be nonnegative: {values:?}"
            )));
        }
        Ok(ClockValuation(values))
    }

    pub fn get(&self, x: ClockId) -> f64 {
        self.0[x.0]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn delayed(&self, t: f64) -> ClockValuation {
        ClockValuation(self.0.iter().map(|v| v + t).collect())
    }

    pub fn reset(mut self, clocks: &[ClockId]) -> ClockValuation {
        for x in clocks {
            self.0[x.0] = 0.0;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtaEdge {
    pub from: usize,
    pub symbol: Label,
    pub guard: ClockConstraint,
    pub resets: Vec<ClockId>,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Acceptance {
    /// Accept on reaching any of these locations.
    Finite(BTreeSet<usize>),
    /// Accept iff the set of locations visited infinitely often is a member.
    Muller(Vec<BTreeSet<usize>>),
}

impl Acceptance {
    pub fn is_finite(&self) -> bool {
        matches!(self, Acceptance::Finite(_))
    }
}

/// Deterministic timed automaton over the alphabet of AP sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dta {
    clocks: Vec<String>,
    locations: Vec<String>,
    initial: usize,
    acceptance: Acceptance,
    edges: Vec<DtaEdge>,
}

impl Dta {
    pub fn new(
        clocks: Vec<String>,
        locations: Vec<String>,
        initial: usize,
        acceptance: Acceptance,
        edges: Vec<DtaEdge>,
    ) -> Result<Self> {
        let nl = locations.len();
        if nl == 0 {
            return Err(Error::InvalidModel("automaton has no locations".into()));
        }
        if initial >= nl {
            return Err(Error::InvalidModel("initial location out of range".into()));
        }
        let acc_sets: Vec<&BTreeSet<usize>> = match &acceptance {
            Acceptance::Finite(f) => vec![f],
            Acceptance::Muller(fam) => fam.iter().collect(),
        };
        if acc_sets.iter().any(|s| s.iter().any(|&q| q >= nl)) {
            return Err(Error::InvalidModel(
                "acceptance refers to an unknown location".into(),
            ));
        }
        for (i, e) in edges.iter().enumerate() {
            if e.from >= nl || e.to >= nl {
                return Err(Error::InvalidModel(format!(
                    "edge {i} refers to an unknown location"
                )));
            }
            let bad_clock = e
                .guard
                .atoms()
                .iter()
                .map(|a| a.clock)
                .chain(e.resets.iter().copied())
                .any(|x| x.0 >= clocks.len());
            if bad_clock {
                return Err(Error::InvalidModel(format!(
                    "edge {i} refers to an unknown clock"
                )));
            }
        }
        Ok(Dta {
            clocks,
            locations,
            initial,
            acceptance,
            edges,
        })
    }

    pub fn builder() -> DtaBuilder {
        DtaBuilder::default()
    }

    pub fn clocks(&self) -> &[String] {
        &self.clocks
    }

    pub fn num_clocks(&self) -> usize {
        self.clocks.len()
    }

    pub fn locations(&self) -> &[String] {
        &self.locations
    }

    pub fn location_index(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|n| n == name)
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn acceptance(&self) -> &Acceptance {
        &self.acceptance
    }

    pub fn edges(&self) -> &[DtaEdge] {
        &self.edges
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        match &self.acceptance {
            Acceptance::Finite(f) => f.contains(&q),
            Acceptance::Muller(_) => false,
        }
    }

    /// Edges leaving `q` on exactly `symbol`.
    pub fn edges_on<'a>(
        &'a self,
        q: usize,
        symbol: &'a Label,
    ) -> impl Iterator<Item = (usize, &'a DtaEdge)> + 'a {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.from == q && &e.symbol == symbol)
    }

    /// Constants compared against `clock` in any guard.
    pub fn constants(&self, clock: ClockId) -> BTreeSet<u64> {
        self.edges
            .iter()
            .flat_map(|e| e.guard.atoms())
            .filter(|a| a.clock == clock)
            .map(|a| a.constant)
            .collect()
    }

    pub fn with_acceptance(&self, acceptance: Acceptance) -> Result<Dta> {
        Dta::new(
            self.clocks.clone(),
            self.locations.clone(),
            self.initial,
            acceptance,
            self.edges.clone(),
        )
    }
}

/// Name-based construction of a [`Dta`].
#[derive(Debug, Default, Clone)]
pub struct DtaBuilder {
    clocks: Vec<String>,
    locations: Vec<String>,
    initial: Option<String>,
    finite: Option<Vec<String>>,
    muller: Option<Vec<Vec<String>>>,
    edges: Vec<(String, Vec<String>, Vec<(String, String, u64)>, Vec<String>, String)>,
}

impl DtaBuilder {
    pub fn clock(mut self, name: &str) -> Self {
        self.clocks.push(name.into());
        self
    }

    pub fn location(mut self, name: &str) -> Self {
        self.locations.push(name.into());
        self
    }

    pub fn initial(mut self, name: &str) -> Self {
        self.initial = Some(name.into());
        self
    }

    pub fn accepting(mut self, names: &[&str]) -> Self {
        self.finite = Some(names.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn muller(mut self, family: &[&[&str]]) -> Self {
        self.muller = Some(
            family
                .iter()
                .map(|set| set.iter().map(|s| s.to_string()).collect())
                .collect(),
        );
        self
    }

    /// Adds an edge; guard atoms are `(clock, op, constant)` with op one of
    /// `<`, `<=`, `>`, `>=`.
    pub fn edge(
        mut self,
        from: &str,
        symbol: &[&str],
        guard: &[(&str, &str, u64)],
        resets: &[&str],
        to: &str,
    ) -> Self {
        self.edges.push((
            from.into(),
            symbol.iter().map(|s| s.to_string()).collect(),
            guard
                .iter()
                .map(|(c, op, k)| (c.to_string(), op.to_string(), *k))
                .collect(),
            resets.iter().map(|s| s.to_string()).collect(),
            to.into(),
        ));
        self
    }

    pub fn build(self) -> Result<Dta> {
        let loc = |name: &str| {
            self.locations
                .iter()
                .position(|x| x == name)
                .ok_or_else(|| Error::InvalidModel(format!("unknown location {name}")))
        };
        let clock = |name: &str| {
            self.clocks
                .iter()
                .position(|x| x == name)
                .map(ClockId)
                .ok_or_else(|| Error::InvalidModel(format!("unknown clock {name}")))
        };
        let initial = loc(self.initial.as_deref().unwrap_or_else(|| {
            self.locations.first().map(|s| s.as_str()).unwrap_or("")
        }))?;
        let acceptance = match (&self.finite, &self.muller) {
            (Some(f), None) => Acceptance::Finite(f.iter().map(|s| loc(s)).collect::<Result<_>>()?),
            (None, Some(m)) => Acceptance::Muller(
                m.iter()
                    .map(|set| set.iter().map(|s| loc(s)).collect::<Result<_>>())
                    .collect::<Result<_>>()?,
            ),
            _ => {
                return Err(Error::InvalidModel(
                    "exactly one acceptance condition must be given".into(),
                ))
            }
        };
        let mut edges = Vec::new();
        for (from, symbol, guard, resets, to) in &self.edges {
            let mut g = ClockConstraint::always();
            for (c, op, k) in guard {
                let op = Comparator::parse(op)
                    .ok_or_else(|| Error::InvalidModel(format!("unknown comparator {op}")))?;
                g = g.with(clock(c)?, op, *k);
            }
            edges.push(DtaEdge {
                from: loc(from)?,
                symbol: symbol.iter().cloned().collect(),
                guard: g,
                resets: resets.iter().map(|r| clock(r)).collect::<Result<_>>()?,
                to: loc(to)?,
            });
        }
        Dta::new(self.clocks, self.locations, initial, acceptance, edges)
    }
}

/// Normalized automaton plus non-fatal diagnostics.
#[derive(Debug, Clone)]
pub struct ValidatedDta {
    pub dta: Dta,
    pub warnings: Vec<String>,
}

/// Checks determinism and normalizes the automaton.
///
/// Overlapping guards with a common interior are a hard error. Guards that
/// meet only on a boundary, guards without interior and outgoing edges of
/// accepting locations (which are removed) produce warnings.
pub fn validate_dta(a: &Dta) -> Result<ValidatedDta> {
    let mut warnings = Vec::new();
    let mut dta = a.clone();
    if let Acceptance::Finite(acc) = &a.acceptance {
        let before = dta.edges.len();
        dta.edges.retain(|e| !acc.contains(&e.from));
        if dta.edges.len() < before {
            warnings.push(format!(
                "removed {} edge(s) leaving accepting locations",
                before - dta.edges.len()
            ));
        }
    }
    let n = dta.num_clocks();
    let boxes: Vec<Vec<Interval>> = dta.edges.iter().map(|e| e.guard.as_box(n)).collect();
    for (i, e) in dta.edges.iter().enumerate() {
        let b = &boxes[i];
        if b.iter().any(|iv| iv.is_empty()) {
            warnings.push(format!(
                "edge {i} ({} -> {}): guard {} is unsatisfiable",
                dta.locations[e.from],
                dta.locations[e.to],
                e.guard.describe(&dta.clocks)
            ));
        } else if b.iter().any(|iv| !iv.has_interior()) {
            warnings.push(format!(
                "edge {i} ({} -> {}): guard {} has measure zero and is never taken by a Markovian jump",
                dta.locations[e.from],
                dta.locations[e.to],
                e.guard.describe(&dta.clocks)
            ));
        }
    }
    let mut violations = Vec::new();
    for i in 0..dta.edges.len() {
        for j in i + 1..dta.edges.len() {
            let (ei, ej) = (&dta.edges[i], &dta.edges[j]);
            if ei.from != ej.from || ei.symbol != ej.symbol {
                continue;
            }
            let meet: Vec<Interval> = boxes[i]
                .iter()
                .zip(&boxes[j])
                .map(|(a, b)| a.intersect(b))
                .collect();
            if meet.iter().all(|iv| iv.has_interior()) {
                violations.push(DeterminismViolation {
                    location: dta.locations[ei.from].clone(),
                    symbol: ei.symbol.iter().cloned().collect(),
                    edges: (i, j),
                });
            } else if meet.iter().all(|iv| !iv.is_empty()) {
                warnings.push(format!(
                    "edges {i} and {j} of location {} share boundary valuations",
                    dta.locations[ei.from]
                ));
            }
        }
    }
    if !violations.is_empty() {
        return Err(Error::Nondeterministic(violations));
    }
    Ok(ValidatedDta { dta, warnings })
}

/// Outcome of one automaton step.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Moved {
        location: usize,
        valuation: ClockValuation,
        edge: usize,
    },
    Stuck,
}

/// Reads `symbol` after letting `t` time units pass in `q`.
pub fn dta_step(a: &Dta, q: usize, eta: &ClockValuation, symbol: &Label, t: f64) -> Result<Step> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("delay {t} must be positive")));
    }
    step_among(a, a.edges_on(q, symbol).map(|(i, _)| i), eta, t)
}

/// Step restricted to a precomputed candidate edge list.
pub(crate) fn step_among(
    a: &Dta,
    candidates: impl Iterator<Item = usize>,
    eta: &ClockValuation,
    t: f64,
) -> Result<Step> {
    let later = eta.delayed(t);
    let mut found = None;
    for i in candidates {
        if a.edges[i].guard.holds(&later) {
            if let Some(j) = found {
                return Err(Error::Numerical(format!(
                    "edges {j} and {i} enabled simultaneously"
                )));
            }
            found = Some(i);
        }
    }
    Ok(match found {
        None => Step::Stuck,
        Some(i) => {
            let e = &a.edges[i];
            Step::Moved {
                location: e.to,
                valuation: later.reset(&e.resets),
                edge: i,
            }
        }
    })
}

/// Automaton `A[t_f]` together with the factor by which all constants
/// (and `t_f`) were multiplied. Exit rates must be divided by `scale`.
#[derive(Debug, Clone)]
pub struct TimeBounded {
    pub dta: Dta,
    pub scale: u64,
    pub bound_clock: ClockId,
}

const MAX_SCALE: u64 = 1000;

/// Adds a fresh never-reset clock that must not exceed `t_f` on every edge
/// into an accepting location.
pub fn time_bound_transform(a: &Dta, t_f: f64) -> Result<TimeBounded> {
    if !(t_f > 0.0) || !t_f.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time bound {t_f} must be positive and finite"
        )));
    }
    let Acceptance::Finite(acc) = &a.acceptance else {
        return Err(Error::Unsupported(
            "time bounds require finite acceptance".into(),
        ));
    };
    let scale = (1..=MAX_SCALE)
        .find(|k| {
            let v = t_f * *k as f64;
            (v - v.round()).abs() < 1e-9
        })
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "time bound {t_f} is not a rational with denominator at most {MAX_SCALE}"
            ))
        })?;
    let bound = (t_f * scale as f64).round() as u64;
    let mut name = "z".to_string();
    while a.clocks.contains(&name) {
        name.push('\'');
    }
    let z = ClockId(a.clocks.len());
    let mut clocks = a.clocks.clone();
    clocks.push(name);
    let edges = a
        .edges
        .iter()
        .map(|e| {
            let mut guard = e.guard.scaled(scale);
            if acc.contains(&e.to) {
                guard = guard.with(z, Comparator::LessEq, bound);
            }
            DtaEdge {
                guard,
                ..e.clone()
            }
        })
        .collect();
    let dta = Dta::new(
        clocks,
        a.locations.clone(),
        a.initial,
        a.acceptance.clone(),
        edges,
    )?;
    Ok(TimeBounded {
        dta,
        scale,
        bound_clock: z,
    })
}
