//! Value iteration over a grid of clock valuations, for any number of
//! clocks.
//!
//! Each clock ranges over `[0, c_x + slack]` with step `h`; values past the
//! clamp behave like the clamp since no guard can tell them apart. An
//! iteration sweeps every location along the time-flow ray `p, p+h, ...`
//! backwards: between two grid points the sojourn density is integrated
//! exactly against the linear interpolant of the jump continuation, which
//! gives `U(p) = w0 f(p) + w1 f(p+h) + e^{-Eh} U(p+h)`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::markov::Ctmc;
use crate::product::{build_product, Dmta, LocId};
use crate::region::RegionGraph;
use crate::report::{GraphStats, Method, PhaseTimer, VerificationReport};
use crate::timed::{time_bound_transform, validate_dta, Acceptance, ClockId, ClockValuation, Comparator, Dta};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Step in time units; `1/h` must be an integer.
    pub step: f64,
    /// Extra room past the largest constant of each clock.
    pub slack: u64,
    /// Defaults to ten times the region graph's vertex count.
    pub max_iterations: Option<usize>,
    /// Stop once the sup-norm change of an iteration drops below this.
    pub tolerance: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            step: 0.01,
            slack: 1,
            max_iterations: None,
            tolerance: 1e-6,
        }
    }
}

impl GridSpec {
    pub fn with_step(step: f64) -> Self {
        GridSpec {
            step,
            ..GridSpec::default()
        }
    }

    /// Grid points per time unit.
    fn points_per_unit(&self) -> Result<i64> {
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "grid step {} must lie in (0, 1]",
                self.step
            )));
        }
        let n = (1.0 / self.step).round();
        if ((n * self.step) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "grid step {} must divide 1 (1/h integral)",
                self.step
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        Ok(n as i64)
    }
}

/// Values per location on the grid, row-major over clocks (last clock
/// fastest).
#[derive(Debug, Clone)]
pub struct ValueField {
    per_unit: i64,
    dims: Vec<usize>,
    strides: Vec<usize>,
    values: Vec<Vec<f64>>,
}

impl ValueField {
    fn new(per_unit: i64, dims: Vec<usize>, locations: usize) -> Self {
        let mut strides = vec![1; dims.len()];
        for x in (0..dims.len().saturating_sub(1)).rev() {
            strides[x] = strides[x + 1] * dims[x + 1];
        }
        let size = dims.iter().product();
        ValueField {
            per_unit,
            dims,
            strides,
            values: vec![vec![0.0; size]; locations],
        }
    }

    pub fn step(&self) -> f64 {
        1.0 / self.per_unit as f64
    }

    /// Number of points per clock.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_points(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    pub fn values(&self, l: LocId) -> &[f64] {
        &self.values[l.0]
    }

    /// Value at an exact grid point given in units of `h`.
    pub fn at_point(&self, l: LocId, units: &[usize]) -> f64 {
        let idx: usize = units
            .iter()
            .zip(&self.strides)
            .zip(&self.dims)
            .map(|((u, s), d)| (*u).min(d - 1) * s)
            .sum();
        self.values[l.0][idx]
    }

    /// Multilinear interpolation; clocks past the clamp use the clamp.
    pub fn value_at(&self, l: LocId, eta: &ClockValuation) -> f64 {
        let n = self.dims.len();
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for x in 0..n {
            let pos = eta.get(ClockId(x)) * self.per_unit as f64;
            let top = (self.dims[x] - 1) as f64;
            let pos = pos.min(top);
            let b = pos.floor().min(top - 1.0).max(0.0);
            base[x] = b as usize;
            frac[x] = if top == 0.0 { 0.0 } else { pos - b };
        }
        let mut total = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = 0;
            for x in 0..n {
                let up = corner >> x & 1 == 1;
                let coord = (base[x] + usize::from(up)).min(self.dims[x] - 1);
                w *= if up { frac[x] } else { 1.0 - frac[x] };
                idx += coord * self.strides[x];
            }
            if w != 0.0 {
                total += w * self.values[l.0][idx];
            }
        }
        total
    }

    /// CSV rows `location,<clock values...>,value`.
    pub fn write_csv<W: Write>(&self, out: &mut W, location_names: &[String], clocks: &[String]) -> Result<()> {
        let header: Vec<&str> = std::iter::once("location")
            .chain(clocks.iter().map(|s| s.as_str()))
            .chain(std::iter::once("value"))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        let h = self.step();
        for (l, vals) in self.values.iter().enumerate() {
            for (idx, v) in vals.iter().enumerate() {
                write!(out, "{}", location_names[l])?;
                for x in 0..self.dims.len() {
                    let coord = idx / self.strides[x] % self.dims[x];
                    write!(out, ",{}", coord as f64 * h)?;
                }
                writeln!(out, ",{v}")?;
            }
        }
        Ok(())
    }
}

/// Outcome of [`value_iterate`].
#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub field: ValueField,
    /// Value at the initial location and the zero valuation.
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Grid points where an iterate decreased (expected 0).
    pub monotone_violations: usize,
    /// Largest value of any iterate (expected at most 1).
    pub max_value: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Target,
    Dead,
    Live,
}

struct GridEdge {
    /// `(clock, op, 2 * constant * points_per_unit)`.
    atoms: Vec<(usize, Comparator, i64)>,
    resets: Vec<usize>,
    targets: Vec<(usize, f64)>,
}

impl GridEdge {
    fn enabled(&self, doubled: &[i64]) -> bool {
        self.atoms
            .iter()
            .all(|&(x, op, c)| op.holds(doubled[x] as f64, c as f64))
    }
}

/// Least-fixpoint value iteration for reaching the target vertices of `g`
/// (a simplified region graph of `m`, not pruned) or an accepting location
/// of `m`.
pub fn value_iterate(m: &Dmta, g: &RegionGraph, targets: &[bool], spec: &GridSpec) -> Result<GridOutcome> {
    let per_unit = spec.points_per_unit()?;
    let n_clocks = m.num_clocks();
    let dims: Vec<usize> = m
        .max_constants()
        .iter()
        .map(|&c| ((c + spec.slack) as i64 * per_unit + 1) as usize)
        .collect();
    let mut field = ValueField::new(per_unit, dims.clone(), m.num_locations());
    let size = field.num_points();
    let strides = field.strides.clone();

    let marked = g.with_accepting(targets);
    let live = marked.can_reach_accepting();
    let space = g.space();
    let status: Vec<Vec<Status>> = (0..m.num_locations())
        .into_par_iter()
        .map(|l| {
            let mut units = vec![0i64; n_clocks];
            (0..size)
                .map(|idx| {
                    for x in 0..n_clocks {
                        units[x] = (idx / strides[x] % dims[x]) as i64;
                    }
                    let region = space.merge(&space.classic_region_of_units(&units, per_unit));
                    if m.is_accepting(LocId(l)) {
                        return Status::Target;
                    }
                    // Points in regions the graph never visits count as live.
                    match g.vertex_of(LocId(l), &region) {
                        Some(v) if targets[v.0] => Status::Target,
                        Some(v) if !live[v.0] => Status::Dead,
                        _ => Status::Live,
                    }
                })
                .collect()
        })
        .collect();

    let edges: Vec<Vec<GridEdge>> = (0..m.num_locations())
        .map(|l| {
            m.outgoing(LocId(l))
                .map(|e| GridEdge {
                    atoms: e
                        .guard
                        .atoms()
                        .iter()
                        .map(|a| (a.clock.0, a.op, 2 * a.constant as i64 * per_unit))
                        .collect(),
                    resets: e.resets.iter().map(|x| x.0).collect(),
                    targets: e.targets.iter().map(|t| (t.0 .0, t.1)).collect(),
                })
                .collect()
        })
        .collect();

    for (l, vals) in field.values.iter_mut().enumerate() {
        for (idx, v) in vals.iter_mut().enumerate() {
            if status[l][idx] == Status::Target {
                *v = 1.0;
            }
        }
    }

    let h = spec.step;
    let max_iter = spec.max_iterations.unwrap_or(10 * g.len().max(1));
    let mut monotone_violations = 0;
    let mut max_value: f64 = field.values.iter().flatten().cloned().fold(0.0, f64::max);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        let old = &field.values;
        let new: Vec<Vec<f64>> = (0..m.num_locations())
            .into_par_iter()
            .map(|l| sweep_location(old, &status[l], &edges[l], m.rate(LocId(l)), h, &dims, &strides))
            .collect();
        iterations += 1;
        let mut change: f64 = 0.0;
        let mut next_values = Vec::with_capacity(new.len());
        for (l, vals) in new.into_iter().enumerate() {
            for (a, b) in vals.iter().zip(&field.values[l]) {
                if a < b {
                    monotone_violations += 1;
                }
                change = change.max((a - b).abs());
                max_value = max_value.max(*a);
            }
            next_values.push(vals);
        }
        field.values = next_values;
        residual = change;
        if change < spec.tolerance {
            break;
        }
    }
    if residual >= spec.tolerance {
        return Err(Error::NonConvergence {
            iterations,
            residual,
        });
    }
    let value = field.values[m.initial().0][0];
    Ok(GridOutcome {
        field,
        value,
        iterations,
        residual,
        monotone_violations,
        max_value,
    })
}

fn sweep_location(
    old: &[Vec<f64>],
    status: &[Status],
    edges: &[GridEdge],
    rate: f64,
    h: f64,
    dims: &[usize],
    strides: &[usize],
) -> Vec<f64> {
    let n = dims.len();
    let size = status.len();
    let mut out = vec![0.0; size];
    let eh = rate * h;
    let (stay, w0, w1) = if eh > 0.0 {
        let leave = -(-eh).exp_m1();
        let q = 1.0 - leave;
        let w1 = leave / eh - q;
        (q, leave - w1, w1)
    } else {
        (1.0, 0.0, 0.0)
    };
    let mut units = vec![0usize; n];
    let mut doubled = vec![0i64; n];
    // Jump continuation from grid point `idx` when `edge` fires there.
    let continuation = |edge: &GridEdge, idx: usize, units: &[usize]| -> f64 {
        let landed = edge
            .resets
            .iter()
            .fold(idx, |acc, &x| acc - units[x] * strides[x]);
        edge.targets
            .iter()
            .map(|&(t, p)| p * old[t][landed])
            .sum()
    };
    for idx in (0..size).rev() {
        match status[idx] {
            Status::Target => {
                out[idx] = 1.0;
                continue;
            }
            Status::Dead => continue,
            Status::Live => {}
        }
        let mut next = idx;
        let mut next_units = vec![0usize; n];
        for x in 0..n {
            units[x] = idx / strides[x] % dims[x];
            let up = (units[x] + 1).min(dims[x] - 1);
            next_units[x] = up;
            next += (up - units[x]) * strides[x];
            doubled[x] = (units[x] + up) as i64;
        }
        let enabled = edges.iter().filter(|e| e.enabled(&doubled));
        let value = if next == idx {
            if rate > 0.0 {
                enabled.map(|e| continuation(e, idx, &units)).sum()
            } else {
                0.0
            }
        } else {
            let (mut f0, mut f1) = (0.0, 0.0);
            if rate > 0.0 {
                for e in enabled {
                    f0 += continuation(e, idx, &units);
                    f1 += continuation(e, next, &next_units);
                }
            }
            w0 * f0 + w1 * f1 + stay * out[next]
        };
        out[idx] = value.min(1.0);
    }
    out
}

/// Grid engine on `C x A` for finite acceptance.
pub fn check_grid(c: &Ctmc, a: &Dta, spec: &GridSpec) -> Result<VerificationReport> {
    if !matches!(a.acceptance(), Acceptance::Finite(_)) {
        return Err(Error::Unsupported(
            "the grid engine needs finite acceptance; use the Muller check".into(),
        ));
    }
    let validated = validate_dta(a)?;
    let mut report = run_grid(c, &validated.dta, spec)?;
    report.warnings.extend(validated.warnings);
    Ok(report)
}

/// Probability of acceptance within `t_f` time units, by the grid engine on
/// `C x A[t_f]`. A lower bound of the unbounded probability.
pub fn check_time_bounded(c: &Ctmc, a: &Dta, t_f: f64, spec: &GridSpec) -> Result<VerificationReport> {
    let validated = validate_dta(a)?;
    let bounded = time_bound_transform(&validated.dta, t_f)?;
    let scaled = c.with_rates_scaled(1.0 / bounded.scale as f64);
    let mut report = run_grid(&scaled, &bounded.dta, spec)?;
    report.time_bound = Some(t_f);
    report.warnings.extend(validated.warnings);
    if bounded.scale > 1 {
        report.warnings.push(format!(
            "time scaled by {}: grid step is in scaled units",
            bounded.scale
        ));
    }
    Ok(report)
}

fn run_grid(c: &Ctmc, a: &Dta, spec: &GridSpec) -> Result<VerificationReport> {
    let mut timer = PhaseTimer::start();
    let m = build_product(c, a)?;
    timer.lap("product");
    let g = RegionGraph::simplified(&m)?;
    timer.lap("region_graph");
    let targets = g.accepting();
    let out = value_iterate(&m, &g, &targets, spec)?;
    timer.lap("value_iteration");
    Ok(grid_report(&m, &g, &out, spec, "finite", timer))
}

pub(crate) fn grid_report(
    m: &Dmta,
    g: &RegionGraph,
    out: &GridOutcome,
    spec: &GridSpec,
    acceptance: &str,
    timer: PhaseTimer,
) -> VerificationReport {
    let mut report = VerificationReport::new(Method::Grid, acceptance, out.value.clamp(0.0, 1.0));
    report.residual = Some(out.residual);
    report.iterations = Some(out.iterations);
    report.grid_step = Some(spec.step);
    report.stats = GraphStats {
        locations: m.num_locations(),
        vertices: g.len(),
        edges: g.num_edges(),
        subgraphs: None,
        accepting_bsccs: None,
    };
    report.timings_ms = timer.phases;
    if out.monotone_violations > 0 {
        report.warnings.push(format!(
            "{} grid values decreased between iterations",
            out.monotone_violations
        ));
    }
    report
}
