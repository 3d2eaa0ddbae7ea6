//! Verification reports shared by all engines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SingleClock,
    Grid,
    Simulate,
    Qualitative,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::SingleClock => "single_clock",
            Method::Grid => "grid",
            Method::Simulate => "simulate",
            Method::Qualitative => "qualitative",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GraphStats {
    pub locations: usize,
    pub vertices: usize,
    pub edges: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subgraphs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accepting_bsccs: Option<usize>,
}

/// Monte Carlo details.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub samples: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub undecided: u64,
    pub half_width: f64,
    pub confidence: f64,
    /// Undecided runs counted as rejected, then as accepted.
    pub bracket: (f64, f64),
}

/// Outcome of a graph-only check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualitativeSummary {
    pub mode: String,
    pub holds: bool,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    /// Acceptance probability; for qualitative checks 1 or 0.
    pub probability: f64,
    pub method: Method,
    pub acceptance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SampleSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qualitative: Option<QualitativeSummary>,
    pub stats: GraphStats,
    pub timings_ms: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl VerificationReport {
    pub fn new(method: Method, acceptance: &str, probability: f64) -> Self {
        VerificationReport {
            probability,
            method,
            acceptance: acceptance.to_string(),
            error_bound: None,
            residual: None,
            iterations: None,
            time_bound: None,
            grid_step: None,
            sampling: None,
            qualitative: None,
            stats: GraphStats::default(),
            timings_ms: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    /// Human-readable summary.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "method:      {}", self.method.as_str());
        let _ = writeln!(out, "acceptance:  {}", self.acceptance);
        match &self.qualitative {
            Some(q) => {
                let _ = writeln!(out, "check:       {} -> {}", q.mode, q.holds);
                let _ = writeln!(out, "witness:     {}", q.witness);
            }
            None => {
                let _ = writeln!(out, "probability: {:.10}", self.probability);
            }
        }
        if let Some(s) = &self.sampling {
            let _ = writeln!(
                out,
                "samples:     {} (accepted {}, rejected {}, undecided {})",
                s.samples, s.accepted, s.rejected, s.undecided
            );
            let _ = writeln!(
                out,
                "interval:    +/- {:.3e} at {:.0}% confidence, bracket [{:.6}, {:.6}]",
                s.half_width,
                100.0 * s.confidence,
                s.bracket.0,
                s.bracket.1
            );
        }
        if let Some(e) = self.error_bound {
            let _ = writeln!(out, "error bound: {e:.3e}");
        }
        if let (Some(r), Some(n)) = (self.residual, self.iterations) {
            let _ = writeln!(out, "residual:    {r:.3e} after {n} iterations");
        }
        if let Some(t) = self.time_bound {
            let _ = writeln!(out, "time bound:  {t}");
        }
        if let Some(h) = self.grid_step {
            let _ = writeln!(out, "grid step:   {h}");
        }
        let _ = writeln!(
            out,
            "graph:       {} locations, {} vertices, {} edges",
            self.stats.locations, self.stats.vertices, self.stats.edges
        );
        for (phase, ms) in &self.timings_ms {
            let _ = writeln!(out, "time {phase}: {ms:.3} ms");
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning:     {w}");
        }
        out
    }
}

/// Records wall-clock time per named phase.
#[derive(Debug)]
pub(crate) struct PhaseTimer {
    last: Instant,
    pub(crate) phases: BTreeMap<String, f64>,
}

impl PhaseTimer {
    pub(crate) fn start() -> Self {
        PhaseTimer {
            last: Instant::now(),
            phases: BTreeMap::new(),
        }
    }

    pub(crate) fn lap(&mut self, phase: &str) {
        let now = Instant::now();
        let ms = (now - self.last).as_secs_f64() * 1e3;
        *self.phases.entry(phase.to_string()).or_default() += ms;
        self.last = now;
    }
}
