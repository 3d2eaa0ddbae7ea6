//! Monte Carlo estimation of the acceptance probability.
//!
//! Paths of the chain are sampled and fed to the automaton step by step.
//! The region graph decides runs early: a finite-acceptance run is rejected
//! once it enters a vertex that cannot reach acceptance, and a Muller run is
//! decided when it enters a bottom SCC.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::markov::{Ctmc, PathSampler};
use crate::muller::{bscc_membership, MullerMode};
use crate::product::{build_product, LocId};
use crate::region::RegionGraph;
use crate::report::{GraphStats, Method, PhaseTimer, SampleSummary, VerificationReport};
use crate::timed::{step_among, validate_dta, Acceptance, ClockValuation, Dta, Step};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub samples: u64,
    /// Automaton steps per path before the run counts as undecided.
    pub max_steps: usize,
    pub seed: u64,
    pub confidence: f64,
    pub muller_mode: MullerMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            samples: 100_000,
            max_steps: 10_000,
            seed: 1,
            confidence: 0.99,
            muller_mode: MullerMode::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// Accepted fraction of the decided runs.
    pub p_hat: f64,
    pub half_width: f64,
    /// Confidence interval (Wald, or Wilson near 0 and 1).
    pub interval: (f64, f64),
    pub accepted: u64,
    pub rejected: u64,
    pub undecided: u64,
    /// Undecided runs counted as rejected, then as accepted.
    pub bracket: (f64, f64),
    pub confidence: f64,
}

impl Estimate {
    pub fn samples(&self) -> u64 {
        self.accepted + self.rejected + self.undecided
    }
}

/// Runs per random stream; chunk `i` uses stream `i` of the seeded generator,
/// so results do not depend on the thread count.
const CHUNK: u64 = 4096;

/// Classification of one sampled run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject,
    Undecided,
}

/// Samples runs of one chain under one automaton.
///
/// Each step draws the sojourn time and then the successor state from the
/// generator, so a replay with the same generator sees the same path.
pub struct Simulator<'a> {
    chain: &'a Ctmc,
    dta: Dta,
    sampler: PathSampler,
    graph: RegionGraph,
    /// Product location per `(state, automaton location)`.
    locations: HashMap<(usize, usize), LocId>,
    /// Candidate automaton edges per `(automaton location, state)`.
    candidates: HashMap<(usize, usize), Vec<usize>>,
    finite: bool,
    accepting: Vec<bool>,
    /// Finite acceptance: vertices that can still reach acceptance.
    live: Vec<bool>,
    /// Muller acceptance: bottom SCC membership and whether it accepts.
    bscc: Vec<Option<bool>>,
    max_steps: usize,
}

impl<'a> Simulator<'a> {
    /// Builds the product and region graph used to decide runs early.
    pub fn new(c: &'a Ctmc, a: &Dta, cfg: &SimConfig) -> Result<Self> {
        let dta = validate_dta(a)?.dta;
        let m = build_product(c, &dta)?;
        let graph = RegionGraph::simplified(&m)?;
        let finite = matches!(dta.acceptance(), Acceptance::Finite(_));
        let locations = (0..m.num_locations())
            .map(|l| (m.pair(LocId(l)), LocId(l)))
            .collect();
        let mut candidates = HashMap::new();
        for q in 0..dta.locations().len() {
            for s in 0..c.num_states() {
                let list: Vec<usize> = dta.edges_on(q, c.label(s)).map(|(i, _)| i).collect();
                candidates.insert((q, s), list);
            }
        }
        Ok(Simulator {
            chain: c,
            sampler: PathSampler::new(c),
            live: if finite { graph.can_reach_accepting() } else { Vec::new() },
            bscc: if finite {
                Vec::new()
            } else {
                bscc_membership(&m, &graph, cfg.muller_mode)
            },
            graph,
            locations,
            candidates,
            finite,
            accepting: (0..dta.locations().len()).map(|q| dta.is_accepting(q)).collect(),
            max_steps: cfg.max_steps,
            dta,
        })
    }

    /// Verdict implied by the region-graph vertex of `(s, q, eta)`, if any.
    fn vertex_verdict(&self, s: usize, q: usize, eta: &ClockValuation) -> Option<Verdict> {
        let l = *self.locations.get(&(s, q))?;
        let region = self.graph.space().region_of(eta);
        let v = self.graph.vertex_of(l, &region)?;
        if self.finite {
            (!self.live[v.0]).then_some(Verdict::Reject)
        } else {
            self.bscc[v.0].map(|acc| if acc { Verdict::Accept } else { Verdict::Reject })
        }
    }

    /// Samples and classifies one run.
    pub fn run<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<Verdict> {
        let (mut s, mut q) = (self.chain.initial(), self.dta.initial());
        let mut eta = ClockValuation::zero(self.dta.num_clocks());
        if self.finite && self.accepting[q] {
            return Ok(Verdict::Accept);
        }
        if let Some(v) = self.vertex_verdict(s, q, &eta) {
            return Ok(v);
        }
        for _ in 0..self.max_steps {
            let Some(t) = self.sampler.sojourn(s, rng) else {
                if self.finite {
                    return Ok(Verdict::Reject);
                }
                // No more jumps: the run ends in the unbounded region.
                let far = eta.delayed(1.0 + self.graph.space().num_clocks() as f64 * 1e6);
                return Ok(self.vertex_verdict(s, q, &far).unwrap_or(Verdict::Reject));
            };
            if !self.finite {
                if let Some(v) = self.vertex_verdict(s, q, &eta.delayed(t)) {
                    return Ok(v);
                }
            }
            let next = self.sampler.successor(s, rng);
            let cands = self.candidates.get(&(q, s)).map(|c| c.as_slice()).unwrap_or(&[]);
            match step_among(&self.dta, cands.iter().copied(), &eta, t)? {
                Step::Stuck => return Ok(Verdict::Reject),
                Step::Moved {
                    location, valuation, ..
                } => {
                    s = next;
                    q = location;
                    eta = valuation;
                }
            }
            if self.finite && self.accepting[q] {
                return Ok(Verdict::Accept);
            }
            if let Some(v) = self.vertex_verdict(s, q, &eta) {
                return Ok(v);
            }
        }
        Ok(Verdict::Undecided)
    }
}

/// Estimates the probability that `a` accepts the paths of `c`.
pub fn simulate_acceptance(c: &Ctmc, a: &Dta, cfg: &SimConfig) -> Result<Estimate> {
    if cfg.samples == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if !(cfg.confidence > 0.0 && cfg.confidence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence {} must lie in (0,1)",
            cfg.confidence
        )));
    }
    if cfg.max_steps == 0 {
        return Err(Error::InvalidArgument("max_steps must be at least 1".into()));
    }
    let sim = Simulator::new(c, a, cfg)?;
    let chunks = cfg.samples.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i);
            let n = CHUNK.min(cfg.samples - i * CHUNK);
            let mut tally = [0u64; 3];
            for _ in 0..n {
                match sim.run(&mut rng)? {
                    Verdict::Accept => tally[0] += 1,
                    Verdict::Reject => tally[1] += 1,
                    Verdict::Undecided => tally[2] += 1,
                }
            }
            Ok(tally)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold([0u64; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
    Ok(estimate(counts[0], counts[1], counts[2], cfg.confidence))
}

/// [`simulate_acceptance`] wrapped in a report.
pub fn simulate_report(c: &Ctmc, a: &Dta, cfg: &SimConfig) -> Result<VerificationReport> {
    let mut timer = PhaseTimer::start();
    let e = simulate_acceptance(c, a, cfg)?;
    timer.lap("sampling");
    let acceptance = match a.acceptance() {
        Acceptance::Finite(_) => "finite",
        Acceptance::Muller(_) => "muller",
    };
    let mut r = VerificationReport::new(Method::Simulate, acceptance, e.p_hat);
    r.sampling = Some(SampleSummary {
        samples: e.samples(),
        accepted: e.accepted,
        rejected: e.rejected,
        undecided: e.undecided,
        half_width: e.half_width,
        confidence: e.confidence,
        bracket: e.bracket,
    });
    r.stats = GraphStats {
        locations: c.num_states() * a.locations().len(),
        ..GraphStats::default()
    };
    if e.undecided > 0 {
        r.warnings.push(format!(
            "{} runs were undecided after {} steps",
            e.undecided, cfg.max_steps
        ));
    }
    r.timings_ms = timer.phases;
    Ok(r)
}

fn estimate(accepted: u64, rejected: u64, undecided: u64, confidence: f64) -> Estimate {
    let n = (accepted + rejected + undecided) as f64;
    let bracket = (accepted as f64 / n, (accepted + undecided) as f64 / n);
    let decided = (accepted + rejected) as f64;
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let (p_hat, interval) = if decided == 0.0 {
        (0.5, (0.0, 1.0))
    } else {
        let p = accepted as f64 / decided;
        let interval = if (0.01..=0.99).contains(&p) {
            let half = z * (p * (1.0 - p) / decided).sqrt();
            ((p - half).max(0.0), (p + half).min(1.0))
        } else {
            let z2 = z * z / decided;
            let center = (p + z2 / 2.0) / (1.0 + z2);
            let half = z / (1.0 + z2) * (p * (1.0 - p) / decided + z2 / (4.0 * decided)).sqrt();
            ((center - half).max(0.0), (center + half).min(1.0))
        };
        (p, interval)
    };
    Estimate {
        p_hat,
        half_width: (p_hat - interval.0).max(interval.1 - p_hat),
        interval,
        accepted,
        rejected,
        undecided,
        bracket,
        confidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn wilson_interval_near_zero() {
        let e = estimate(0, 1000, 0, 0.99);
        assert_eq!(e.p_hat, 0.0);
        assert_eq!(e.interval.0, 0.0);
        assert!(e.interval.1 > 0.0 && e.interval.1 < 0.01);
    }

    #[test]
    fn accepting_start_is_certain() {
        let (c, a) = models::one_transition(1.0, 1);
        let a = a
            .with_acceptance(Acceptance::Finite([0].into_iter().collect()))
            .unwrap();
        let cfg = SimConfig {
            samples: 1000,
            ..SimConfig::default()
        };
        let e = simulate_acceptance(&c, &a, &cfg).unwrap();
        assert_eq!((e.p_hat, e.undecided), (1.0, 0));
    }

    #[test]
    fn reproducible_for_a_seed() {
        let (c, a) = models::one_transition(1.0, 1);
        let cfg = SimConfig {
            samples: 10_000,
            seed: 42,
            ..SimConfig::default()
        };
        let e1 = simulate_acceptance(&c, &a, &cfg).unwrap();
        let e2 = simulate_acceptance(&c, &a, &cfg).unwrap();
        assert_eq!(e1, e2);
        assert!((e1.p_hat - (1.0 - (-1.0f64).exp())).abs() < 4.0 * e1.half_width);
    }
}
