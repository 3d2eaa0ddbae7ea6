//! Probability that a continuous-time Markov chain produces timed paths
//! accepted by a deterministic timed automaton.
//!
//! The pipeline builds the product of chain and automaton, abstracts clock
//! valuations into regions and then computes reachability of accepting
//! vertices with one of several engines:
//!
//! - [`single_clock`]: exact for one clock, via transient analysis of one
//!   CTMC per constant interval and one linear system;
//! - [`grid`]: value iteration over a clock-valuation grid, any number of
//!   clocks, with time-bounded queries;
//! - [`muller`]: Muller acceptance reduced to reaching accepting bottom SCCs,
//!   plus graph-only qualitative checks;
//! - [`sim`]: Monte Carlo estimation, used as an independent oracle.

pub mod error;
pub mod grid;
pub mod io;
pub mod markov;
pub mod models;
pub mod muller;
pub mod product;
pub mod region;
pub mod report;
pub mod sim;
pub mod single_clock;
pub mod timed;

pub use error::{Error, Result};
pub use markov::{Ctmc, CtmcBuilder, Dtmc};
pub use product::{build_product, Dmta, LocId};
pub use region::{RegionGraph, VertexId};
pub use report::{Method, VerificationReport};
pub use timed::{Acceptance, ClockConstraint, ClockValuation, Dta, DtaBuilder};
