//! Probe-driven health localization for simulated parallel storage clusters.
//!
//! The crate wires together five stages:
//!
//! * [`topology`]: a typed component graph (clients, networks, LNET routers,
//!   metadata and data servers, storage targets) and the probe paths through it.
//! * [`simulator`]: a seeded fault-injection simulator that produces probe
//!   outcomes, load metrics and error logs.
//! * [`monitor`]: probe planning, monitor placement and per-path Binomial
//!   aggregation.
//! * [`inference`]: a Beta-Binomial factor graph over component health,
//!   sampled with Metropolis-within-Gibbs.
//! * [`diagnosis`]: root-cause attribution via local outlier factor on load
//!   metrics and normalized error-log differencing.
//!
//! [`harness`] runs the whole pipeline window by window and scores it against
//! the injected ground truth.

pub mod diagnosis;
pub mod error;
pub mod harness;
pub mod inference;
pub mod io;
pub mod monitor;
pub mod rng;
pub mod simulator;
pub mod topology;

pub use error::{Error, Result};
pub use topology::{ComponentId, ComponentKind, ProbePath, Topology, TopologySpec};
