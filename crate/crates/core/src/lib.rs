//! Discrete-time simulator and analysis library for local-estimate-driven
//! (LED) load balancing in heterogeneous systems with multiple dispatchers.
//!
//! The model is a slotted-time system of `M` dispatchers and `N` servers.
//! Each dispatcher keeps a local, possibly stale, estimate of every server's
//! queue length and routes each slot's arrival batch using *only* those
//! estimates. Estimates are refreshed by an update strategy (push probes or
//! pull reports) at slot boundaries. The library provides:
//!
//! - [`stochastic`]: integer-valued light-tailed arrival/service processes
//!   and reproducible seeded random streams,
//! - [`sim`]: the per-slot state transition and full simulation runs,
//! - [`dispatch`]: dispatching strategies, the dispatching-preference
//!   analyzer, and the tilted / delta-tilted certifiers,
//! - [`update`]: push and pull estimate-update strategies and their analytic
//!   update-probability lower bounds,
//! - [`baselines`]: fresh-information comparison policies (JSQ,
//!   power-of-d with fresh samples, join-idle-queue),
//! - [`metrics`]: warmup-aware batch-means statistics and the heavy-traffic
//!   observables (epsilon-scaled total queue, unused service, queue
//!   imbalance, estimation error, message overhead).

pub mod baselines;
pub mod dispatch;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod sim;
pub mod stochastic;
pub mod update;

pub use baselines::BaselineKind;
pub use dispatch::{PreferenceVector, RoutingDistribution, StrategyKind};
pub use error::Error;
pub use grid::Grid;
pub use metrics::{HeavyTrafficSummary, MetricsAccumulator};
pub use sim::{EstimateMode, LedPolicy, Policy, Simulation, SlotRecord, SystemState};
pub use stochastic::{IntDistribution, RngStream, TrafficConfig};
pub use update::UpdateStrategy;
