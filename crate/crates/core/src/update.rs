//! Estimate-update strategies: which messages flow at slot end, which
//! estimates synchronize to truth, and the analytic lower bound on the
//! per-(dispatcher, server) per-slot update probability.
//!
//! Message cost model: a push probe costs 2 messages per sampled server
//! (query + response); a pull report costs 1.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sim::SystemState;
use crate::stochastic::{RngStream, TrafficConfig};

/// How local estimates are refreshed at the end of each slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpdateStrategy {
    /// Each dispatcher that had arrivals samples `d` distinct servers with
    /// probability `p_hat` and overwrites those estimates with truth.
    Push { p_hat: f64, d: usize },
    /// Each server with completed tasks picks a dispatcher uniformly at
    /// random and reports its queue: unconditionally when it drained to
    /// idle, with probability `p_hat` otherwise.
    Pull { p_hat: f64 },
}

impl UpdateStrategy {
    /// Range checks. `p_hat = 0` is accepted so that degenerate
    /// configurations can still be loaded and *reported* as failing the
    /// optimality conditions; the analytic bound below rejects them.
    pub fn validate(&self, num_servers: usize) -> Result<()> {
        let p_hat = match self {
            UpdateStrategy::Push { p_hat, d } => {
                if *d < 1 || *d > num_servers {
                    return Err(Error::InvalidUpdate(format!(
                        "push requires 1 <= d <= N, got d = {d}, N = {num_servers}"
                    )));
                }
                *p_hat
            }
            UpdateStrategy::Pull { p_hat } => *p_hat,
        };
        if !p_hat.is_finite() || !(0.0..=1.0).contains(&p_hat) {
            return Err(Error::InvalidUpdate(format!(
                "p_hat must be in [0, 1], got {p_hat}"
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            UpdateStrategy::Push { p_hat, d } => format!("push(p{p_hat},d{d})"),
            UpdateStrategy::Pull { p_hat } => format!("pull(p{p_hat})"),
        }
    }
}

/// Realized updates for one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateOutcome {
    /// True exactly where an estimate was overwritten with truth.
    pub indicators: Grid<bool>,
    /// Dispatcher<->server messages exchanged this slot.
    pub messages: u64,
    /// Number of push sampling events (dispatchers that probed).
    pub push_samplings: u64,
    /// Number of pull reports sent.
    pub pull_reports: u64,
}

/// Push updates at the end of a slot: every dispatcher with arrivals this
/// slot probes `d` distinct servers with probability `p_hat`, overwriting
/// those estimates with the end-of-slot true queue lengths. Costs `2d`
/// messages per probing dispatcher. Dispatchers without arrivals do nothing.
pub fn push_update(
    state: &mut SystemState,
    arrivals_per_dispatcher: &[u64],
    p_hat: f64,
    d: usize,
    rng: &mut RngStream,
) -> UpdateOutcome {
    let m = state.estimates.rows();
    let n = state.estimates.cols();
    let mut indicators = Grid::new(m, n);
    let mut messages = 0u64;
    let mut push_samplings = 0u64;
    for (dispatcher, &arrivals) in arrivals_per_dispatcher.iter().enumerate() {
        if arrivals == 0 || !rng.random_bool(p_hat) {
            continue;
        }
        push_samplings += 1;
        messages += 2 * d as u64;
        for server in rand::seq::index::sample(rng, n, d) {
            state.estimates[(dispatcher, server)] = state.queues[server];
            indicators[(dispatcher, server)] = true;
        }
    }
    UpdateOutcome {
        indicators,
        messages,
        push_samplings,
        pull_reports: 0,
    }
}

/// Pull updates at the end of a slot: every server that completed tasks
/// this slot picks a dispatcher uniformly at random; if the server drained
/// to idle it reports `(n, 0)` unconditionally, otherwise it reports its
/// end-of-slot queue with probability `p_hat`. One message per report.
pub fn pull_update(
    state: &mut SystemState,
    departures: &[u64],
    p_hat: f64,
    rng: &mut RngStream,
) -> UpdateOutcome {
    let m = state.estimates.rows();
    let n = state.estimates.cols();
    let mut indicators = Grid::new(m, n);
    let mut messages = 0u64;
    let mut pull_reports = 0u64;
    for server in 0..n {
        if departures[server] == 0 {
            continue;
        }
        let dispatcher = rng.random_range(0..m);
        let queue_now = state.queues[server];
        let report = queue_now == 0 || rng.random_bool(p_hat);
        if report {
            state.estimates[(dispatcher, server)] = queue_now;
            indicators[(dispatcher, server)] = true;
            messages += 1;
            pull_reports += 1;
        }
    }
    UpdateOutcome {
        indicators,
        messages,
        push_samplings: 0,
        pull_reports,
    }
}

/// Analytic lower bound `p` on the per-(m, n) per-slot update probability.
///
/// Push: `p = p0 * p_hat * d / N` with `p0 = min_m P(A^m > 0)` computed
/// exactly from the arrival pgf under thinning.
///
/// Pull: `p = (1/M) * p_hat * q_dep` with `q_dep = min_n P(S_n >= 1)`, the
/// configured-distribution bound on the probability that a server holding
/// work completes (and may report) in a slot.
pub fn update_probability_lower_bound(strat: &UpdateStrategy, traffic: &TrafficConfig) -> f64 {
    match strat {
        UpdateStrategy::Push { p_hat, d } => {
            let p0 = traffic.arrival_positive_prob_lower_bound();
            p0 * p_hat * *d as f64 / traffic.num_servers() as f64
        }
        UpdateStrategy::Pull { p_hat } => {
            let q_dep = traffic
                .service()
                .iter()
                .map(|dist| 1.0 - dist.prob_zero())
                .fold(f64::INFINITY, f64::min);
            p_hat * q_dep / traffic.num_dispatchers() as f64
        }
    }
}

/// As [`update_probability_lower_bound`], but signals when the bound is zero
/// and the optimality conditions are therefore unverifiable.
pub fn analytic_update_lower_bound(
    strat: &UpdateStrategy,
    traffic: &TrafficConfig,
) -> Result<f64> {
    let p = update_probability_lower_bound(strat, traffic);
    if p > 0.0 {
        Ok(p)
    } else {
        Err(Error::UpdateBoundZero)
    }
}
