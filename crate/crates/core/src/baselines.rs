//! Fresh-information comparison policies: JSQ on instantaneous global
//! state, power-of-d with fresh samples, and join-idle-queue.
//!
//! Baselines read slot-start true queues, before any same-slot arrivals
//! land; all dispatchers in a slot therefore see the same state, which is
//! what produces the herd effect under multi-dispatcher JSQ.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineKind {
    /// Join the shortest true queue; 2N messages per dispatching decision.
    Jsq,
    /// Sample d fresh true queues, join the shortest; 2d messages per
    /// decision.
    #[serde(rename = "pod")]
    FreshPod { d: usize },
    /// Join a uniformly random idle server, or a uniformly random server if
    /// none is idle. Idle bookkeeping is simulated omnisciently; one message
    /// is counted per idle notification.
    Jiq,
}

impl BaselineKind {
    pub fn validate(&self, num_servers: usize) -> Result<()> {
        if num_servers == 0 {
            return Err(Error::InvalidBaseline("no servers".into()));
        }
        if let BaselineKind::FreshPod { d } = self {
            if *d < 2 || *d > num_servers {
                return Err(Error::InvalidBaseline(format!(
                    "pod requires 2 <= d <= N, got d = {d}, N = {num_servers}"
                )));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            BaselineKind::Jsq => "jsq".into(),
            BaselineKind::FreshPod { d } => format!("pod{d}"),
            BaselineKind::Jiq => "jiq".into(),
        }
    }

    /// Messages spent per dispatching decision. JIQ's idle notifications are
    /// counted per drain event by the engine, not per decision.
    pub fn decision_message_cost(&self, num_servers: usize) -> u64 {
        match self {
            BaselineKind::Jsq => 2 * num_servers as u64,
            BaselineKind::FreshPod { d } => 2 * *d as u64,
            BaselineKind::Jiq => 0,
        }
    }
}

/// Routes one dispatcher's slot batch given the slot-start true queues.
pub fn baseline_route(kind: &BaselineKind, true_queues: &[u64], rng: &mut RngStream) -> usize {
    match kind {
        BaselineKind::Jsq => uniform_argmin(true_queues, rng),
        BaselineKind::FreshPod { d } => {
            let picks = rand::seq::index::sample(rng, true_queues.len(), *d);
            let mut best = usize::MAX;
            let mut best_val = u64::MAX;
            let mut ties = 0u64;
            for i in picks {
                match true_queues[i].cmp(&best_val) {
                    std::cmp::Ordering::Less => {
                        best = i;
                        best_val = true_queues[i];
                        ties = 1;
                    }
                    std::cmp::Ordering::Equal => {
                        ties += 1;
                        if rng.random_range(0..ties) == 0 {
                            best = i;
                        }
                    }
                    std::cmp::Ordering::Greater => {}
                }
            }
            best
        }
        BaselineKind::Jiq => {
            let idle = true_queues.iter().filter(|&&q| q == 0).count();
            if idle == 0 {
                rng.random_range(0..true_queues.len())
            } else {
                let pick = rng.random_range(0..idle);
                true_queues
                    .iter()
                    .enumerate()
                    .filter(|(_, &q)| q == 0)
                    .nth(pick)
                    .map(|(i, _)| i)
                    .expect("idle server exists")
            }
        }
    }
}

fn uniform_argmin(values: &[u64], rng: &mut RngStream) -> usize {
    let mut best = 0usize;
    let mut best_val = values[0];
    let mut ties = 1u64;
    for (i, &v) in values.iter().enumerate().skip(1) {
        match v.cmp(&best_val) {
            std::cmp::Ordering::Less => {
                best = i;
                best_val = v;
                ties = 1;
            }
            std::cmp::Ordering::Equal => {
                ties += 1;
                if rng.random_range(0..ties) == 0 {
                    best = i;
                }
            }
            std::cmp::Ordering::Greater => {}
        }
    }
    best
}
