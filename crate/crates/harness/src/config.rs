//! Experiment configuration: a TOML file mirroring the simulator's domain
//! types, validated eagerly so that every sweep point satisfies the traffic
//! invariants before any simulation starts.
//!
//! ```toml
//! [traffic]
//! arrival = { kind = "poisson" }          # mean derived per epsilon
//! service = [
//!     { kind = "poisson", mean = 1.0 },
//!     { kind = "poisson", mean = 2.0 },
//! ]
//! dispatcher_probs = [0.5, 0.5]
//! epsilons = [1.0, 0.5]                   # strictly positive, descending
//!
//! [policy]
//! kind = "led"                            # or "baseline"
//! strategy = { kind = "ljsq" }            # ljsq | ljba | lpod{d} | weighted_random | custom{rank_probs}
//! update = { kind = "pull", p_hat = 0.5 } # or { kind = "push", p_hat, d }
//! estimate_mode = "self_increment"        # or "static"
//!
//! [run]
//! slots = 200000                          # measured slots at the smallest epsilon
//! seed = 1
//! replications = 2
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ledsim_core::sim::{EstimateMode, Policy};
use ledsim_core::stochastic::{IntDistribution, TrafficConfig};
use ledsim_core::{BaselineKind, StrategyKind, UpdateStrategy};

use crate::error::HarnessError;
use crate::Result;

/// Arrival-process family whose mean is derived per sweep point as
/// `mu_total - epsilon`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalSpec {
    #[default]
    Poisson,
    Geometric,
    BernoulliScaled {
        batch: u64,
    },
}

impl ArrivalSpec {
    pub fn distribution_with_mean(&self, mean: f64) -> Result<IntDistribution> {
        if mean <= 0.0 {
            return Err(HarnessError::InvalidConfig(format!(
                "derived arrival mean {mean} <= 0; epsilon must stay below mu_total"
            )));
        }
        Ok(match self {
            ArrivalSpec::Poisson => IntDistribution::Poisson { mean },
            ArrivalSpec::Geometric => IntDistribution::Geometric { mean },
            ArrivalSpec::BernoulliScaled { batch } => {
                let prob = mean / *batch as f64;
                if !(0.0..1.0).contains(&prob) {
                    return Err(HarnessError::InvalidConfig(format!(
                        "bernoulli_scaled batch {batch} cannot realize mean {mean} with prob < 1"
                    )));
                }
                IntDistribution::BernoulliScaled {
                    batch: *batch,
                    prob,
                }
            }
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    #[serde(default)]
    pub arrival: ArrivalSpec,
    pub service: Vec<IntDistribution>,
    pub dispatcher_probs: Vec<f64>,
    /// Heavy-traffic sweep points, strictly positive and sorted descending.
    pub epsilons: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySection {
    Led {
        strategy: StrategyKind,
        update: UpdateStrategy,
        #[serde(default)]
        estimate_mode: EstimateMode,
    },
    Baseline {
        baseline: BaselineKind,
    },
}

impl PolicySection {
    pub fn to_policy(&self) -> Policy {
        match self {
            PolicySection::Led {
                strategy,
                update,
                estimate_mode,
            } => Policy::Led(ledsim_core::LedPolicy {
                strategy: strategy.clone(),
                update: update.clone(),
                estimate_mode: *estimate_mode,
            }),
            PolicySection::Baseline { baseline } => Policy::Baseline(baseline.clone()),
        }
    }
}

fn default_replications() -> u32 {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Measured slots at the smallest epsilon (larger epsilons scale down
    /// unless `scale_slots_with_epsilon = false`).
    pub slots: u64,
    /// Warmup slots; defaults to `max(1e5, 20/epsilon)` per sweep point.
    #[serde(default)]
    pub warmup: Option<u64>,
    /// Number of batches for the batch-means standard errors (default 50).
    #[serde(default)]
    pub batch_count: Option<u64>,
    #[serde(default = "default_replications")]
    pub replications: u32,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub scale_slots_with_epsilon: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub traffic: TrafficSection,
    pub policy: PolicySection,
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn num_dispatchers(&self) -> usize {
        self.traffic.dispatcher_probs.len()
    }

    pub fn num_servers(&self) -> usize {
        self.traffic.service.len()
    }

    pub fn mu_total(&self) -> f64 {
        self.traffic.service.iter().map(|d| d.mean()).sum()
    }

    /// Concrete traffic for one sweep point: arrival mean `mu_total - eps`.
    pub fn traffic_for_epsilon(&self, epsilon: f64) -> Result<TrafficConfig> {
        let arrival = self
            .traffic
            .arrival
            .distribution_with_mean(self.mu_total() - epsilon)?;
        Ok(TrafficConfig::new(
            arrival,
            self.traffic.dispatcher_probs.clone(),
            self.traffic.service.clone(),
            epsilon,
        )?)
    }

    /// Enforces every invariant: epsilon list shape, replication count, the
    /// policy's parameter ranges, and all per-point traffic invariants.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::InvalidConfig(msg));
        if self.traffic.epsilons.is_empty() {
            return fail("epsilons must not be empty".into());
        }
        for &eps in &self.traffic.epsilons {
            if !(eps > 0.0) {
                return fail(format!("epsilon {eps} must be strictly positive"));
            }
        }
        for w in self.traffic.epsilons.windows(2) {
            if w[0] <= w[1] {
                return fail(format!(
                    "epsilons must be sorted strictly descending, got {} before {}",
                    w[0], w[1]
                ));
            }
        }
        if self.run.replications < 1 {
            return fail("replications must be >= 1".into());
        }
        if self.run.slots == 0 {
            return fail("slots must be >= 1".into());
        }
        self.policy
            .to_policy()
            .validate(self.num_servers())
            .map_err(HarnessError::Core)?;
        for &eps in &self.traffic.epsilons {
            self.traffic_for_epsilon(eps)?;
        }
        Ok(())
    }
}

/// Reads and validates an experiment config. Parse errors carry line
/// information; validation errors name the violated invariant.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| HarnessError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [traffic]
        service = [ { kind = "poisson", mean = 1.0 }, { kind = "poisson", mean = 2.0 } ]
        dispatcher_probs = [1.0]
        epsilons = [0.5]

        [policy]
        kind = "led"
        strategy = { kind = "ljsq" }
        update = { kind = "pull", p_hat = 0.5 }

        [run]
        slots = 1000
        seed = 7
    "#;

    fn parse(text: &str) -> ExperimentConfig {
        toml::from_str(text).expect("parse")
    }

    #[test]
    fn minimal_config_loads_and_validates() {
        let cfg = parse(MINIMAL);
        cfg.validate().unwrap();
        assert_eq!(cfg.num_dispatchers(), 1);
        assert_eq!(cfg.num_servers(), 2);
        let t = cfg.traffic_for_epsilon(0.5).unwrap();
        assert!((t.lambda_total() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn zero_epsilon_rejected() {
        let cfg = parse(&MINIMAL.replace("epsilons = [0.5]", "epsilons = [0.0]"));
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("strictly positive"), "{err}");
    }

    #[test]
    fn bad_dispatcher_probs_rejected() {
        let cfg = parse(&MINIMAL.replace("dispatcher_probs = [1.0]", "dispatcher_probs = [0.9]"));
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("sum"), "{err}");
    }

    #[test]
    fn unsorted_epsilons_rejected() {
        let cfg = parse(&MINIMAL.replace("epsilons = [0.5]", "epsilons = [0.1, 0.5]"));
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("descending"), "{err}");
    }

    #[test]
    fn epsilon_beyond_capacity_rejected() {
        let cfg = parse(&MINIMAL.replace("epsilons = [0.5]", "epsilons = [3.5]"));
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("mu_total"), "{err}");
    }

    #[test]
    fn baseline_policy_parses() {
        let text = MINIMAL
            .replace(
                "kind = \"led\"\n        strategy = { kind = \"ljsq\" }\n        update = { kind = \"pull\", p_hat = 0.5 }",
                "kind = \"baseline\"\n        baseline = { kind = \"pod\", d = 2 }",
            );
        let cfg = parse(&text);
        cfg.validate().unwrap();
        assert!(matches!(cfg.policy, PolicySection::Baseline { .. }));
    }

    #[test]
    fn arrival_spec_derivations() {
        assert_eq!(
            ArrivalSpec::Poisson.distribution_with_mean(2.5).unwrap(),
            IntDistribution::Poisson { mean: 2.5 }
        );
        let d = ArrivalSpec::BernoulliScaled { batch: 10 }
            .distribution_with_mean(2.5)
            .unwrap();
        assert_eq!(
            d,
            IntDistribution::BernoulliScaled {
                batch: 10,
                prob: 0.25
            }
        );
        assert!(ArrivalSpec::BernoulliScaled { batch: 2 }
            .distribution_with_mean(2.5)
            .is_err());
        assert!(ArrivalSpec::Poisson.distribution_with_mean(-1.0).is_err());
    }
}
