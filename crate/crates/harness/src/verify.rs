//! Condition verification: certifies the configured dispatching strategy's
//! tilt margin and the update strategy's analytic probability lower bound,
//! then states whether the throughput- and heavy-traffic-delay-optimality
//! hypotheses hold for this configuration.

use std::fmt;

use ledsim_core::dispatch::{certify_strategy, Certification};
use ledsim_core::stochastic::RngStream;
use ledsim_core::update::update_probability_lower_bound;

use crate::config::{ExperimentConfig, PolicySection};
use crate::Result;

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub policy: String,
    /// Strategy certificate, absent for baseline policies.
    pub certification: Option<Certification>,
    /// (epsilon, analytic p lower bound) per sweep point.
    pub update_bounds: Vec<(f64, f64)>,
    /// Smallest analytic p over the sweep.
    pub update_bound_min: f64,
    /// Tilted dispatching + p > 0.
    pub throughput_condition_holds: bool,
    /// Delta-tilted (positive certified margin) + p > 0.
    pub delay_condition_holds: bool,
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "policy: {}", self.policy)?;
        match &self.certification {
            Some(cert) => {
                writeln!(
                    f,
                    "dispatching strategy: tilted on all {} evaluated states: {}; certified delta = {:.9}",
                    cert.states_checked,
                    if cert.tilted_on_all { "yes" } else { "NO" },
                    cert.max_certified_delta
                )?;
                writeln!(f, "update strategy: analytic per-(m,n) lower bound p:")?;
                for (eps, p) in &self.update_bounds {
                    writeln!(f, "  epsilon {eps:>8.4} -> p = {p:.9}")?;
                }
                writeln!(f, "  min over sweep: {:.9}", self.update_bound_min)?;
                writeln!(
                    f,
                    "throughput-optimality conditions (tilted, p > 0): {}",
                    if self.throughput_condition_holds {
                        "HOLD"
                    } else {
                        "NOT SATISFIED"
                    }
                )?;
                write!(
                    f,
                    "heavy-traffic delay-optimality conditions (delta-tilted, p > 0): {}",
                    if self.delay_condition_holds {
                        "HOLD"
                    } else {
                        "NOT SATISFIED"
                    }
                )
            }
            None => write!(
                f,
                "baseline policy: the local-estimation optimality conditions do not apply"
            ),
        }
    }
}

/// Evaluates the optimality hypotheses for the configured policy. Never
/// fails on an unsatisfied condition; the report states it.
pub fn verify_conditions(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let policy = cfg.policy.to_policy();
    let label = policy.label();

    let (strategy, update) = match &cfg.policy {
        PolicySection::Baseline { .. } => {
            return Ok(VerifyReport {
                policy: label,
                certification: None,
                update_bounds: Vec::new(),
                update_bound_min: 0.0,
                throughput_condition_holds: false,
                delay_condition_holds: false,
            });
        }
        PolicySection::Led {
            strategy, update, ..
        } => (strategy, update),
    };

    // Service rates are epsilon-independent, so one certificate covers the
    // sweep; certification randomness is seeded from the config.
    let mu: Vec<f64> = cfg.traffic.service.iter().map(|d| d.mean()).collect();
    let mut rng = RngStream::new(cfg.run.seed, u64::MAX);
    let certification = certify_strategy(strategy, &mu, 2_000, &mut rng)?;

    // The push bound's P(A^m > 0) grows with the arrival rate, so the
    // certified epsilon-uniform value on this sweep is the minimum.
    let mut update_bounds = Vec::new();
    let mut p_min = f64::INFINITY;
    for &eps in &cfg.traffic.epsilons {
        let traffic = cfg.traffic_for_epsilon(eps)?;
        let p = update_probability_lower_bound(update, &traffic);
        p_min = p_min.min(p);
        update_bounds.push((eps, p));
    }

    Ok(VerifyReport {
        policy: label,
        throughput_condition_holds: certification.tilted_on_all && p_min > 0.0,
        delay_condition_holds: certification.max_certified_delta > 0.0 && p_min > 0.0,
        certification: Some(certification),
        update_bounds,
        update_bound_min: p_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ArrivalSpec, RunSection, TrafficSection};
    use ledsim_core::sim::EstimateMode;
    use ledsim_core::stochastic::IntDistribution;
    use ledsim_core::{BaselineKind, StrategyKind, UpdateStrategy};

    fn config(policy: PolicySection) -> ExperimentConfig {
        ExperimentConfig {
            traffic: TrafficSection {
                arrival: ArrivalSpec::Poisson,
                service: vec![
                    IntDistribution::Poisson { mean: 1.0 },
                    IntDistribution::Poisson { mean: 2.0 },
                    IntDistribution::Poisson { mean: 3.0 },
                ],
                dispatcher_probs: vec![0.5, 0.5],
                epsilons: vec![1.0, 0.5],
            },
            policy,
            run: RunSection {
                slots: 1000,
                warmup: Some(0),
                batch_count: Some(10),
                replications: 1,
                seed: 3,
                output_dir: None,
                scale_slots_with_epsilon: true,
            },
        }
    }

    fn led(strategy: StrategyKind, update: UpdateStrategy) -> PolicySection {
        PolicySection::Led {
            strategy,
            update,
            estimate_mode: EstimateMode::SelfIncrement,
        }
    }

    #[test]
    fn ljsq_pull_satisfies_both_conditions() {
        let report =
            verify_conditions(&config(led(StrategyKind::Ljsq, UpdateStrategy::Pull {
                p_hat: 0.5,
            })))
            .unwrap();
        assert!(report.throughput_condition_holds);
        assert!(report.delay_condition_holds);
        let cert = report.certification.unwrap();
        // delta = mu_min / mu_total = 1/6 for rates (1, 2, 3).
        assert!((cert.max_certified_delta - 1.0 / 6.0).abs() < 1e-9);
        assert!(report.update_bound_min > 0.0);
    }

    #[test]
    fn weighted_random_is_tilted_but_not_delta_tilted() {
        let report = verify_conditions(&config(led(
            StrategyKind::WeightedRandom,
            UpdateStrategy::Pull { p_hat: 0.5 },
        )))
        .unwrap();
        assert!(report.throughput_condition_holds);
        assert!(!report.delay_condition_holds);
        assert_eq!(report.certification.unwrap().max_certified_delta, 0.0);
    }

    #[test]
    fn push_p_hat_zero_fails_both() {
        let report = verify_conditions(&config(led(
            StrategyKind::Ljsq,
            UpdateStrategy::Push { p_hat: 0.0, d: 1 },
        )))
        .unwrap();
        assert!(!report.throughput_condition_holds);
        assert!(!report.delay_condition_holds);
        assert_eq!(report.update_bound_min, 0.0);
    }

    #[test]
    fn baseline_reports_not_applicable() {
        let report =
            verify_conditions(&config(PolicySection::Baseline {
                baseline: BaselineKind::Jsq,
            }))
            .unwrap();
        assert!(report.certification.is_none());
        assert!(!report.delay_condition_holds);
        assert!(report.to_string().contains("baseline"));
    }
}
