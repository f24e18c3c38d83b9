//! Epsilon-sweep orchestration: independent streams per (epsilon,
//! replication), parallel replications, deterministic row order, CSV
//! emission.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use ledsim_core::metrics::{default_warmup, HeavyTrafficSummary};
use ledsim_core::sim::{run_simulation, RunParams};
use ledsim_core::stochastic::RngStream;

use crate::config::{ExperimentConfig, RunSection};
use crate::error::HarnessError;
use crate::Result;

/// Versioned CSV schema tag carried in every row.
pub const SUMMARY_SCHEMA_VERSION: &str = "ledsim.v1";

/// One CSV row: one (policy, epsilon, replication) summary.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    pub schema: &'static str,
    pub policy: String,
    pub epsilon: f64,
    pub replication: u32,
    pub load: f64,
    pub slots_measured: u64,
    pub warmup_slots: u64,
    pub mean_sum_q: f64,
    pub se_sum_q: f64,
    pub scaled_sum_q: f64,
    pub zeta_half: f64,
    pub ratio: f64,
    pub mean_delay: f64,
    pub se_delay: f64,
    pub mean_u1: f64,
    pub se_u1: f64,
    pub mean_u2sq: f64,
    pub se_u2sq: f64,
    pub mean_qperp_sq: f64,
    pub se_qperp_sq: f64,
    pub x_mean_max: f64,
    pub update_freq_min: f64,
    pub messages_per_arrival: f64,
    pub messages_total: u64,
    pub max_queue: u64,
    pub max_sum_q: u64,
}

impl SummaryRow {
    pub fn new(
        policy: String,
        replication: u32,
        load: f64,
        warmup_slots: u64,
        s: &HeavyTrafficSummary,
    ) -> Self {
        Self {
            schema: SUMMARY_SCHEMA_VERSION,
            policy,
            epsilon: s.epsilon,
            replication,
            load,
            slots_measured: s.slots_measured,
            warmup_slots,
            mean_sum_q: s.mean_sum_q,
            se_sum_q: s.se_sum_q,
            scaled_sum_q: s.scaled_sum_q,
            zeta_half: s.zeta_half,
            ratio: s.ratio,
            mean_delay: s.mean_delay,
            se_delay: s.se_delay,
            mean_u1: s.mean_u1,
            se_u1: s.se_u1,
            mean_u2sq: s.mean_u2sq,
            se_u2sq: s.se_u2sq,
            mean_qperp_sq: s.mean_qperp_sq,
            se_qperp_sq: s.se_qperp_sq,
            x_mean_max: s.x_mean_max,
            update_freq_min: s.update_freq_min,
            messages_per_arrival: s.messages_per_arrival,
            messages_total: s.messages_total,
            max_queue: s.max_queue,
            max_sum_q: s.max_sum_q,
        }
    }
}

/// Measured-slot budget for a sweep point: the configured budget applies to
/// the smallest epsilon; larger epsilons mix faster and scale down
/// proportionally, floored at a tenth of the budget.
pub fn slots_for_epsilon(base_slots: u64, eps_min: f64, eps: f64) -> u64 {
    let scaled = (base_slots as f64 * eps_min / eps).round() as u64;
    scaled.clamp(base_slots / 10, base_slots).max(1)
}

/// Resolves the run horizon for one sweep point.
pub fn effective_run_params(run: &RunSection, eps_min: f64, eps: f64) -> RunParams {
    let measured = if run.scale_slots_with_epsilon {
        slots_for_epsilon(run.slots, eps_min, eps)
    } else {
        run.slots
    };
    let warmup = run.warmup.unwrap_or_else(|| default_warmup(eps));
    let batch_count = run.batch_count.unwrap_or(50).max(10);
    RunParams {
        measured_slots: measured,
        warmup_slots: warmup,
        batch_size: (measured / batch_count).max(1),
    }
}

/// Stream id for an (epsilon index, replication) pair; distinct pairs get
/// provably independent streams of the configured seed.
pub fn stream_id(eps_index: usize, replication: u32) -> u64 {
    ((eps_index as u64) << 32) | replication as u64
}

/// Runs the full sweep: for each epsilon (descending) and replication, an
/// independent stream and a full simulation. Replications within an epsilon
/// run in parallel; rows come back keyed and sorted, so output order is
/// deterministic regardless of scheduling.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<SummaryRow>> {
    cfg.validate()?;
    match jobs {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| HarnessError::InvalidConfig(format!("worker pool: {e}")))?;
            pool.install(|| run_sweep_inner(cfg))
        }
        None => run_sweep_inner(cfg),
    }
}

fn run_sweep_inner(cfg: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    let policy = cfg.policy.to_policy();
    let label = policy.label();
    let eps_min = *cfg
        .traffic
        .epsilons
        .last()
        .expect("validated: nonempty epsilon list");
    let mut rows = Vec::new();
    for (ei, &eps) in cfg.traffic.epsilons.iter().enumerate() {
        let traffic = cfg.traffic_for_epsilon(eps)?;
        let params = effective_run_params(&cfg.run, eps_min, eps);
        let load = traffic.load();
        let mut eps_rows = (0..cfg.run.replications)
            .into_par_iter()
            .map(|rep| {
                let rng = RngStream::new(cfg.run.seed, stream_id(ei, rep));
                run_simulation(&traffic, &policy, &params, rng)
                    .map(|out| {
                        SummaryRow::new(
                            label.clone(),
                            rep,
                            load,
                            params.warmup_slots,
                            &out.summary,
                        )
                    })
                    .map_err(|source| HarnessError::Simulation {
                        epsilon: eps,
                        replication: rep,
                        source,
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        eps_rows.sort_by_key(|r| r.replication);
        rows.extend(eps_rows);
    }
    Ok(rows)
}

/// Runs the resource-pooled single-queue reference over the configured
/// epsilon sweep (the configured policy is ignored). Row policy label:
/// "pooled".
pub fn run_pooled(cfg: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    cfg.validate()?;
    let eps_min = *cfg
        .traffic
        .epsilons
        .last()
        .expect("validated: nonempty epsilon list");
    let mut rows = Vec::new();
    for (ei, &eps) in cfg.traffic.epsilons.iter().enumerate() {
        let traffic = cfg.traffic_for_epsilon(eps)?;
        let params = effective_run_params(&cfg.run, eps_min, eps);
        // resource_pooled_sim spends a fifth of its budget on warmup.
        let total_slots = params.measured_slots + params.warmup_slots;
        for rep in 0..cfg.run.replications {
            let mut rng = RngStream::new(cfg.run.seed, stream_id(ei, rep));
            let summary = ledsim_core::metrics::resource_pooled_sim(&traffic, total_slots, &mut rng)
                .map_err(|source| HarnessError::Simulation {
                    epsilon: eps,
                    replication: rep,
                    source,
                })?;
            rows.push(SummaryRow::new(
                "pooled".into(),
                rep,
                traffic.load(),
                total_slots / 5,
                &summary,
            ));
        }
    }
    Ok(rows)
}

/// Writes rows as CSV with the versioned header.
pub fn write_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| HarnessError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Renders rows into a whitespace-separated plot-data file:
/// `x policy mean_delay ci_lo ci_hi`, one line per (x, policy).
pub fn write_plot_data(
    rows: &[SummaryRow],
    x_axis: PlotAxis,
    path: &Path,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| HarnessError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    let mut out = String::new();
    out.push_str("# x policy mean_delay ci_lo ci_hi\n");
    for r in rows {
        let x = match x_axis {
            PlotAxis::Epsilon => r.epsilon,
            PlotAxis::Load => r.load,
        };
        let half = 1.96 * r.se_delay;
        out.push_str(&format!(
            "{x} {} {} {} {}\n",
            r.policy,
            r.mean_delay,
            r.mean_delay - half,
            r.mean_delay + half
        ));
    }
    std::fs::write(path, out).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotAxis {
    Epsilon,
    Load,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_scaling_floors_and_caps() {
        assert_eq!(slots_for_epsilon(2_000_000, 0.15, 0.15), 2_000_000);
        assert_eq!(slots_for_epsilon(2_000_000, 0.15, 0.3), 1_000_000);
        assert_eq!(slots_for_epsilon(2_000_000, 0.15, 3.0), 200_000);
        // Floor at a tenth.
        assert_eq!(slots_for_epsilon(2_000_000, 0.15, 30.0), 200_000);
    }

    #[test]
    fn stream_ids_are_unique_per_pair() {
        let mut seen = std::collections::HashSet::new();
        for ei in 0..10 {
            for rep in 0..10 {
                assert!(seen.insert(stream_id(ei, rep)));
            }
        }
    }
}
