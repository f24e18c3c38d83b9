//! Preset experiments: the heavy-traffic sweep, the multi-dispatcher herd
//! comparison, the heavily-delayed-information comparison, and the pooled
//! single-queue reference. Each preset expands to full experiment configs,
//! runs them, and emits `summary.csv`, a `plotdata_<name>.dat` file
//! (x, policy, mean delay, 95% CI), and a ready-to-run plotting script.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ledsim_core::sim::EstimateMode;
use ledsim_core::stochastic::IntDistribution;
use ledsim_core::{BaselineKind, StrategyKind, UpdateStrategy};

use crate::config::{
    ArrivalSpec, ExperimentConfig, PolicySection, RunSection, TrafficSection,
};
use crate::error::HarnessError;
use crate::sweep::{run_pooled, run_sweep, write_csv, write_plot_data, PlotAxis, SummaryRow};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PresetName {
    /// Heterogeneous 4x10 sweep toward heavy traffic under L-JSQ-Pull.
    HeavyTrafficSweep,
    /// 10 dispatchers, 100 heterogeneous servers: LED policies vs fresh
    /// JSQ / power-of-2 / JIQ at matched message budget, across loads.
    HerdBehavior,
    /// 10 dispatchers, 100 homogeneous servers, push updates with
    /// p_hat = 0.01, d = 2: randomized dispatching vs L-JSQ under heavily
    /// delayed information.
    DelayedInfo,
    /// Resource-pooled single queue on the sweep traffic.
    PooledReference,
}

impl PresetName {
    pub fn all() -> [PresetName; 4] {
        [
            PresetName::HeavyTrafficSweep,
            PresetName::HerdBehavior,
            PresetName::DelayedInfo,
            PresetName::PooledReference,
        ]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::HeavyTrafficSweep => "heavy_traffic_sweep",
            PresetName::HerdBehavior => "herd_behavior",
            PresetName::DelayedInfo => "delayed_info",
            PresetName::PooledReference => "pooled_reference",
        }
    }
}

impl FromStr for PresetName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heavy_traffic_sweep" => Ok(PresetName::HeavyTrafficSweep),
            "herd_behavior" => Ok(PresetName::HerdBehavior),
            "delayed_info" => Ok(PresetName::DelayedInfo),
            "pooled_reference" => Ok(PresetName::PooledReference),
            other => Err(HarnessError::UnknownPreset(other.to_string())),
        }
    }
}

/// CLI-level knobs applied on top of a preset's defaults.
#[derive(Clone, Debug, Default)]
pub struct PresetOverrides {
    pub seed: Option<u64>,
    pub slots: Option<u64>,
    pub replications: Option<u32>,
    pub output_dir: Option<PathBuf>,
}

fn poisson_services(spec: &[(usize, f64)]) -> Vec<IntDistribution> {
    spec.iter()
        .flat_map(|&(count, mean)| {
            std::iter::repeat_with(move || IntDistribution::Poisson { mean }).take(count)
        })
        .collect()
}

fn uniform_probs(m: usize) -> Vec<f64> {
    vec![1.0 / m as f64; m]
}

fn loads_to_epsilons(mu_total: f64, loads: &[f64]) -> Vec<f64> {
    loads.iter().map(|rho| mu_total * (1.0 - rho)).collect()
}

fn led(strategy: StrategyKind, update: UpdateStrategy, mode: EstimateMode) -> PolicySection {
    PolicySection::Led {
        strategy,
        update,
        estimate_mode: mode,
    }
}

fn baseline(kind: BaselineKind) -> PolicySection {
    PolicySection::Baseline { baseline: kind }
}

/// The heterogeneous sweep traffic: 10 Poisson servers with rates
/// (1 x5, 2 x5), four symmetric dispatchers.
fn sweep_traffic() -> TrafficSection {
    TrafficSection {
        arrival: ArrivalSpec::Poisson,
        service: poisson_services(&[(5, 1.0), (5, 2.0)]),
        dispatcher_probs: uniform_probs(4),
        epsilons: vec![3.0, 1.5, 0.6, 0.3, 0.15],
    }
}

fn run_section(slots: u64, warmup: Option<u64>, seed: u64) -> RunSection {
    RunSection {
        slots,
        warmup,
        batch_count: Some(50),
        replications: 1,
        seed,
        output_dir: None,
        scale_slots_with_epsilon: true,
    }
}

/// Expands a preset into its policy-labelled experiment configs.
pub fn expand_preset(name: PresetName, overrides: &PresetOverrides) -> Vec<ExperimentConfig> {
    let mut configs = match name {
        PresetName::HeavyTrafficSweep | PresetName::PooledReference => {
            vec![ExperimentConfig {
                traffic: sweep_traffic(),
                policy: led(
                    StrategyKind::Ljsq,
                    UpdateStrategy::Pull { p_hat: 0.5 },
                    EstimateMode::SelfIncrement,
                ),
                run: run_section(2_000_000, None, 271_828),
            }]
        }
        PresetName::HerdBehavior => {
            // Half the servers at rate 1, half at rate 2 (mu_total = 150,
            // documented); every LED policy pushes with p_hat = 1, d = 2, so
            // its message budget per arrival batch (4) matches fresh
            // power-of-2.
            let traffic = TrafficSection {
                arrival: ArrivalSpec::Poisson,
                service: poisson_services(&[(50, 1.0), (50, 2.0)]),
                dispatcher_probs: uniform_probs(10),
                epsilons: loads_to_epsilons(150.0, &[0.5, 0.7, 0.85, 0.95, 0.99]),
            };
            let push = UpdateStrategy::Push { p_hat: 1.0, d: 2 };
            let policies = vec![
                led(StrategyKind::Ljsq, push.clone(), EstimateMode::SelfIncrement),
                led(StrategyKind::Ljba, push.clone(), EstimateMode::SelfIncrement),
                led(
                    StrategyKind::LPod { d: 2 },
                    push,
                    EstimateMode::SelfIncrement,
                ),
                baseline(BaselineKind::Jsq),
                baseline(BaselineKind::FreshPod { d: 2 }),
                baseline(BaselineKind::Jiq),
            ];
            policies
                .into_iter()
                .map(|policy| ExperimentConfig {
                    traffic: traffic.clone(),
                    policy,
                    run: run_section(600_000, Some(100_000), 314_159),
                })
                .collect()
        }
        PresetName::DelayedInfo => {
            // Homogeneous rate-1 servers; updates are rare (p_hat = 0.01),
            // and estimates stay frozen between updates (static mode), which
            // is what makes deterministic dispatching herd.
            let traffic = TrafficSection {
                arrival: ArrivalSpec::Poisson,
                service: poisson_services(&[(100, 1.0)]),
                dispatcher_probs: uniform_probs(10),
                epsilons: loads_to_epsilons(100.0, &[0.5, 0.7, 0.85, 0.95]),
            };
            let push = UpdateStrategy::Push { p_hat: 0.01, d: 2 };
            let policies = vec![
                led(StrategyKind::Ljsq, push.clone(), EstimateMode::Static),
                led(StrategyKind::Ljba, push.clone(), EstimateMode::Static),
                led(StrategyKind::LPod { d: 2 }, push, EstimateMode::Static),
            ];
            policies
                .into_iter()
                .map(|policy| ExperimentConfig {
                    traffic: traffic.clone(),
                    policy,
                    run: run_section(600_000, Some(200_000), 161_803),
                })
                .collect()
        }
    };
    for cfg in &mut configs {
        if let Some(seed) = overrides.seed {
            cfg.run.seed = seed;
        }
        if let Some(slots) = overrides.slots {
            cfg.run.slots = slots;
        }
        if let Some(reps) = overrides.replications {
            cfg.run.replications = reps;
        }
        if let Some(dir) = &overrides.output_dir {
            cfg.run.output_dir = Some(dir.clone());
        }
    }
    configs
}

/// Files emitted by a preset run.
#[derive(Debug)]
pub struct PresetRun {
    pub rows: Vec<SummaryRow>,
    pub summary_csv: PathBuf,
    pub plot_data: PathBuf,
    pub plot_script: PathBuf,
}

/// Executes a preset and writes its artifacts into the output directory
/// (default `out/<preset>`).
pub fn run_preset(
    name: PresetName,
    overrides: &PresetOverrides,
    jobs: Option<usize>,
) -> Result<PresetRun> {
    let configs = expand_preset(name, overrides);
    let mut rows = Vec::new();
    for cfg in &configs {
        let batch = match name {
            PresetName::PooledReference => run_pooled(cfg)?,
            _ => run_sweep(cfg, jobs)?,
        };
        rows.extend(batch);
    }

    let out_dir = overrides
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(name.as_str()));
    let axis = match name {
        PresetName::HeavyTrafficSweep | PresetName::PooledReference => PlotAxis::Epsilon,
        PresetName::HerdBehavior | PresetName::DelayedInfo => PlotAxis::Load,
    };
    let summary_csv = out_dir.join("summary.csv");
    let plot_data = out_dir.join(format!("plotdata_{}.dat", name.as_str()));
    let plot_script = out_dir.join("plot_summary.py");
    write_csv(&rows, &summary_csv)?;
    write_plot_data(&rows, axis, &plot_data)?;
    write_plot_script(&plot_script, axis)?;
    Ok(PresetRun {
        rows,
        summary_csv,
        plot_data,
        plot_script,
    })
}

/// Writes the generic plotting script (matplotlib; reads a plotdata file).
pub fn write_plot_script(path: &Path, axis: PlotAxis) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| HarnessError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    let x_label = match axis {
        PlotAxis::Epsilon => "epsilon",
        PlotAxis::Load => "load",
    };
    let script = format!(
        r##"#!/usr/bin/env python3
"""Plot mean delay with 95% CIs from a plotdata_*.dat file.

Usage: python3 plot_summary.py [plotdata_file] [output.png]
"""
import os
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else next(
    p for p in os.listdir(".") if p.startswith("plotdata_")
)
series = defaultdict(list)
with open(path) as fh:
    for line in fh:
        if line.startswith("#") or not line.strip():
            continue
        x, policy, delay, lo, hi = line.split()
        series[policy].append((float(x), float(delay), float(lo), float(hi)))

fig, ax = plt.subplots(figsize=(7.0, 4.5))
for policy, pts in sorted(series.items()):
    pts.sort()
    xs = [p[0] for p in pts]
    ax.plot(xs, [p[1] for p in pts], marker="o", label=policy)
    ax.fill_between(xs, [p[2] for p in pts], [p[3] for p in pts], alpha=0.2)
ax.set_xlabel("{x_label}")
ax.set_ylabel("mean delay (slots)")
ax.set_yscale("log")
ax.legend(fontsize=8)
fig.tight_layout()
out = sys.argv[2] if len(sys.argv) > 2 else path.rsplit(".", 1)[0] + ".png"
fig.savefig(out, dpi=150)
print(out)
"##
    );
    std::fs::write(path, script).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}
