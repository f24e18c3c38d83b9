use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ledsim::presets::{run_preset, PresetName, PresetOverrides};
use ledsim::sweep::{run_pooled, run_sweep, write_csv, write_plot_data, PlotAxis};
use ledsim::verify::verify_conditions;
use ledsim::{load_config, presets};

/// Discrete-time simulator for local-estimate-driven load balancing with
/// multiple dispatchers and heterogeneous servers.
#[derive(Parser)]
#[command(name = "ledsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an epsilon sweep from a config file or a named preset
    /// (heavy_traffic_sweep, herd_behavior, delayed_info, pooled_reference).
    Simulate {
        /// Experiment config (TOML). Required unless --preset is given.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Named preset experiment; ignores --config.
        #[arg(long)]
        preset: Option<String>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: config output_dir, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for parallel replications.
        #[arg(long)]
        jobs: Option<usize>,
        /// Override measured slots at the smallest epsilon.
        #[arg(long)]
        slots: Option<u64>,
        /// Override the replication count.
        #[arg(long)]
        replications: Option<u32>,
    },
    /// Check the tilt and update-probability hypotheses for the configured
    /// policy and report whether the optimality conditions hold.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate the resource-pooled single-queue reference for the
    /// configured traffic.
    Pooled {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // One machine-readable error line on failure.
            eprintln!("{}", serde_json::json!({ "error": err.to_string() }));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> ledsim::Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            preset,
            seed,
            out,
            jobs,
            slots,
            replications,
        } => {
            if let Some(name) = preset {
                let name: PresetName = name.parse()?;
                let overrides = PresetOverrides {
                    seed,
                    slots,
                    replications,
                    output_dir: out,
                };
                let run = run_preset(name, &overrides, jobs)?;
                println!("wrote {}", run.summary_csv.display());
                println!("wrote {}", run.plot_data.display());
                println!("wrote {}", run.plot_script.display());
                return Ok(());
            }
            let config = config.ok_or_else(|| {
                ledsim::HarnessError::InvalidConfig(
                    "simulate needs --config or --preset".into(),
                )
            })?;
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.run.seed = seed;
            }
            if let Some(slots) = slots {
                cfg.run.slots = slots;
            }
            if let Some(reps) = replications {
                cfg.run.replications = reps;
            }
            let out_dir = out
                .or_else(|| cfg.run.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let rows = run_sweep(&cfg, jobs)?;
            let csv_path = out_dir.join("summary.csv");
            let dat_path = out_dir.join("plotdata_sweep.dat");
            let script_path = out_dir.join("plot_summary.py");
            write_csv(&rows, &csv_path)?;
            write_plot_data(&rows, PlotAxis::Epsilon, &dat_path)?;
            presets::write_plot_script(&script_path, PlotAxis::Epsilon)?;
            println!("wrote {}", csv_path.display());
            println!("wrote {}", dat_path.display());
            println!("wrote {}", script_path.display());
            Ok(())
        }
        Command::Verify { config } => {
            let cfg = load_config(&config)?;
            let report = verify_conditions(&cfg)?;
            println!("{report}");
            Ok(())
        }
        Command::Pooled { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.run.seed = seed;
            }
            let out_dir = out
                .or_else(|| cfg.run.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let rows = run_pooled(&cfg)?;
            let csv_path = out_dir.join("pooled.csv");
            write_csv(&rows, &csv_path)?;
            for row in &rows {
                println!(
                    "epsilon {:>8.4}  rep {}  scaled mean queue {:.4}  zeta/2 {:.4}  ratio {:.4}",
                    row.epsilon, row.replication, row.scaled_sum_q, row.zeta_half, row.ratio
                );
            }
            println!("wrote {}", csv_path.display());
            Ok(())
        }
    }
}
