use clap::{Parser, Subcommand};
use rgdlab::cli::{
    self, bounds_from_flags, execute_run, execute_scan, execute_traj, load_run_config,
    load_scan_config, load_traj_config,
};
use std::path::PathBuf;
use std::process::ExitCode;

/// Riemannian gradient-descent laboratory: saddle-avoidance experiments,
/// singular step-size scans, and step-size bounds.
#[derive(Parser)]
#[command(name = "rgdlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo avoidance experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for report.json and optional trajectory dumps.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the plan's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the plan's number of runs.
        #[arg(long)]
        runs: Option<usize>,
        /// Worker threads (defaults to available parallelism).
        #[arg(long)]
        workers: Option<usize>,
        /// Also write trajectories/run_#####.csv for every run.
        #[arg(long)]
        dump_trajectories: bool,
    },
    /// Scan step sizes for a singular iteration-map differential.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the saddle-avoidance step-size bound for a geometric regime.
    Bounds {
        /// One of: hadamard, positive-curvature, pinched, stiefel, product-spheres.
        #[arg(long)]
        regime: String,
        /// Gradient Lipschitz constant.
        #[arg(long = "L")]
        l: f64,
        /// Gradient norm bound (positive-curvature regime).
        #[arg(long = "G")]
        g: Option<f64>,
        /// Injectivity radius lower bound (positive-curvature regime).
        #[arg(long = "J")]
        j: Option<f64>,
        /// Sectional curvature lower bound (pinched regime).
        #[arg(long = "Kmin")]
        k_min: Option<f64>,
        /// Sectional curvature upper bound.
        #[arg(long = "Kmax")]
        k_max: Option<f64>,
        /// Number of frame columns (Stiefel regime).
        #[arg(long)]
        p: Option<usize>,
        /// Also print the bound as a JSON record.
        #[arg(long)]
        json: bool,
    },
    /// Run a single trajectory from a JSON config and dump it as CSV.
    Traj {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<i32, rgdlab::Error> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            runs,
            workers,
            dump_trajectories,
        } => {
            let mut plan = load_run_config(&config)?;
            if let Some(s) = seed {
                plan.seed = s;
            }
            if let Some(n) = runs {
                plan.num_runs = n;
            }
            let report = execute_run(&plan, &out, workers, dump_trajectories)?;
            println!(
                "{} runs: {} to strict saddle, {} other, {} escaped, {} undecided, {} errors",
                report.num_runs,
                report.counts.converged_to_strict_saddle,
                report.counts.converged_to_other,
                report.counts.escaped,
                report.counts.undecided,
                report.run_errors
            );
            println!(
                "fraction_to_strict_saddle = {} (Wilson 95%: [{:.6}, {:.6}])",
                report.fraction_to_strict_saddle, report.wilson95.0, report.wilson95.1
            );
            println!("wrote {}", out.join("report.json").display());
            Ok(if report.run_errors > 0 {
                cli::EXIT_RUN_ERRORS
            } else {
                cli::EXIT_OK
            })
        }
        Command::Scan { config, out } => {
            let plan = load_scan_config(&config)?;
            let set = execute_scan(&plan, &out)?;
            println!(
                "scan over (0, {}]: {} singular step size(s)",
                plan.alpha_max,
                set.alphas.len()
            );
            for a in &set.alphas {
                println!("  alpha = {a}");
            }
            println!("wrote {}", out.join("scan.json").display());
            Ok(cli::EXIT_OK)
        }
        Command::Bounds {
            regime,
            l,
            g,
            j,
            k_min,
            k_max,
            p,
            json,
        } => {
            let bound = bounds_from_flags(&regime, l, g, j, k_min, k_max, p)?;
            println!("regime        alpha_max");
            println!("{:<13} {}", bound.regime, bound.alpha_max);
            if json {
                println!("{}", serde_json::to_string(&bound)?);
            }
            Ok(cli::EXIT_OK)
        }
        Command::Traj { config, out } => {
            let plan = load_traj_config(&config)?;
            let path = execute_traj(&plan, &out)?;
            println!("wrote {}", path.display());
            Ok(cli::EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code_for(&e) as u8)
        }
    }
}
