use std::path::PathBuf;
use std::process::ExitCode;

use aggdiff_cli::config::{load_config, validate_config};
use aggdiff_cli::runner::{run_experiment, write_steady};
use aggdiff_cli::sweep::{self, SweepParam};
use aggdiff_core::diagnostics::compute_steady_state;
use aggdiff_core::toy::{find_equilibria, fold_epsilon, integrate_toy, Stability};
use aggdiff_core::{io, Grid, InteractionKernel, Rk23Options, ToyProblem};
use anyhow::Context;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aggdiff", version, about = "Aggregation-diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file or preset name.
    Run { config: String },
    /// Repeat a run for each value of one parameter and write a phase table.
    Sweep {
        config: String,
        /// epsilon, R, delta or X0.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// Compute the steady state of unit mass.
    Steady {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value = "gaussian")]
        kernel: String,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [-2.0, 2.0], allow_hyphen_values = true)]
        domain: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        dx: f64,
        #[arg(long, default_value = "out/steady")]
        output: PathBuf,
    },
    /// Equilibria of the two-particle model and, with --x0, a trajectory.
    Toy {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long, default_value_t = 500.0)]
        t_end: f64,
        #[arg(long, default_value = "out/toy")]
        output: PathBuf,
    },
    /// Check a config and list every violation.
    Validate { config: String },
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let outcome = run_experiment(&cfg)?;
            for s in &outcome.summaries {
                println!(
                    "{}: linf {} m2 {} w2_to_ref {}",
                    s.solver,
                    io::format_real(s.final_linf),
                    io::format_real(s.final_m2),
                    s.final_w2_to_ref.map(io::format_real).unwrap_or_else(|| "-".into())
                );
            }
            if let Some((t, w)) = outcome.cross_w2.last() {
                println!("W2(particles, fv) at t = {t}: {}", io::format_real(*w));
            }
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::Sweep { config, param, values } => {
            let cfg = load_config(&config)?;
            let rows = sweep::sweep(&cfg, param, &values, sweep::thread_limit()?)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join(format!("sweep_{param}.csv"));
            sweep::write_phase_table(&path, param, &rows)?;
            for r in &rows {
                match &r.error {
                    Some(e) => println!("{param} = {}: failed: {e}", r.value),
                    None => println!("{param} = {}: {}", r.value, r.classification.label()),
                }
            }
            println!("wrote {}", path.display());
        }
        Command::Steady {
            epsilon,
            kernel,
            mass,
            domain,
            dx,
            output,
        } => {
            let [left, right] = domain[..] else {
                anyhow::bail!("--domain takes two values, got {}", domain.len());
            };
            let g = InteractionKernel::by_name(&kernel, None, None)?;
            let grid = Grid::new(left, right, dx)?;
            let s = compute_steady_state(&g, epsilon, mass, grid.midpoint(), &grid)?;
            write_steady(&output, epsilon, &s)?;
            match s.support() {
                Some((a, b)) if !s.trivial => println!(
                    "support [{a}, {b}], C = {}, residual {:e}, converged {}",
                    s.lagrange_constant, s.residual, s.converged
                ),
                _ => println!("eps >= ||G||_1: the only steady state is zero"),
            }
            println!("wrote {}", output.display());
        }
        Command::Toy {
            epsilon,
            x0,
            t_end,
            output,
        } => {
            let g = InteractionKernel::gaussian();
            let problem = ToyProblem::new(epsilon, &g)?;
            let eq = find_equilibria(&problem);
            let a = eq.iter().find(|e| e.stability == Stability::Stable).map(|e| e.x);
            let b = eq.iter().rev().find(|e| e.stability != Stability::Stable).map(|e| e.x);
            std::fs::create_dir_all(&output)?;
            io::write_toy_equilibria(&output.join("equilibria.csv"), epsilon, a, b, fold_epsilon(&g))?;
            for e in &eq {
                println!("X* = {} ({:?})", e.x, e.stability);
            }
            if let Some(x0) = x0 {
                let times: Vec<f64> = (1..500).map(|k| k as f64 * t_end / 500.0).collect();
                let opts = Rk23Options {
                    tol_abs: 1e-10,
                    tol_rel: 1e-10,
                    ..Rk23Options::default()
                };
                let (traj, _) = integrate_toy(&problem, x0, t_end, &times, &opts)?;
                io::write_toy_trajectory(&output.join("trajectory.csv"), &traj)?;
                println!("X({t_end}) = {}", traj.final_position());
            }
            println!("wrote {}", output.display());
        }
        Command::Validate { config } => {
            let cfg = load_config(&config).context("reading config")?;
            let violations = validate_config(&cfg);
            if violations.is_empty() {
                println!("ok");
            } else {
                for v in &violations {
                    println!("{v}");
                }
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
