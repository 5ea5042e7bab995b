use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gavg_lab::presets::{self, NAMES};
use gavg_lab::{
    require_valid, run_epsilon_sweep, run_feynman_kac_check, run_penalization_sweep, run_solve, ExperimentConfig,
    LabError, LabResult, SolveTarget, Verdict,
};

#[derive(Parser)]
#[command(name = "gavg", version, about = "Averaging laboratory for oscillating G-obstacle problems")]
struct Cli {
    /// Output directory (overrides `output_dir` of the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent solves.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Validation sampling seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the declared constants against the data.
    Validate { config: String },
    /// Solve the obstacle PDE once and write solution.csv.
    Solve {
        config: String,
        #[arg(long, conflicts_with = "averaged")]
        epsilon: Option<f64>,
        #[arg(long)]
        averaged: bool,
    },
    /// Epsilon sweep against the averaged solution.
    Sweep { config: String },
    /// Lattice root value against the PDE at two resolutions.
    FkCheck { config: String },
    /// Penalized lattice solves against the reflected one.
    Penalize { config: String },
    /// List presets, or print one as JSON.
    Presets { name: Option<String> },
}

fn load(source: &str, seed: Option<u64>) -> LabResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(source)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> LabResult<()> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| LabError::Config(format!("--threads: {e}")))?;
    }
    let out_flag = cli.out.as_deref();
    match cli.command {
        Command::Presets { name: None } => {
            for name in NAMES {
                println!("{name}");
            }
        }
        Command::Presets { name: Some(name) } => {
            let cfg = presets::preset(&name).ok_or_else(|| LabError::Config(format!("unknown preset '{name}'")))?;
            println!("{}", cfg.to_json());
        }
        Command::Validate { config } => {
            let cfg = load(&config, cli.seed)?;
            let out = cfg.output_dir(out_flag);
            let report = require_valid(&cfg, Some(&out))?;
            println!("validation passed: {} checks, {} samples", report.checks.len(), report.samples);
        }
        Command::Solve { config, epsilon, averaged } => {
            let cfg = load(&config, cli.seed)?;
            let out = cfg.output_dir(out_flag);
            require_valid(&cfg, Some(&out))?;
            let target = match (epsilon, averaged) {
                (Some(e), _) => SolveTarget::Epsilon(e),
                (None, true) => SolveTarget::Averaged,
                (None, false) => SolveTarget::Config,
            };
            let field = run_solve(&cfg, target, Some(&out))?;
            let x_mid = 0.5 * (field.grid.x_min + field.grid.x_max);
            println!("nt = {}, u(0, {x_mid}) = {}", field.nt, field.interpolate(0, x_mid));
        }
        Command::Sweep { config } => {
            let cfg = load(&config, cli.seed)?;
            let out = cfg.output_dir(out_flag);
            require_valid(&cfg, Some(&out))?;
            let report = run_epsilon_sweep(&cfg, Some(&out))?;
            for row in &report.rows {
                println!("eps = {:<6} error = {:.3e}", row.epsilon, row.sup_norm_error);
            }
            println!(
                "verdict: {:?} (final {:.3e}, bound {:.3e})",
                report.verdict, report.final_error, report.error_bound
            );
            if report.verdict != Verdict::Converged {
                return Err(LabError::Verdict(format!("sweep is {:?}", report.verdict)));
            }
        }
        Command::FkCheck { config } => {
            let cfg = load(&config, cli.seed)?;
            let out = cfg.output_dir(out_flag);
            require_valid(&cfg, Some(&out))?;
            let report = run_feynman_kac_check(&cfg, Some(&out))?;
            for level in &report.levels {
                println!(
                    "nx = {:<5} N = {:<5} Y0 = {:.6} u0 = {:.6} gap = {:.3e}",
                    level.nx, level.lattice_steps, level.lattice_y0, level.pde_u0, level.gap
                );
            }
            if !report.passed {
                return Err(LabError::Verdict("Feynman-Kac gap too large or not shrinking".into()));
            }
        }
        Command::Penalize { config } => {
            let cfg = load(&config, cli.seed)?;
            let out = cfg.output_dir(out_flag);
            require_valid(&cfg, Some(&out))?;
            let report = run_penalization_sweep(&cfg, Some(&out))?;
            for row in &report.rows {
                println!("n = {:<6} Y0 = {:.8} gap = {:.3e}", row.n, row.y0, row.gap_to_reflected);
            }
            println!("reflected Y0 = {:.8}", report.reflected_y0);
            if !report.passed {
                return Err(LabError::Verdict("penalized values are not ordered".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
