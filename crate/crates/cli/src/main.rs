//! `patcs`: configuration-driven runs of the compressed-sensing PAT pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pat_core::config::ExperimentConfig;
use pat_core::runner::{error_exit_code, Runner, Status};
use pat_core::Result;

#[derive(Parser, Debug)]
#[command(name = "patcs", version, about = "Compressed-sensing photoacoustic tomography experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment file; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Upper bound on worker threads. The pipeline is sequential, so results
    /// never depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Build the detector partition.
    Partition,
    /// Sphere traces of the ground truth and their Huygens windows.
    Forward,
    /// Draw the detector indices.
    Sample,
    /// Noisy measurements at the drawn detectors.
    Measure,
    /// l1 reconstruction from the measurements.
    Reconstruct,
    /// Numerical certificate suite.
    Certify,
    /// Error against m and against the noise level.
    Sweep,
}

fn run(cli: &Cli) -> Result<Status> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let mut r = Runner::new(cfg, &out)?;
    println!("config hash {}", r.hash);
    let status = match cli.command {
        Command::Partition => {
            let (st, s) = r.partition()?;
            let target = s.target_diameter.map_or("-".to_string(), |t| format!("{t:.4}"));
            println!(
                "N = {}  C_ecc = {:.4}  C_u = {:.4}  max diameter = {:.4}  target = {target}",
                s.n, s.c_ecc, s.c_u, s.max_diameter
            );
            st
        }
        Command::Forward => {
            let (st, f) = r.forward()?;
            println!(
                "{} nodes, {} nonzero coefficients; energy outside [{:.3}, {:.3}]: {:.3e}",
                f.nodes, f.nonzero, f.huygens.window_lo, f.huygens.window_hi, f.huygens.energy_outside_rel
            );
            st
        }
        Command::Sample => {
            let (st, s) = r.sample()?;
            println!("m = {} of N = {} (planned {})", s.m, s.n, s.planned_m);
            st
        }
        Command::Measure => {
            let (st, m) = r.measure()?;
            println!("{} series, noise level {:.4e}", m.m(), m.noise_level);
            st
        }
        Command::Reconstruct => {
            let (st, rep) = r.reconstruct()?;
            let res = &rep.result;
            println!(
                "residual {:.4e} (bound {:.4e}, floor {:.4e}), {} iterations, converged {}",
                res.residual, res.bound, res.residual_floor, res.iterations, res.converged
            );
            if let Some(e) = &rep.errors {
                println!("relative error {:.4e}", e.relative_error);
            }
            st
        }
        Command::Certify => {
            let (st, rep) = r.certify()?;
            for c in &rep.reports {
                println!("{}", c.summary_line());
            }
            st
        }
        Command::Sweep => {
            let (st, rep) = r.sweep()?;
            for row in rep.m_rows.iter().chain(&rep.beta_rows) {
                println!("m = {:4}  beta = {:.4e}  median error = {:.4e}", row.m, row.beta, row.median_error);
            }
            println!("affine fit in beta: R^2 = {:.4}", rep.beta_r2);
            st
        }
    };
    Ok(status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(st) => {
            if st != Status::Ok {
                eprintln!("finished with status {st:?}");
            }
            ExitCode::from(st.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
