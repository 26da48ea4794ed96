use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chx_core::experiments::{cmd_convergence, cmd_min_c, cmd_run, cmd_sweep, Overrides, RunConfig, SweepParam};
use chx_core::Error;

/// Tumour-growth phase-field experiments on a periodic square.
#[derive(Parser, Debug)]
#[command(name = "chx", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One simulation with time series, field dumps and a certificate.
    #[command(allow_negative_numbers = true)]
    Run(Common),
    /// Temporal convergence against a fine-step reference.
    #[command(allow_negative_numbers = true)]
    Convergence(Common),
    /// Minimum of c over the nodes on several meshes and times; --mesh runs one mesh only.
    #[command(allow_negative_numbers = true)]
    MinC(Common),
    /// One run per value of a parameter.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[command(flatten)]
        common: Common,
        /// tau, delta or theta0; defaults to sweep_param from the config.
        #[arg(long)]
        param: Option<SweepParam>,
        /// Comma-separated values; defaults to sweep_values from the config.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    /// End time; must be a whole number of steps.
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Cells per side.
    #[arg(long)]
    mesh: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let overrides = Overrides {
            seed: self.seed,
            out: self.out.clone(),
            steps: self.steps,
            tmax: self.tmax,
            eps: self.eps,
            theta0: self.theta0,
            sigma: self.sigma,
            delta: self.delta,
            tau: self.tau,
            mesh: self.mesh,
        };
        RunConfig::resolve(self.config.as_deref(), &overrides)
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run(common) => {
            let cfg = common.resolve()?;
            let s = cmd_run(&cfg)?;
            println!("{}", s.certificate);
            println!("outputs in {}", s.out_dir.display());
        }
        Command::Convergence(common) => {
            let cfg = common.resolve()?;
            let s = cmd_convergence(&cfg)?;
            println!(
                "{:>12} {:>14} {:>8} {:>14} {:>8}",
                "tau", "err_phi", "rate", "err_c", "rate"
            );
            let rate = |r: Option<f64>| r.map_or("-".to_string(), |v| format!("{v:.3}"));
            for r in &s.table.rows {
                println!(
                    "{:>12.4e} {:>14.6e} {:>8} {:>14.6e} {:>8}",
                    r.tau,
                    r.error_phi,
                    rate(r.rate_phi),
                    r.error_c,
                    rate(r.rate_c)
                );
            }
            println!("reference run: {}", s.reference);
        }
        Command::MinC(common) => {
            let mut cfg = common.resolve()?;
            // --mesh narrows the study to that one mesh
            if let Some(m) = common.mesh {
                cfg.min_c_meshes = vec![m];
            }
            let s = cmd_min_c(&cfg)?;
            for c in &s.cells {
                match c.min_c {
                    Some(v) => println!("M={:<4} t={:<6} min c = {v:.6e}", c.mesh, c.time),
                    None => println!("M={:<4} t={:<6} failed", c.mesh, c.time),
                }
            }
            for (mesh, _, failure) in &s.runs {
                if let Some(msg) = failure {
                    eprintln!("M={mesh}: {msg}");
                }
            }
            if s.failures() > 0 {
                return Err(Error::RunsFailed {
                    failed: s.failures(),
                    total: s.runs.len(),
                });
            }
        }
        Command::Sweep { common, param, values } => {
            let cfg = common.resolve()?;
            let param = param
                .or(cfg.sweep_param)
                .ok_or_else(|| Error::Config("sweep needs --param or sweep_param in the config".into()))?;
            let values = if values.is_empty() {
                cfg.sweep_values.clone()
            } else {
                values
            };
            let s = cmd_sweep(&cfg, param, &values)?;
            for r in &s.runs {
                let status = r.failure.as_deref().unwrap_or("ok");
                let flag = if r.left_unit_interval() { "  phi left (0,1)" } else { "" };
                println!(
                    "{}={:<10} {} phi in [{:.6e}, {:.6e}]{flag}",
                    param.name(),
                    r.value,
                    status,
                    r.certificate.phi_min,
                    r.certificate.phi_max
                );
            }
            if s.failures() > 0 {
                return Err(Error::RunsFailed {
                    failed: s.failures(),
                    total: s.runs.len(),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
