use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use savch::harness::{self, Mode, RunConfig};
use savch::Result;

#[derive(Parser)]
#[command(name = "savch", version, about = "Stochastic Cahn-Hilliard solver with dynamic boundary conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a single path.
    Run(Common),
    /// Monte Carlo ensemble over `paths` paths.
    Mc(Common),
    /// Coupled-noise time step refinement study.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Number of dyadic time levels (overrides `levels`).
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Built-in identity checks.
    Selftest,
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self, mode: Mode) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => harness::parse_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        cfg.mode = mode;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.load(Mode::Run)?;
            let out = harness::execute_run(&cfg)?;
            let last = out.reports.last().expect("initial report present");
            let worst = out
                .reports
                .iter()
                .map(|r| r.identity_residual / (1.0 + r.e_mod.abs()))
                .fold(0.0, f64::max);
            println!("steps        {}", last.step);
            println!("final time   {}", last.t);
            println!("final E_mod  {:e}", last.e_mod);
            println!("final mass   {:e}", last.mass);
            println!("max identity residual (scaled) {worst:e}");
            println!("output       {}", cfg.out_dir.join(harness::path_csv_name(0)).display());
            Ok(true)
        }
        Command::Mc(common) => {
            let cfg = common.load(Mode::Mc)?;
            let summary = harness::mc_run(&cfg)?;
            for (name, v) in &summary.stats {
                println!("{name:<22} {:>14.6e} +- {:.3e}", v.mean, v.std_error);
            }
            for (id, msg) in &summary.failures {
                eprintln!("path {id} failed: {msg}");
            }
            println!("{}", if summary.complete() { "complete" } else { "incomplete" });
            Ok(summary.complete())
        }
        Command::Convergence { common, levels } => {
            let cfg = common.load(Mode::Convergence)?;
            let table = harness::convergence_study(&cfg, levels.unwrap_or(cfg.levels))?;
            print!("{}", table.csv());
            print!("{}", table.rates_csv());
            println!("decreasing differences: {:.3}", table.decreasing_fraction());
            Ok(true)
        }
        Command::Selftest => {
            let checks = harness::run_selftest();
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {} {}", c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
