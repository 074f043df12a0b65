use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ergm_exchange::commands::{compare, fit, simulate, write_compare, write_fit, write_simulation};
use ergm_exchange::config::{RunConfig, PRESETS};
use ergm_exchange::samplers::Algorithm;
use ergm_exchange::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ergm-exchange",
    version,
    about = "Bayesian ERGM inference with population exchange samplers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one algorithm and write the posterior sample and diagnostics.
    Fit {
        /// Configuration file or bundled preset name.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Algorithm to run instead of the configured one, e.g. `aaea-2+dr`.
        #[arg(long)]
        variant: Option<Algorithm>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run every configured algorithm over seeded replicates and tabulate ESS.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the configured count.
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent replicates; defaults to the number of cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Draw networks from the model at a fixed parameter.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        theta: Vec<f64>,
        #[arg(long)]
        draws: usize,
        /// Tie-flip proposals between draws; defaults to the auxiliary length.
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the bundled presets, or print one.
    Presets { name: Option<String> },
}

// an unreadable configuration is a usage error, not a data error
fn load(path: &Path) -> Result<RunConfig> {
    RunConfig::from_file(path).map_err(|e| match e {
        Error::Io { .. } => Error::Config(e.to_string()),
        other => other,
    })
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fit {
            config,
            seed,
            out,
            variant,
            threads,
        } => {
            let mut cfg = load(&config)?;
            if threads.is_some() {
                cfg.sampler.threads = threads;
            }
            let dir = out.unwrap_or_else(|| cfg.output.clone());
            let result = fit(&cfg, variant, seed)?;
            write_fit(&dir, &cfg, &result)?;
            print!("{}", result.report.to_text());
            eprintln!("wrote {}", dir.display());
        }
        Command::Compare {
            config,
            replicates,
            out,
            jobs,
        } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.join("compare"));
            let cmp = compare(&cfg, replicates.unwrap_or(cfg.replicates), jobs)?;
            write_compare(&dir, &cmp)?;
            print!("{}", cmp.to_text());
            eprintln!("wrote {}", dir.display());
        }
        Command::Simulate {
            config,
            theta,
            draws,
            iters,
            seed,
            out,
        } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.join("simulate"));
            let sim = simulate(&cfg, &theta, draws, iters, seed)?;
            write_simulation(&dir, &sim)?;
            for (name, m) in sim.names.iter().zip(sim.mean()) {
                println!("{name:<24} {m:.4}");
            }
            eprintln!("wrote {}", dir.display());
        }
        Command::Presets { name: None } => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
        }
        Command::Presets { name: Some(name) } => match PRESETS.iter().find(|(n, _)| *n == name) {
            Some((_, text)) => print!("{text}"),
            None => return Err(Error::Config(format!("unknown preset `{name}`"))),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
