use clap::{Parser, Subcommand};
use spatspec::commands::{cmd_estimate, cmd_simulate, cmd_tapers, FlagOverrides};
use spatspec::error::{config_err, CliError, CliResult};
use spatspec::validate::{run_suite, SUITES};
use spatspec_core::linalg::Selection;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "spatspec", version, about = "Multitaper spectral estimation for mixed spatial data")]
struct Cli {
    /// Worker threads; defaults to SPATSPEC_THREADS, then all cores.
    #[arg(long, global = true, env = "SPATSPEC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a taper family for a region and store it in a directory.
    Tapers {
        #[arg(long)]
        region: PathBuf,
        #[arg(long)]
        bandwidth: f64,
        /// Keep every taper with concentration at least this (default 0.99).
        #[arg(long, conflicts_with = "count")]
        threshold: Option<f64>,
        /// Keep exactly this many tapers.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate one realisation of a reference model.
    Simulate {
        /// poisson, marked-poisson, shifted-pair, lgcp or colocation.
        #[arg(long)]
        model: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also tabulate the true spectral matrix on the model file's kgrid.
        #[arg(long)]
        truth: bool,
    },
    /// Estimate the spectral matrix, coherence and group delay.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep wavenumbers outside the Nyquist box of the gridded processes.
        #[arg(long)]
        full_k: bool,
        /// Permit different base tapers across processes (see `taper_offsets`).
        #[arg(long)]
        allow_mixed_tapers: bool,
    },
    /// Run a named acceptance suite, or `all`.
    Validate {
        suite: String,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_err(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Tapers { region, bandwidth, threshold, count, out } => {
            let selection = match count {
                Some(m) => Selection::Count(m),
                None => Selection::Threshold(threshold.unwrap_or(0.99)),
            };
            let f = cmd_tapers(&region, bandwidth, selection, &out)?;
            println!("{} tapers written to {}", f.len(), out.display());
        }
        Command::Simulate { model, config, seed, out, truth } => {
            cmd_simulate(&model, &config, seed, &out, truth)?;
            println!("simulation written to {}", out.display());
        }
        Command::Estimate { config, out, full_k, allow_mixed_tapers } => {
            let o = cmd_estimate(&config, out.as_deref(), FlagOverrides { full_k, allow_mixed_tapers })?;
            println!("estimate for {} written to {}", o.labels.join(", "), o.dir.display());
        }
        Command::Validate { suite, reps, seed, out } => {
            let names: Vec<&str> = if suite == "all" {
                SUITES.iter().map(|s| s.name).collect()
            } else {
                vec![suite.as_str()]
            };
            let mut reports = Vec::new();
            for name in names {
                let report = run_suite(name, reps, seed).map_err(|e| {
                    if spatspec::validate::find(name).is_none() {
                        let known: Vec<&str> = SUITES.iter().map(|s| s.name).collect();
                        config_err(format!("{e}; known suites: {}", known.join(", ")))
                    } else {
                        CliError::Numerical(e.to_string())
                    }
                })?;
                for line in report.lines() {
                    eprintln!("{line}");
                }
                reports.push(report);
            }
            let text = serde_json::to_string_pretty(&reports)?;
            match out {
                Some(path) => std::fs::write(path, text + "\n")?,
                None => println!("{text}"),
            }
            return Ok(reports.iter().all(|r| r.passed()));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("spatspec: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
