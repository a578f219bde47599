use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use packet_collapse::config::{parse_config_with, Overrides, ScenarioConfig};
use packet_collapse::scenario::{builtin_configs, resolve_output_root, run, RunOutcome};

/// Wave-packet dynamics and self-collapse scenarios.
#[derive(Parser)]
#[command(name = "packet-collapse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario config.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a stochastic scenario as an ensemble of consecutive seeds.
    Sample {
        config: PathBuf,
        #[arg(long)]
        n_runs: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in scenario checks.
    Check {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn load(path: &Path, overrides: Overrides) -> Result<ScenarioConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config_with(&text, overrides).map_err(|e| format!("{}: {e}", path.display()))
}

fn report(outcome: &RunOutcome) {
    let m = &outcome.manifest;
    for a in &m.assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    if let Some(e) = &m.error {
        println!("ERROR {e}");
    }
    println!("{} -> {}", m.scenario.name(), outcome.run_dir.display());
}

fn execute(cfg: &ScenarioConfig, out: Option<&Path>) -> ExitCode {
    let root = resolve_output_root(out, cfg);
    match run(cfg, &root) {
        Ok(outcome) => {
            report(&outcome);
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILED)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Simulate { config, seed, out } => match load(&config, Overrides { seed, n_runs: None }) {
            Ok(cfg) => execute(&cfg, out.as_deref()),
            Err(e) => {
                eprintln!("config error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Sample { config, n_runs, seed, out } => {
            match load(&config, Overrides { seed, n_runs: Some(n_runs) }) {
                Ok(cfg) if !cfg.scenario.is_stochastic() => {
                    eprintln!("config error: scenario {} is deterministic", cfg.scenario.name());
                    ExitCode::from(EXIT_CONFIG)
                }
                Ok(cfg) => execute(&cfg, out.as_deref()),
                Err(e) => {
                    eprintln!("config error: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
            }
        }
        Command::Check { out } => {
            let root = out.unwrap_or_else(|| std::env::temp_dir().join("packet-collapse-check"));
            let mut ok = true;
            for (name, text) in builtin_configs() {
                let cfg = match parse_config_with(text, Overrides::default()) {
                    Ok(cfg) => cfg,
                    Err(e) => {
                        println!("FAIL {name}: {e}");
                        ok = false;
                        continue;
                    }
                };
                match run(&cfg, &root) {
                    Ok(outcome) => {
                        report(&outcome);
                        ok &= outcome.passed();
                    }
                    Err(e) => {
                        println!("FAIL {name}: {e}");
                        ok = false;
                    }
                }
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILED)
            }
        }
    }
}
