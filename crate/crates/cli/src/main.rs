//! Scenario-driven command line for the spin-qubit control simulator.

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use std::fs;
use std::path::PathBuf;

use spinctrl_core::scenario::{self, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "spinctrl",
    version,
    about = "Simulation and Krotov pulse optimization for exchange-coupled spin qubits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a TOML config file or a built-in name.
    Run {
        /// Path to a scenario TOML, or the name of a built-in scenario.
        config: String,
        /// Output directory; artifacts land in <out>/<scenario-name>/.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads for sweep parallelism (0 = rayon default).
        /// Falls back to the SPINCTRL_THREADS environment variable.
        #[arg(long)]
        threads: Option<usize>,
        /// Force single-threaded, byte-reproducible execution.
        #[arg(long)]
        deterministic: bool,
    },
    /// List the built-in scenarios.
    List,
    /// Validate a scenario config and print diagnostics.
    Validate {
        /// Path to a scenario TOML, or the name of a built-in scenario.
        config: String,
    },
    /// Print a built-in scenario's config as TOML (editable starting point).
    ExportDefaults {
        /// Built-in scenario name.
        name: String,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(spec: &str) -> anyhow::Result<ScenarioConfig> {
    if let Some(builtin) = scenario::find(spec) {
        return Ok(builtin);
    }
    let path = PathBuf::from(spec);
    if !path.exists() {
        bail!(
            "'{spec}' is neither a built-in scenario nor an existing file; \
             try `spinctrl list`"
        );
    }
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading {}", path.display()))?;
    ScenarioConfig::from_toml(&text).map_err(Into::into)
}

fn thread_count(flag: Option<usize>, deterministic: bool) -> usize {
    if deterministic {
        return 1;
    }
    if let Some(n) = flag {
        return n;
    }
    std::env::var("SPINCTRL_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, threads, deterministic } => {
            let cfg = load_config(&config)?;
            let diags = cfg.validate();
            if !diags.is_empty() {
                for d in &diags {
                    eprintln!("error: {d}");
                }
                bail!("config '{}' failed validation", cfg.name);
            }
            let threads = thread_count(threads, deterministic);
            eprintln!("running scenario '{}' (anchor {})...", cfg.name, cfg.anchor);
            let manifest = scenario::run(&cfg, &out, threads)?;
            println!(
                "{} finished in {:.1} s; {} output file(s) in {}",
                manifest.scenario,
                manifest.wall_time_s,
                manifest.outputs.len(),
                out.join(&manifest.scenario).display()
            );
            for rec in &manifest.outputs {
                println!("  {}", rec.path);
            }
            Ok(())
        }
        Command::List => {
            for cfg in scenario::built_in_scenarios() {
                println!("{:32} [{}] {}", cfg.name, cfg.anchor, cfg.description);
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let diags = cfg.validate();
            if diags.is_empty() {
                println!("{}: ok", cfg.name);
                Ok(())
            } else {
                for d in &diags {
                    println!("error: {d}");
                }
                std::process::exit(2);
            }
        }
        Command::ExportDefaults { name, out } => {
            let Some(cfg) = scenario::find(&name) else {
                bail!("no built-in scenario named '{name}'; try `spinctrl list`");
            };
            let text = cfg.to_toml()?;
            match out {
                Some(path) => {
                    fs::write(&path, text)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}
