use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use prosumage::scenario::{
    builtin_catalog, check_batch, find_builtin, load_config, run_batch, validate_config, BatchOptions, ScenarioConfig,
};

/// Prosumage households and the power sector in market equilibrium under
/// alternative retail and feed-in tariffs.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve scenarios and write CSV results plus a manifest.
    Run(RunArgs),
    /// Check scenario files without solving.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// List the built-in scenarios, or write them out as TOML files.
    Catalog {
        #[arg(long, value_name = "DIR")]
        write: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario by name ("baseline" for the reference case); repeatable.
    #[arg(long = "scenario", value_name = "NAME")]
    scenarios: Vec<String>,
    /// Scenario file; repeatable.
    #[arg(long = "config", value_name = "PATH")]
    configs: Vec<PathBuf>,
    /// Every built-in scenario.
    #[arg(long, conflicts_with = "scenarios")]
    all: bool,
    /// Directory with input profiles; files that are missing are synthesized.
    #[arg(long, value_name = "PATH", conflicts_with = "synthetic")]
    data_dir: Option<PathBuf>,
    /// Use synthetic profiles only, ignoring data paths in the configs.
    #[arg(long)]
    synthetic: bool,
    /// Keep every N-th hour.
    #[arg(long, value_name = "N")]
    subsample: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = "results")]
    out: PathBuf,
    /// Concurrent scenarios (default: PROSUMAGE_WORKERS or the core count).
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
}

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

fn collect(args: &RunArgs) -> anyhow::Result<Vec<ScenarioConfig>> {
    let mut configs = Vec::new();
    if args.all {
        configs.extend(builtin_catalog());
    }
    for name in &args.scenarios {
        match find_builtin(name) {
            Some(c) => configs.push(c),
            None => bail!("no built-in scenario named {name:?}; see `prosumage catalog`"),
        }
    }
    for path in &args.configs {
        let diagnostics = validate_config(path);
        if !diagnostics.is_empty() {
            let list: Vec<String> = diagnostics.iter().map(|d| format!("  {d}")).collect();
            bail!("{}:\n{}", path.display(), list.join("\n"));
        }
        configs.push(load_config(path)?);
    }
    if configs.is_empty() {
        bail!("nothing to run: pass --all, --scenario or --config");
    }
    for c in &mut configs {
        if let Some(n) = args.subsample {
            c.subsample = n;
        }
        if args.synthetic {
            c.data = Default::default();
        }
        if let Some(dir) = &args.data_dir {
            c.data.dir = Some(dir.clone());
        }
    }
    let diagnostics = check_batch(&configs);
    if !diagnostics.is_empty() {
        let list: Vec<String> = diagnostics.iter().map(|d| format!("  {d}")).collect();
        bail!("invalid scenarios:\n{}", list.join("\n"));
    }
    Ok(configs)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let configs = collect(&args).map_err(Failure::Config)?;
    let opts = BatchOptions { workers: args.workers };
    let report = run_batch(&configs, &args.out, &opts)
        .with_context(|| format!("writing results to {}", args.out.display()))
        .map_err(Failure::Run)?;
    print!("{}", report.summary_table());
    println!("results in {}", args.out.display());
    if report.all_ok() {
        Ok(())
    } else {
        Err(Failure::Run(anyhow::anyhow!("some scenarios did not solve and verify")))
    }
}

fn validate(paths: &[PathBuf]) -> Result<(), Failure> {
    let mut bad = 0;
    for path in paths {
        let diagnostics = validate_config(path);
        if diagnostics.is_empty() {
            println!("{}: ok", path.display());
        } else {
            bad += 1;
            for d in diagnostics {
                println!("{}: {d}", path.display());
            }
        }
    }
    if bad > 0 {
        Err(Failure::Config(anyhow::anyhow!("{bad} file(s) with problems")))
    } else {
        Ok(())
    }
}

fn catalog(write: Option<PathBuf>) -> Result<(), Failure> {
    for c in builtin_catalog() {
        match &write {
            Some(dir) => {
                std::fs::create_dir_all(dir)
                    .and_then(|_| std::fs::write(dir.join(format!("{}.toml", c.slug())), c.to_toml()))
                    .with_context(|| format!("writing to {}", dir.display()))
                    .map_err(Failure::Run)?;
            }
            None => println!("{}", c.name),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate { paths } => validate(&paths),
        Command::Catalog { write } => catalog(write),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
