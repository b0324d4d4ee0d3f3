use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gpc_rotation::experiment::{aggregate, emit_results, run_experiment, ExperimentSpec, OutputFormat, RunOptions};
use gpc_rotation::{presets, Error, Exec};

const EXIT_PARTIAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "gpcrot", version, about = "Sparse polynomial chaos recovery with iterative input rotations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config file or a preset id.
    Run {
        config: String,
        /// Worker threads for concurrent replicates.
        #[arg(long)]
        workers: Option<usize>,
        /// Base seed, replacing the config's.
        #[arg(long)]
        seed: Option<u64>,
        /// Replicate count, replacing the config's.
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Inspect the shipped presets.
    Presets {
        #[command(subcommand)]
        command: PresetCommand,
    },
}

#[derive(Subcommand)]
enum PresetCommand {
    List,
    Show { id: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn load_spec(config: &str) -> gpc_rotation::Result<ExperimentSpec> {
    let path = Path::new(config);
    if path.exists() {
        ExperimentSpec::load(path)
    } else if presets::list().contains(&config) {
        presets::load(config)
    } else {
        Err(Error::Config(format!("`{config}` is neither a config file nor a preset id")))
    }
}

fn run(
    config: &str,
    workers: Option<usize>,
    seed: Option<u64>,
    replicates: Option<usize>,
    out: &Path,
    format: Format,
) -> ExitCode {
    let mut spec = match load_spec(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(r) = replicates {
        spec.replicates = r;
    }
    if workers == Some(0) {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(EXIT_CONFIG);
    }
    let opts = RunOptions {
        workers,
        exec: Exec::default(),
    };
    let records = match run_experiment(&spec, &opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let format = match format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    match emit_results(&records, format, out) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_PARTIAL);
        }
    }
    for row in aggregate(&records) {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
        println!(
            "{:<12} {:<10} {:<18} M={:<5} err={} mu={}/{} failures={}/{}",
            row.benchmark.name(),
            row.family.name(),
            row.method.name(),
            row.m,
            fmt(row.mean_rel_l2_error),
            fmt(row.mean_mu_before),
            fmt(row.mean_mu_after),
            row.failures,
            row.records,
        );
    }
    let failed = records.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        eprintln!("{failed} of {} records failed", records.len());
        return ExitCode::from(EXIT_PARTIAL);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            workers,
            seed,
            replicates,
            out,
            format,
        } => run(&config, workers, seed, replicates, &out, format),
        Command::Presets { command } => match command {
            PresetCommand::List => {
                for id in presets::list() {
                    println!("{id}");
                }
                ExitCode::SUCCESS
            }
            PresetCommand::Show { id } => match presets::source(&id) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
            },
        },
    }
}
