use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tabmia::audit::{self, AuditConfig, CommandOutcome, Overrides};
use tabmia::data::{ColumnKind, SchemaHint};
use tabmia::{Error, Result};

#[derive(Parser)]
#[command(name = "tabmia", version, about = "Membership-inference audits for tabular classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a CSV, print its inferred schema and write a dataset manifest.
    Ingest {
        path: PathBuf,
        #[arg(long, default_value = "y")]
        label: String,
        #[arg(long, value_delimiter = ',')]
        categorical: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        numeric: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a config-driven audit.
    Audit(RunArgs),
    /// Compute the surrogate transfer matrix of a config.
    Transfer(RunArgs),
    /// Report single-outs and their capture rates.
    Singleouts(RunArgs),
    /// Print a summary of an existing report.json (or of `--out DIR`).
    Report {
        report: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all processors).
    #[arg(long)]
    jobs: Option<usize>,
    /// Restrict to these regimes (comma separated).
    #[arg(long, value_delimiter = ',')]
    regime: Vec<String>,
    /// Restrict to these attack families (comma separated).
    #[arg(long, value_delimiter = ',')]
    family: Vec<String>,
}

fn parse_all<T: std::str::FromStr<Err = Error>>(items: &[String]) -> Result<Vec<T>> {
    items
        .iter()
        .map(|s| s.parse().map_err(|e: Error| Error::Config(e.to_string())))
        .collect()
}

fn load_config(args: &RunArgs) -> Result<(AuditConfig, PathBuf)> {
    if let Some(n) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let mut cfg = AuditConfig::load(&args.config)?;
    let cwd = std::env::current_dir().map_err(|source| Error::Io {
        path: ".".into(),
        source,
    })?;
    let overrides = Overrides {
        seed: args.seed,
        out: args.out.as_ref().map(|o| cwd.join(o)),
        regimes: parse_all(&args.regime)?,
        families: parse_all(&args.family)?,
    };
    overrides.apply(&mut cfg)?;
    let base = args
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| cwd.clone(), Path::to_path_buf);
    Ok((cfg, base))
}

fn run(cli: Cli) -> Result<CommandOutcome> {
    match cli.command {
        Command::Ingest {
            path,
            label,
            categorical,
            numeric,
            out,
        } => {
            let mut hint = SchemaHint::new();
            hint.extend(categorical.into_iter().map(|c| (c, ColumnKind::Categorical)));
            hint.extend(numeric.into_iter().map(|c| (c, ColumnKind::Numeric)));
            audit::cmd_ingest(&path, &label, &hint, out.as_deref())
        }
        Command::Audit(args) => {
            let (cfg, base) = load_config(&args)?;
            audit::cmd_audit(&cfg, &base)
        }
        Command::Transfer(args) => {
            let (cfg, base) = load_config(&args)?;
            audit::cmd_transfer(&cfg, &base)
        }
        Command::Singleouts(args) => {
            let (cfg, base) = load_config(&args)?;
            audit::cmd_singleouts(&cfg, &base)
        }
        Command::Report { report, out } => {
            let path = match (report, out) {
                (Some(p), _) => p,
                (None, Some(dir)) => dir.join("report.json"),
                (None, None) => {
                    return Err(Error::Config("report needs a path or --out DIR".into()))
                }
            };
            audit::cmd_report(&path)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let outcome = run(Cli::parse());
    match &outcome {
        Ok(o) => {
            print!("{}", o.message);
            for f in &o.files {
                log::info!("wrote {}", f.display());
            }
            if o.failures > 0 {
                eprintln!("{} cell(s) failed; see the report for details", o.failures);
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(audit::exit_code(&outcome) as u8)
}
