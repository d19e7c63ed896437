use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use srmkit_cli::config::read_expectations;
use srmkit_cli::{
    figure, run_check, run_extract, run_session, write_check, write_extract, write_session,
    CliError, Loaded,
};

#[derive(Parser)]
#[command(
    name = "srmkit",
    version,
    about = "Check market axioms on scoring rule and cost-function markets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to out/<config name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured checks and write one report per check.
    Check {
        #[command(flatten)]
        common: Common,
        /// Golden verdict file: a TOML table of check = "verdict".
        #[arg(long)]
        expect: Option<PathBuf>,
    },
    /// Play the scripted traders and settle the market.
    Session {
        #[command(flatten)]
        common: Common,
    },
    /// Extract a cost-function market from a finite-outcome rule.
    Extract {
        #[command(flatten)]
        common: Common,
    },
    /// Emit the payoff-curve and market-state tables.
    Figure {
        /// Figure config; the bundled one by default.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out/figures")]
        out: PathBuf,
    },
}

fn setup(common: &Common) -> Result<(Loaded, PathBuf), CliError> {
    if let Some(n) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let loaded = Loaded::read(&common.config)?;
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| Path::new("out").join(&loaded.config.name));
    Ok((loaded, out))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Check { common, expect } => {
            let (loaded, out) = setup(&common)?;
            let extra = match &expect {
                Some(p) => read_expectations(p)?,
                None => Default::default(),
            };
            let r = run_check(&loaded, common.seed, &extra)?;
            write_check(&r, &loaded, &out)?;
            for c in &r.results {
                println!("{}\t{}", c.name, c.report.verdict.name());
            }
            for m in r.mismatches() {
                eprintln!("{m}");
            }
            Ok(r.exit_code())
        }
        Command::Session { common } => {
            let (loaded, out) = setup(&common)?;
            let r = run_session(&loaded, common.seed)?;
            write_session(&r, &loaded, &out)?;
            println!(
                "final {}\tmaker-loss {}",
                r.session.current(),
                r.settlement.maker_loss
            );
            Ok(r.exit_code())
        }
        Command::Extract { common } => {
            let (loaded, out) = setup(&common)?;
            let r = run_extract(&loaded, common.seed)?;
            write_extract(&r, &loaded, &out)?;
            println!("extract\t{}", r.verdict().name());
            Ok(r.exit_code())
        }
        Command::Figure { config, out } => {
            let text = match &config {
                Some(p) => std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
                None => figure::BUNDLED.to_string(),
            };
            let (cfg, sha) = figure::parse(&text)?;
            let tables = figure::render(&cfg)?;
            figure::write_figures(&tables, &sha, &out)?;
            for t in &tables {
                println!("{}.tsv", t.name);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("srmkit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
