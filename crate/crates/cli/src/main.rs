use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use protoknow::system::Mode;
use protoknow::workbench::{
    build_system, corpus_get, corpus_list, run_on_system, Report, RunOptions, Scenario,
};

#[derive(Parser)]
#[command(
    name = "protoknow",
    version,
    about = "Bounded protocol runs and knowledge queries"
)]
struct Cli {
    /// Worker threads for evaluation (defaults to the number of CPUs).
    #[arg(long, global = true, env = "PROTOKNOW_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the scenario's system and evaluate its queries.
    Check {
        scenario: PathBuf,
        #[command(flatten)]
        opts: CheckOpts,
    },
    /// Built-in scenarios.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Print the names of the built-in scenarios.
    List,
    /// Run a built-in scenario.
    Run {
        name: String,
        #[command(flatten)]
        opts: CheckOpts,
    },
}

#[derive(clap::Args)]
struct CheckOpts {
    /// Override the adversary's knowledge algorithm.
    #[arg(long)]
    algorithm: Option<String>,
    /// Override the adversary mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Write the JSON report here (`-` for standard output).
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Write the generated system as JSON here.
    #[arg(long, value_name = "PATH")]
    dump_system: Option<PathBuf>,
    /// Explain the guessing analysis of every `X` query target.
    #[arg(long)]
    debug_lowe: bool,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: cannot configure {n} workers: {e}");
        }
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` when some verdict differs from its expectation.
fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Check { scenario, opts } => {
            let s =
                Scenario::load(&scenario).with_context(|| format!("in {}", scenario.display()))?;
            check(s, &opts)
        }
        Command::Corpus {
            command: CorpusCommand::List,
        } => {
            for name in corpus_list() {
                println!("{name}");
            }
            Ok(true)
        }
        Command::Corpus {
            command: CorpusCommand::Run { name, opts },
        } => check(corpus_get(&name)?, &opts),
    }
}

fn check(mut s: Scenario, opts: &CheckOpts) -> Result<bool> {
    if let Some(a) = &opts.algorithm {
        s = s.with_algorithm(a)?;
    }
    if let Some(m) = opts.mode {
        s = s.with_mode(m)?;
    }
    let system = build_system(&s)?;
    if let Some(path) = &opts.dump_system {
        write_json(path, &serde_json::to_string_pretty(&system.to_json())?)?;
    }
    let report = run_on_system(
        &s,
        &system,
        RunOptions {
            debug_lowe: opts.debug_lowe,
        },
    )?;
    emit(&report, opts.json.as_deref())?;
    Ok(report.ok)
}

fn emit(report: &Report, json: Option<&Path>) -> Result<()> {
    match json {
        Some(p) if p == Path::new("-") => println!("{}", report.to_json()),
        Some(p) => {
            write_json(p, &report.to_json())?;
            print!("{}", report.summary());
        }
        None => print!("{}", report.summary()),
    }
    Ok(())
}

fn write_json(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))
}
