use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

mod args;
mod commands;
mod figures;
mod manifest;
mod table;

use commands::{Command, UsageError};
use manifest::Manifest;

#[derive(Parser)]
#[command(name = "margin-vote", version, about = "Analytics for δ-margin voting")]
struct Cli {
    /// Worker threads for simulation and replay (results do not depend on it).
    #[arg(long, global = true, env = "MARGIN_VOTE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: TopLevel,
}

#[derive(Subcommand)]
enum TopLevel {
    #[command(flatten)]
    Run(Command),
    /// Regenerate the outputs recorded in a manifest and verify their checksums.
    Rerun(RerunArgs),
}

#[derive(Args)]
struct RerunArgs {
    manifest: PathBuf,
    /// Write the regenerated outputs here (file or directory, as originally).
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<margin_vote::Error>() {
        Some(e) if e.is_validation() => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn configure_threads(threads: Option<usize>) -> anyhow::Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(UsageError {
            flag: Some("--threads".into()),
            message: "must be at least 1".into(),
        }
        .into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| margin_vote::Error::ThreadPool(e.to_string()).into())
}

/// Input paths are recorded absolute so a manifest can be replayed from anywhere.
fn absolutize_inputs(command: &mut Command) -> anyhow::Result<()> {
    if let Command::Replay(a) = command {
        a.labels = std::fs::canonicalize(&a.labels)
            .map_err(|e| UsageError {
                flag: Some("--labels".into()),
                message: format!("{}: {e}", a.labels.display()),
            })?;
    }
    Ok(())
}

fn run(mut command: Command) -> anyhow::Result<()> {
    absolutize_inputs(&mut command)?;
    let output = command.run()?;
    let dest = command.destination().clone();
    let out = match (&dest.out, output.directory) {
        (None, true) => Some(PathBuf::from(command.name())),
        (out, _) => out.clone(),
    };
    manifest::emit(&command, &output, out.as_deref(), dest.manifest.as_deref())?;
    Ok(())
}

fn rerun(args: RerunArgs) -> anyhow::Result<()> {
    let recorded = Manifest::read(&args.manifest)?;
    let output = recorded
        .command
        .run()
        .with_context(|| format!("re-running {}", recorded.command.name()))?;
    let report = manifest::verify(&recorded, &output)?;
    if let Some(out) = &args.out {
        manifest::emit(&recorded.command, &output, Some(out), None)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    if !report.verified {
        anyhow::bail!("regenerated outputs differ from {}", args.manifest.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads(cli.threads).and_then(|()| match cli.command {
        TopLevel::Run(command) => run(command),
        TopLevel::Rerun(args) => rerun(args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
