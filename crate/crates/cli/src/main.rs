//! `transprop`: batch front end for transitive propagation clustering.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 solver did not
//! converge (see `--allow-nonconverged`), 4 internal invariant breach.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

mod cluster;
mod experiments;
mod manifest;
mod output;
mod prior;
mod simulate;

use manifest::{Manifest, Settings};
use output::{Artifacts, Failure};

#[derive(Parser, Debug)]
#[command(
    name = "transprop",
    version,
    about = "Clustering by transitive propagation"
)]
struct Cli {
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize, Deserialize, Clone, Debug)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Cluster a reads file or a score matrix.
    Cluster(cluster::ClusterArgs),
    /// Generate a seeded template/read dataset.
    Simulate(simulate::SimulateArgs),
    /// Recovered cluster count against error rate.
    ExperimentFig4(experiments::Fig4Args),
    /// Misclassified edges against read distance, with the likelihood-only baseline.
    ExperimentFig5(experiments::Fig5Args),
    /// Partition function, blue-edge fraction and cluster-count moments of the prior.
    Prior(prior::PriorArgs),
    /// Re-run the command recorded in a manifest and check the outputs match.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Args, Clone, Debug)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    manifest: PathBuf,
    /// Directory for the regenerated outputs.
    #[arg(long, short)]
    out: PathBuf,
}

impl Command {
    fn out_dir(&self) -> &PathBuf {
        match self {
            Command::Cluster(a) => &a.out,
            Command::Simulate(a) => &a.out,
            Command::ExperimentFig4(a) => &a.out,
            Command::ExperimentFig5(a) => &a.out,
            Command::Prior(a) => &a.out,
            Command::Replay(a) => &a.out,
        }
    }

    fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            Command::Cluster(a) => a.out = dir,
            Command::Simulate(a) => a.out = dir,
            Command::ExperimentFig4(a) => a.out = dir,
            Command::ExperimentFig5(a) => a.out = dir,
            Command::Prior(a) => a.out = dir,
            Command::Replay(a) => a.out = dir,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Replay(args) => replay(args),
        command => execute(&cli.settings, command).map(|_| ()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}

/// Runs one command, writing its outputs and manifest into its output
/// directory. The manifest is written whenever the outputs were.
fn execute(settings: &Settings, command: &Command) -> Result<Manifest, Failure> {
    let mut art = Artifacts::create(command.out_dir())?;
    let result = match command {
        Command::Cluster(args) => cluster::run(settings, args, &mut art),
        Command::Simulate(args) => simulate::run(settings, args, &mut art),
        Command::ExperimentFig4(args) => experiments::run_fig4(settings, args, &mut art),
        Command::ExperimentFig5(args) => experiments::run_fig5(settings, args, &mut art),
        Command::Prior(args) => prior::run(settings, args, &mut art),
        Command::Replay(_) => unreachable!("replay is dispatched separately"),
    };
    match result {
        Ok(()) | Err(Failure::NotConverged(_)) => {
            let manifest = Manifest::new(settings.clone(), command.clone(), &art);
            art.write_manifest(&manifest)?;
            result.map(|_| manifest)
        }
        Err(e) => Err(e),
    }
}

fn replay(args: &ReplayArgs) -> Result<(), Failure> {
    let recorded = Manifest::load(&args.manifest)?;
    recorded.verify_inputs()?;
    let mut command = recorded.command.clone();
    command.set_out_dir(args.out.clone());
    let (fresh, pending) = match execute(&recorded.settings, &command) {
        Ok(m) => (m, None),
        Err(f @ Failure::NotConverged(_)) => (
            Manifest::load(&args.out.join(manifest::MANIFEST_FILE))?,
            Some(f),
        ),
        Err(e) => return Err(e),
    };
    if fresh.outputs != recorded.outputs {
        return Err(Failure::Invariant(format!(
            "replayed outputs differ from those recorded in {}",
            args.manifest.display()
        )));
    }
    println!(
        "replay matches {} ({} outputs)",
        args.manifest.display(),
        fresh.outputs.len()
    );
    pending.map_or(Ok(()), Err)
}
