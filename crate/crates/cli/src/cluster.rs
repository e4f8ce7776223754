use std::path::PathBuf;
use std::time::Instant;

use clap::{ArgGroup, Args};
use serde::{Deserialize, Serialize};
use transprop_core::models::{load_score_matrix, score_matrix_from_reads};
use transprop_core::solver::solve_with;
use transprop_core::{BinaryReadModel, Objective, ReadSet, ScoreMatrix, SolverResult};

use crate::manifest::Settings;
use crate::output::{in_file, Artifacts, Failure};

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
#[command(group(ArgGroup::new("input").required(true).args(["reads", "scores"])))]
pub struct ClusterArgs {
    /// Reads file: one binary word per line ('#' comments allowed).
    #[arg(long, requires = "error_rate")]
    pub reads: Option<PathBuf>,
    /// Score matrix CSV of ΔS = log f1 − log f0 (positive favours different clusters).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Per-bit error rate of the reads, in (0, 0.5).
    #[arg(long, requires = "reads")]
    pub error_rate: Option<f64>,
    /// The score matrix file starts with a header row.
    #[arg(long, requires = "scores")]
    #[serde(default)]
    pub header: bool,
    /// Exit 0 even when the solver stops at the iteration cap.
    #[arg(long)]
    #[serde(default)]
    pub allow_nonconverged: bool,
    /// Output directory.
    #[arg(long, short)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Summary {
    points: usize,
    clusters: usize,
    iterations: usize,
    converged: bool,
    fast_path: bool,
    overflowed: bool,
    violations: usize,
    /// Objective of the thresholded beliefs; `-inf` when they are not transitive.
    objective: f64,
    /// Objective of the extracted partition.
    partition_objective: f64,
    margin: f64,
    stability: f64,
}

pub fn run(settings: &Settings, args: &ClusterArgs, art: &mut Artifacts) -> Result<(), Failure> {
    let cfg = settings.solver()?;
    let scores = load(args, art)?;

    let start = Instant::now();
    let result = if settings.f32 {
        solve_with::<f32>(&scores, &cfg)
    } else {
        solve_with::<f64>(&scores, &cfg)
    }
    .map_err(|e| Failure::Invariant(format!("solver rejected a validated input: {e}")))?;
    let wall = start.elapsed();
    check(&scores, &result)?;

    let mut partition = String::new();
    for (i, label) in result.partition.labels().iter().enumerate() {
        partition.push_str(&format!("{i}\t{label}\n"));
    }
    art.write("partition.tsv", partition.as_bytes())?;

    let summary = Summary {
        points: scores.n(),
        clusters: result.partition.num_blocks(),
        iterations: result.iterations,
        converged: result.converged,
        fast_path: result.fast_path,
        overflowed: result.overflowed,
        violations: result.violations.count(),
        objective: result.objective_value.to_f64(),
        partition_objective: result.repaired_objective,
        margin: result.margin,
        stability: result.stability,
    };
    let text =
        toml::to_string(&summary).map_err(|e| Failure::Invariant(format!("summary: {e}")))?;
    art.write("summary.toml", text.as_bytes())?;

    println!(
        "{} points -> {} clusters; {} iterations, converged: {}, violations: {}, objective: {}, wall time: {:.3}s",
        summary.points,
        summary.clusters,
        summary.iterations,
        summary.converged,
        summary.violations,
        match result.objective_value {
            Objective::Finite(v) => format!("{v}"),
            Objective::Infeasible => format!("infeasible (partition: {})", result.repaired_objective),
        },
        wall.as_secs_f64()
    );

    if !result.converged && !args.allow_nonconverged {
        return Err(Failure::NotConverged(format!(
            "solver did not converge after {} iterations{} (outputs written; pass --allow-nonconverged to accept)",
            result.iterations,
            if result.overflowed { ", beliefs overflowed" } else { "" }
        )));
    }
    Ok(())
}

fn load(args: &ClusterArgs, art: &mut Artifacts) -> Result<ScoreMatrix, Failure> {
    match (&args.reads, &args.scores) {
        (Some(path), None) => {
            let p = args
                .error_rate
                .ok_or_else(|| Failure::Input(anyhow::anyhow!("--reads requires --error-rate")))?;
            let bytes = art.read_input(path)?;
            let reads = ReadSet::from_reader(&bytes[..]).map_err(|e| in_file(path, e))?;
            let model = BinaryReadModel::new(reads.word_length(), p)
                .map_err(|e| Failure::Input(e.into()))?;
            score_matrix_from_reads(&model, &reads).map_err(|e| in_file(path, e))
        }
        (None, Some(path)) => {
            let bytes = art.read_input(path)?;
            load_score_matrix(&bytes[..], args.header).map_err(|e| in_file(path, e))
        }
        _ => Err(Failure::Input(anyhow::anyhow!(
            "give exactly one of --reads or --scores"
        ))),
    }
}

/// Consistency checks that hold for every solver outcome.
fn check(scores: &ScoreMatrix, r: &SolverResult) -> Result<(), Failure> {
    let n = scores.n();
    let breach = |m: &str| Err(Failure::Invariant(m.to_string()));
    if r.partition.n() != n || r.h_star.n() != n {
        return breach("result size differs from input size");
    }
    if r.objective_value.is_feasible() != r.violations.is_valid() {
        return breach("objective feasibility disagrees with the transitivity check");
    }
    if !r.repaired_objective.is_finite() || r.b_final.iter().any(|v| !v.is_finite()) {
        return breach("non-finite objective or beliefs");
    }
    Ok(())
}
