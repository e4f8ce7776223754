//! Simulation grids behind the cluster-count and edge-error figures.
//!
//! Simulation `s` of every grid cell is seeded with `seed + s`, so cells
//! that differ only in error rate share templates and read assignments.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::anyhow;
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use transprop_core::models::score_matrix_from_reads;
use transprop_core::simulator::{edge_errors, simulate, SimConfig, SimDataset};
use transprop_core::solver::solve_with;
use transprop_core::{no_prior_solution, BinaryReadModel, ScoreMatrix, SolverConfig, SolverResult};

use crate::manifest::Settings;
use crate::output::{mean_sd, num, Artifacts, Failure, Table};

/// Error rate assumed by the likelihood model when reads are simulated
/// without noise (the model needs a rate strictly inside (0, 0.5)).
const MODEL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct Fig4Args {
    /// Comma-separated template counts K.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub templates: Vec<usize>,
    /// Comma-separated per-bit error rates.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05")]
    pub error_rates: Vec<f64>,
    #[arg(long, default_value_t = 30)]
    pub length: usize,
    /// Reads per template; N = K × this.
    #[arg(long, default_value_t = 10)]
    pub reads_per_template: usize,
    #[arg(long, default_value_t = 20)]
    pub sims: usize,
    /// Use the full published grid (K ∈ {10, 20, 40}, four error rates,
    /// 100 simulations) instead of the flags above. Slow.
    #[arg(long)]
    #[serde(default)]
    pub paper_scale: bool,
    /// Output directory.
    #[arg(long, short)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct Fig5Args {
    #[arg(long, default_value_t = 20)]
    pub templates: usize,
    #[arg(long, default_value_t = 30)]
    pub length: usize,
    /// Number of reads N.
    #[arg(long, default_value_t = 100)]
    pub reads: usize,
    /// Comma-separated per-bit error rates.
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub error_rates: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub sims: usize,
    /// Use the full published setting (K = 50, N = 250, four error rates,
    /// 100 simulations) instead of the flags above. Slow.
    #[arg(long)]
    #[serde(default)]
    pub paper_scale: bool,
    /// Output directory.
    #[arg(long, short)]
    #[serde(skip)]
    pub out: PathBuf,
}

/// One simulated dataset pushed through the solver and the baseline.
struct Trial {
    dataset: SimDataset,
    model: BinaryReadModel,
    scores: ScoreMatrix,
    result: Result<SolverResult, String>,
}

fn trial(cfg: SimConfig, solver: &SolverConfig, f32: bool) -> Result<Trial, Failure> {
    let dataset = simulate(&cfg).map_err(|e| Failure::Input(e.into()))?;
    let model = BinaryReadModel::new(cfg.word_length, cfg.error_rate.max(MODEL_ERROR_FLOOR))
        .map_err(|e| Failure::Input(e.into()))?;
    let scores = score_matrix_from_reads(&model, &dataset.reads)
        .map_err(|e| Failure::Invariant(e.to_string()))?;
    let result = if f32 {
        solve_with::<f32>(&scores, solver)
    } else {
        solve_with::<f64>(&scores, solver)
    }
    .map_err(|e| e.to_string());
    Ok(Trial {
        dataset,
        model,
        scores,
        result,
    })
}

fn status(r: &SolverResult) -> &'static str {
    if r.converged {
        "ok"
    } else {
        "nonconverged"
    }
}

fn check_rates(rates: &[f64]) -> Result<(), Failure> {
    if rates.is_empty() || rates.iter().any(|p| !(0.0..0.5).contains(p)) {
        return Err(Failure::Input(anyhow!("error rates must lie in [0, 0.5)")));
    }
    Ok(())
}

/// Solver settings inside a grid: cells already run in parallel, so each
/// solve uses the grid's pool rather than building its own.
fn grid_solver(settings: &Settings) -> Result<SolverConfig, Failure> {
    Ok(SolverConfig {
        threads: None,
        ..settings.solver()?
    })
}

pub fn run_fig4(settings: &Settings, args: &Fig4Args, art: &mut Artifacts) -> Result<(), Failure> {
    let (ks, rates, sims) = if args.paper_scale {
        (vec![10, 20, 40], vec![0.01, 0.05, 0.10, 0.15], 100)
    } else {
        (args.templates.clone(), args.error_rates.clone(), args.sims)
    };
    check_rates(&rates)?;
    if ks.is_empty() || ks.contains(&0) || sims == 0 || args.reads_per_template == 0 {
        return Err(Failure::Input(anyhow!(
            "templates, sims and reads per template must be positive"
        )));
    }
    let seed = settings.seed()?;
    let solver = grid_solver(settings)?;
    let pool = settings.pool()?;

    let cells: Vec<(usize, f64, usize)> = ks
        .iter()
        .flat_map(|&k| {
            rates
                .iter()
                .flat_map(move |&p| (0..sims).map(move |s| (k, p, s)))
        })
        .collect();
    let rows: Vec<Result<Vec<String>, Failure>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(k, p, s)| {
                let cfg = SimConfig {
                    templates: k,
                    word_length: args.length,
                    reads: k * args.reads_per_template,
                    error_rate: p,
                    seed: seed.wrapping_add(s as u64),
                };
                let t = trial(cfg.clone(), &solver, settings.f32)?;
                let sampled = t.dataset.sampled_templates();
                let mut row = vec![
                    "sim".to_string(),
                    k.to_string(),
                    num(p),
                    s.to_string(),
                    cfg.seed.to_string(),
                    cfg.reads.to_string(),
                    sampled.to_string(),
                ];
                match &t.result {
                    Ok(r) => {
                        let (wrong, _) = edge_errors(&r.h_star, &t.dataset.truth(), None)
                            .map_err(|e| Failure::Invariant(e.to_string()))?;
                        row.extend([
                            r.partition.num_blocks().to_string(),
                            wrong.to_string(),
                            r.iterations.to_string(),
                            u8::from(r.converged).to_string(),
                            r.violations.count().to_string(),
                            status(r).to_string(),
                        ]);
                    }
                    Err(e) => {
                        row.extend(["", "", "", "", ""].map(String::from));
                        row.push(format!("error: {e}"));
                    }
                }
                Ok(row)
            })
            .collect()
    });

    let mut table = Table::new(
        "transprop.fig4.v1",
        &[
            "kind",
            "K",
            "error_rate",
            "sim",
            "seed",
            "reads",
            "sampled_templates",
            "recovered_clusters",
            "misclassified_edges",
            "iterations",
            "converged",
            "violations",
            "status",
        ],
    );
    let mut sim_rows = Vec::with_capacity(rows.len());
    for row in rows {
        sim_rows.push(row?);
    }
    let mut failures = 0;
    for cell in sim_rows.chunks(sims) {
        for row in cell {
            table.push(row.clone());
        }
        let solved: Vec<&Vec<String>> = cell.iter().filter(|r| !r[7].is_empty()).collect();
        failures += cell.len() - solved.len();
        let column = |c: usize| -> Vec<f64> {
            solved
                .iter()
                .map(|r| r[c].parse::<f64>().expect("numeric"))
                .collect()
        };
        let stats: Vec<(f64, f64)> = (6..12).map(|c| mean_sd(&column(c))).collect();
        for (kind, pick) in [("mean", 0usize), ("sd", 1)] {
            let mut row = vec![kind.to_string(), cell[0][1].clone(), cell[0][2].clone()];
            row.extend([String::new(), String::new(), cell[0][5].clone()]);
            row.extend(stats.iter().map(|s| num(if pick == 0 { s.0 } else { s.1 })));
            row.push(format!("{}/{}", solved.len(), cell.len()));
            table.push(row);
        }
    }
    art.write("fig4.csv", &table.to_bytes())?;

    println!(
        "{} simulations over {} cells, {} solver errors",
        sim_rows.len(),
        sim_rows.len() / sims,
        failures
    );
    Ok(())
}

/// Per-simulation edge errors by read distance.
struct Fig5Sim {
    row: Vec<String>,
    /// `(pairs, tp errors, baseline errors)` per distance; `None` when the
    /// solver failed.
    bins: Option<Vec<(usize, usize, usize)>>,
}

/// Distances between the modes of the same-cluster and different-cluster
/// distance distributions, where the two likelihoods overlap.
pub fn intermediate_range(model: &BinaryReadModel) -> (usize, usize) {
    let l = model.word_length() as f64;
    (
        (l * model.mismatch_probability()).ceil() as usize,
        (l / 2.0).floor() as usize,
    )
}

pub fn run_fig5(settings: &Settings, args: &Fig5Args, art: &mut Artifacts) -> Result<(), Failure> {
    let (k, n, rates, sims) = if args.paper_scale {
        (50, 250, vec![0.01, 0.05, 0.10, 0.20], 100)
    } else {
        (
            args.templates,
            args.reads,
            args.error_rates.clone(),
            args.sims,
        )
    };
    check_rates(&rates)?;
    if k == 0 || n == 0 || sims == 0 {
        return Err(Failure::Input(anyhow!(
            "templates, reads and sims must be positive"
        )));
    }
    let l = args.length;
    let seed = settings.seed()?;
    let solver = grid_solver(settings)?;
    let pool = settings.pool()?;

    let cells: Vec<(f64, usize)> = rates
        .iter()
        .flat_map(|&p| (0..sims).map(move |s| (p, s)))
        .collect();
    let results: Vec<Result<Fig5Sim, Failure>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(p, s)| {
                let cfg = SimConfig {
                    templates: k,
                    word_length: l,
                    reads: n,
                    error_rate: p,
                    seed: seed.wrapping_add(s as u64),
                };
                let t = trial(cfg.clone(), &solver, settings.f32)?;
                let truth = t.dataset.truth();
                let reads = &t.dataset.reads;
                let mut pairs = vec![0usize; l + 1];
                for i in 0..n {
                    for j in (i + 1)..n {
                        pairs[reads.distance(i, j)] += 1;
                    }
                }
                let breach = |e: transprop_core::Error| Failure::Invariant(e.to_string());
                let (base_total, base_bins) =
                    edge_errors(&no_prior_solution(&t.scores), &truth, Some(reads))
                        .map_err(breach)?;
                let (lo, hi) = intermediate_range(&t.model);
                let in_band = |m: &BTreeMap<usize, usize>| -> usize {
                    m.range(lo..=hi).map(|(_, c)| c).sum()
                };
                let mut row = vec![
                    num(p),
                    s.to_string(),
                    cfg.seed.to_string(),
                    t.dataset.sampled_templates().to_string(),
                ];
                let bins = match &t.result {
                    Ok(r) => {
                        let (tp_total, tp_bins) =
                            edge_errors(&r.h_star, &truth, Some(reads)).map_err(breach)?;
                        row.extend([
                            r.partition.num_blocks().to_string(),
                            tp_total.to_string(),
                            base_total.to_string(),
                            in_band(&tp_bins).to_string(),
                            in_band(&base_bins).to_string(),
                            r.iterations.to_string(),
                            u8::from(r.converged).to_string(),
                            r.violations.count().to_string(),
                            status(r).to_string(),
                        ]);
                        let get = |m: &BTreeMap<usize, usize>, d| m.get(&d).copied().unwrap_or(0);
                        Some(
                            (0..=l)
                                .map(|d| (pairs[d], get(&tp_bins, d), get(&base_bins, d)))
                                .collect(),
                        )
                    }
                    Err(e) => {
                        row.extend(["", "", "", "", "", "", "", ""].map(String::from));
                        row.push(format!("error: {e}"));
                        None
                    }
                };
                Ok(Fig5Sim { row, bins })
            })
            .collect()
    });
    let mut per_sim = Vec::with_capacity(results.len());
    for r in results {
        per_sim.push(r?);
    }

    let mut sims_table = Table::new(
        "transprop.fig5-sims.v1",
        &[
            "error_rate",
            "sim",
            "seed",
            "sampled_templates",
            "recovered_clusters",
            "tp_errors",
            "baseline_errors",
            "tp_intermediate_errors",
            "baseline_intermediate_errors",
            "iterations",
            "converged",
            "violations",
            "status",
        ],
    );
    let mut table = Table::new(
        "transprop.fig5.v1",
        &[
            "kind",
            "error_rate",
            "distance",
            "f0",
            "f1",
            "delta_s",
            "pairs_mean",
            "tp_mean_errors",
            "baseline_mean_errors",
            "sims",
        ],
    );
    for (cell, &p) in per_sim.chunks(sims).zip(&rates) {
        for sim in cell {
            sims_table.push(sim.row.clone());
        }
        let model = BinaryReadModel::new(l, p.max(MODEL_ERROR_FLOOR))
            .map_err(|e| Failure::Input(e.into()))?;
        let solved: Vec<&Vec<(usize, usize, usize)>> =
            cell.iter().filter_map(|s| s.bins.as_ref()).collect();
        let count = solved.len();
        let mean = |f: &dyn Fn(&(usize, usize, usize)) -> usize,
                    ds: std::ops::RangeInclusive<usize>|
         -> f64 {
            if count == 0 {
                return f64::NAN;
            }
            let total: usize = solved
                .iter()
                .map(|b| ds.clone().map(|d| f(&b[d])).sum::<usize>())
                .sum();
            total as f64 / count as f64
        };
        for d in 0..=l {
            let ds = model
                .delta_s(d)
                .map_err(|e| Failure::Invariant(e.to_string()))?;
            table.push(vec![
                "bin".into(),
                num(p),
                d.to_string(),
                num(model.log_f0(d).exp()),
                num(model.log_f1(d).exp()),
                num(ds),
                num(mean(&|b| b.0, d..=d)),
                num(mean(&|b| b.1, d..=d)),
                num(mean(&|b| b.2, d..=d)),
                count.to_string(),
            ]);
        }
        let (lo, hi) = intermediate_range(&model);
        for (kind, range, label) in [
            ("intermediate", lo..=hi, format!("{lo}-{hi}")),
            ("total", 0..=l, String::new()),
        ] {
            table.push(vec![
                kind.into(),
                num(p),
                label,
                String::new(),
                String::new(),
                String::new(),
                num(mean(&|b| b.0, range.clone())),
                num(mean(&|b| b.1, range.clone())),
                num(mean(&|b| b.2, range)),
                count.to_string(),
            ]);
        }
    }
    art.write("fig5.csv", &table.to_bytes())?;
    art.write("fig5_sims.csv", &sims_table.to_bytes())?;
    println!(
        "{} simulations over {} error rates",
        per_sim.len(),
        rates.len()
    );
    Ok(())
}
