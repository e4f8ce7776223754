//! Seeded template/read datasets and error accounting against ground truth.
//!
//! Generation draws from a `ChaCha8Rng` seeded with `seed_from_u64(seed)`,
//! in this order: every template bit (`L` draws per template, templates in
//! order), then for each read its template index followed by one uniform
//! `f64` per bit, the bit being flipped when the draw is below `p_e`. The
//! stream is consumed identically for every `p_e`, so two configurations
//! differing only in error rate share templates and template assignments.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::models::{Read, ReadSet};
use crate::solver::SolverResult;
use crate::types::{check_dims, partition_to_hypothesis, HypothesisMatrix, Partition};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub templates: usize,
    pub word_length: usize,
    pub reads: usize,
    /// Per-bit flip probability, in `[0, 0.5)`.
    pub error_rate: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.templates == 0 || self.word_length == 0 || self.reads == 0 {
            return Err(Error::invalid(
                "templates, word length and read count must be positive",
            ));
        }
        if !(0.0..0.5).contains(&self.error_rate) {
            return Err(Error::invalid(format!(
                "error rate must lie in [0, 0.5), got {}",
                self.error_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub config: SimConfig,
    pub templates: Vec<Read>,
    pub reads: ReadSet,
    /// Source template of each read.
    pub assignment: Vec<usize>,
    /// Positions flipped in each read relative to its template, ascending.
    pub flips: Vec<Vec<usize>>,
}

impl SimDataset {
    /// Ground-truth clustering. Reads whose templates carry identical words
    /// share a block, since no method could tell them apart.
    pub fn truth(&self) -> Partition {
        let canonical: Vec<usize> = (0..self.templates.len())
            .map(|t| {
                self.templates
                    .iter()
                    .position(|w| *w == self.templates[t])
                    .expect("template is present")
            })
            .collect();
        let labels: Vec<usize> = self.assignment.iter().map(|&t| canonical[t]).collect();
        Partition::from_labels(&labels)
    }

    /// Number of distinct template words that produced at least one read.
    pub fn sampled_templates(&self) -> usize {
        self.truth().num_blocks()
    }

    /// Writes `read_index<TAB>template_index` lines.
    pub fn write_truth(&self, mut out: impl Write) -> std::io::Result<()> {
        for (i, t) in self.assignment.iter().enumerate() {
            writeln!(out, "{i}\t{t}")?;
        }
        Ok(())
    }

    pub fn write_templates(&self, mut out: impl Write) -> std::io::Result<()> {
        for t in &self.templates {
            writeln!(out, "{t}")?;
        }
        Ok(())
    }
}

pub fn simulate(cfg: &SimConfig) -> Result<SimDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let templates: Vec<Read> = (0..cfg.templates)
        .map(|_| {
            let bits: Vec<bool> = (0..cfg.word_length).map(|_| rng.random::<bool>()).collect();
            Read::from_bits(&bits)
        })
        .collect();

    let mut reads = Vec::with_capacity(cfg.reads);
    let mut assignment = Vec::with_capacity(cfg.reads);
    let mut flips = Vec::with_capacity(cfg.reads);
    for _ in 0..cfg.reads {
        let t = rng.random_range(0..cfg.templates);
        let mut read = templates[t].clone();
        let mut flipped = Vec::new();
        for pos in 0..cfg.word_length {
            if rng.random::<f64>() < cfg.error_rate {
                read.flip(pos);
                flipped.push(pos);
            }
        }
        reads.push(read);
        assignment.push(t);
        flips.push(flipped);
    }

    Ok(SimDataset {
        config: cfg.clone(),
        templates,
        reads: ReadSet::new(reads)?,
        assignment,
        flips,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    pub recovered_clusters: usize,
    pub true_clusters: usize,
    /// `recovered_clusters − true_clusters`.
    pub cluster_count_error: i64,
    /// Unordered pairs whose same/different call disagrees with the truth.
    pub misclassified_edges: usize,
    /// Misclassified pairs binned by the hamming distance of their reads.
    pub misclassified_by_distance: BTreeMap<usize, usize>,
}

/// Scores a solver run. Edge errors are counted on `H*` as returned; the
/// cluster count is that of the extracted partition.
pub fn evaluate(
    result: &SolverResult,
    truth: &Partition,
    reads: Option<&ReadSet>,
) -> Result<EvalReport> {
    check_dims(truth.n(), result.partition.n())?;
    let (misclassified_edges, misclassified_by_distance) =
        edge_errors(&result.h_star, truth, reads)?;
    let recovered = result.partition.num_blocks();
    Ok(EvalReport {
        recovered_clusters: recovered,
        true_clusters: truth.num_blocks(),
        cluster_count_error: recovered as i64 - truth.num_blocks() as i64,
        misclassified_edges,
        misclassified_by_distance,
    })
}

/// [`evaluate`] for a bare partition.
pub fn evaluate_partition(
    result: &Partition,
    truth: &Partition,
    reads: Option<&ReadSet>,
) -> Result<EvalReport> {
    check_dims(truth.n(), result.n())?;
    let (misclassified_edges, misclassified_by_distance) =
        edge_errors(&partition_to_hypothesis(result), truth, reads)?;
    Ok(EvalReport {
        recovered_clusters: result.num_blocks(),
        true_clusters: truth.num_blocks(),
        cluster_count_error: result.num_blocks() as i64 - truth.num_blocks() as i64,
        misclassified_edges,
        misclassified_by_distance,
    })
}

/// Counts pairs where `h` disagrees with `truth`, total and per read
/// distance (the histogram is empty without reads).
pub fn edge_errors(
    h: &HypothesisMatrix,
    truth: &Partition,
    reads: Option<&ReadSet>,
) -> Result<(usize, BTreeMap<usize, usize>)> {
    check_dims(truth.n(), h.n())?;
    if let Some(r) = reads {
        check_dims(truth.n(), r.len())?;
    }
    let labels = truth.labels();
    let n = truth.n();
    let mut total = 0;
    let mut by_distance = BTreeMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let truly_red = labels[i] != labels[j];
            if h.is_red(i, j) != truly_red {
                total += 1;
                if let Some(r) = reads {
                    *by_distance.entry(r.distance(i, j)).or_insert(0) += 1;
                }
            }
        }
    }
    Ok((total, by_distance))
}
