//! Exhaustive search over set partitions.
//!
//! Partitions are walked as restricted growth strings in lexicographic
//! order: `a[0] = 0` and `a[i] ≤ 1 + max(a[0..i])`. Each string is the
//! canonical labelling of exactly one partition, so the walk visits every
//! partition once, `B_N` in total.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::{labels_objective, Partition, ScoreMatrix};

/// Largest `n` enumerated without an explicit opt-in (`B_12 = 4 213 597`).
pub const ENUMERATION_CAP: usize = 12;

/// Objectives closer than this count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Restricted-growth-string walker over all partitions of `{0, .., n-1}`.
#[derive(Debug, Clone)]
pub struct PartitionEnumerator {
    labels: Vec<usize>,
    /// `prefix_max[i] = max(labels[0..=i])`.
    prefix_max: Vec<usize>,
    started: bool,
    done: bool,
}

impl PartitionEnumerator {
    pub fn new(n: usize) -> Result<Self> {
        if n > ENUMERATION_CAP {
            return Err(Error::TooLarge {
                n,
                cap: ENUMERATION_CAP,
            });
        }
        Ok(Self::uncapped(n))
    }

    /// No size guard; `B_n` grows super-exponentially.
    pub fn uncapped(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            prefix_max: vec![0; n],
            started: false,
            done: false,
        }
    }

    /// Current restricted growth string and its block count.
    pub fn current(&self) -> (&[usize], usize) {
        let blocks = self.prefix_max.last().map_or(0, |&m| m + 1);
        (&self.labels, blocks)
    }

    /// Moves to the next string; `false` once the walk is exhausted.
    pub fn advance(&mut self) -> bool {
        if self.done {
            return false;
        }
        if !self.started {
            self.started = true;
            return true;
        }
        let n = self.labels.len();
        for i in (1..n).rev() {
            if self.labels[i] <= self.prefix_max[i - 1] {
                self.labels[i] += 1;
                self.prefix_max[i] = self.prefix_max[i - 1].max(self.labels[i]);
                for t in (i + 1)..n {
                    self.labels[t] = 0;
                    self.prefix_max[t] = self.prefix_max[i];
                }
                return true;
            }
        }
        self.done = true;
        false
    }
}

impl Iterator for PartitionEnumerator {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.advance() {
            Some(Partition::from_labels(&self.labels))
        } else {
            None
        }
    }
}

pub fn enumerate_partitions(n: usize) -> Result<PartitionEnumerator> {
    PartitionEnumerator::new(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub partition: Partition,
    pub objective: f64,
    /// `false` when another partition scores within [`TIE_TOLERANCE`].
    pub is_unique: bool,
    /// Number of partitions within tolerance of the optimum.
    pub ties: usize,
}

/// Exact maximizer of the objective by enumeration. Ties resolve to the
/// first partition in enumeration order.
pub fn brute_force_optimum(scores: &ScoreMatrix) -> Result<Optimum> {
    let mut walk = PartitionEnumerator::new(scores.n())?;
    let mut best = f64::NEG_INFINITY;
    let mut best_labels = Vec::new();
    let mut ties = 0;
    while walk.advance() {
        let (labels, _) = walk.current();
        let value = labels_objective(scores, labels);
        if value > best + TIE_TOLERANCE {
            best = value;
            best_labels = labels.to_vec();
            ties = 1;
        } else if (value - best).abs() <= TIE_TOLERANCE {
            ties += 1;
        }
    }
    Ok(Optimum {
        partition: Partition::from_labels(&best_labels),
        objective: best,
        is_unique: ties == 1,
        ties,
    })
}

/// Multiplicity of each `(blue-edge count, block count)` over all
/// partitions of `n` points.
pub fn blue_block_histogram(n: usize) -> Result<BTreeMap<(usize, usize), u64>> {
    let mut walk = PartitionEnumerator::new(n)?;
    let mut hist = BTreeMap::new();
    let mut sizes = vec![0usize; n];
    while walk.advance() {
        let (labels, blocks) = walk.current();
        sizes[..blocks].iter_mut().for_each(|s| *s = 0);
        for &l in labels {
            sizes[l] += 1;
        }
        let blue: usize = sizes[..blocks]
            .iter()
            .map(|s| s * s.saturating_sub(1) / 2)
            .sum();
        *hist.entry((blue, blocks)).or_insert(0) += 1;
    }
    Ok(hist)
}

/// Multiplicity of each blue-edge count `b(C)` over all partitions.
pub fn blue_edge_histogram(n: usize) -> Result<BTreeMap<usize, u64>> {
    let mut out = BTreeMap::new();
    for ((blue, _), count) in blue_block_histogram(n)? {
        *out.entry(blue).or_insert(0) += count;
    }
    Ok(out)
}

/// `Z(x, n) = Σ_C x^{b(C)}` summed directly over the partitions.
pub fn brute_force_partition_sum(x: f64, n: usize) -> Result<f64> {
    Ok(blue_edge_histogram(n)?
        .into_iter()
        .map(|(b, count)| count as f64 * x.powi(b as i32))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{check_transitivity, partition_to_hypothesis};

    fn scores(entries: [f64; 3]) -> ScoreMatrix {
        let [s01, s12, s02] = entries;
        ScoreMatrix::from_rows(&[
            vec![0.0, s01, s02],
            vec![s01, 0.0, s12],
            vec![s02, s12, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn small_counts() {
        assert_eq!(enumerate_partitions(1).unwrap().count(), 1);
        assert_eq!(enumerate_partitions(3).unwrap().count(), 5);
        assert_eq!(enumerate_partitions(10).unwrap().count(), 115_975);
        assert_eq!(enumerate_partitions(0).unwrap().count(), 1);
    }

    #[test]
    fn three_point_listing_is_canonical() {
        let listed: Vec<String> = enumerate_partitions(3)
            .unwrap()
            .map(|p| p.to_string())
            .collect();
        assert_eq!(
            listed,
            [
                "{{0,1,2}}",
                "{{0,1},{2}}",
                "{{0,2},{1}}",
                "{{0},{1,2}}",
                "{{0},{1},{2}}"
            ]
        );
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            enumerate_partitions(13),
            Err(Error::TooLarge { n: 13, cap: 12 })
        ));
        assert!(brute_force_optimum(&ScoreMatrix::zeros(13)).is_err());
        assert_eq!(PartitionEnumerator::uncapped(4).count(), 15);
    }

    #[test]
    fn every_partition_is_transitive_and_distinct() {
        let all: Vec<_> = enumerate_partitions(6).unwrap().collect();
        let unique: std::collections::HashSet<_> = all.iter().cloned().collect();
        assert_eq!(unique.len(), all.len());
        assert!(all
            .iter()
            .all(|p| check_transitivity(&partition_to_hypothesis(p)).is_valid()));
    }

    #[test]
    fn optimum_of_frustrated_triangle() {
        let opt = brute_force_optimum(&scores([-2.0, -1.0, 3.0])).unwrap();
        assert_eq!(
            opt.partition,
            Partition::new(3, vec![vec![0, 1], vec![2]]).unwrap()
        );
        assert_eq!(opt.objective, 2.0);
        assert!(opt.is_unique);
    }

    #[test]
    fn optimum_reports_ties() {
        let opt = brute_force_optimum(&scores([-1.0, -1.0, 3.0])).unwrap();
        assert_eq!(opt.objective, 2.0);
        assert!(!opt.is_unique);
        assert_eq!(opt.ties, 2);
        assert_eq!(
            opt.partition,
            Partition::new(3, vec![vec![0, 1], vec![2]]).unwrap()
        );
    }

    #[test]
    fn all_negative_gives_one_block() {
        let s = ScoreMatrix::from_fn(6, |i, j| -1.0 - (i + j) as f64).unwrap();
        let opt = brute_force_optimum(&s).unwrap();
        assert_eq!(opt.partition, Partition::single_block(6));
        assert_eq!(opt.objective, 0.0);
        assert!(opt.is_unique);
    }

    #[test]
    fn partition_sum_of_three_points() {
        let hist = blue_edge_histogram(3).unwrap();
        assert_eq!(hist, BTreeMap::from([(0, 1), (1, 3), (3, 1)]));
        for x in [0.0, 0.3, 1.0, 2.5] {
            let z = brute_force_partition_sum(x, 3).unwrap();
            assert!((z - (1.0 + 3.0 * x + x * x * x)).abs() < 1e-12);
        }
        assert_eq!(brute_force_partition_sum(1.0, 3).unwrap(), 5.0);
        assert_eq!(brute_force_partition_sum(0.0, 7).unwrap(), 1.0);
    }
}
