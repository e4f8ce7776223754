//! Score matrices, hypothesis matrices, partitions and the objective that
//! ties them together.
//!
//! Edges are coloured blue (`0`, same cluster) or red (`1`, different
//! clusters). A colouring is a valid clustering exactly when no triple of
//! points has a single red edge.

use std::fmt;

use crate::error::{Error, Result};

/// Symmetric `N×N` matrix of pairwise log-likelihood ratios in nats.
///
/// Entry `(i, j)` is `log f1(i,j) - log f0(i,j)`: positive values favour
/// putting `i` and `j` in different clusters. The diagonal is stored as zero
/// and never read.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    delta_s: Vec<f64>,
}

impl ScoreMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            delta_s: vec![0.0; n * n],
        }
    }

    /// Builds a matrix from a function evaluated once per unordered pair
    /// `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut delta_s = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: i,
                        col: j,
                        value: v.to_string(),
                    });
                }
                delta_s[i * n + j] = v;
                delta_s[j * n + i] = v;
            }
        }
        Ok(Self { n, delta_s })
    }

    /// Builds a matrix from full rows. Rows must form an exactly symmetric
    /// square matrix of finite values; the diagonal is ignored.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && !rows[i][j].is_finite() {
                    return Err(Error::NonFinite {
                        row: i,
                        col: j,
                        value: rows[i][j].to_string(),
                    });
                }
                if i < j && rows[i][j] != rows[j][i] {
                    return Err(Error::Asymmetric {
                        row: i,
                        col: j,
                        difference: (rows[i][j] - rows[j][i]).abs(),
                    });
                }
            }
        }
        Self::from_fn(n, |i, j| rows[i][j])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.delta_s[i * self.n + j]
    }

    /// Row-major view of the full matrix, diagonal included.
    pub fn as_slice(&self) -> &[f64] {
        &self.delta_s
    }

    /// Returns `self + other` entrywise, e.g. to fold a per-edge prior
    /// log-weight into the scores.
    pub fn add(&self, other: &ScoreMatrix) -> Result<ScoreMatrix> {
        check_dims(self.n, other.n)?;
        ScoreMatrix::from_fn(self.n, |i, j| self.get(i, j) + other.get(i, j))
    }

    /// Returns `c · self`.
    pub fn scaled(&self, c: f64) -> Result<ScoreMatrix> {
        ScoreMatrix::from_fn(self.n, |i, j| c * self.get(i, j))
    }

    /// Relabels points: entry `(π(i), π(j))` of the result is entry `(i, j)`
    /// of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<ScoreMatrix> {
        check_dims(self.n, perm.len())?;
        let inv = invert_permutation(perm)?;
        ScoreMatrix::from_fn(self.n, |a, b| self.get(inv[a], inv[b]))
    }
}

/// Symmetric binary edge colouring. `0` is blue (same cluster), `1` is red.
///
/// Validity (transitivity) is not an invariant of this type; see
/// [`check_transitivity`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct HypothesisMatrix {
    n: usize,
    h: Vec<u8>,
}

impl HypothesisMatrix {
    pub fn all_blue(n: usize) -> Self {
        Self {
            n,
            h: vec![0; n * n],
        }
    }

    pub fn all_red(n: usize) -> Self {
        Self::from_fn(n, |_, _| true)
    }

    /// Builds a colouring from a predicate evaluated once per pair `i < j`;
    /// `true` means red.
    pub fn from_fn(n: usize, mut red: impl FnMut(usize, usize) -> bool) -> Self {
        let mut h = vec![0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = u8::from(red(i, j));
                h[i * n + j] = v;
                h[j * n + i] = v;
            }
        }
        Self { n, h }
    }

    /// Builds a colouring from full rows of `0`/`1` entries.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            if row[i] != 0 {
                return Err(Error::invalid(format!("diagonal entry {i} must be 0")));
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(Error::invalid(format!("entry ({i}, {j}) is {v}, not 0/1")));
                }
                if v != rows[j][i] {
                    return Err(Error::invalid(format!("entry ({i}, {j}) is not symmetric")));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j] == 1))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.h[i * self.n + j]
    }

    #[inline]
    pub fn is_red(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == 1
    }

    #[inline]
    pub fn is_blue(&self, i: usize, j: usize) -> bool {
        i != j && self.get(i, j) == 0
    }

    pub fn red_edge_count(&self) -> usize {
        self.pairs().filter(|&(i, j)| self.is_red(i, j)).count()
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| ((i + 1)..self.n).map(move |j| (i, j)))
    }
}

impl fmt::Debug for HypothesisMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "HypothesisMatrix(n = {})", self.n)?;
        for i in 0..self.n {
            let row: String = (0..self.n)
                .map(|j| if self.get(i, j) == 1 { '1' } else { '0' })
                .collect();
            writeln!(f, "  {row}")?;
        }
        Ok(())
    }
}

/// A clustering of `{0, .., n-1}` in canonical form: members of each block
/// ascend and blocks are ordered by their smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates and canonicalizes a list of blocks.
    pub fn new(n: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for block in &mut blocks {
            if block.is_empty() {
                return Err(Error::invalid("empty block"));
            }
            block.sort_unstable();
            for &x in block.iter() {
                if x >= n {
                    return Err(Error::invalid(format!(
                        "point {x} out of range for n = {n}"
                    )));
                }
                if std::mem::replace(&mut seen[x], true) {
                    return Err(Error::invalid(format!("point {x} appears twice")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::invalid(format!("point {missing} is not covered")));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { n, blocks })
    }

    /// Groups points by label; any label values are accepted.
    pub fn from_labels<L: Eq + std::hash::Hash>(labels: &[L]) -> Self {
        let mut index: std::collections::HashMap<&L, usize> = std::collections::HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, label) in labels.iter().enumerate() {
            let b = *index.entry(label).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(i);
        }
        // First occurrence order already sorts blocks by smallest member.
        Self {
            n: labels.len(),
            blocks,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            n,
            blocks: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn single_block(n: usize) -> Self {
        Self {
            n,
            blocks: if n == 0 {
                vec![]
            } else {
                vec![(0..n).collect()]
            },
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Dense cluster id per point, ids assigned in canonical block order.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n];
        for (c, block) in self.blocks.iter().enumerate() {
            for &x in block {
                labels[x] = c;
            }
        }
        labels
    }

    /// Number of blue (same-cluster) edges, `Σ s(s-1)/2` over block sizes.
    pub fn blue_edge_count(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.len() * (b.len() - 1) / 2)
            .sum()
    }

    /// Relabels points through `perm` (`i ↦ perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Partition> {
        check_dims(self.n, perm.len())?;
        invert_permutation(perm)?;
        Partition::new(
            self.n,
            self.blocks
                .iter()
                .map(|b| b.iter().map(|&x| perm[x]).collect())
                .collect(),
        )
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (bi, block) in self.blocks.iter().enumerate() {
            if bi > 0 {
                write!(f, ",")?;
            }
            write!(f, "{{")?;
            for (k, x) in block.iter().enumerate() {
                if k > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, "}}")?;
        }
        write!(f, "}}")
    }
}

/// Triples `(i, j, k)`, `i < j < k`, whose colouring has exactly one red
/// edge.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleVerdict {
    pub violations: Vec<(usize, usize, usize)>,
}

impl TripleVerdict {
    pub fn count(&self) -> usize {
        self.violations.len()
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Value of the objective `Σ H_ij ΔS_ij + Σ log V_ijk`.
///
/// A colouring that breaks transitivity scores `Infeasible` rather than a
/// floating `-∞`. `Infeasible` orders below every finite value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Objective {
    Infeasible,
    Finite(f64),
}

impl Objective {
    pub fn value(self) -> Option<f64> {
        match self {
            Objective::Finite(v) => Some(v),
            Objective::Infeasible => None,
        }
    }

    pub fn is_feasible(self) -> bool {
        matches!(self, Objective::Finite(_))
    }

    /// Lossy conversion for reporting; `Infeasible` becomes `-∞`.
    pub fn to_f64(self) -> f64 {
        self.value().unwrap_or(f64::NEG_INFINITY)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Finite(v) => write!(f, "{v}"),
            Objective::Infeasible => write!(f, "-inf"),
        }
    }
}

pub fn objective(scores: &ScoreMatrix, h: &HypothesisMatrix) -> Result<Objective> {
    check_dims(scores.n(), h.n())?;
    if !check_transitivity(h).is_valid() {
        return Ok(Objective::Infeasible);
    }
    let mut total = 0.0;
    for i in 0..h.n() {
        for j in (i + 1)..h.n() {
            if h.is_red(i, j) {
                total += scores.get(i, j);
            }
        }
    }
    Ok(Objective::Finite(total))
}

/// Objective of a partition: the sum of `ΔS` over pairs in different blocks.
/// Always feasible.
pub fn partition_objective(scores: &ScoreMatrix, p: &Partition) -> Result<f64> {
    check_dims(scores.n(), p.n())?;
    Ok(labels_objective(scores, &p.labels()))
}

pub(crate) fn labels_objective(scores: &ScoreMatrix, labels: &[usize]) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    for i in 0..n {
        let row = &scores.as_slice()[i * n..(i + 1) * n];
        for j in (i + 1)..n {
            if labels[i] != labels[j] {
                total += row[j];
            }
        }
    }
    total
}

pub fn check_transitivity(h: &HypothesisMatrix) -> TripleVerdict {
    let n = h.n();
    let mut violations = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let hij = h.get(i, j);
            for k in (j + 1)..n {
                if hij + h.get(j, k) + h.get(i, k) == 1 {
                    violations.push((i, j, k));
                }
            }
        }
    }
    TripleVerdict { violations }
}

pub fn partition_to_hypothesis(p: &Partition) -> HypothesisMatrix {
    let labels = p.labels();
    HypothesisMatrix::from_fn(p.n(), |i, j| labels[i] != labels[j])
}

/// Connected components of the blue-edge graph, together with the
/// transitivity verdict of `h`. When the verdict is clean the partition
/// reproduces `h` exactly.
pub fn hypothesis_to_partition(h: &HypothesisMatrix) -> (Partition, TripleVerdict) {
    let n = h.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if h.is_blue(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    (Partition::from_labels(&roots), check_transitivity(h))
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn invert_permutation(perm: &[usize]) -> Result<Vec<usize>> {
    let mut inv = vec![usize::MAX; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        if p >= perm.len() || inv[p] != usize::MAX {
            return Err(Error::invalid("not a permutation"));
        }
        inv[p] = i;
    }
    Ok(inv)
}
