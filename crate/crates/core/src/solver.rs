//! Transitive propagation: damped max-sum message passing over a factor
//! graph with one score factor per edge and one hard transitivity factor
//! per triple.
//!
//! Only the difference `A_ijk = α_ij←ijk(1) − α_ij←ijk(0)` of each
//! factor-to-edge message is stored, and the per-edge belief
//! `B_ij = ΔS_ij + Σ_k A_ijk` is cached so that one sweep costs `O(N³)`.
//! Every message of a sweep is computed from the same `B` snapshot, so the
//! sweep is order independent and can be split across threads without
//! changing a single bit of the result.

use std::fmt::Debug;

use num_traits::Float;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{
    check_transitivity, hypothesis_to_partition, objective, partition_objective, HypothesisMatrix,
    Objective, Partition, ScoreMatrix, TripleVerdict,
};

/// Floating-point storage type for messages.
pub trait Real: Float + Send + Sync + Debug + 'static {
    fn of_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f64 {
    #[inline]
    fn of_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    #[inline]
    fn of_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

/// Below this size the sweep runs on the calling thread.
const PARALLEL_MIN_N: usize = 24;

/// Fixed number of work groups per sweep. Belief sums are reduced group by
/// group in this order whatever the thread count, which keeps parallel and
/// sequential runs bit-identical.
const GROUPS: usize = 32;

/// Message differences `A_ijk`, one per (edge, third point).
///
/// The three messages of a triple `i < j < k` are stored together, as
/// `[A_ij·k, A_jk·i, A_ik·j]`, with triples in lexicographic order. A sweep
/// therefore touches memory sequentially, and the edge symmetry
/// `A_ijk == A_jik` holds by construction.
#[derive(Clone, PartialEq)]
pub struct MessageTensor<T = f64> {
    n: usize,
    /// `first[i]` is the index of the first triple whose smallest point is `i`.
    first: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> MessageTensor<T> {
    pub fn zeros(n: usize) -> Self {
        let mut first = Vec::with_capacity(n + 1);
        let mut t = 0;
        for i in 0..n {
            first.push(t);
            let rest = n - i - 1;
            t += rest * rest.saturating_sub(1) / 2;
        }
        first.push(t);
        Self {
            n,
            first,
            data: vec![T::zero(); 3 * t],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Position of `A_ijk` in `data`, for distinct indices.
    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let mut p = [i, j, k];
        p.sort_unstable();
        let [a, b, c] = p;
        let n = self.n;
        // Triples (a, b', c') with b' < b come first within a's run.
        let before = (b - a - 1) * (n - a - 1) - (b - a - 1) * (b - a) / 2;
        let t = self.first[a] + before + (c - b - 1);
        let slot = match (k == a, k == b) {
            (false, false) => 0, // edge {a, b}
            (true, _) => 1,      // edge {b, c}
            (_, true) => 2,      // edge {a, c}
        };
        3 * t + slot
    }

    /// `A_ijk`; zero whenever the indices are not three distinct points.
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        if i == j || k == i || k == j {
            return T::zero();
        }
        self.data[self.index(i, j, k)]
    }

    /// Sets `A_ijk` (and therefore `A_jik`).
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: T) {
        assert!(i != j && k != i && k != j, "indices must be distinct");
        let idx = self.index(i, j, k);
        self.data[idx] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Bytes held by the message storage.
    pub fn memory_bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<T>() + self.first.len() * std::mem::size_of::<usize>()
    }

    /// Splits the storage into per-point runs, dealt round-robin into
    /// [`GROUPS`] groups.
    fn groups_mut(&mut self) -> Vec<Vec<(usize, &mut [T])>> {
        let mut groups: Vec<Vec<(usize, &mut [T])>> = (0..GROUPS).map(|_| Vec::new()).collect();
        let mut rest = &mut self.data[..];
        for i in 0..self.n {
            let len = 3 * (self.first[i + 1] - self.first[i]);
            let (head, tail) = std::mem::take(&mut rest).split_at_mut(len);
            rest = tail;
            if len > 0 {
                groups[i % GROUPS].push((i, head));
            }
        }
        groups.retain(|g| !g.is_empty());
        groups
    }

    fn groups(&self) -> Vec<Vec<(usize, &[T])>> {
        let mut groups: Vec<Vec<(usize, &[T])>> = (0..GROUPS).map(|_| Vec::new()).collect();
        for i in 0..self.n {
            let run = &self.data[3 * self.first[i]..3 * self.first[i + 1]];
            if !run.is_empty() {
                groups[i % GROUPS].push((i, run));
            }
        }
        groups.retain(|g| !g.is_empty());
        groups
    }
}

impl<T: Real> Debug for MessageTensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MessageTensor")
            .field("n", &self.n)
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Damping: `A ← (1 − λ) A + λ ΔA`. Must lie in `(0, 1)`.
    pub lambda: f64,
    /// Stop once the projected number of sweeps before any `B_ij` changes
    /// sign reaches this goal.
    pub convergence_goal: f64,
    pub max_iterations: usize,
    /// `|ΔB|` below this cannot flip a sign and is ignored by the estimator.
    pub epsilon_div: f64,
    /// Return the plain thresholding of `ΔS` without iterating when it is
    /// already transitive.
    pub fast_path: bool,
    /// Worker threads for the sweep. `None` uses the ambient rayon pool;
    /// `Some(1)` runs on the calling thread.
    pub threads: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            convergence_goal: 1000.0,
            max_iterations: 10_000,
            epsilon_div: 1e-12,
            fast_path: true,
            threads: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::invalid(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        if !(self.convergence_goal >= 1.0) {
            return Err(Error::invalid(format!(
                "convergence goal must be at least 1, got {}",
                self.convergence_goal
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        if !(self.epsilon_div > 0.0) {
            return Err(Error::invalid("epsilon_div must be positive"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be positive"));
        }
        Ok(())
    }

    fn parallel(&self, n: usize) -> bool {
        self.threads != Some(1) && n >= PARALLEL_MIN_N
    }
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub h_star: HypothesisMatrix,
    /// Blue-edge components of `h_star`.
    pub partition: Partition,
    pub violations: TripleVerdict,
    pub iterations: usize,
    pub converged: bool,
    /// Objective of `h_star` itself; infeasible when it breaks transitivity.
    pub objective_value: Objective,
    /// Objective of `partition`, which is always feasible.
    pub repaired_objective: f64,
    /// Final beliefs `B`, row-major `n × n`, diagonal zero.
    pub b_final: Vec<f64>,
    /// `min |B_ij|` over edges: how close the decision sits to a tie.
    pub margin: f64,
    /// Last value of the sign-flip estimator (`+∞` when nothing can flip).
    pub stability: f64,
    /// Set when a sweep produced non-finite beliefs and the run stopped on
    /// the last finite ones.
    pub overflowed: bool,
    pub fast_path: bool,
}

/// Edge decision from a belief: red on `B ≥ 0`, blue on `B < 0`.
#[inline]
pub fn is_red(b: f64) -> bool {
    b >= 0.0
}

/// Thresholds a belief matrix (row-major `n × n`) into a hypothesis.
pub fn threshold(n: usize, b: &[f64]) -> HypothesisMatrix {
    HypothesisMatrix::from_fn(n, |i, j| is_red(b[i * n + j]))
}

/// Per-edge decision from `ΔS` alone, ignoring transitivity: blue iff
/// `f0 > f1`.
pub fn no_prior_solution(scores: &ScoreMatrix) -> HypothesisMatrix {
    threshold(scores.n(), scores.as_slice())
}

/// New message from triple `(i, j, k)` to edge `(i, j)`, given the
/// cavity beliefs `u = B_jk − A_jki` and `v = B_ki − A_kij` of the other two
/// edges: `max{u, v, u + v} − max{0, u + v}`.
///
/// Both other edges red leaves `(i, j)` free (`0`); both blue forces it blue
/// (`max{u, v} < 0`); one of each forces it red (`min{|u|, |v|} > 0`).
#[inline]
pub fn triple_message<T: Real>(u: T, v: T) -> T {
    let s = u + v;
    u.max(v).max(s) - s.max(T::zero())
}

/// The update as printed in Algorithm 1, `max{0, u + v} − max{0, u, v}`.
/// It is the correct message for the complemented colouring (red = 0):
/// `triple_message(u, v) == −paper_kernel(−u, −v)`.
#[inline]
pub fn paper_kernel(u: f64, v: f64) -> f64 {
    (u + v).max(0.0) - u.max(v).max(0.0)
}

/// `B_ij = ΔS_ij + Σ_{k≠i,j} A_ijk`, row-major `n × n` with zero diagonal.
///
/// The sum is taken in the same order as the sweep uses, so recomputing the
/// beliefs from the messages a sweep left behind reproduces its `B` exactly.
pub fn compute_b<T: Real>(scores: &ScoreMatrix, a: &MessageTensor<T>) -> Result<Vec<T>> {
    crate::types::check_dims(scores.n(), a.n())?;
    let n = a.n;
    let partials: Vec<Vec<T>> = a
        .groups()
        .into_iter()
        .map(|group| {
            let mut acc = vec![T::zero(); n * n];
            for (i, run) in group {
                let mut cells = run.chunks_exact(3);
                for j in (i + 1)..n {
                    for k in (j + 1)..n {
                        let c = cells.next().expect("run covers every triple");
                        acc[i * n + j] = acc[i * n + j] + c[0];
                        acc[j * n + k] = acc[j * n + k] + c[1];
                        acc[i * n + k] = acc[i * n + k] + c[2];
                    }
                }
            }
            acc
        })
        .collect();
    Ok(reduce(&to_real(scores), n, &partials))
}

/// `ΔS` plus the per-group partial sums, in group order.
fn reduce<T: Real>(delta_s: &[T], n: usize, partials: &[Vec<T>]) -> Vec<T> {
    let mut b = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let sum = partials.iter().fold(T::zero(), |s, p| s + p[i * n + j]);
            let v = delta_s[i * n + j] + sum;
            b[i * n + j] = v;
            b[j * n + i] = v;
        }
    }
    b
}

/// The fresh (undamped) message `ΔA_ijk` computed from beliefs `b`.
pub fn delta_a<T: Real>(b: &[T], a: &MessageTensor<T>, i: usize, j: usize, k: usize) -> T {
    assert!(
        i != j && j != k && i != k,
        "delta_a needs three distinct points"
    );
    let n = a.n;
    let u = b[j * n + k] - a.get(j, k, i);
    let v = b[k * n + i] - a.get(k, i, j);
    triple_message(u, v)
}

/// Outcome of one sweep.
#[derive(Debug, Clone)]
pub struct Sweep<T> {
    /// Beliefs after the sweep.
    pub b: Vec<T>,
    /// Change of every belief over the sweep.
    pub delta_b: Vec<T>,
    /// Projected sweeps until some belief changes sign.
    pub m: f64,
}

/// One synchronous damped sweep from `a`, returning the updated messages.
pub fn iterate<T: Real>(
    scores: &ScoreMatrix,
    a: &MessageTensor<T>,
    cfg: &SolverConfig,
) -> Result<(MessageTensor<T>, Sweep<T>)> {
    cfg.validate()?;
    let b = compute_b(scores, a)?;
    let mut next = a.clone();
    let delta_s = to_real(scores);
    let b_new = sweep(
        &delta_s,
        &b,
        &mut next,
        T::of_f64(cfg.lambda),
        cfg.parallel(a.n),
    );
    let delta_b: Vec<T> = b_new.iter().zip(&b).map(|(&x, &y)| x - y).collect();
    let m = stability(a.n, &b_new, &delta_b, cfg.epsilon_div);
    Ok((
        next,
        Sweep {
            b: b_new,
            delta_b,
            m,
        },
    ))
}

/// Runs transitive propagation on `scores` to convergence or the iteration
/// cap and extracts the clustering.
pub fn solve(scores: &ScoreMatrix, cfg: &SolverConfig) -> Result<SolverResult> {
    solve_with::<f64>(scores, cfg)
}

/// [`solve`] with messages stored as `T` (e.g. `f32` to halve memory).
pub fn solve_with<T: Real>(scores: &ScoreMatrix, cfg: &SolverConfig) -> Result<SolverResult> {
    cfg.validate()?;
    match cfg.threads {
        Some(t) if t > 1 && scores.n() >= PARALLEL_MIN_N => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            pool.install(|| run::<T>(scores, cfg))
        }
        _ => run::<T>(scores, cfg),
    }
}

fn run<T: Real>(scores: &ScoreMatrix, cfg: &SolverConfig) -> Result<SolverResult> {
    let n = scores.n();
    if n < 3 || cfg.fast_path {
        let h = no_prior_solution(scores);
        if n < 3 || check_transitivity(&h).is_valid() {
            return finish(
                scores,
                scores.as_slice().to_vec(),
                0,
                true,
                f64::INFINITY,
                false,
                true,
            );
        }
    }

    let delta_s = to_real::<T>(scores);
    let lambda = T::of_f64(cfg.lambda);
    let parallel = cfg.parallel(n);
    let mut a = MessageTensor::<T>::zeros(n);
    let mut b = compute_b(scores, &a)?;
    let mut iterations = 0;
    let mut converged = false;
    let mut overflowed = false;
    let mut m = 0.0;

    while iterations < cfg.max_iterations {
        let b_new = sweep(&delta_s, &b, &mut a, lambda, parallel);
        iterations += 1;
        if b_new.iter().any(|v| !v.is_finite()) {
            overflowed = true;
            break;
        }
        let delta_b: Vec<T> = b_new.iter().zip(&b).map(|(&x, &y)| x - y).collect();
        m = stability(n, &b_new, &delta_b, cfg.epsilon_div);
        b = b_new;
        if m >= cfg.convergence_goal {
            converged = true;
            break;
        }
    }

    let b64: Vec<f64> = b.iter().map(|v| v.as_f64()).collect();
    finish(scores, b64, iterations, converged, m, overflowed, false)
}

fn finish(
    scores: &ScoreMatrix,
    b: Vec<f64>,
    iterations: usize,
    converged: bool,
    stability: f64,
    overflowed: bool,
    fast_path: bool,
) -> Result<SolverResult> {
    let n = scores.n();
    let mut b = b;
    for i in 0..n {
        b[i * n + i] = 0.0;
    }
    let h_star = threshold(n, &b);
    let (partition, violations) = hypothesis_to_partition(&h_star);
    let objective_value = objective(scores, &h_star)?;
    let repaired_objective = partition_objective(scores, &partition)?;
    let margin = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| b[i * n + j].abs())
        .fold(f64::INFINITY, f64::min);
    Ok(SolverResult {
        h_star,
        partition,
        violations,
        iterations,
        converged,
        objective_value,
        repaired_objective,
        b_final: b,
        margin,
        stability,
        overflowed,
        fast_path,
    })
}

fn to_real<T: Real>(scores: &ScoreMatrix) -> Vec<T> {
    scores.as_slice().iter().map(|&v| T::of_f64(v)).collect()
}

/// Replaces every message by its damped update, all computed from the
/// beliefs `b` and the messages as they stood before the sweep, and returns
/// the resulting beliefs.
///
/// Each triple's three messages depend only on that triple's old values and
/// on `b`, so the update is done in place.
fn sweep<T: Real>(
    delta_s: &[T],
    b: &[T],
    a: &mut MessageTensor<T>,
    lambda: T,
    parallel: bool,
) -> Vec<T> {
    let n = a.n;
    let keep = T::one() - lambda;
    let update = |group: Vec<(usize, &mut [T])>| -> Vec<T> {
        let mut acc = vec![T::zero(); n * n];
        for (i, run) in group {
            let mut cells = run.chunks_exact_mut(3);
            for j in (i + 1)..n {
                let bij = b[i * n + j];
                for k in (j + 1)..n {
                    let c = cells.next().expect("run covers every triple");
                    let (a_ij, a_jk, a_ik) = (c[0], c[1], c[2]);
                    // Cavity beliefs of the three edges with respect to this triple.
                    let u_ij = bij - a_ij;
                    let u_jk = b[j * n + k] - a_jk;
                    let u_ik = b[i * n + k] - a_ik;
                    let n_ij = keep * a_ij + lambda * triple_message(u_jk, u_ik);
                    let n_jk = keep * a_jk + lambda * triple_message(u_ik, u_ij);
                    let n_ik = keep * a_ik + lambda * triple_message(u_ij, u_jk);
                    c[0] = n_ij;
                    c[1] = n_jk;
                    c[2] = n_ik;
                    acc[i * n + j] = acc[i * n + j] + n_ij;
                    acc[j * n + k] = acc[j * n + k] + n_jk;
                    acc[i * n + k] = acc[i * n + k] + n_ik;
                }
            }
        }
        acc
    };

    let groups = a.groups_mut();
    let partials: Vec<Vec<T>> = if parallel {
        groups.into_par_iter().map(update).collect()
    } else {
        groups.into_iter().map(update).collect()
    };
    reduce(delta_s, n, &partials)
}

/// `m = min −B/ΔB` over edges whose belief is heading towards zero; `+∞`
/// when none is.
fn stability<T: Real>(n: usize, b: &[T], delta_b: &[T], epsilon_div: f64) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let (bv, dv) = (b[i * n + j].as_f64(), delta_b[i * n + j].as_f64());
            if dv.abs() < epsilon_div || bv * dv > 0.0 {
                continue;
            }
            m = m.min((-bv / dv).max(0.0));
        }
    }
    m
}
