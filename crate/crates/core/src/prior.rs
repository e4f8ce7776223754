//! Partition function of the blue-edge prior family.
//!
//! Weighting each clustering `C` of `N` points by `x^{b(C)} λ^{n(C)}`, with
//! `b(C)` its blue-edge count and `n(C)` its block count, gives
//!
//! ```text
//! Z_λ(x, N+1) = λ Σ_{k=0}^{N} C(N, k) x^{k(k+1)/2} Z_λ(x, N−k),   Z_λ(x, 0) = 1
//! ```
//!
//! obtained by conditioning on the `k` other points that share a block with
//! point `N+1`. `Z(x, N) = Z_1(x, N)`, and `Z(1, N)` is the Bell number.
//!
//! The float path works in log space. Expectations are carried alongside
//! `log Z` through the same recurrence: the term weights
//! `p_k = C(N,k) x^{k(k+1)/2} Z(x, N−k) / Z(x, N+1)` form the distribution of
//! the size of the new point's block, so for instance
//! `⟨b⟩_{N+1} = Σ p_k (k(k+1)/2 + ⟨b⟩_{N−k})`. This is the exact derivative
//! `x ∂_x log Z` (and likewise the λ-derivatives at `λ = 1`), with no finite
//! differences involved.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::models::ln_binomial;
use crate::types::ScoreMatrix;

/// `log Z(x, n)` and the normalized moments of `b` and `n(C)` under the
/// prior `x^{b(C)} / Z(x, n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSummary {
    pub n: usize,
    pub x: f64,
    pub log_z: f64,
    /// `⟨b⟩ = x d/dx log Z`.
    pub blue_mean: f64,
    pub cluster_mean: f64,
    pub cluster_variance: f64,
}

impl PriorSummary {
    /// `⟨b⟩ / (n(n−1)/2)`; zero when there are no edges.
    pub fn blue_fraction(&self) -> f64 {
        let edges = self.n * self.n.saturating_sub(1) / 2;
        if edges == 0 {
            0.0
        } else {
            self.blue_mean / edges as f64
        }
    }

    pub fn cluster_sd(&self) -> f64 {
        self.cluster_variance.max(0.0).sqrt()
    }
}

/// Runs the recurrence up to `n` points and returns one summary per size
/// `0..=n`.
pub fn prior_table(x: f64, n: usize) -> Result<Vec<PriorSummary>> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!(
            "x must be a finite non-negative number, got {x}"
        )));
    }
    let ln_x = x.ln();
    let mut log_z = vec![0.0f64; n + 1];
    let mut blue = vec![0.0f64; n + 1];
    let mut clusters = vec![0.0f64; n + 1];
    let mut clusters_sq = vec![0.0f64; n + 1];
    let mut terms = Vec::with_capacity(n + 1);

    for m in 0..n {
        terms.clear();
        for k in 0..=m {
            let tri = (k * (k + 1) / 2) as f64;
            let weight = if tri == 0.0 { 0.0 } else { tri * ln_x };
            terms.push(ln_binomial(m, k) + weight + log_z[m - k]);
        }
        let top = log_sum_exp(&terms);
        let (mut b, mut c, mut c2) = (0.0, 0.0, 0.0);
        for (k, &t) in terms.iter().enumerate() {
            let p = (t - top).exp();
            if p == 0.0 {
                continue;
            }
            let rest = m - k;
            b += p * ((k * (k + 1) / 2) as f64 + blue[rest]);
            c += p * (1.0 + clusters[rest]);
            c2 += p * (1.0 + 2.0 * clusters[rest] + clusters_sq[rest]);
        }
        log_z[m + 1] = top;
        blue[m + 1] = b;
        clusters[m + 1] = c;
        clusters_sq[m + 1] = c2;
    }

    Ok((0..=n)
        .map(|i| PriorSummary {
            n: i,
            x,
            log_z: log_z[i],
            blue_mean: blue[i],
            cluster_mean: clusters[i],
            cluster_variance: clusters_sq[i] - clusters[i] * clusters[i],
        })
        .collect())
}

pub fn prior_summary(x: f64, n: usize) -> Result<PriorSummary> {
    Ok(*prior_table(x, n)?.last().expect("table has n + 1 rows"))
}

/// `log Z(x, n)`.
pub fn log_partition_function(x: f64, n: usize) -> Result<f64> {
    Ok(prior_summary(x, n)?.log_z)
}

/// `(⟨b⟩, ⟨b⟩ / (n(n−1)/2))`.
pub fn blue_edge_expectation(x: f64, n: usize) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return Err(Error::invalid(format!("x must be positive, got {x}")));
    }
    let s = prior_summary(x, n)?;
    Ok((s.blue_mean, s.blue_fraction()))
}

/// Mean and variance of the number of clusters.
pub fn cluster_count_moments(x: f64, n: usize) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return Err(Error::invalid(format!("x must be positive, got {x}")));
    }
    let s = prior_summary(x, n)?;
    Ok((s.cluster_mean, s.cluster_variance))
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + values.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

fn binomial_rows(n: usize) -> Vec<Vec<BigUint>> {
    let mut rows: Vec<Vec<BigUint>> = vec![vec![BigUint::one()]];
    for m in 1..=n {
        let prev = &rows[m - 1];
        let mut row = vec![BigUint::one(); m + 1];
        for k in 1..m {
            row[k] = &prev[k - 1] + &prev[k];
        }
        rows.push(row);
    }
    rows
}

/// `Z(x, n)` in exact rational arithmetic.
pub fn partition_function_exact(x: &BigRational, n: usize) -> Result<BigRational> {
    if x < &BigRational::zero() {
        return Err(Error::invalid("x must be non-negative"));
    }
    let polys = ExactPriorPolynomial::table(x, n)?;
    Ok(polys[n].evaluate(&BigRational::one()))
}

/// The Bell number `B_n = Z(1, n)`, by the integer recurrence.
pub fn bell_number(n: usize) -> BigUint {
    let binom = binomial_rows(n);
    let mut z: Vec<BigUint> = vec![BigUint::one(); n + 1];
    for m in 0..n {
        let mut acc = BigUint::zero();
        for k in 0..=m {
            acc += &binom[m][k] * &z[m - k];
        }
        z[m + 1] = acc;
    }
    z.swap_remove(n)
}

/// `Z_λ(x, n)` as a polynomial in `λ` with exact rational coefficients:
/// the coefficient of `λ^k` is `Σ x^{b(C)}` over partitions into `k` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPriorPolynomial {
    pub n: usize,
    pub x: BigRational,
    coefficients: Vec<BigRational>,
}

impl ExactPriorPolynomial {
    pub fn new(x: &BigRational, n: usize) -> Result<Self> {
        Ok(Self::table(x, n)?.swap_remove(n))
    }

    fn table(x: &BigRational, n: usize) -> Result<Vec<Self>> {
        if x < &BigRational::zero() {
            return Err(Error::invalid("x must be non-negative"));
        }
        let binom = binomial_rows(n);
        // x^{k(k+1)/2} for k = 0..n.
        let mut x_tri = vec![BigRational::one(); n + 1];
        for k in 1..=n {
            let mut v = x_tri[k - 1].clone();
            for _ in 0..k {
                v *= x;
            }
            x_tri[k] = v;
        }
        let mut coeffs: Vec<Vec<BigRational>> = vec![vec![BigRational::one()]];
        for m in 0..n {
            let mut next = vec![BigRational::zero(); m + 2];
            for k in 0..=m {
                let w = &x_tri[k] * BigRational::from_integer(binom[m][k].clone().into());
                for (j, c) in coeffs[m - k].iter().enumerate() {
                    if !c.is_zero() {
                        next[j + 1] += &w * c;
                    }
                }
            }
            coeffs.push(next);
        }
        Ok(coeffs
            .into_iter()
            .enumerate()
            .map(|(m, coefficients)| Self {
                n: m,
                x: x.clone(),
                coefficients,
            })
            .collect())
    }

    /// Coefficients of `λ^0 ..= λ^n`.
    pub fn coefficients(&self) -> &[BigRational] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn evaluate(&self, lambda: &BigRational) -> BigRational {
        self.coefficients
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * lambda + c)
    }

    /// Integer coefficients, when every coefficient is an integer (always
    /// the case at integer `x`). At `x = 1` these are the Stirling numbers
    /// of the second kind `S(n, k)`.
    pub fn integer_coefficients(&self) -> Option<Vec<BigUint>> {
        self.coefficients
            .iter()
            .map(|c| {
                if c.is_integer() {
                    c.to_integer().to_biguint()
                } else {
                    None
                }
            })
            .collect()
    }
}

/// `Z_λ(x, n)` as a polynomial in `λ` with floating-point coefficients.
/// Coefficients overflow for large `n` at `x > 1`; use the summary
/// functions for moments there.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorPolynomial {
    pub n: usize,
    pub x: f64,
    coefficients: Vec<f64>,
}

impl PriorPolynomial {
    pub fn new(x: f64, n: usize) -> Result<Self> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::invalid(format!(
                "x must be a finite non-negative number, got {x}"
            )));
        }
        let mut coeffs: Vec<Vec<f64>> = vec![vec![1.0]];
        for m in 0..n {
            let mut next = vec![0.0; m + 2];
            for k in 0..=m {
                let w = ln_binomial(m, k).exp() * x.powi((k * (k + 1) / 2) as i32);
                for (j, c) in coeffs[m - k].iter().enumerate() {
                    next[j + 1] += w * c;
                }
            }
            coeffs.push(next);
        }
        Ok(Self {
            n,
            x,
            coefficients: coeffs.swap_remove(n),
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn evaluate(&self, lambda: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * lambda + c)
    }

    /// Mean and variance of the block count read off the coefficients.
    pub fn moments(&self) -> (f64, f64) {
        let z: f64 = self.coefficients.iter().sum();
        let mean = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| k as f64 * c)
            .sum::<f64>()
            / z;
        let second = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| (k * k) as f64 * c)
            .sum::<f64>()
            / z;
        (mean, second - mean * mean)
    }
}

/// Order-of-magnitude location of the blue-fraction transition,
/// `1 + (2/n) ln n`.
pub fn critical_x_estimate(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("critical x needs at least two points"));
    }
    let n = n as f64;
    Ok(1.0 + 2.0 * n.ln() / n)
}

/// The `x` at which the expected blue-edge fraction equals 1/2, found by
/// bisection in `log x`.
pub fn blue_fraction_crossing(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("blue fraction needs at least two points"));
    }
    let fraction = |x: f64| blue_edge_expectation(x, n).map(|(_, f)| f);
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    while fraction(lo)? > 0.5 {
        lo /= 2.0;
    }
    while fraction(hi)? < 0.5 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if fraction(mid)? < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Per-edge log-weights `X_ij` added to the red-edge scores: the posterior
/// of a prior `∝ Π exp(X_ij H_ij)` is solved with scores `ΔS + X`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugatePriorSpec {
    pub log_weights: ScoreMatrix,
}

impl ConjugatePriorSpec {
    /// The one-parameter family with weight `x` per blue edge, i.e. red-edge
    /// log-weight `−ln x` everywhere. `x = 1` is the uniform prior.
    pub fn uniform(n: usize, x: f64) -> Result<Self> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::invalid(format!("x must be positive, got {x}")));
        }
        Ok(Self {
            log_weights: ScoreMatrix::from_fn(n, |_, _| -x.ln())?,
        })
    }

    pub fn posterior_scores(&self, scores: &ScoreMatrix) -> Result<ScoreMatrix> {
        scores.add(&self.log_weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn small_closed_forms() {
        for x in [0.1, 0.5, 1.0, 2.0, 7.0] {
            assert!(close(
                log_partition_function(x, 2).unwrap().exp(),
                1.0 + x,
                1e-12
            ));
            assert!(close(
                log_partition_function(x, 3).unwrap().exp(),
                1.0 + 3.0 * x + x * x * x,
                1e-12
            ));
        }
        assert_eq!(log_partition_function(0.3, 0).unwrap(), 0.0);
        assert_eq!(log_partition_function(0.3, 1).unwrap(), 0.0);
    }

    #[test]
    fn zero_x_limit() {
        for n in 0..8 {
            assert_eq!(log_partition_function(0.0, n).unwrap(), 0.0);
        }
    }

    #[test]
    fn large_x_limit() {
        let n = 6;
        let x = 1e6f64;
        let ratio =
            (log_partition_function(x, n).unwrap() - (n * (n - 1) / 2) as f64 * x.ln()).exp();
        assert!((ratio - 1.0).abs() < 1e-4);
    }

    #[test]
    fn bell_numbers() {
        let expected = [1u64, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975];
        for (n, &b) in expected.iter().enumerate() {
            assert_eq!(bell_number(n), BigUint::from(b));
        }
        assert_eq!(bell_number(15), BigUint::from(1_382_958_545u64));
        let one = BigRational::one();
        assert_eq!(
            partition_function_exact(&one, 15).unwrap(),
            BigRational::from_integer(1_382_958_545u64.into())
        );
    }

    #[test]
    fn exact_polynomial_at_rational_x() {
        let half = BigRational::new(1.into(), 2.into());
        let z3 = partition_function_exact(&half, 3).unwrap();
        // 1 + 3/2 + 1/8
        assert_eq!(z3, BigRational::new(21.into(), 8.into()));
        let p = ExactPriorPolynomial::new(&half, 3).unwrap();
        assert_eq!(p.degree(), 3);
        assert!(p.integer_coefficients().is_none());
    }

    #[test]
    fn stirling_coefficients_at_one() {
        let p = ExactPriorPolynomial::new(&BigRational::one(), 5).unwrap();
        let c = p.integer_coefficients().unwrap();
        let expected: Vec<BigUint> = [0u32, 1, 15, 25, 10, 1].iter().map(|&v| v.into()).collect();
        assert_eq!(c, expected);
        let sum: BigUint = c.iter().sum();
        assert_eq!(sum, bell_number(5));
    }

    #[test]
    fn blue_expectation_of_three_points() {
        let (b, f) = blue_edge_expectation(1.0, 3).unwrap();
        assert!(close(b, 1.2, 1e-12));
        assert!(close(f, 0.4, 1e-12));
        let (_, small) = blue_edge_expectation(1e-9, 6).unwrap();
        assert!(small < 1e-8);
        let (_, big) = blue_edge_expectation(100.0, 6).unwrap();
        assert!(big > 0.99);
        assert!(blue_edge_expectation(0.0, 3).is_err());
    }

    #[test]
    fn cluster_moments_of_three_points() {
        let (mean, var) = cluster_count_moments(1.0, 3).unwrap();
        assert!(close(mean, 2.0, 1e-12));
        assert!(close(var, 0.4, 1e-12));
        for x in [0.2, 1.0, 5.0] {
            let (mean, var) = cluster_count_moments(x, 1).unwrap();
            assert_eq!((mean, var), (1.0, 0.0));
        }
    }

    #[test]
    fn float_polynomial_agrees_with_recurrence() {
        for x in [0.5, 1.0, 2.0] {
            for n in 1..12 {
                let p = PriorPolynomial::new(x, n).unwrap();
                let s = prior_summary(x, n).unwrap();
                assert_eq!(p.coefficients().len(), n + 1);
                assert!(p.coefficients().iter().all(|&c| c >= 0.0));
                assert!(close(p.evaluate(1.0).ln(), s.log_z, 1e-12));
                let (mean, var) = p.moments();
                assert!(close(mean, s.cluster_mean, 1e-10));
                assert!(close(var, s.cluster_variance, 1e-8));
            }
        }
    }

    #[test]
    fn critical_estimates() {
        assert!((critical_x_estimate(300).unwrap() - 1.038).abs() < 1e-3);
        assert!(critical_x_estimate(1).is_err());
        assert!((blue_fraction_crossing(2).unwrap() - 1.0).abs() < 1e-12);
        let x50 = blue_fraction_crossing(50).unwrap();
        assert!(x50 > 1.0 && x50 < 1.0 + 4.0 * 50f64.ln() / 50.0, "{x50}");
    }

    #[test]
    fn blue_fraction_is_monotone_in_x() {
        for n in [3, 10, 40] {
            let mut prev = 0.0;
            for i in 0..60 {
                let x = 0.05 * 1.1f64.powi(i);
                let (_, f) = blue_edge_expectation(x, n).unwrap();
                assert!(f >= prev - 1e-12);
                prev = f;
            }
        }
    }

    #[test]
    fn uniform_conjugate_prior_shifts_scores() {
        let s = ScoreMatrix::from_fn(3, |_, _| 1.0).unwrap();
        let post = ConjugatePriorSpec::uniform(3, std::f64::consts::E)
            .unwrap()
            .posterior_scores(&s)
            .unwrap();
        assert!((post.get(0, 1)).abs() < 1e-15);
        let same = ConjugatePriorSpec::uniform(3, 1.0)
            .unwrap()
            .posterior_scores(&s)
            .unwrap();
        assert_eq!(same, s);
    }
}
