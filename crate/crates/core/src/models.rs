//! Likelihood models that turn data into a [`ScoreMatrix`].
//!
//! The binary-read model compares two reads of `L` bits by their hamming
//! distance `d`. Reads copied from the same template disagree on a bit with
//! probability `x = 2 p_e (1 − p_e)`; reads from unrelated random templates
//! disagree with probability 1/2. The binomial coefficient shared by both
//! likelihoods cancels in the ratio, leaving
//!
//! ```text
//! ΔS(d) = −L ln 2 − d ln x − (L − d) ln(1 − x)
//! ```

use std::io::{BufRead, Read as IoRead};

use crate::error::{Error, Result};
use crate::types::ScoreMatrix;

/// Relative asymmetry accepted (and averaged away) when loading a matrix.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryReadModel {
    word_length: usize,
    error_rate: f64,
    mismatch: f64,
}

impl BinaryReadModel {
    pub fn new(word_length: usize, error_rate: f64) -> Result<Self> {
        if word_length == 0 {
            return Err(Error::invalid("word length must be positive"));
        }
        if !(error_rate > 0.0 && error_rate < 0.5) {
            return Err(Error::invalid(format!(
                "error rate must lie in (0, 0.5), got {error_rate}"
            )));
        }
        Ok(Self {
            word_length,
            error_rate,
            mismatch: 2.0 * error_rate * (1.0 - error_rate),
        })
    }

    pub fn word_length(&self) -> usize {
        self.word_length
    }

    pub fn error_rate(&self) -> f64 {
        self.error_rate
    }

    /// Per-bit mismatch probability between two reads of one template.
    pub fn mismatch_probability(&self) -> f64 {
        self.mismatch
    }

    /// `log f1(d) − log f0(d)` in nats.
    pub fn delta_s(&self, distance: usize) -> Result<f64> {
        if distance > self.word_length {
            return Err(Error::invalid(format!(
                "distance {distance} exceeds word length {}",
                self.word_length
            )));
        }
        let (l, d, x) = (self.word_length as f64, distance as f64, self.mismatch);
        Ok(-l * std::f64::consts::LN_2 - d * x.ln() - (l - d) * (-x).ln_1p())
    }

    /// `log f0(d)`, binomial coefficient included.
    pub fn log_f0(&self, distance: usize) -> f64 {
        let (l, d, x) = (self.word_length as f64, distance as f64, self.mismatch);
        ln_binomial(self.word_length, distance) + d * x.ln() + (l - d) * (-x).ln_1p()
    }

    /// `log f1(d)`, binomial coefficient included.
    pub fn log_f1(&self, distance: usize) -> f64 {
        ln_binomial(self.word_length, distance) - self.word_length as f64 * std::f64::consts::LN_2
    }

    /// Distance at which `ΔS` crosses zero.
    pub fn break_even_distance(&self) -> f64 {
        let (l, x) = (self.word_length as f64, self.mismatch);
        l * (std::f64::consts::LN_2 + (-x).ln_1p()) / ((1.0 - x) / x).ln()
    }
}

pub(crate) fn ln_binomial(n: usize, k: usize) -> f64 {
    use statrs::function::gamma::ln_gamma;
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// A binary word packed into 64-bit limbs, low bit first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Read {
    len: usize,
    limbs: Vec<u64>,
}

impl Read {
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut limbs = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                limbs[i / 64] |= 1 << (i % 64);
            }
        }
        Self {
            len: bits.len(),
            limbs,
        }
    }

    /// Parses a string of `'0'`/`'1'` characters.
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid character {other:?}, expected '0' or '1'")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self::from_bits(&bits))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len);
        self.limbs[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len);
        self.limbs[i / 64] ^= 1 << (i % 64);
    }

    /// Number of differing positions. Panics on a length mismatch.
    pub fn hamming(&self, other: &Read) -> usize {
        assert_eq!(self.len, other.len, "reads differ in length");
        self.limbs
            .iter()
            .zip(&other.limbs)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }
}

impl std::fmt::Display for Read {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Reads of one common length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadSet {
    word_length: usize,
    reads: Vec<Read>,
}

impl ReadSet {
    pub fn new(reads: Vec<Read>) -> Result<Self> {
        let word_length = reads.first().map_or(0, Read::len);
        for (i, r) in reads.iter().enumerate() {
            if r.len() != word_length {
                return Err(Error::invalid(format!(
                    "read {i} has length {}, expected {word_length}",
                    r.len()
                )));
            }
        }
        Ok(Self { word_length, reads })
    }

    /// Parses the reads text format: one word of `'0'`/`'1'` per line,
    /// blank lines and lines starting with `#` skipped.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut reads = Vec::new();
        let mut word_length = None;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let read = Read::parse(text).map_err(|m| Error::parse(lineno, m))?;
            match word_length {
                None => word_length = Some(read.len()),
                Some(l) if l != read.len() => {
                    return Err(Error::parse(
                        lineno,
                        format!("read has length {}, expected {l}", read.len()),
                    ))
                }
                _ => {}
            }
            reads.push(read);
        }
        if reads.is_empty() {
            return Err(Error::Empty);
        }
        Self::new(reads)
    }

    pub fn word_length(&self) -> usize {
        self.word_length
    }

    pub fn len(&self) -> usize {
        self.reads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reads.is_empty()
    }

    pub fn reads(&self) -> &[Read] {
        &self.reads
    }

    pub fn distance(&self, i: usize, j: usize) -> usize {
        self.reads[i].hamming(&self.reads[j])
    }

    /// Row-major `n × n` hamming distances.
    pub fn distance_matrix(&self) -> Vec<usize> {
        let n = self.len();
        let mut d = vec![0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.distance(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        d
    }

    /// Writes the reads text format.
    pub fn write_to(&self, mut out: impl std::io::Write) -> std::io::Result<()> {
        for r in &self.reads {
            writeln!(out, "{r}")?;
        }
        Ok(())
    }
}

pub fn delta_s_from_distance(model: &BinaryReadModel, distance: usize) -> Result<f64> {
    model.delta_s(distance)
}

pub fn score_matrix_from_reads(model: &BinaryReadModel, reads: &ReadSet) -> Result<ScoreMatrix> {
    if !reads.is_empty() && reads.word_length() != model.word_length() {
        return Err(Error::invalid(format!(
            "reads have length {}, model expects {}",
            reads.word_length(),
            model.word_length()
        )));
    }
    // Only L + 1 distinct values exist.
    let table = (0..=model.word_length())
        .map(|d| model.delta_s(d))
        .collect::<Result<Vec<_>>>()?;
    ScoreMatrix::from_fn(reads.len(), |i, j| table[reads.distance(i, j)])
}

/// Parses a score matrix from CSV: `N` rows of `N` numbers, `.` as the
/// decimal separator, optional header row. Entries within
/// [`SYMMETRY_TOLERANCE`] (relative) of their transpose are averaged; larger
/// asymmetry, non-finite values and ragged rows are rejected. Lines and
/// columns in errors are 1-based.
pub fn load_score_matrix(source: impl IoRead, has_header: bool) -> Result<ScoreMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut lines: Vec<usize> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = record
            .position()
            .map_or(rows.len() + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                let v: f64 = field.parse().map_err(|_| {
                    Error::parse(line, format!("column {}: {field:?} is not a number", c + 1))
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::parse(
                        line,
                        format!("column {}: non-finite entry {field:?}", c + 1),
                    ))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
        lines.push(line);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::parse(
                lines[i],
                format!("row has {} entries, matrix has {n} rows", row.len()),
            ));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (rows[i][j], rows[j][i]);
            let diff = (a - b).abs();
            if diff > SYMMETRY_TOLERANCE * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::Asymmetric {
                    row: i,
                    col: j,
                    difference: diff,
                });
            }
        }
    }
    ScoreMatrix::from_fn(n, |i, j| 0.5 * (rows[i][j] + rows[j][i]))
}

/// Writes a score matrix as headerless CSV with round-trippable values.
pub fn write_score_matrix(
    scores: &ScoreMatrix,
    mut out: impl std::io::Write,
) -> std::io::Result<()> {
    let n = scores.n();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:?}", scores.get(i, j))).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
