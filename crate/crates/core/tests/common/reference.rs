//! Unsimplified max-sum updates over full two-state messages, used to check
//! the difference form the solver runs.
//!
//! State: `α_ij←ijk(h)` for every edge `i < j`, third point `k` and
//! `h ∈ {0 (blue), 1 (red)}`; `S_ij(h)` are the two log-likelihoods.

pub struct Reference {
    n: usize,
    s: Vec<[f64; 2]>,
    /// Indexed by `(i * n + j) * n + k` with `i < j`.
    alpha: Vec<[f64; 2]>,
    lambda: f64,
}

fn valid(h_ij: usize, h_jk: usize, h_ki: usize) -> bool {
    h_ij + h_jk + h_ki != 1
}

impl Reference {
    /// `s[i * n + j] = [S_ij(0), S_ij(1)]`, symmetric.
    pub fn new(n: usize, s: Vec<[f64; 2]>, lambda: f64) -> Self {
        Self {
            n,
            s,
            alpha: vec![[0.0; 2]; n * n * n],
            lambda,
        }
    }

    fn at(&self, i: usize, j: usize, k: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        (a * self.n + b) * self.n + k
    }

    /// `ρ_ij→ijk(h) = S_ij(h) + Σ_{l ≠ i,j,k} α_ij←ijl(h)`.
    fn rho(&self, i: usize, j: usize, k: usize, h: usize) -> f64 {
        let mut r = self.s[i * self.n + j][h];
        for l in 0..self.n {
            if l != i && l != j && l != k {
                r += self.alpha[self.at(i, j, l)][h];
            }
        }
        r
    }

    /// One synchronous damped sweep.
    pub fn step(&mut self) {
        let n = self.n;
        let mut next = self.alpha.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    let mut fresh = [f64::NEG_INFINITY; 2];
                    for (h, slot) in fresh.iter_mut().enumerate() {
                        for h_jk in 0..2 {
                            for h_ki in 0..2 {
                                if valid(h, h_jk, h_ki) {
                                    let v = self.rho(j, k, i, h_jk) + self.rho(k, i, j, h_ki);
                                    *slot = slot.max(v);
                                }
                            }
                        }
                    }
                    // Shifting both states by a constant leaves every
                    // difference untouched and keeps the values bounded.
                    let shift = fresh[0];
                    let idx = self.at(i, j, k);
                    for h in 0..2 {
                        next[idx][h] = (1.0 - self.lambda) * self.alpha[idx][h]
                            + self.lambda * (fresh[h] - shift);
                    }
                }
            }
        }
        self.alpha = next;
    }

    /// `B_ij = S_ij(1) − S_ij(0) + Σ_k [α_ij←ijk(1) − α_ij←ijk(0)]`, row-major.
    pub fn beliefs(&self) -> Vec<f64> {
        let n = self.n;
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut v = self.s[i * n + j][1] - self.s[i * n + j][0];
                for k in 0..n {
                    if k != i && k != j {
                        let a = self.alpha[self.at(i, j, k)];
                        v += a[1] - a[0];
                    }
                }
                b[i * n + j] = v;
            }
        }
        b
    }
}
