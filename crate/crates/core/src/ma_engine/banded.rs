//! Banded LU with partial pivoting, in the column-major layout of LAPACK's
//! `gbtrf`: `A(i, j)` lives at row `kl + ku + i - j` of column `j`, and the
//! top `kl` rows hold pivoting fill.

use crate::error::{LabError, Result};

#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self { n, kl, ku, ld, ab: vec![0.0; ld * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        // Upper entries may use the pivoting fill rows.
        debug_assert!(i + self.kl + self.ku >= j && j + self.kl >= i, "({i},{j}) outside storage");
        (self.kl + self.ku + i - j) + j * self.ld
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.ab[(self.kl + self.ku + i - j) + j * self.ld]
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i + self.ku >= j && j + self.kl >= i, "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.at(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Factor in place; the result solves any number of right-hand sides.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for i in k + 1..=last {
                let v = self.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(LabError::Internal(format!("singular banded matrix at column {k}")));
            }
            piv[k] = p;
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.ab.swap(a, b);
                }
            }
            let d = self.at(k, k);
            for i in k + 1..=last {
                let li = self.idx(i, k);
                let m = self.ab[li] / d;
                self.ab[li] = m;
                if m != 0.0 {
                    for j in k + 1..=jmax {
                        let u = self.at(k, j);
                        let t = self.idx(i, j);
                        self.ab[t] -= m * u;
                    }
                }
            }
        }
        Ok(BandedLu { a: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    a: Banded,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let a = &self.a;
        let n = a.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let last = (k + a.kl).min(n - 1);
            for i in k + 1..=last {
                x[i] -= a.at(i, k) * x[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + a.kl + a.ku).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=jmax {
                s -= a.at(k, j) * x[j];
            }
            x[k] = s / a.at(k, k);
        }
        x
    }
}

/// Solve the bordered system `[J b; c^T d] [x; y] = [r; q]` by block
/// elimination through the banded factor of `J`.
pub fn solve_bordered(
    j: &BandedLu,
    b: &[f64],
    c: &[f64],
    d: f64,
    r: &[f64],
    q: f64,
) -> Result<(Vec<f64>, f64)> {
    let yr = j.solve(r);
    let yb = j.solve(b);
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let schur = d - dot(c, &yb);
    if schur == 0.0 || !schur.is_finite() {
        return Err(LabError::Internal("singular bordered system".into()));
    }
    let y = (q - dot(c, &yr)) / schur;
    let x = yr.iter().zip(&yb).map(|(a, b)| a - b * y).collect();
    Ok((x, y))
}
