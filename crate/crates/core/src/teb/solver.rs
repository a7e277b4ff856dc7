//! Banded normal equations and a Levenberg step.

use super::dual::MAX_VARS;
use super::residuals::Residual;

/// Half-bandwidth of the normal matrix: residual windows span
/// [`MAX_VARS`] consecutive variables.
pub const BANDWIDTH: usize = MAX_VARS - 1;

/// Symmetric positive matrix with entries only within [`BANDWIDTH`] of
/// the diagonal; `lower[i][k]` holds entry `(i, i - k)`.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    lower: Vec<[f64; BANDWIDTH + 1]>,
}

impl BandMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, lower: vec![[0.0; BANDWIDTH + 1]; n] }
    }

    #[cfg(test)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > BANDWIDTH {
            0.0
        } else {
            self.lower[i][i - j]
        }
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for row in &mut self.lower {
            row[0] += v;
        }
    }

    /// In-place Cholesky factorisation; `None` if not positive definite.
    pub fn cholesky(&self) -> Option<BandMatrix> {
        let n = self.n;
        let mut l = BandMatrix::zeros(n);
        for j in 0..n {
            let k0 = j.saturating_sub(BANDWIDTH);
            let mut d = self.lower[j][0];
            for k in k0..j {
                let v = l.lower[j][j - k];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l.lower[j][0] = d;
            for i in j + 1..(j + BANDWIDTH + 1).min(n) {
                let mut s = self.lower[i][i - j];
                for k in i.saturating_sub(BANDWIDTH)..j {
                    s -= l.lower[i][i - k] * l.lower[j][j - k];
                }
                l.lower[i][i - j] = s / d;
            }
        }
        Some(l)
    }

    /// Solves `L L^T x = b` for a factor produced by [`Self::cholesky`].
    pub fn cholesky_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(BANDWIDTH)..i {
                s -= self.lower[i][i - k] * y[k];
            }
            y[i] = s / self.lower[i][0];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + BANDWIDTH + 1).min(n) {
                s -= self.lower[k][k - i] * y[k];
            }
            y[i] = s / self.lower[i][0];
        }
        y
    }
}

/// Gauss-Newton normal matrix `J^T J` and gradient `J^T r`.
pub fn normal_equations(rows: &[Residual], n: usize) -> (BandMatrix, Vec<f64>) {
    let mut h = BandMatrix::zeros(n);
    let mut g = vec![0.0; n];
    for r in rows {
        let width = MAX_VARS.min(n.saturating_sub(r.lo));
        for p in 0..width {
            let jp = r.jac[p];
            if jp == 0.0 {
                continue;
            }
            g[r.lo + p] += jp * r.value;
            for q in 0..=p {
                h.lower[r.lo + p][p - q] += jp * r.jac[q];
            }
        }
    }
    (h, g)
}

/// Solves `(H + lambda I) delta = -g`, or `None` if the damped system is
/// not positive definite.
pub fn damped_step(h: &BandMatrix, g: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let mut a = h.clone();
    a.add_diagonal(lambda);
    let l = a.cholesky()?;
    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
    Some(l.cholesky_solve(&neg))
}
