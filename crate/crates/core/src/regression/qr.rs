//! Householder QR for tall, narrow least-squares problems.

use crate::error::{Error, Result};

/// Columns with a pivot below this fraction of their original norm are treated as collinear.
const RANK_TOL: f64 = 1e-10;

/// Upper-triangular factor plus the rotated response `Qᵀy`.
#[derive(Debug, Clone)]
pub struct QrFit {
    /// Row-major p×p upper triangle.
    pub r: Vec<Vec<f64>>,
    /// Qᵀy, length n. The first p entries are the per-column effects.
    pub effects: Vec<f64>,
}

impl QrFit {
    pub fn rank(&self) -> usize {
        self.r.len()
    }

    /// Solve R b = effects[..p].
    pub fn coefficients(&self) -> Vec<f64> {
        let p = self.rank();
        let mut b = vec![0.0; p];
        for i in (0..p).rev() {
            let mut s = self.effects[i];
            for j in i + 1..p {
                s -= self.r[i][j] * b[j];
            }
            b[i] = s / self.r[i][i];
        }
        b
    }

    /// Residual sum of squares from the tail of Qᵀy.
    pub fn residual_ss(&self) -> f64 {
        self.effects[self.rank()..].iter().map(|e| e * e).sum()
    }

    /// R⁻¹ (upper triangular).
    pub fn r_inverse(&self) -> Vec<Vec<f64>> {
        let p = self.rank();
        let mut inv = vec![vec![0.0; p]; p];
        for col in 0..p {
            for i in (0..=col).rev() {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for k in i + 1..=col {
                    s -= self.r[i][k] * inv[k][col];
                }
                inv[i][col] = s / self.r[i][i];
            }
        }
        inv
    }
}

/// Factor the design given as columns, applying the same reflections to `y`.
pub fn householder(columns: &[Vec<f64>], y: &[f64]) -> Result<QrFit> {
    let p = columns.len();
    let n = y.len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::Regression("design columns and response differ in length".into()));
    }
    if n < p {
        return Err(Error::Regression(format!("{n} observations cannot determine {p} coefficients")));
    }
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut qty = y.to_vec();
    let norms: Vec<f64> = columns.iter().map(|c| norm(c)).collect();
    let mut v = vec![0.0; n];
    for k in 0..p {
        let tail = &a[k][k..];
        let alpha_norm = norm(tail);
        if norms[k] == 0.0 || alpha_norm <= RANK_TOL * norms[k] {
            return Err(Error::Regression(format!(
                "design matrix is rank deficient: column {k} is collinear with earlier columns"
            )));
        }
        let alpha = if tail[0] >= 0.0 { -alpha_norm } else { alpha_norm };
        let m = n - k;
        v[..m].copy_from_slice(tail);
        v[0] -= alpha;
        let vv: f64 = v[..m].iter().map(|x| x * x).sum();
        for col in a.iter_mut().skip(k) {
            reflect(&v[..m], vv, &mut col[k..]);
        }
        reflect(&v[..m], vv, &mut qty[k..]);
        a[k][k] = alpha;
        for x in &mut a[k][k + 1..] {
            *x = 0.0;
        }
    }
    let r = (0..p).map(|i| (0..p).map(|j| if j >= i { a[j][i] } else { 0.0 }).collect()).collect();
    Ok(QrFit { r, effects: qty })
}

fn reflect(v: &[f64], vv: f64, x: &mut [f64]) {
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let s = 2.0 * dot / vv;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}

fn norm(x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}
