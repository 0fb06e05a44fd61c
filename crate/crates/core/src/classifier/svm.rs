//! Soft-margin RBF-kernel SVM trained by sequential minimal optimization.

use crate::{Error, Result};

/// Training parameters. `gamma` is the RBF width in
/// `k(u,v) = exp(-gamma·‖u−v‖²)`.
#[derive(Debug, Clone, Copy)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    /// KKT gap tolerance for the stopping rule.
    pub tol: f64,
    pub max_iter: usize,
}

impl SvmParams {
    pub fn new(c: f64, gamma: f64) -> Self {
        Self {
            c,
            gamma,
            tol: 1e-3,
            max_iter: 100_000,
        }
    }
}

/// A trained model: support vectors with their dual weights `αᵢyᵢ` and bias.
#[derive(Debug, Clone)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `αᵢyᵢ` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub iterations: usize,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let mut d2 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        d2 += d * d;
    }
    (-gamma * d2).exp()
}

/// Train on rows `x` with labels `y ∈ {−1, +1}` by SMO with maximal-violating-
/// pair working-set selection; stops at KKT gap `tol` or `max_iter`.
pub fn svm_train(x: &[Vec<f64>], y: &[f64], params: &SvmParams) -> Result<SvmModel> {
    let n = x.len();
    assert_eq!(n, y.len(), "one label per row");
    assert!(n >= 2, "need at least two samples");
    let n_pos = y.iter().filter(|&&v| v > 0.0).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::SingleClass);
    }
    for (row, &label) in x.iter().zip(y) {
        check_finite(row, label)?;
    }

    // full kernel matrix; cohorts are small (tens of subjects)
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = rbf(&x[i], &x[j], params.gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }

    let c = params.c;
    let mut alpha = vec![0.0; n];
    // gradient of ½αᵀQα − Σα with Q_ij = yᵢyⱼK_ij
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let (mut m_up, mut m_low);

    loop {
        // maximal violating pair over I_up / I_low
        let mut i_up = usize::MAX;
        let mut j_low = usize::MAX;
        m_up = f64::NEG_INFINITY;
        m_low = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if in_up && v > m_up {
                m_up = v;
                i_up = t;
            }
            if in_low && v < m_low {
                m_low = v;
                j_low = t;
            }
        }
        if m_up - m_low < params.tol || iterations >= params.max_iter {
            break;
        }
        let (i, j) = (i_up, j_low);
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        const TAU: f64 = 1e-12;
        // ‖φ(xᵢ) − φ(xⱼ)‖² in both branches
        let quad = (k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j]).max(TAU);
        if y[i] * y[j] < 0.0 {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 && alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = diff;
            } else if diff <= 0.0 && alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 && alpha[i] > c {
                alpha[i] = c;
                alpha[j] = c - diff;
            } else if diff <= 0.0 && alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c && alpha[i] > c {
                alpha[i] = c;
                alpha[j] = sum - c;
            } else if sum <= c && alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c && alpha[j] > c {
                alpha[j] = c;
                alpha[i] = sum - c;
            } else if sum <= c && alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        if di == 0.0 && dj == 0.0 {
            break; // numerically stuck on the selected pair
        }
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k[i * n + t] * di + y[j] * k[j * n + t] * dj);
        }
    }

    // for free support vectors b = −yᵢ·Gᵢ; m and M bracket it at convergence
    let bias = (m_up + m_low) / 2.0;
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for i in 0..n {
        if alpha[i] > 0.0 {
            support_vectors.push(x[i].clone());
            dual_coef.push(alpha[i] * y[i]);
        }
    }
    Ok(SvmModel {
        support_vectors,
        dual_coef,
        bias,
        gamma: params.gamma,
        c,
        iterations,
    })
}

fn check_finite(row: &[f64], label: f64) -> Result<()> {
    if row.iter().any(|v| !v.is_finite()) || !label.is_finite() {
        return Err(Error::InvalidRecording(
            "non-finite value in training data".into(),
        ));
    }
    Ok(())
}

impl SvmModel {
    /// Signed decision value `Σ αᵢyᵢ k(xᵢ, x) + b`; the sign is the
    /// predicted class.
    pub fn decide(&self, x: &[f64]) -> Result<f64> {
        if let Some(sv) = self.support_vectors.first() {
            if sv.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: sv.len(),
                    actual: x.len(),
                });
            }
        }
        let mut f = self.bias;
        for (sv, &coef) in self.support_vectors.iter().zip(&self.dual_coef) {
            f += coef * rbf(sv, x, self.gamma);
        }
        Ok(f)
    }
}
