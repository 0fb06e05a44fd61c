//! Closed-form Gaussian mutual information on copula-transformed data.
//!
//! For variables with standard-normal marginals the MI in bits is
//!
//! ```text
//! I(X;Y) = (1 / (2·ln 2)) · ln( |Σ_X|·|Σ_Y| / |Σ_XY| )
//! ```
//!
//! with sample covariances of the joint variable. Note the logarithm: the
//! plain determinant ratio is dimensionally not an information measure; only
//! its log (scaled to base 2) is the Gaussian MI in bits.

use crate::dsp::{cholesky, logdet_from_chol};
use crate::{Error, Result, Scalar};
use ndarray::ArrayView2;
use statrs::function::gamma::digamma;

/// Relative Cholesky pivot below which the joint covariance is reported
/// singular.
pub const SINGULARITY_TOL: f64 = 1e-12;

/// Estimator options.
#[derive(Debug, Clone, Copy, Default)]
pub struct MiOptions {
    /// Add `λ·I` to the covariance before factorizing (for near-singular
    /// joint covariances, e.g. duplicated channels). `DEFAULT_RIDGE` when
    /// enabled by the pipeline.
    pub ridge: Option<f64>,
    /// Small-sample bias correction of the log-determinants (digamma
    /// expansion). Off by default: the plug-in estimate is the published
    /// quantity, and the correction can push small MI below zero.
    pub bias_correction: bool,
}

/// Ridge magnitude used when the option is switched on without a value.
pub const DEFAULT_RIDGE: f64 = 1e-9;

/// Gaussian MI in bits between the column sets `x` (n×p) and `y` (n×q).
/// Columns must already be copula-transformed; requires `n > p + q + 2`.
pub fn gaussian_mi<F: Scalar>(x: ArrayView2<F>, y: ArrayView2<F>) -> Result<F> {
    gaussian_mi_with(x, y, &MiOptions::default())
}

/// [`gaussian_mi`] with explicit estimator options.
pub fn gaussian_mi_with<F: Scalar>(
    x: ArrayView2<F>,
    y: ArrayView2<F>,
    opts: &MiOptions,
) -> Result<F> {
    let xcols: Vec<Vec<f64>> = x
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.as_f64()).collect())
        .collect();
    let ycols: Vec<Vec<f64>> = y
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.as_f64()).collect())
        .collect();
    let xr: Vec<&[f64]> = xcols.iter().map(|c| c.as_slice()).collect();
    let yr: Vec<&[f64]> = ycols.iter().map(|c| c.as_slice()).collect();
    gaussian_mi_cols(&xr, &yr, opts).map(F::cast)
}

/// f64 worker shared with the TMIF loops.
pub(crate) fn gaussian_mi_cols(
    xcols: &[&[f64]],
    ycols: &[&[f64]],
    opts: &MiOptions,
) -> Result<f64> {
    let p = xcols.len();
    let q = ycols.len();
    let d = p + q;
    assert!(p > 0 && q > 0, "gaussian_mi needs non-empty column sets");
    let n = xcols[0].len();
    for c in xcols.iter().chain(ycols) {
        assert_eq!(c.len(), n, "all columns must have equal length");
    }
    if n <= d + 2 {
        return Err(Error::TooFewSamples { len: n, min: d + 3 });
    }

    // joint covariance, X columns first, sample normalization
    let cols: Vec<&[f64]> = xcols.iter().chain(ycols).copied().collect();
    let means: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![0.0; d * d];
    let norm = 1.0 / (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let (ci, cj) = (cols[i], cols[j]);
            let (mi, mj) = (means[i], means[j]);
            let mut s = 0.0;
            for t in 0..n {
                s += (ci[t] - mi) * (cj[t] - mj);
            }
            let v = s * norm;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    if let Some(ridge) = opts.ridge {
        for i in 0..d {
            cov[i * d + i] += ridge;
        }
    }

    // the leading p×p block of the joint factor is the factor of Σ_X
    let l_joint = cholesky(&cov, d, SINGULARITY_TOL).ok_or(Error::SingularCovariance {
        tolerance: SINGULARITY_TOL,
    })?;
    let logdet_joint = logdet_from_chol(&l_joint, d);
    let logdet_x = 2.0 * (0..p).map(|i| l_joint[i * d + i].ln()).sum::<f64>();

    let mut cov_y = vec![0.0; q * q];
    for i in 0..q {
        for j in 0..q {
            cov_y[i * q + j] = cov[(p + i) * d + (p + j)];
        }
    }
    let l_y = cholesky(&cov_y, q, SINGULARITY_TOL).ok_or(Error::SingularCovariance {
        tolerance: SINGULARITY_TOL,
    })?;
    let logdet_y = logdet_from_chol(&l_y, q);

    let ln2 = std::f64::consts::LN_2;
    let mut mi = (logdet_x + logdet_y - logdet_joint) / (2.0 * ln2);
    if opts.bias_correction {
        let psi = |i: usize| digamma((n - i) as f64 / 2.0);
        let extra: f64 = (p + 1..=d).map(psi).sum();
        let single: f64 = (1..=q).map(psi).sum();
        mi += (extra - single) / (2.0 * ln2);
    }
    Ok(mi)
}
