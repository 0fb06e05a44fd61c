//! Shared statistical helpers (f64).
//!
//! Probability functions, correlation, and the Welch t statistic used by the
//! cluster tests and reliability analyses. Everything here is deterministic
//! pure math; p-values and quantiles are always computed in `f64` regardless
//! of the storage scalar.

use crate::{Error, Result};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal survival function `P(Z > x)`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile function (inverse CDF).
///
/// Acklam's rational approximation refined with one Halley step against
/// [`norm_cdf`]; accurate to better than 1e-9 over (0, 1), limited by the
/// underlying `erfc`. Returns ±∞ at the endpoints.
pub fn norm_ppf(p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let x = acklam(p);
    // Halley refinement
    let e = norm_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

/// Unrefined Acklam approximation of the normal quantile (max relative
/// error ≈ 1.2e-9). The copula rank tables use this: they evaluate it once
/// per sample per lag, and nanobit-level quantile error is irrelevant to a
/// rank transform.
pub fn norm_ppf_fast(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    acklam(p)
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Two-tailed p-value of a Student t statistic with `df` degrees of freedom.
pub fn student_t_p_two_tailed(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    if df <= 0.0 {
        return 1.0;
    }
    // P(|T| >= t) = I_{df/(df+t^2)}(df/2, 1/2)
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Welch two-sample t statistic and its Welch–Satterthwaite degrees of freedom.
///
/// `t` is `(mean_a - mean_b) / se`. When both groups have zero variance the
/// statistic carries no evidence; `(0, 1)` is returned so callers treat the
/// sample as non-significant.
pub fn welch_t(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_var(a), sample_var(b));
    let sa = va / na;
    let sb = vb / nb;
    let denom = (sa + sb).sqrt();
    if denom == 0.0 {
        return (0.0, 1.0);
    }
    let t = (ma - mb) / denom;
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    (t, df)
}

/// Pearson correlation; `Err` when either input has zero variance.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    assert_eq!(x.len(), y.len(), "pearson_r inputs must have equal length");
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxx += da * da;
        syy += db * db;
        sxy += da * db;
    }
    if sxx == 0.0 || syy == 0.0 || n < 2.0 {
        return Err(Error::UndefinedCorrelation("zero variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-tailed p-value of a Pearson correlation via the t transform,
/// `t = r sqrt((n-2)/(1-r^2))` with `n-2` degrees of freedom.
pub fn pearson_p_two_tailed(r: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        // below machine precision, but reported p stays in (0, 1]
        return f64::MIN_POSITIVE;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    student_t_p_two_tailed(t, df).max(f64::MIN_POSITIVE)
}

/// 95% confidence interval of a Pearson correlation via the Fisher z
/// transform, `tanh(atanh(r) ± z_{.975}/sqrt(n-3))`.
pub fn fisher_ci95(r: f64, n: usize) -> Result<(f64, f64)> {
    if n <= 3 {
        return Err(Error::TooFewSamples { len: n, min: 4 });
    }
    if r.abs() >= 1.0 {
        return Ok((r, r));
    }
    let z = r.atanh();
    let se = 1.0 / ((n - 3) as f64).sqrt();
    let z975 = norm_ppf(0.975);
    Ok(((z - z975 * se).tanh(), (z + z975 * se).tanh()))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance (ddof = 0).
pub fn pop_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Sample variance (ddof = 1); zero for fewer than two values.
pub fn sample_var(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Standard error of the mean (sample std / sqrt(n)).
pub fn stderr_mean(x: &[f64]) -> f64 {
    sample_var(x).sqrt() / (x.len() as f64).sqrt()
}
