//! Rank-to-Gaussian (copula) transform.

use crate::stats::norm_ppf_fast;
use crate::{Error, Result, Scalar};

/// Precomputed normal quantiles `Φ⁻¹(k/(m+1))` for untied ranks `k = 1..m`.
///
/// Shared across all columns transformed at one window length; tied ranks
/// fall back to a direct quantile evaluation. Only the lower half is
/// evaluated; the upper half is its mirror.
pub(crate) struct QnormTable {
    z: Vec<f64>,
}

impl QnormTable {
    pub fn new(m: usize) -> Self {
        let denom = (m + 1) as f64;
        let mut z = vec![0.0; m];
        for k in 1..=m.div_ceil(2) {
            let v = norm_ppf_fast(k as f64 / denom);
            z[k - 1] = v;
            z[m - k] = -v;
        }
        Self { z }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    /// Quantile for a 1-based, possibly fractional (tie-averaged) rank.
    fn value(&self, rank: f64) -> f64 {
        let k = rank as usize;
        if rank == k as f64 && k >= 1 && k <= self.z.len() {
            self.z[k - 1]
        } else {
            norm_ppf_fast(rank / (self.z.len() + 1) as f64)
        }
    }
}

/// Copula machinery for one source column: the column is argsorted once,
/// after which any contiguous window can be rank-transformed in O(n).
pub(crate) struct WindowedCopula {
    values: Vec<f64>,
    order: Vec<u32>,
}

impl WindowedCopula {
    pub fn new<F: Scalar>(column: &[F]) -> Result<Self> {
        let values: Vec<f64> = column.iter().map(|v| v.as_f64()).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRecording(
                "non-finite sample in copula input".into(),
            ));
        }
        let mut order: Vec<u32> = (0..values.len() as u32).collect();
        order.sort_unstable_by(|&a, &b| values[a as usize].total_cmp(&values[b as usize]));
        Ok(Self { values, order })
    }

    /// Transform `values[a..b)` to standard-normal marginals; `out` receives
    /// the window in source order. `sorted_scratch` avoids per-call
    /// allocation. Ties get the quantile of their average rank.
    pub fn transform_window(
        &self,
        a: usize,
        b: usize,
        table: &QnormTable,
        sorted_scratch: &mut Vec<u32>,
        out: &mut [f64],
    ) -> Result<()> {
        let m = b - a;
        debug_assert_eq!(out.len(), m);
        debug_assert_eq!(table.len(), m);
        sorted_scratch.clear();
        for &idx in &self.order {
            let i = idx as usize;
            if i >= a && i < b {
                sorted_scratch.push(idx);
            }
        }
        debug_assert_eq!(sorted_scratch.len(), m);

        let mut start = 0;
        while start < m {
            let v = self.values[sorted_scratch[start] as usize];
            let mut end = start + 1;
            while end < m && self.values[sorted_scratch[end] as usize] == v {
                end += 1;
            }
            if start == 0 && end == m {
                return Err(Error::DegenerateRanks);
            }
            if end - start == 1 {
                out[sorted_scratch[start] as usize - a] = table.z[start];
            } else {
                // 1-based average rank of the tie run
                let avg = (start + 1 + end) as f64 / 2.0;
                let z = table.value(avg);
                for &idx in &sorted_scratch[start..end] {
                    out[idx as usize - a] = z;
                }
            }
            start = end;
        }
        Ok(())
    }
}

/// Rank-transform a series to standard-normal marginals: tied values get
/// their average rank, rank `r` of `n` maps to `Φ⁻¹(r/(n+1))`.
pub fn copula_transform<F: Scalar>(x: &[F]) -> Result<Vec<F>> {
    if x.len() < 3 {
        return Err(Error::TooFewSamples {
            len: x.len(),
            min: 3,
        });
    }
    let copula = WindowedCopula::new(x)?;
    let table = QnormTable::new(x.len());
    let mut scratch = Vec::with_capacity(x.len());
    let mut out = vec![0.0; x.len()];
    copula.transform_window(0, x.len(), &table, &mut scratch, &mut out)?;
    Ok(out.into_iter().map(F::cast).collect())
}
