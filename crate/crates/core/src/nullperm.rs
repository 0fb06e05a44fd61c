//! Spectrum-matched surrogate envelopes and per-subject significance levels.
//!
//! MI in bits is a relative quantity; the meaningful zero point is what
//! stationary noise with the stimulus envelope's spectrum would produce.
//! Surrogates keep every Fourier magnitude bin and randomize the phases
//! (conjugate-symmetric, DC and Nyquist untouched), the multivariate TMIF is
//! recomputed against each surrogate, and the per-subject significance level
//! is the 95th percentile of the surrogate statistic.

use crate::gcmi::{tmif_multivariate_with, ChannelSelection, MiOptions};
use crate::model::{BandSpec, LagGrid, Recording};
use crate::{derive_seed, Error, Result, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Statistic reduced over the surrogate TMIF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatisticKind {
    /// Maximum over lags (controls family-wise error across the lag axis).
    MaxOverLags,
}

/// Null distribution of the surrogate statistic for one subject and band.
#[derive(Debug, Clone)]
pub struct NullDistribution<F> {
    pub band: BandSpec,
    /// One statistic per permutation, in permutation order.
    pub values: Vec<F>,
    /// Empirical 95th percentile (order statistic at `ceil(0.95·n) − 1`).
    pub significance_level: F,
    pub statistic_kind: StatisticKind,
}

impl<F: Scalar> NullDistribution<F> {
    /// Percentile by the fixed order-statistic convention used throughout:
    /// sorted index `ceil(p·n) − 1`.
    pub fn percentile(&self, p: f64) -> F {
        percentile(&self.values, p)
    }

    /// Write as CSV (`permutation,value`).
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "permutation,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{v}")?;
        }
        Ok(())
    }
}

fn percentile<F: Scalar>(values: &[F], p: f64) -> F {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let idx = ((p * sorted.len() as f64).ceil() as usize).max(1) - 1;
    sorted[idx.min(sorted.len() - 1)]
}

/// Stationary noise with exactly the magnitude spectrum of `env`: phases are
/// redrawn uniformly with conjugate symmetry, DC and Nyquist stay real.
/// Deterministic in `seed`.
pub fn spectrum_matched_noise<F: Scalar>(env: &[F], seed: u64) -> Result<Vec<F>> {
    let n = env.len();
    if n < 4 {
        return Err(Error::TooFewSamples { len: n, min: 4 });
    }
    let mut planner = FftPlanner::<F>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut spectrum: Vec<Complex<F>> = env.iter().map(|&v| Complex::new(v, F::zero())).collect();
    fft.process(&mut spectrum);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // even n: bins 1..n/2 (Nyquist untouched); odd n: bins 1..=(n-1)/2
    for k in 1..n.div_ceil(2) {
        let mag = spectrum[k].norm();
        let phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let rotated = Complex::new(mag * F::cast(phase.cos()), mag * F::cast(phase.sin()));
        spectrum[k] = rotated;
        spectrum[n - k] = rotated.conj();
    }
    // DC (and Nyquist when n is even) keep their original real values

    ifft.process(&mut spectrum);
    let scale = F::one() / F::cast(n as f64);
    Ok(spectrum.into_iter().map(|c| c.re * scale).collect())
}

/// Per-subject significance level: `n_perm` surrogate envelopes, the
/// multivariate TMIF against each, statistic = max over lags, level = the
/// empirical 95th percentile.
///
/// Permutation `i` uses an RNG seeded from `derive_seed(seed, i)`, so the
/// result is independent of worker count and scheduling.
pub fn significance_level<F: Scalar>(
    eeg: &Recording<F>,
    env: &[F],
    grid: &LagGrid,
    sel: &ChannelSelection,
    band: BandSpec,
    n_perm: usize,
    seed: u64,
) -> Result<NullDistribution<F>> {
    significance_level_with(
        eeg,
        env,
        grid,
        sel,
        band,
        n_perm,
        seed,
        &MiOptions::default(),
    )
}

/// [`significance_level`] with explicit estimator options.
#[allow(clippy::too_many_arguments)]
pub fn significance_level_with<F: Scalar>(
    eeg: &Recording<F>,
    env: &[F],
    grid: &LagGrid,
    sel: &ChannelSelection,
    band: BandSpec,
    n_perm: usize,
    seed: u64,
    opts: &MiOptions,
) -> Result<NullDistribution<F>> {
    if n_perm < 20 {
        return Err(Error::TooFewPermutations { n: n_perm, min: 20 });
    }
    let values: Vec<F> = (0..n_perm as u64)
        .into_par_iter()
        .map(|i| {
            let surrogate = spectrum_matched_noise(env, derive_seed(seed, i))?;
            let tmif = tmif_multivariate_with(eeg, &surrogate, grid, sel, opts)?;
            Ok(tmif.max_value())
        })
        .collect::<Result<_>>()?;
    let significance_level = percentile(&values, 0.95);
    Ok(NullDistribution {
        band,
        values,
        significance_level,
        statistic_kind: StatisticKind::MaxOverLags,
    })
}
