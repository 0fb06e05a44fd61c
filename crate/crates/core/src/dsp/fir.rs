//! Linear-phase least-squares FIR design and filtering.
//!
//! Band filters follow the envelope-tracking chain: order 2000, passband
//! `[lo, hi]`, stopbands below `0.9·lo` and above `1.1·hi` (a transition of
//! 10% of each edge frequency), transitions unconstrained. The design
//! minimizes the weighted squared error on a dense frequency grid
//! (16×(order+1) points).
//!
//! Per-band weights default to the inverse of each band's width, which
//! equalizes the error *density* across bands. With uniform weights the
//! narrow low-frequency stopband of the delta band contributes almost
//! nothing to the error integral and its attenuation collapses.

use super::linalg::solve_spd;
use crate::model::BandSpec;
use crate::{Error, Result, Scalar};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Designed-taps cache: the solve is O(order³) and identical across
/// subjects, so repeated designs (one per subject per band in the
/// preprocessing loop) must not pay it again.
type DesignKey = (u64, u64, u64, usize, BandWeighting, u8);
fn design_cache() -> &'static Mutex<HashMap<DesignKey, Arc<Vec<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<DesignKey, Arc<Vec<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached_design(
    key: DesignKey,
    design: impl FnOnce() -> Result<Vec<f64>>,
) -> Result<Arc<Vec<f64>>> {
    if let Some(taps) = design_cache().lock().expect("cache lock").get(&key) {
        return Ok(taps.clone());
    }
    let taps = Arc::new(design()?);
    design_cache()
        .lock()
        .expect("cache lock")
        .insert(key, taps.clone());
    Ok(taps)
}

/// Weighting of the squared-error integrand per designed band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BandWeighting {
    /// Weight each band by `1 / width_hz` (error density equalization).
    #[default]
    InverseWidth,
    /// Equal weight everywhere.
    Uniform,
}

/// Default filter order for the band filters (2001 taps).
pub const BAND_FILTER_ORDER: usize = 2000;

/// A linear-phase (type I) FIR filter.
#[derive(Debug, Clone)]
pub struct FirFilter<F> {
    pub taps: Vec<F>,
    /// The band this filter selects, if it is a band filter.
    pub band: Option<BandSpec>,
}

impl<F: Scalar> FirFilter<F> {
    /// Filter order (number of taps minus one).
    pub fn order(&self) -> usize {
        self.taps.len() - 1
    }

    /// Group delay in samples (`order / 2`).
    pub fn group_delay(&self) -> usize {
        self.order() / 2
    }

    /// Single-pass convolution with the group delay compensated: the output
    /// is advanced by `order/2` samples and has the input's length, with
    /// zero-padded edges.
    pub fn apply_compensated(&self, x: &[F]) -> Result<Vec<F>> {
        if x.len() <= self.order() {
            return Err(Error::SignalTooShort {
                len: x.len(),
                min: self.order() + 1,
            });
        }
        let full = convolve(x, &self.taps);
        let delay = self.group_delay();
        Ok(full[delay..delay + x.len()].to_vec())
    }

    /// Amplitude response `A(f)` of the linear-phase filter (may be
    /// negative; magnitude is `|A|`). Evaluated in f64.
    pub fn amplitude_at(&self, f_hz: f64, fs: f64) -> f64 {
        let m = self.group_delay();
        let w = 2.0 * std::f64::consts::PI * f_hz / fs;
        let mut a = self.taps[m].as_f64();
        for k in 1..=m {
            a += 2.0 * self.taps[m - k].as_f64() * (k as f64 * w).cos();
        }
        a
    }

    /// Magnitude response in dB at a frequency.
    pub fn magnitude_db(&self, f_hz: f64, fs: f64) -> f64 {
        20.0 * self.amplitude_at(f_hz, fs).abs().max(1e-300).log10()
    }
}

/// Design the band filter for the envelope-tracking chain: least squares,
/// order 2000, 10% transitions, inverse-width band weights.
pub fn design_ls_fir<F: Scalar>(band: &BandSpec, fs: f64) -> Result<FirFilter<F>> {
    design_ls_fir_with(band, fs, BAND_FILTER_ORDER, BandWeighting::InverseWidth)
}

/// Band filter design with explicit order and weighting.
pub fn design_ls_fir_with<F: Scalar>(
    band: &BandSpec,
    fs: f64,
    order: usize,
    weighting: BandWeighting,
) -> Result<FirFilter<F>> {
    let nyquist = fs / 2.0;
    let stop_lo = 0.9 * band.lo_hz;
    let stop_hi = 1.1 * band.hi_hz;
    if stop_hi >= nyquist {
        return Err(Error::NyquistViolation {
            edge_hz: stop_hi,
            nyquist_hz: nyquist,
        });
    }
    let key = (
        band.lo_hz.to_bits(),
        band.hi_hz.to_bits(),
        fs.to_bits(),
        order,
        weighting,
        0u8,
    );
    let taps = cached_design(key, || {
        let regions = [
            (0.0, stop_lo, 0.0, stop_lo),
            (band.lo_hz, band.hi_hz, 1.0, band.width_hz()),
            (stop_hi, nyquist, 0.0, nyquist - stop_hi),
        ];
        let specs: Vec<DesignRegion> = regions
            .iter()
            .map(|&(lo, hi, desired, width)| DesignRegion {
                lo_hz: lo,
                hi_hz: hi,
                desired,
                weight: match weighting {
                    BandWeighting::InverseWidth => 1.0 / width.max(f64::MIN_POSITIVE),
                    BandWeighting::Uniform => 1.0,
                },
            })
            .collect();
        ls_linear_phase(order, fs, &specs)
    })?;
    Ok(FirFilter {
        taps: taps.iter().map(|&t| F::cast(t)).collect(),
        band: Some(*band),
    })
}

/// Anti-alias lowpass for decimation: passband `[0, cutoff]`, stopband
/// `[stop, Nyquist]`, uniform weights.
pub fn design_ls_lowpass<F: Scalar>(
    cutoff_hz: f64,
    stop_hz: f64,
    fs: f64,
    order: usize,
) -> Result<FirFilter<F>> {
    let nyquist = fs / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < stop_hz && stop_hz <= nyquist) {
        return Err(Error::NyquistViolation {
            edge_hz: stop_hz,
            nyquist_hz: nyquist,
        });
    }
    let key = (
        cutoff_hz.to_bits(),
        stop_hz.to_bits(),
        fs.to_bits(),
        order,
        BandWeighting::Uniform,
        1u8,
    );
    let taps = cached_design(key, || {
        let specs = [
            DesignRegion {
                lo_hz: 0.0,
                hi_hz: cutoff_hz,
                desired: 1.0,
                weight: 1.0,
            },
            DesignRegion {
                lo_hz: stop_hz,
                hi_hz: nyquist,
                desired: 0.0,
                weight: 1.0,
            },
        ];
        ls_linear_phase(order, fs, &specs)
    })?;
    Ok(FirFilter {
        taps: taps.iter().map(|&t| F::cast(t)).collect(),
        band: None,
    })
}

struct DesignRegion {
    lo_hz: f64,
    hi_hz: f64,
    desired: f64,
    weight: f64,
}

/// Weighted least-squares design of a type-I linear-phase FIR.
///
/// The amplitude response is `A(ω) = b₀ + Σₖ bₖ cos(kω)`; the normal
/// equations over the grid reduce to cosine sums `S[p] = Σ w·cos(p·ωᵢ)`
/// accumulated by Chebyshev recurrence, so the design costs
/// `O(grid·order + order³)` rather than `O(grid·order²)`.
fn ls_linear_phase(order: usize, fs: f64, regions: &[DesignRegion]) -> Result<Vec<f64>> {
    assert!(
        order.is_multiple_of(2),
        "type-I design requires an even order"
    );
    let m = order / 2;
    let n_coef = m + 1;
    let grid = 16 * (order + 1);
    let dw = std::f64::consts::PI / (grid - 1) as f64;

    let mut s = vec![0.0; 2 * m + 1];
    let mut rhs = vec![0.0; n_coef];
    for i in 0..grid {
        let w = i as f64 * dw;
        let f = w / std::f64::consts::PI * (fs / 2.0);
        let Some(region) = regions
            .iter()
            .find(|r| f >= r.lo_hz - 1e-12 && f <= r.hi_hz + 1e-12)
        else {
            continue; // transition: weight zero
        };
        let (wt, d) = (region.weight, region.desired);
        let cw = w.cos();
        let (mut c_prev, mut c_cur) = (1.0, cw);
        s[0] += wt;
        if d != 0.0 {
            rhs[0] += wt * d;
        }
        for p in 1..=2 * m {
            s[p] += wt * c_cur;
            if d != 0.0 && p <= m {
                rhs[p] += wt * d * c_cur;
            }
            let c_next = 2.0 * cw * c_cur - c_prev;
            c_prev = c_cur;
            c_cur = c_next;
        }
    }

    let mut q = vec![0.0; n_coef * n_coef];
    for k in 0..n_coef {
        for j in 0..n_coef {
            q[k * n_coef + j] = 0.5 * (s[k + j] + s[k.abs_diff(j)]);
        }
    }
    let b = solve_spd(&q, &rhs, n_coef).ok_or(Error::SingularCovariance { tolerance: 1e-14 })?;

    // b₀ is the center tap; bₖ splits symmetrically — symmetry is exact by
    // construction.
    let mut taps = vec![0.0; order + 1];
    taps[m] = b[0];
    for k in 1..=m {
        taps[m - k] = b[k] / 2.0;
        taps[m + k] = b[k] / 2.0;
    }
    Ok(taps)
}

/// Full linear convolution (`len(x) + len(h) - 1` samples), FFT-based above
/// a small size threshold.
pub fn convolve<F: Scalar>(x: &[F], h: &[F]) -> Vec<F> {
    let n_out = x.len() + h.len() - 1;
    if x.len().min(h.len()) <= 32 {
        let mut out = vec![F::zero(); n_out];
        for (i, &xi) in x.iter().enumerate() {
            for (j, &hj) in h.iter().enumerate() {
                out[i + j] += xi * hj;
            }
        }
        return out;
    }
    let n = n_out.next_power_of_two();
    let mut planner = FftPlanner::<F>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut fx: Vec<Complex<F>> = x.iter().map(|&v| Complex::new(v, F::zero())).collect();
    fx.resize(n, Complex::new(F::zero(), F::zero()));
    let mut fh: Vec<Complex<F>> = h.iter().map(|&v| Complex::new(v, F::zero())).collect();
    fh.resize(n, Complex::new(F::zero(), F::zero()));
    fft.process(&mut fx);
    fft.process(&mut fh);
    let scale = F::one() / F::cast(n as f64);
    for (a, b) in fx.iter_mut().zip(&fh) {
        *a = *a * *b * scale;
    }
    ifft.process(&mut fx);
    fx.truncate(n_out);
    fx.into_iter().map(|c| c.re).collect()
}
