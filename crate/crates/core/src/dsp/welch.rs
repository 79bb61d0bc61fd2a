use std::f64::consts::PI;

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{DspError, SignalBlock};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchParams {
    pub segment_len: usize,
    /// Fraction of a segment shared with the next one, in `[0, 1)`.
    pub overlap: f64,
}

impl Default for WelchParams {
    fn default() -> Self {
        Self {
            segment_len: 256,
            overlap: 0.5,
        }
    }
}

/// One-sided power spectral density, µV²/Hz, per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    /// `psd[ch][bin]`
    pub psd: Vec<Vec<f64>>,
    pub resolution: f64,
}

fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch average of Hann-windowed, mean-removed periodograms with density scaling.
pub fn welch_psd(block: &SignalBlock, params: WelchParams) -> Result<Spectrum, DspError> {
    let seg = params.segment_len;
    if seg < 2 {
        return Err(DspError::InvalidBlock(format!("segment length {seg} < 2")));
    }
    if !(0.0..1.0).contains(&params.overlap) {
        return Err(DspError::InvalidBlock(format!(
            "overlap {} outside [0, 1)",
            params.overlap
        )));
    }
    let len = block.len();
    if len < seg {
        return Err(DspError::TooShort { len, required: seg });
    }
    let step = (seg - (params.overlap * seg as f64).round() as usize).max(1);
    let n_segments = (len - seg) / step + 1;

    let window = periodic_hann(seg);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let scale = 1.0 / (block.fs * window_power * n_segments as f64);
    let n_bins = seg / 2 + 1;

    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    let psd = block
        .data
        .iter()
        .map(|x| {
            let mut acc = vec![0.0; n_bins];
            for s in 0..n_segments {
                let chunk = &x[s * step..s * step + seg];
                let mean = chunk.iter().sum::<f64>() / seg as f64;
                for ((b, &v), &w) in buf.iter_mut().zip(chunk).zip(&window) {
                    *b = Complex64::new((v - mean) * w, 0.0);
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b.norm_sqr();
                }
            }
            for (k, a) in acc.iter_mut().enumerate() {
                // fold negative frequencies, except DC and an even-length Nyquist bin
                let one_sided = if k == 0 || (seg.is_multiple_of(2) && k == seg / 2) {
                    1.0
                } else {
                    2.0
                };
                *a *= scale * one_sided;
            }
            acc
        })
        .collect();

    let resolution = block.fs / seg as f64;
    Ok(Spectrum {
        freqs: (0..n_bins).map(|k| k as f64 * resolution).collect(),
        psd,
        resolution,
    })
}

/// Integral of the piecewise-linear PSD over `[f_lo, f_hi]`, per channel.
///
/// The band is clipped to the spectrum support; partial bins are
/// interpolated, so adjacent bands add up exactly.
pub fn band_power(spec: &Spectrum, f_lo: f64, f_hi: f64) -> Result<Vec<f64>, DspError> {
    let err = DspError::Band { lo: f_lo, hi: f_hi };
    let (Some(&first), Some(&last)) = (spec.freqs.first(), spec.freqs.last()) else {
        return Err(err);
    };
    if !(f_lo < f_hi) {
        return Err(err);
    }
    let lo = f_lo.max(first);
    let hi = f_hi.min(last);
    if !(lo < hi) {
        return Err(err);
    }
    Ok(spec
        .psd
        .iter()
        .map(|p| integrate_linear(&spec.freqs, p, lo, hi))
        .collect())
}

fn integrate_linear(f: &[f64], p: &[f64], lo: f64, hi: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..f.len() - 1 {
        let (f0, f1) = (f[i], f[i + 1]);
        let a = lo.max(f0);
        let b = hi.min(f1);
        if a >= b {
            continue;
        }
        let slope = (p[i + 1] - p[i]) / (f1 - f0);
        let pa = p[i] + slope * (a - f0);
        let pb = p[i] + slope * (b - f0);
        total += 0.5 * (pa + pb) * (b - a);
    }
    total
}
