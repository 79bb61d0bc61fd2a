use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DspError, SignalBlock};

/// Second-order section `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Complex response at normalized angular frequency `w` (rad/sample).
    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (1.0 + self.a1 * z1 + self.a2 * z2)
    }

    /// Roots of `z^2 + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    #[inline]
    fn tick(&self, x: f64, s: &mut [f64; 2]) -> f64 {
        // direct form II transposed
        let y = self.b0 * x + s[0];
        s[0] = self.b1 * x - self.a1 * y + s[1];
        s[1] = self.b2 * x - self.a2 * y;
        y
    }
}

/// Cascade of biquads with per-channel streaming state.
///
/// State is allocated on the first [`filter_block`] call and fixes the
/// channel count until [`BiquadCascade::reset`].
#[derive(Debug, Clone, PartialEq)]
pub struct BiquadCascade {
    sections: Vec<Biquad>,
    // state[ch][section]
    state: Vec<Vec<[f64; 2]>>,
}

impl BiquadCascade {
    pub fn new(sections: Vec<Biquad>) -> Result<Self, DspError> {
        if let Some(i) = sections.iter().position(|s| !s.is_stable()) {
            return Err(DspError::Design(format!("section {i} is unstable")));
        }
        Ok(Self {
            sections,
            state: Vec::new(),
        })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// All poles of the cascade.
    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }

    /// Magnitude response at `freq` Hz for sample rate `fs`.
    pub fn magnitude(&self, freq: f64, fs: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq / fs;
        self.sections
            .iter()
            .map(|s| s.response(w))
            .product::<Complex64>()
            .norm()
    }

    pub fn magnitude_db(&self, freq: f64, fs: f64) -> f64 {
        20.0 * self.magnitude(freq, fs).log10()
    }

    /// Clears streaming state; the next block may have any channel count.
    pub fn reset(&mut self) {
        self.state.clear();
    }

    /// Same coefficients, fresh state.
    pub fn fresh(&self) -> Self {
        Self {
            sections: self.sections.clone(),
            state: Vec::new(),
        }
    }

    pub fn channels(&self) -> Option<usize> {
        (!self.state.is_empty()).then_some(self.state.len())
    }

    /// Runs one channel's samples through the cascade in place.
    fn run_channel(sections: &[Biquad], state: &mut [[f64; 2]], samples: &mut [f64]) {
        for (section, s) in sections.iter().zip(state.iter_mut()) {
            for x in samples.iter_mut() {
                *x = section.tick(*x, s);
            }
        }
    }

    /// Filters `block` in place, carrying state across calls.
    pub fn process_in_place(&mut self, block: &mut SignalBlock) -> Result<(), DspError> {
        if self.state.is_empty() {
            self.state = vec![vec![[0.0; 2]; self.sections.len()]; block.channels()];
        } else if self.state.len() != block.channels() {
            return Err(DspError::ChannelMismatch {
                expected: self.state.len(),
                actual: block.channels(),
            });
        }
        for (samples, state) in block.data.iter_mut().zip(self.state.iter_mut()) {
            Self::run_channel(&self.sections, state, samples);
        }
        Ok(())
    }
}

/// Causal streaming filter: returns the filtered block, state persists in `filter`.
pub fn filter_block(
    filter: &mut BiquadCascade,
    block: &SignalBlock,
) -> Result<SignalBlock, DspError> {
    let mut out = block.clone();
    filter.process_in_place(&mut out)?;
    Ok(out)
}

/// Zero-phase (forward-backward) filtering for offline analysis.
///
/// Each channel is padded at both ends with an odd reflection of `pad`
/// samples (clamped to `len - 1`) to suppress start-up transients.
pub fn filtfilt(filter: &BiquadCascade, block: &SignalBlock, pad: usize) -> SignalBlock {
    let len = block.len();
    let pad = pad.min(len.saturating_sub(1));
    let sections = filter.sections();
    let data = block
        .data
        .iter()
        .map(|x| {
            let mut ext = Vec::with_capacity(len + 2 * pad);
            let (first, last) = (x[0], x[len - 1]);
            ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
            ext.extend_from_slice(x);
            ext.extend((1..=pad).map(|i| 2.0 * last - x[len - 1 - i]));

            let mut state = vec![[0.0; 2]; sections.len()];
            BiquadCascade::run_channel(sections, &mut state, &mut ext);
            ext.reverse();
            let mut state = vec![[0.0; 2]; sections.len()];
            BiquadCascade::run_channel(sections, &mut state, &mut ext);
            ext.reverse();
            ext[pad..pad + len].to_vec()
        })
        .collect();
    SignalBlock {
        fs: block.fs,
        t0: block.t0,
        data,
    }
}
