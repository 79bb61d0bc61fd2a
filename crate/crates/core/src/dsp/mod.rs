//! Filtering and spectral estimation on multi-channel microvolt blocks.

mod biquad;
mod design;
mod welch;

pub use biquad::{filter_block, filtfilt, Biquad, BiquadCascade};
pub use design::{design_bandpass, design_notch};
pub use welch::{band_power, welch_psd, Spectrum, WelchParams};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DspError {
    #[error("filter design: {0}")]
    Design(String),
    #[error("block has {actual} channels, filter state has {expected}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("block of {len} samples is shorter than the required {required}")]
    TooShort { len: usize, required: usize },
    #[error("invalid block: {0}")]
    InvalidBlock(String),
    #[error("band {lo}..{hi} Hz does not overlap the spectrum support")]
    Band { lo: f64, hi: f64 },
}

/// A contiguous run of multi-channel samples in microvolts.
///
/// `data[ch][i]` is sample `i` of channel `ch`; sample `i` sits at `t0 + i / fs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalBlock {
    pub fs: f64,
    pub t0: f64,
    pub data: Vec<Vec<f64>>,
}

impl SignalBlock {
    pub fn new(fs: f64, t0: f64, data: Vec<Vec<f64>>) -> Result<Self, DspError> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(DspError::InvalidBlock(format!("sample rate {fs}")));
        }
        let Some(first) = data.first() else {
            return Err(DspError::InvalidBlock("no channels".into()));
        };
        let len = first.len();
        if len == 0 {
            return Err(DspError::InvalidBlock("empty channels".into()));
        }
        if data.iter().any(|c| c.len() != len) {
            return Err(DspError::InvalidBlock("ragged channels".into()));
        }
        Ok(Self { fs, t0, data })
    }

    /// All-zero block.
    pub fn zeros(fs: f64, t0: f64, channels: usize, len: usize) -> Self {
        Self {
            fs,
            t0,
            data: vec![vec![0.0; len]; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.data.len()
    }

    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.fs
    }

    /// Time just past the last sample.
    pub fn t_end(&self) -> f64 {
        self.t0 + self.duration()
    }

    /// Sub-block of samples `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            fs: self.fs,
            t0: self.t0 + start as f64 / self.fs,
            data: self.data.iter().map(|c| c[start..end].to_vec()).collect(),
        }
    }

    /// Appends `other`'s samples. Channel counts must match.
    pub fn extend(&mut self, other: &SignalBlock) -> Result<(), DspError> {
        if other.channels() != self.channels() {
            return Err(DspError::ChannelMismatch {
                expected: self.channels(),
                actual: other.channels(),
            });
        }
        for (dst, src) in self.data.iter_mut().zip(&other.data) {
            dst.extend_from_slice(src);
        }
        Ok(())
    }
}
