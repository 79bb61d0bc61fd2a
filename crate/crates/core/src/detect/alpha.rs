use std::collections::VecDeque;

use super::{DetectError, DetectionEvent, EventKind};
use crate::dsp::{band_power, welch_psd, DspError, SignalBlock, WelchParams};

/// Minimum block length for [`alpha_index`], seconds.
pub const MIN_ALPHA_SECONDS: f64 = 2.0;

fn segment_len(fs: f64, len: usize) -> usize {
    // about 1 Hz resolution: 256 samples at 250 SPS
    let target = (fs.round() as usize).next_power_of_two();
    if target <= len {
        target
    } else {
        1 << (usize::BITS - 1 - len.leading_zeros())
    }
}

/// Per-channel ratio of 8–12 Hz to 1–30 Hz band power, in `[0, 1]`.
///
/// A channel with no 1–30 Hz power scores 0.
pub fn alpha_index(block: &SignalBlock) -> Result<Vec<f64>, DspError> {
    let required = (MIN_ALPHA_SECONDS * block.fs).ceil() as usize;
    if block.len() < required {
        return Err(DspError::TooShort {
            len: block.len(),
            required,
        });
    }
    let spec = welch_psd(
        block,
        WelchParams {
            segment_len: segment_len(block.fs, block.len()),
            overlap: 0.5,
        },
    )?;
    let alpha = band_power(&spec, 8.0, 12.0)?;
    let broad = band_power(&spec, 1.0, 30.0)?;
    Ok(alpha
        .iter()
        .zip(&broad)
        .map(|(&a, &b)| {
            if b > 0.0 {
                (a / b).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaConfig {
    /// Occipital channel indices.
    pub channels: Vec<usize>,
    pub enter: f64,
    pub exit: f64,
    pub min_duration_s: f64,
    pub window_s: f64,
    pub hop_s: f64,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self {
            channels: vec![6, 7],
            enter: 0.4,
            exit: 0.3,
            min_duration_s: 1.0,
            window_s: MIN_ALPHA_SECONDS,
            hop_s: 0.25,
        }
    }
}

impl AlphaConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if self.channels.is_empty() {
            return Err(DetectError::Config(
                "no occipital channels configured".into(),
            ));
        }
        if !(self.exit <= self.enter && self.enter <= 1.0 && self.exit >= 0.0) {
            return Err(DetectError::Config(
                "alpha hysteresis needs 0 <= exit <= enter <= 1".into(),
            ));
        }
        if !(self.window_s >= MIN_ALPHA_SECONDS && self.hop_s > 0.0) {
            return Err(DetectError::Config(format!(
                "alpha window must be >= {MIN_ALPHA_SECONDS} s"
            )));
        }
        Ok(())
    }
}

/// Alpha-rhythm presence detector with hysteresis on the mean occipital
/// [`alpha_index`] over a sliding window. Event edges are placed at the
/// centre of the window that crossed the threshold.
#[derive(Debug)]
pub struct AlphaDetector {
    config: AlphaConfig,
    fs: f64,
    t0: f64,
    n: u64,
    hop: u64,
    window: usize,
    buffers: Vec<VecDeque<f64>>,
    active: Option<(f64, f64)>,
}

impl AlphaDetector {
    pub fn new(config: AlphaConfig) -> Result<Self, DetectError> {
        config.validate()?;
        let n = config.channels.len();
        Ok(Self {
            config,
            fs: 0.0,
            t0: 0.0,
            n: 0,
            hop: 0,
            window: 0,
            buffers: vec![VecDeque::new(); n],
            active: None,
        })
    }

    pub fn process(&mut self, block: &SignalBlock) -> Result<Vec<DetectionEvent>, DetectError> {
        if self.hop == 0 {
            if let Some(&bad) = self
                .config
                .channels
                .iter()
                .find(|&&c| c >= block.channels())
            {
                return Err(DetectError::Config(format!(
                    "occipital channel {bad} not present in block"
                )));
            }
            self.fs = block.fs;
            self.t0 = block.t0;
            self.hop = ((self.config.hop_s * block.fs).round() as u64).max(1);
            self.window = (self.config.window_s * block.fs).round() as usize;
        } else if block.fs != self.fs {
            return Err(DetectError::Config(format!(
                "sample rate changed from {} to {}",
                self.fs, block.fs
            )));
        }
        let mut events = Vec::new();
        for i in 0..block.len() {
            for (buf, &ch) in self.buffers.iter_mut().zip(&self.config.channels) {
                if buf.len() == self.window {
                    buf.pop_front();
                }
                buf.push_back(block.data[ch][i]);
            }
            self.n += 1;
            if self.n.is_multiple_of(self.hop) && self.buffers[0].len() == self.window {
                let t_mid = self.t0 + self.n as f64 / self.fs - 0.5 * self.config.window_s;
                let win = SignalBlock {
                    fs: self.fs,
                    t0: t_mid,
                    data: self
                        .buffers
                        .iter()
                        .map(|b| b.iter().copied().collect())
                        .collect(),
                };
                let scores = alpha_index(&win)?;
                let mean = scores.iter().sum::<f64>() / scores.len() as f64;
                match &mut self.active {
                    None if mean > self.config.enter => self.active = Some((t_mid, mean)),
                    Some((start, peak)) => {
                        if mean < self.config.exit {
                            let (start, peak) = (*start, *peak);
                            self.active = None;
                            events.extend(self.emit(start, t_mid, peak));
                        } else {
                            *peak = peak.max(mean);
                        }
                    }
                    None => {}
                }
            }
        }
        Ok(events)
    }

    fn emit(&self, start: f64, end: f64, score: f64) -> Option<DetectionEvent> {
        (end - start >= self.config.min_duration_s).then(|| DetectionEvent {
            kind: EventKind::Alpha,
            t_start: start,
            t_end: end,
            channels: self.config.channels.clone(),
            score,
        })
    }

    /// Closes an open event at the current stream position.
    pub fn flush(&mut self) -> Vec<DetectionEvent> {
        match self.active.take() {
            Some((start, peak)) => {
                let end = self.t0 + self.n as f64 / self.fs;
                self.emit(start, end, peak).into_iter().collect()
            }
            None => Vec::new(),
        }
    }
}
