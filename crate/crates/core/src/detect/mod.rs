//! Streaming artifact and rhythm detectors.
//!
//! Every detector consumes [`SignalBlock`]s of any length and evaluates on
//! absolute sample positions, so the event list does not depend on how the
//! stream is chunked. Call `flush` at end of stream to close open events.

mod alpha;
mod blink;
mod chew;
mod stats;

pub use alpha::{alpha_index, AlphaConfig, AlphaDetector};
pub use blink::{BlinkConfig, BlinkDetector};
pub use chew::{ChewConfig, ChewDetector};
pub use stats::{mad, median};

use serde::{Deserialize, Serialize};

use crate::dsp::{design_bandpass, BiquadCascade, DspError, SignalBlock};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetectError {
    #[error("detector configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Blink,
    Chew,
    Alpha,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Blink => "blink",
            EventKind::Chew => "chew",
            EventKind::Alpha => "alpha",
        }
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "blink" => Ok(EventKind::Blink),
            "chew" => Ok(EventKind::Chew),
            "alpha" => Ok(EventKind::Alpha),
            other => Err(format!("unknown detector {other:?}")),
        }
    }
}

/// A detected episode. Times are in stream seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub kind: EventKind,
    pub t_start: f64,
    pub t_end: f64,
    pub channels: Vec<usize>,
    pub score: f64,
}

impl DetectionEvent {
    pub fn t_center(&self) -> f64 {
        0.5 * (self.t_start + self.t_end)
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Intersection over union with `[a, b]`.
    pub fn jaccard(&self, a: f64, b: f64) -> f64 {
        let inter = (self.t_end.min(b) - self.t_start.max(a)).max(0.0);
        let union = self.t_end.max(b) - self.t_start.min(a);
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }
}

fn mask_to_channels(mask: u32) -> Vec<usize> {
    (0..32).filter(|c| mask & (1 << c) != 0).collect()
}

/// Which detectors run and how.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub blink: Option<BlinkConfig>,
    pub chew: Option<ChewConfig>,
    pub alpha: Option<AlphaConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            blink: Some(BlinkConfig::default()),
            chew: Some(ChewConfig::default()),
            alpha: Some(AlphaConfig::default()),
        }
    }
}

impl PipelineConfig {
    /// Default configuration restricted to `kinds`.
    pub fn only(kinds: &[EventKind]) -> Self {
        let d = Self::default();
        Self {
            blink: d.blink.filter(|_| kinds.contains(&EventKind::Blink)),
            chew: d.chew.filter(|_| kinds.contains(&EventKind::Chew)),
            alpha: d.alpha.filter(|_| kinds.contains(&EventKind::Alpha)),
        }
    }
}

/// Runs the enabled detectors over raw or band-passed blocks.
///
/// The blink detector needs 1–30 Hz band-passed input; when a block is not
/// marked as already filtered the pipeline applies its own causal band-pass.
/// A sample-rate change restarts every detector.
#[derive(Debug)]
pub struct DetectionPipeline {
    config: PipelineConfig,
    fs: Option<f64>,
    bandpass: Option<BiquadCascade>,
    blink: Option<BlinkDetector>,
    chew: Option<ChewDetector>,
    alpha: Option<AlphaDetector>,
}

impl DetectionPipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, DetectError> {
        if let Some(b) = &config.blink {
            b.validate()?;
        }
        if let Some(c) = &config.chew {
            c.validate()?;
        }
        if let Some(a) = &config.alpha {
            a.validate()?;
        }
        Ok(Self {
            config,
            fs: None,
            bandpass: None,
            blink: None,
            chew: None,
            alpha: None,
        })
    }

    fn start(&mut self, fs: f64) -> Result<(), DetectError> {
        self.fs = Some(fs);
        self.bandpass = Some(design_bandpass(fs, 1.0, 30.0, 4)?);
        self.blink = self
            .config
            .blink
            .clone()
            .map(BlinkDetector::new)
            .transpose()?;
        self.chew = self
            .config
            .chew
            .clone()
            .map(ChewDetector::new)
            .transpose()?;
        self.alpha = self
            .config
            .alpha
            .clone()
            .map(AlphaDetector::new)
            .transpose()?;
        Ok(())
    }

    /// Feeds one block. `prefiltered` marks input that already went through
    /// the 1–30 Hz band-pass.
    pub fn process(
        &mut self,
        block: &SignalBlock,
        prefiltered: bool,
    ) -> Result<Vec<DetectionEvent>, DetectError> {
        let mut events = Vec::new();
        if self.fs != Some(block.fs) {
            if self.fs.is_some() {
                events.extend(self.flush());
            }
            self.start(block.fs)?;
        }
        if let Some(blink) = &mut self.blink {
            if prefiltered {
                events.extend(blink.process(block)?);
            } else {
                let filtered = crate::dsp::filter_block(self.bandpass.as_mut().unwrap(), block)?;
                events.extend(blink.process(&filtered)?);
            }
        }
        if let Some(chew) = &mut self.chew {
            events.extend(chew.process(block)?);
        }
        if let Some(alpha) = &mut self.alpha {
            events.extend(alpha.process(block)?);
        }
        Ok(events)
    }

    /// Closes open events at end of stream.
    pub fn flush(&mut self) -> Vec<DetectionEvent> {
        let mut events = Vec::new();
        if let Some(b) = &mut self.blink {
            events.extend(b.flush());
        }
        if let Some(c) = &mut self.chew {
            events.extend(c.flush());
        }
        if let Some(a) = &mut self.alpha {
            events.extend(a.flush());
        }
        events
    }
}
