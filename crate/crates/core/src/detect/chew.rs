use std::collections::VecDeque;

use super::{mask_to_channels, stats, DetectError, DetectionEvent, EventKind};
use crate::dsp::{design_bandpass, BiquadCascade, SignalBlock};

#[derive(Debug, Clone, PartialEq)]
pub struct ChewConfig {
    /// Channels to monitor; `None` means every channel in the block.
    pub channels: Option<Vec<usize>>,
    pub band_hz: (f64, f64),
    /// Power ratio over the rolling baseline that marks a channel active.
    pub k: f64,
    /// Channels that must be active at once.
    pub min_channels: usize,
    pub window_s: f64,
    /// Short window used to find individual bursts.
    pub envelope_s: f64,
    pub hop_s: f64,
    pub baseline_s: f64,
    pub warmup_s: f64,
    /// Inactivity that ends an episode.
    pub hangover_s: f64,
    /// Accepted burst repetition rate.
    pub burst_rate_hz: (f64, f64),
    /// Relative slack on the repetition-rate bounds.
    pub rate_tolerance: f64,
}

impl Default for ChewConfig {
    fn default() -> Self {
        Self {
            channels: None,
            band_hz: (15.0, 30.0),
            k: 5.0,
            min_channels: 2,
            window_s: 1.0,
            envelope_s: 0.1,
            hop_s: 0.05,
            baseline_s: 30.0,
            warmup_s: 2.0,
            hangover_s: 0.5,
            burst_rate_hz: (0.5, 2.5),
            rate_tolerance: 0.15,
        }
    }
}

impl ChewConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if self.min_channels == 0 || self.k <= 0.0 {
            return Err(DetectError::Config(
                "chew needs k > 0 and min_channels >= 1".into(),
            ));
        }
        if let Some(ch) = &self.channels {
            if ch.len() < self.min_channels || ch.iter().any(|&c| c >= 32) {
                return Err(DetectError::Config(
                    "chew channel set too small or out of range".into(),
                ));
            }
        }
        if !(self.envelope_s > 0.0 && self.envelope_s <= self.window_s && self.hop_s > 0.0) {
            return Err(DetectError::Config("chew windows invalid".into()));
        }
        if !(self.warmup_s <= self.baseline_s && self.burst_rate_hz.0 < self.burst_rate_hz.1) {
            return Err(DetectError::Config(
                "chew baseline or rate bounds invalid".into(),
            ));
        }
        Ok(())
    }
}

/// Power of the most recent `cap` squared samples.
#[derive(Debug, Clone)]
struct MovingPower {
    buf: VecDeque<f64>,
    cap: usize,
    sum: f64,
}

impl MovingPower {
    fn new(cap: usize) -> Self {
        Self {
            buf: VecDeque::with_capacity(cap),
            cap,
            sum: 0.0,
        }
    }

    fn push(&mut self, v: f64) {
        if self.buf.len() == self.cap {
            self.sum -= self.buf.pop_front().unwrap();
        }
        self.buf.push_back(v);
        self.sum += v;
    }

    fn mean(&self) -> f64 {
        if self.buf.is_empty() {
            0.0
        } else {
            (self.sum / self.buf.len() as f64).max(0.0)
        }
    }

    fn resum(&mut self) {
        self.sum = self.buf.iter().sum();
    }
}

#[derive(Debug)]
struct Channel {
    index: usize,
    long: MovingPower,
    short: MovingPower,
    history: VecDeque<f64>,
    baseline: Option<f64>,
    bursting: bool,
}

#[derive(Debug, Default)]
struct Episode {
    onsets: Vec<f64>,
    offsets: Vec<f64>,
    quiet_since: Option<f64>,
    mask: u32,
    score: f64,
}

/// Chewing detector.
///
/// Each monitored channel is band-passed to the EMG band; a 1 s moving power
/// compared against a rolling median baseline marks the channel active, and
/// a short envelope marks individual bursts. An episode runs while enough
/// channels are active and is reported only if its bursts repeat within the
/// configured rate range. The event spans first burst onset to last burst
/// offset.
#[derive(Debug)]
pub struct ChewDetector {
    config: ChewConfig,
    fs: f64,
    t0: f64,
    n: u64,
    hop: u64,
    filter: Option<BiquadCascade>,
    channels: Vec<Channel>,
    history_cap: usize,
    warmup: usize,
    scratch: Vec<f64>,
    combined_burst: bool,
    episode: Option<Episode>,
}

impl ChewDetector {
    pub fn new(config: ChewConfig) -> Result<Self, DetectError> {
        config.validate()?;
        Ok(Self {
            config,
            fs: 0.0,
            t0: 0.0,
            n: 0,
            hop: 1,
            filter: None,
            channels: Vec::new(),
            history_cap: 0,
            warmup: 0,
            scratch: Vec::new(),
            combined_burst: false,
            episode: None,
        })
    }

    fn init(&mut self, block: &SignalBlock) -> Result<(), DetectError> {
        let cfg = &self.config;
        let fs = block.fs;
        if fs < 100.0 {
            return Err(DetectError::Config(format!(
                "chew detection needs >= 100 SPS, got {fs}"
            )));
        }
        let indices: Vec<usize> = match &cfg.channels {
            Some(c) => c.clone(),
            None => (0..block.channels()).collect(),
        };
        if indices.len() < cfg.min_channels || indices.iter().any(|&c| c >= block.channels()) {
            return Err(DetectError::Config(
                "chew channels not present in block".into(),
            ));
        }
        let long = ((cfg.window_s * fs).round() as usize).max(1);
        let short = ((cfg.envelope_s * fs).round() as usize).max(1);
        self.fs = fs;
        self.t0 = block.t0;
        self.hop = ((cfg.hop_s * fs).round() as u64).max(1);
        self.history_cap = (cfg.baseline_s / cfg.hop_s).ceil() as usize;
        self.warmup = (cfg.warmup_s / cfg.hop_s).ceil() as usize;
        self.filter = Some(design_bandpass(fs, cfg.band_hz.0, cfg.band_hz.1, 4)?);
        self.channels = indices
            .into_iter()
            .map(|index| Channel {
                index,
                long: MovingPower::new(long),
                short: MovingPower::new(short),
                history: VecDeque::new(),
                baseline: None,
                bursting: false,
            })
            .collect();
        Ok(())
    }

    pub fn process(&mut self, block: &SignalBlock) -> Result<Vec<DetectionEvent>, DetectError> {
        if self.filter.is_none() {
            self.init(block)?;
        } else if block.fs != self.fs {
            return Err(DetectError::Config(format!(
                "sample rate changed from {} to {}",
                self.fs, block.fs
            )));
        }
        let picked = SignalBlock {
            fs: block.fs,
            t0: block.t0,
            data: self
                .channels
                .iter()
                .map(|c| block.data[c.index].clone())
                .collect(),
        };
        let band = crate::dsp::filter_block(self.filter.as_mut().unwrap(), &picked)?;

        let mut events = Vec::new();
        for i in 0..band.len() {
            for (c, samples) in self.channels.iter_mut().zip(&band.data) {
                let p = samples[i] * samples[i];
                c.long.push(p);
                c.short.push(p);
            }
            self.n += 1;
            if self.n.is_multiple_of(self.hop) {
                let t = self.t0 + self.n as f64 / self.fs;
                if let Some(ev) = self.evaluate(t) {
                    events.push(ev);
                }
            }
            if self.n.is_multiple_of(64 * self.hop) {
                for c in &mut self.channels {
                    c.long.resum();
                    c.short.resum();
                }
            }
        }
        Ok(events)
    }

    fn evaluate(&mut self, t: f64) -> Option<DetectionEvent> {
        let k = self.config.k;
        let mut active = 0usize;
        let mut active_mask = 0u32;
        let mut bursting = 0usize;
        let mut ratio = 0.0f64;
        for c in &mut self.channels {
            let Some(base) = c.baseline else { continue };
            let p = c.long.mean();
            if p > k * base {
                active += 1;
                active_mask |= 1 << c.index;
                ratio = ratio.max(p / base.max(1e-30));
            }
            let e = c.short.mean();
            c.bursting = if c.bursting {
                e > 0.5 * k * base
            } else {
                e > k * base
            };
            if c.bursting {
                bursting += 1;
            }
        }

        let min = self.config.min_channels;
        let burst_now = bursting >= min;
        // envelope crossings lag the burst edges by about half the envelope window
        let edge_t = t - 0.5 * self.config.envelope_s;
        let mut emitted = None;

        match &mut self.episode {
            None => {
                if active >= min {
                    self.episode = Some(Episode::default());
                }
            }
            Some(ep) => {
                if active >= min {
                    ep.quiet_since = None;
                } else {
                    let since = *ep.quiet_since.get_or_insert(t);
                    if t - since >= self.config.hangover_s {
                        let ep = self.episode.take().unwrap();
                        emitted = self.finish(ep, edge_t);
                    }
                }
            }
        }
        if let Some(ep) = &mut self.episode {
            ep.mask |= active_mask;
            ep.score = ep.score.max(ratio);
            if burst_now && !self.combined_burst {
                ep.onsets.push(edge_t);
            } else if !burst_now && self.combined_burst && !ep.onsets.is_empty() {
                ep.offsets.push(edge_t);
            }
        }
        self.combined_burst = burst_now;

        if self.episode.is_none() {
            for c in &mut self.channels {
                if c.history.len() == self.history_cap {
                    c.history.pop_front();
                }
                c.history.push_back(c.long.mean());
                if c.history.len() >= self.warmup {
                    self.scratch.clear();
                    self.scratch.extend(c.history.iter().copied());
                    c.baseline = stats::median(&mut self.scratch);
                }
            }
        }
        emitted
    }

    fn finish(&self, ep: Episode, t_now: f64) -> Option<DetectionEvent> {
        if ep.onsets.len() < 2 {
            return None;
        }
        let mut intervals: Vec<f64> = ep.onsets.windows(2).map(|w| w[1] - w[0]).collect();
        let period = stats::median(&mut intervals)?;
        let rate = 1.0 / period;
        let (lo, hi) = self.config.burst_rate_hz;
        let tol = self.config.rate_tolerance;
        if rate < lo * (1.0 - tol) || rate > hi * (1.0 + tol) {
            return None;
        }
        let t_start = ep.onsets[0];
        let t_end = match ep.offsets.last() {
            Some(&off) if ep.offsets.len() >= ep.onsets.len() => off,
            _ => t_now,
        };
        if t_end <= t_start || ep.mask == 0 {
            return None;
        }
        Some(DetectionEvent {
            kind: EventKind::Chew,
            t_start,
            t_end,
            channels: mask_to_channels(ep.mask),
            score: ep.score,
        })
    }

    /// Closes an open episode.
    pub fn flush(&mut self) -> Vec<DetectionEvent> {
        let t = self.t0 + self.n as f64 / self.fs.max(f64::MIN_POSITIVE);
        self.episode
            .take()
            .and_then(|ep| self.finish(ep, t))
            .into_iter()
            .collect()
    }
}
