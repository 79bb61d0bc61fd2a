use std::collections::VecDeque;

use super::{mask_to_channels, stats, DetectError, DetectionEvent, EventKind};
use crate::dsp::SignalBlock;

#[derive(Debug, Clone, PartialEq)]
pub struct BlinkConfig {
    /// Frontal channel indices.
    pub channels: Vec<usize>,
    /// Threshold in MADs above the rolling median.
    pub k: f64,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    /// Excursions closer than this to the previous one belong to the same event.
    pub refractory_s: f64,
    pub baseline_s: f64,
    /// Baseline history needed before detection starts.
    pub warmup_s: f64,
    pub update_s: f64,
}

impl Default for BlinkConfig {
    fn default() -> Self {
        Self {
            channels: vec![0, 1],
            k: 6.0,
            min_duration_s: 0.1,
            max_duration_s: 0.5,
            refractory_s: 0.3,
            baseline_s: 10.0,
            warmup_s: 1.0,
            update_s: 0.25,
        }
    }
}

impl BlinkConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if self.channels.is_empty() {
            return Err(DetectError::Config("no frontal channels configured".into()));
        }
        if self.channels.iter().any(|&c| c >= 32) {
            return Err(DetectError::Config(
                "frontal channel index out of range".into(),
            ));
        }
        if !(self.k > 0.0 && self.min_duration_s < self.max_duration_s) {
            return Err(DetectError::Config(
                "blink threshold or duration bounds invalid".into(),
            ));
        }
        if !(self.warmup_s > 0.0 && self.warmup_s <= self.baseline_s && self.update_s > 0.0) {
            return Err(DetectError::Config("blink baseline windows invalid".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Run {
    start: f64,
    score: f64,
    mask: u32,
}

#[derive(Debug, Clone)]
struct Group {
    start: f64,
    end: f64,
    score: f64,
    mask: u32,
    suppress_until: f64,
}

#[derive(Debug, Clone)]
struct Timing {
    fs: f64,
    t0: f64,
    decim: u64,
    history_cap: usize,
    warmup: usize,
    update_every: u64,
}

/// Blink detector on band-passed frontal channels.
///
/// A sample is excursive when any frontal channel deviates from its rolling
/// median by more than `k` MADs. A contiguous excursive run of
/// `min..=max` duration opens an event; runs starting within the refractory
/// gap of the previous run join it, and the event keeps the span of its
/// highest-scoring valid run. The baseline is frozen while an event is open.
#[derive(Debug)]
pub struct BlinkDetector {
    config: BlinkConfig,
    timing: Option<Timing>,
    n: u64,
    history: Vec<VecDeque<f64>>,
    baseline: Vec<Option<(f64, f64)>>,
    scratch: Vec<f64>,
    run: Option<Run>,
    group: Option<Group>,
}

impl BlinkDetector {
    pub fn new(config: BlinkConfig) -> Result<Self, DetectError> {
        config.validate()?;
        let n_ch = config.channels.len();
        Ok(Self {
            config,
            timing: None,
            n: 0,
            history: vec![VecDeque::new(); n_ch],
            baseline: vec![None; n_ch],
            scratch: Vec::new(),
            run: None,
            group: None,
        })
    }

    fn init_timing(&mut self, block: &SignalBlock) -> Result<(), DetectError> {
        if let Some(&bad) = self
            .config
            .channels
            .iter()
            .find(|&&c| c >= block.channels())
        {
            return Err(DetectError::Config(format!(
                "frontal channel {bad} not present in {}-channel block",
                block.channels()
            )));
        }
        let fs = block.fs;
        let decim = (fs / 250.0).round().max(1.0) as u64;
        let hist_rate = fs / decim as f64;
        self.timing = Some(Timing {
            fs,
            t0: block.t0,
            decim,
            history_cap: (self.config.baseline_s * hist_rate).ceil() as usize,
            warmup: (self.config.warmup_s * hist_rate).ceil() as usize,
            update_every: ((self.config.update_s * fs).round() as u64).max(1),
        });
        Ok(())
    }

    pub fn process(&mut self, block: &SignalBlock) -> Result<Vec<DetectionEvent>, DetectError> {
        if self.timing.is_none() {
            self.init_timing(block)?;
        }
        let timing = self.timing.clone().unwrap();
        if block.fs != timing.fs {
            return Err(DetectError::Config(format!(
                "sample rate changed from {} to {}",
                timing.fs, block.fs
            )));
        }
        let mut events = Vec::new();
        for i in 0..block.len() {
            let t = timing.t0 + self.n as f64 / timing.fs;
            let mut mask = 0u32;
            let mut score = 0.0f64;
            for (slot, &ch) in self.config.channels.iter().enumerate() {
                if let Some((med, spread)) = self.baseline[slot] {
                    let dev = (block.data[ch][i] - med).abs();
                    if dev > self.config.k * spread {
                        mask |= 1 << ch;
                        score = score.max(dev / spread.max(1e-12));
                    }
                }
            }

            if mask != 0 {
                let run = self.run.get_or_insert(Run {
                    start: t,
                    score: 0.0,
                    mask: 0,
                });
                run.score = run.score.max(score);
                run.mask |= mask;
            } else if let Some(run) = self.run.take() {
                self.close_run(run, t, &mut events);
            }

            if self.run.is_none() {
                if let Some(g) = &self.group {
                    if t > g.suppress_until {
                        let g = self.group.take().unwrap();
                        events.push(emit(g));
                    }
                }
            }

            let quiet = self.run.is_none() && self.group.is_none();
            if quiet && self.n.is_multiple_of(timing.decim) {
                for (slot, &ch) in self.config.channels.iter().enumerate() {
                    let h = &mut self.history[slot];
                    if h.len() == timing.history_cap {
                        h.pop_front();
                    }
                    h.push_back(block.data[ch][i]);
                }
            }
            self.n += 1;
            if self.n.is_multiple_of(timing.update_every) {
                for (h, base) in self.history.iter_mut().zip(self.baseline.iter_mut()) {
                    if h.len() >= timing.warmup {
                        *base = stats::mad(h.make_contiguous(), &mut self.scratch);
                    }
                }
            }
        }
        Ok(events)
    }

    fn close_run(&mut self, run: Run, end: f64, events: &mut Vec<DetectionEvent>) {
        let cfg = &self.config;
        let dur = end - run.start;
        let valid = dur >= cfg.min_duration_s && dur <= cfg.max_duration_s;
        match &mut self.group {
            Some(g) if run.start <= g.suppress_until => {
                g.suppress_until = g.suppress_until.max(end + cfg.refractory_s);
                if valid && run.score > g.score {
                    g.start = run.start;
                    g.end = end;
                    g.score = run.score;
                    g.mask = run.mask;
                }
            }
            _ if valid => {
                if let Some(g) = self.group.take() {
                    events.push(emit(g));
                }
                self.group = Some(Group {
                    start: run.start,
                    end,
                    score: run.score,
                    mask: run.mask,
                    suppress_until: end + cfg.refractory_s,
                });
            }
            _ => {}
        }
    }

    /// Closes any open run and event.
    pub fn flush(&mut self) -> Vec<DetectionEvent> {
        let mut events = Vec::new();
        if let Some(timing) = &self.timing {
            let t = timing.t0 + self.n as f64 / timing.fs;
            if let Some(run) = self.run.take() {
                self.close_run(run, t, &mut events);
            }
        }
        if let Some(g) = self.group.take() {
            events.push(emit(g));
        }
        events
    }
}

fn emit(g: Group) -> DetectionEvent {
    DetectionEvent {
        kind: EventKind::Blink,
        t_start: g.start,
        t_end: g.end,
        channels: mask_to_channels(g.mask),
        score: g.score,
    }
}
