#![allow(dead_code)]

use pieeg_core::detect::{DetectionEvent, DetectionPipeline, EventKind, PipelineConfig};
use pieeg_core::dsp::SignalBlock;
use pieeg_core::protocol::RegisterFile;
use pieeg_core::simulator::{render, AlphaInterval, BlinkEvent, ChewEpisode, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FRONTAL: [usize; 2] = [0, 1];
pub const TEMPORAL: [usize; 4] = [2, 3, 4, 5];
pub const OCCIPITAL: [usize; 2] = [6, 7];

/// `count` blinks at least 3 s apart over `duration` seconds.
pub fn blink_scenario(seed: u64, count: usize, duration: f64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Scenario::new(duration, seed);
    let slot = (duration - 2.0) / count as f64;
    for i in 0..count {
        let t_center = 1.5 + i as f64 * slot + rng.random_range(0.0..(slot - 1.0).max(0.1));
        s.blink_events.push(BlinkEvent {
            t_center,
            duration_s: rng.random_range(0.2..0.4),
            amplitude_uv: rng.random_range(80.0..200.0),
            channels: FRONTAL.to_vec(),
        });
    }
    s
}

pub fn chew_scenario(seed: u64, t_start: f64, t_end: f64, duration: f64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Scenario::new(duration, seed);
    s.chew_episodes.push(ChewEpisode {
        t_start,
        t_end,
        burst_rate_hz: rng.random_range(0.8..2.0),
        burst_amplitude_uv: rng.random_range(20.0..40.0),
        channels: TEMPORAL.to_vec(),
    });
    s
}

pub fn alpha_scenario(seed: u64, t_start: f64, t_end: f64, duration: f64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Scenario::new(duration, seed);
    s.alpha_intervals.push(AlphaInterval {
        t_start,
        t_end,
        amplitude_uv: 20.0,
        frequency_hz: rng.random_range(8.5..11.5),
        channels: OCCIPITAL.to_vec(),
    });
    s
}

pub fn render_default(s: &Scenario) -> SignalBlock {
    render(s, &RegisterFile::default()).unwrap()
}

/// Feeds `block` in chunks of `chunk` samples and flushes.
pub fn detect(block: &SignalBlock, kinds: &[EventKind], chunk: usize) -> Vec<DetectionEvent> {
    let mut p = DetectionPipeline::new(PipelineConfig::only(kinds)).unwrap();
    let mut events = Vec::new();
    let mut start = 0;
    while start < block.len() {
        let end = (start + chunk).min(block.len());
        events.extend(p.process(&block.slice(start, end), false).unwrap());
        start = end;
    }
    events.extend(p.flush());
    events
}

/// Matches detected blinks to ground truth; returns (hits, false events).
pub fn score_blinks(s: &Scenario, events: &[DetectionEvent], tol: f64) -> (usize, usize) {
    let mut used = vec![false; events.len()];
    let mut hits = 0;
    for b in &s.blink_events {
        if let Some(i) = events
            .iter()
            .enumerate()
            .position(|(i, e)| !used[i] && (e.t_center() - b.t_center).abs() <= tol)
        {
            used[i] = true;
            hits += 1;
        }
    }
    (hits, used.iter().filter(|u| !**u).count())
}
