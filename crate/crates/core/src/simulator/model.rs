use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Contact, Scenario, SimError};
use crate::NUM_CHANNELS;

/// Level a disconnected electrode drifts around, µV. Above the ±4.5 V rail at
/// every gain, so the converter saturates.
pub const DISCONNECTED_LEVEL_UV: f64 = 5.0e6;
const DISCONNECTED_SWING_UV: f64 = 1.0e6;
const DISCONNECTED_DRIFT_HZ: f64 = 0.05;

const CHEW_COMPONENTS: usize = 6;
const CHEW_BAND_HZ: (f64, f64) = (15.0, 30.0);
/// Fraction of each chew period occupied by the burst.
const CHEW_DUTY: f64 = 0.5;

/// Number of Voss-McCartney rows for `fs`: the slowest row holds its value
/// for at most `fs / 4` samples, so the pink spectrum spans roughly 4 Hz to
/// Nyquist.
fn pink_rows(fs: f64) -> usize {
    let max_hold = (fs / 4.0).max(1.0);
    max_hold.log2().floor() as usize + 1
}

/// Sequential per-channel noise source. Pink noise is a Voss-McCartney sum of
/// `rows` held Gaussian values plus one fresh Gaussian; every component has
/// unit variance, so dividing by `sqrt(rows + 1)` gives unit RMS.
#[derive(Debug, Clone)]
struct NoiseChannel {
    seed: u64,
    channel: usize,
    rng: ChaCha8Rng,
    rows: Vec<f64>,
    cursor: u64,
    pink_scale: f64,
    white_scale: f64,
    last: (f64, f64),
}

impl NoiseChannel {
    fn new(seed: u64, channel: usize, rows: usize, pink_rms: f64, white_rms: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(channel as u64);
        Self {
            seed,
            channel,
            rng,
            rows: vec![0.0; rows],
            cursor: 0,
            pink_scale: pink_rms / ((rows + 1) as f64).sqrt(),
            white_scale: white_rms,
            last: (0.0, 0.0),
        }
    }

    fn restart(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.rng.set_stream(self.channel as u64);
        self.rows.iter_mut().for_each(|r| *r = 0.0);
        self.cursor = 0;
    }

    fn gauss(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    fn advance(&mut self) {
        let n = self.cursor;
        for k in 0..self.rows.len() {
            if n.is_multiple_of(1u64 << k) {
                self.rows[k] = self.gauss();
            }
        }
        let fresh = self.gauss();
        let env = self.gauss();
        let pink = (self.rows.iter().sum::<f64>() + fresh) * self.pink_scale;
        self.last = (pink, env * self.white_scale);
        self.cursor += 1;
    }

    /// Noise at sample index `n`; cheap when called with increasing `n`.
    fn at(&mut self, n: u64) -> f64 {
        if n + 1 < self.cursor {
            self.restart();
        }
        while self.cursor <= n {
            self.advance();
        }
        self.last.0 + self.last.1
    }
}

#[derive(Debug, Clone)]
struct Burst {
    t_start: f64,
    len: f64,
    amplitude: f64,
    channels: Vec<usize>,
    /// `(frequency, phase)` per channel.
    components: Vec<[(f64, f64); CHEW_COMPONENTS]>,
}

impl Burst {
    fn value(&self, t: f64, ch: usize) -> f64 {
        let u = (t - self.t_start) / self.len;
        if !(0.0..1.0).contains(&u) || !self.channels.contains(&ch) {
            return 0.0;
        }
        let envelope = 0.5 - 0.5 * (2.0 * PI * u).cos();
        let dt = t - self.t_start;
        let carrier: f64 = self.components[ch]
            .iter()
            .map(|&(f, phi)| (2.0 * PI * f * dt + phi).sin())
            .sum();
        // sum of M unit sines has RMS sqrt(M/2); scale to the RMS of a unit sine
        self.amplitude * envelope * carrier / (CHEW_COMPONENTS as f64).sqrt()
    }
}

/// Generative signal model for one scenario at a fixed sample rate.
///
/// Deterministic components (mains, alpha, blink, chew, electrode drift) are
/// evaluated at continuous time; noise is indexed by sample number so a
/// given `(scenario, fs, t, channel)` always yields the same value.
#[derive(Debug, Clone)]
pub struct SignalModel {
    scenario: Scenario,
    fs: f64,
    noise: Vec<NoiseChannel>,
    bursts: Vec<Burst>,
}

impl SignalModel {
    pub fn new(scenario: &Scenario, fs: f64) -> Result<Self, SimError> {
        scenario.validate()?;
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(SimError::Domain(format!("sample rate {fs}")));
        }
        let rows = pink_rows(fs);
        let noise = (0..NUM_CHANNELS)
            .map(|ch| {
                NoiseChannel::new(
                    scenario.seed,
                    ch,
                    rows,
                    scenario.background_noise_uv_rms,
                    scenario.environment_noise_uv_rms,
                )
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        rng.set_stream(u64::MAX);
        let mut bursts = Vec::new();
        for ep in &scenario.chew_episodes {
            let period = 1.0 / ep.burst_rate_hz;
            let mut start = ep.t_start;
            while start < ep.t_end {
                let len = (CHEW_DUTY * period).min(ep.t_end - start);
                let components = (0..NUM_CHANNELS)
                    .map(|_| {
                        std::array::from_fn(|_| {
                            (
                                rng.random_range(CHEW_BAND_HZ.0..CHEW_BAND_HZ.1),
                                rng.random_range(0.0..2.0 * PI),
                            )
                        })
                    })
                    .collect();
                bursts.push(Burst {
                    t_start: start,
                    len,
                    amplitude: ep.burst_amplitude_uv,
                    channels: ep.channels.clone(),
                    components,
                });
                start += period;
            }
        }
        Ok(Self {
            scenario: scenario.clone(),
            fs,
            noise,
            bursts,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    /// Noise-free part of the signal at scenario time `t`.
    pub fn deterministic(&self, t: f64, ch: usize) -> f64 {
        let s = &self.scenario;
        if s.contact_at(ch, t) == Contact::Disconnected {
            return DISCONNECTED_LEVEL_UV
                + DISCONNECTED_SWING_UV * (2.0 * PI * DISCONNECTED_DRIFT_HZ * t).sin();
        }
        let mut v = 0.0;
        if let Some(m) = &s.mains {
            v += m.amplitude_uv * (2.0 * PI * m.frequency_hz * t).sin();
        }
        for a in &s.alpha_intervals {
            if t >= a.t_start && t <= a.t_end && a.channels.contains(&ch) {
                v += a.amplitude_uv * (2.0 * PI * a.frequency_hz * (t - a.t_start)).sin();
            }
        }
        for b in &s.blink_events {
            let u = (t - b.t_center) / b.duration_s;
            if u.abs() < 0.5 && b.channels.contains(&ch) {
                v += b.amplitude_uv * 0.5 * (1.0 + (2.0 * PI * u).cos());
            }
        }
        for burst in &self.bursts {
            v += burst.value(t, ch);
        }
        v
    }

    /// Full sample: deterministic part at scenario time `t` plus noise at
    /// sample index `n`. Disconnected electrodes carry no noise.
    pub fn value(&mut self, n: u64, t: f64, ch: usize) -> f64 {
        let det = self.deterministic(t, ch);
        if self.scenario.contact_at(ch, t) == Contact::Disconnected {
            return det;
        }
        det + self.noise[ch].at(n)
    }

    /// Microvolt value of `channel` at time `t` in `[0, duration]`.
    pub fn synth_sample(&mut self, t: f64, channel: usize) -> Result<f64, SimError> {
        if !(0.0..=self.scenario.duration).contains(&t) {
            return Err(SimError::Domain(format!(
                "t={t} outside [0, {}]",
                self.scenario.duration
            )));
        }
        if channel >= NUM_CHANNELS {
            return Err(SimError::Domain(format!("channel {channel} out of range")));
        }
        let n = (t * self.fs).round() as u64;
        Ok(self.value(n, t, channel))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{AlphaInterval, BlinkEvent, ChewEpisode};

    #[test]
    fn silent_is_zero() {
        let mut m = SignalModel::new(&Scenario::silent(2.0), 250.0).unwrap();
        for i in 0..500 {
            for ch in 0..8 {
                assert_eq!(m.synth_sample(i as f64 / 250.0, ch).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn alpha_is_phase_zero_sine() {
        let mut s = Scenario::silent(2.0);
        s.alpha_intervals.push(AlphaInterval {
            t_start: 0.0,
            t_end: 2.0,
            amplitude_uv: 20.0,
            frequency_hz: 10.0,
            channels: vec![6, 7],
        });
        let mut m = SignalModel::new(&s, 250.0).unwrap();
        for i in 0..500 {
            let t = i as f64 / 250.0;
            let expected = 20.0 * (2.0 * PI * 10.0 * t).sin();
            assert!((m.synth_sample(t, 6).unwrap() - expected).abs() < 1e-9);
            assert_eq!(m.synth_sample(t, 0).unwrap(), 0.0);
        }
    }

    #[test]
    fn blink_peak_at_centre() {
        let mut s = Scenario::silent(4.0);
        s.blink_events.push(BlinkEvent {
            t_center: 2.0,
            duration_s: 0.3,
            amplitude_uv: 150.0,
            channels: vec![0, 1],
        });
        let mut m = SignalModel::new(&s, 250.0).unwrap();
        assert!((m.synth_sample(2.0, 0).unwrap() - 150.0).abs() < 1e-12);
        assert!((m.synth_sample(2.0, 1).unwrap() - 150.0).abs() < 1e-12);
        assert_eq!(m.synth_sample(2.0, 2).unwrap(), 0.0);
        assert_eq!(m.synth_sample(2.2, 0).unwrap(), 0.0);
        assert!(m.synth_sample(4.1, 0).is_err());
    }

    #[test]
    fn chew_confined_to_bursts() {
        let mut s = Scenario::silent(10.0);
        s.chew_episodes.push(ChewEpisode {
            t_start: 3.0,
            t_end: 8.0,
            burst_rate_hz: 1.0,
            burst_amplitude_uv: 30.0,
            channels: vec![2, 3],
        });
        let mut m = SignalModel::new(&s, 250.0).unwrap();
        let energy = |m: &mut SignalModel, a: f64, b: f64, ch| {
            let (na, nb) = ((a * 250.0) as usize, (b * 250.0) as usize);
            (na..nb)
                .map(|n| m.synth_sample(n as f64 / 250.0, ch).unwrap().powi(2))
                .sum::<f64>()
                / (nb - na) as f64
        };
        assert_eq!(energy(&mut m, 0.0, 3.0, 2), 0.0);
        // second half of every period is quiet
        assert_eq!(energy(&mut m, 3.5, 4.0, 2), 0.0);
        assert!(energy(&mut m, 3.0, 3.5, 2) > 10.0);
        assert_eq!(energy(&mut m, 3.0, 8.0, 0), 0.0);
    }

    #[test]
    fn noise_is_reproducible_under_random_access() {
        let mut a = SignalModel::new(&Scenario::new(10.0, 9), 250.0).unwrap();
        let mut b = SignalModel::new(&Scenario::new(10.0, 9), 250.0).unwrap();
        let forward: Vec<f64> = (0..1000)
            .map(|n| a.synth_sample(n as f64 / 250.0, 3).unwrap())
            .collect();
        let backward: Vec<f64> = (0..1000)
            .rev()
            .step_by(7)
            .map(|n| b.synth_sample(n as f64 / 250.0, 3).unwrap())
            .collect();
        for (i, n) in (0..1000).rev().step_by(7).enumerate() {
            assert_eq!(forward[n], backward[i]);
        }
    }

    #[test]
    fn pink_rows_span() {
        assert_eq!(pink_rows(250.0), 6);
        assert_eq!(pink_rows(16000.0), 12);
    }
}
