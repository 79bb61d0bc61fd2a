use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::protocol::{EXTERNAL_NOISE_UV, INTERNAL_NOISE_UV};
use crate::NUM_CHANNELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contact {
    Connected,
    Disconnected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MainsHum {
    /// 50 or 60 Hz.
    pub frequency_hz: f64,
    pub amplitude_uv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaInterval {
    pub t_start: f64,
    pub t_end: f64,
    pub amplitude_uv: f64,
    pub frequency_hz: f64,
    pub channels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlinkEvent {
    pub t_center: f64,
    pub duration_s: f64,
    pub amplitude_uv: f64,
    pub channels: Vec<usize>,
}

impl BlinkEvent {
    pub fn t_start(&self) -> f64 {
        self.t_center - self.duration_s / 2.0
    }

    pub fn t_end(&self) -> f64 {
        self.t_center + self.duration_s / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChewEpisode {
    pub t_start: f64,
    pub t_end: f64,
    pub burst_rate_hz: f64,
    pub burst_amplitude_uv: f64,
    pub channels: Vec<usize>,
}

/// Scripted change of one electrode's contact state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactChange {
    pub t: f64,
    pub channel: usize,
    pub state: Contact,
}

/// Ground-truth description of a synthetic recording.
///
/// Channel indices are zero-based. Serialized as TOML; see `scenarios/` for
/// examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_background")]
    pub background_noise_uv_rms: f64,
    #[serde(default = "default_environment")]
    pub environment_noise_uv_rms: f64,
    #[serde(default)]
    pub mains: Option<MainsHum>,
    #[serde(default, rename = "alpha")]
    pub alpha_intervals: Vec<AlphaInterval>,
    #[serde(default, rename = "blink")]
    pub blink_events: Vec<BlinkEvent>,
    #[serde(default, rename = "chew")]
    pub chew_episodes: Vec<ChewEpisode>,
    #[serde(default = "all_connected")]
    pub electrode_contact: [Contact; NUM_CHANNELS],
    #[serde(default, rename = "contact_change")]
    pub contact_changes: Vec<ContactChange>,
}

fn default_background() -> f64 {
    INTERNAL_NOISE_UV
}

fn default_environment() -> f64 {
    EXTERNAL_NOISE_UV
}

fn all_connected() -> [Contact; NUM_CHANNELS] {
    [Contact::Connected; NUM_CHANNELS]
}

impl Scenario {
    /// Both noise sources at their datasheet defaults, nothing else.
    pub fn new(duration: f64, seed: u64) -> Self {
        Self {
            duration,
            seed,
            background_noise_uv_rms: INTERNAL_NOISE_UV,
            environment_noise_uv_rms: EXTERNAL_NOISE_UV,
            mains: None,
            alpha_intervals: Vec::new(),
            blink_events: Vec::new(),
            chew_episodes: Vec::new(),
            electrode_contact: all_connected(),
            contact_changes: Vec::new(),
        }
    }

    /// No signal and no noise.
    pub fn silent(duration: f64) -> Self {
        Self {
            background_noise_uv_rms: 0.0,
            environment_noise_uv_rms: 0.0,
            ..Self::new(duration, 0)
        }
    }

    /// Internal (background) noise only, at the 0.4 µV datasheet figure.
    pub fn noise_only(duration: f64, seed: u64) -> Self {
        Self {
            environment_noise_uv_rms: 0.0,
            ..Self::new(duration, seed)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks interval bounds, amplitudes, frequency ranges and channel indices.
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Scenario(msg));
        let d = self.duration;
        if !(d > 0.0 && d.is_finite()) {
            return bad(format!("duration {d} must be positive"));
        }
        let within = |a: f64, b: f64| 0.0 <= a && a < b && b <= d;
        let channels_ok = |chs: &[usize]| !chs.is_empty() && chs.iter().all(|&c| c < NUM_CHANNELS);
        if self.background_noise_uv_rms < 0.0 || self.environment_noise_uv_rms < 0.0 {
            return bad("noise levels must be >= 0".into());
        }
        if let Some(m) = &self.mains {
            if m.amplitude_uv < 0.0 || !(m.frequency_hz == 50.0 || m.frequency_hz == 60.0) {
                return bad(format!(
                    "mains hum must be 50 or 60 Hz with amplitude >= 0, got {} Hz",
                    m.frequency_hz
                ));
            }
        }
        for (i, a) in self.alpha_intervals.iter().enumerate() {
            if !within(a.t_start, a.t_end) {
                return bad(format!("alpha[{i}] interval outside [0, {d}]"));
            }
            if !(8.0..=12.0).contains(&a.frequency_hz) {
                return bad(format!(
                    "alpha[{i}] frequency {} outside 8-12 Hz",
                    a.frequency_hz
                ));
            }
            if a.amplitude_uv < 0.0 || !channels_ok(&a.channels) {
                return bad(format!(
                    "alpha[{i}] needs amplitude >= 0 and valid channels"
                ));
            }
        }
        for (i, b) in self.blink_events.iter().enumerate() {
            if !within(b.t_start(), b.t_end()) {
                return bad(format!("blink[{i}] extends outside [0, {d}]"));
            }
            if !(0.1..=0.5).contains(&b.duration_s) {
                return bad(format!(
                    "blink[{i}] duration {} outside 0.1-0.5 s",
                    b.duration_s
                ));
            }
            if b.amplitude_uv < 0.0 || !channels_ok(&b.channels) {
                return bad(format!(
                    "blink[{i}] needs amplitude >= 0 and valid channels"
                ));
            }
        }
        for (i, c) in self.chew_episodes.iter().enumerate() {
            if !within(c.t_start, c.t_end) {
                return bad(format!("chew[{i}] interval outside [0, {d}]"));
            }
            if !(0.5..=2.5).contains(&c.burst_rate_hz) {
                return bad(format!(
                    "chew[{i}] burst rate {} outside 0.5-2.5 Hz",
                    c.burst_rate_hz
                ));
            }
            if c.burst_amplitude_uv < 0.0 || !channels_ok(&c.channels) {
                return bad(format!("chew[{i}] needs amplitude >= 0 and valid channels"));
            }
        }
        for (i, c) in self.contact_changes.iter().enumerate() {
            if c.channel >= NUM_CHANNELS || !(0.0..=d).contains(&c.t) {
                return bad(format!("contact_change[{i}] has invalid channel or time"));
            }
        }
        Ok(())
    }

    /// Contact state of `channel` at scenario time `t`.
    pub fn contact_at(&self, channel: usize, t: f64) -> Contact {
        let mut state = self.electrode_contact[channel];
        let mut latest = f64::NEG_INFINITY;
        for c in &self.contact_changes {
            if c.channel == channel && c.t <= t && c.t >= latest {
                state = c.state;
                latest = c.t;
            }
        }
        state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_and_defaults() {
        let text = r#"
            duration = 20.0
            seed = 3

            [mains]
            frequency_hz = 50
            amplitude_uv = 4.0

            [[blink]]
            t_center = 2.0
            duration_s = 0.3
            amplitude_uv = 150.0
            channels = [0, 1]

            [[contact_change]]
            t = 5.0
            channel = 3
            state = "disconnected"
        "#;
        let s = Scenario::from_toml(text).unwrap();
        assert_eq!(s.background_noise_uv_rms, 0.4);
        assert_eq!(s.environment_noise_uv_rms, 0.8);
        assert_eq!(s.blink_events.len(), 1);
        assert_eq!(s.contact_at(3, 4.9), Contact::Connected);
        assert_eq!(s.contact_at(3, 5.0), Contact::Disconnected);
        assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn rejects_out_of_range() {
        let mut s = Scenario::new(10.0, 0);
        s.alpha_intervals.push(AlphaInterval {
            t_start: 5.0,
            t_end: 11.0,
            amplitude_uv: 20.0,
            frequency_hz: 10.0,
            channels: vec![6],
        });
        assert!(s.validate().is_err());
        s.alpha_intervals[0].t_end = 9.0;
        s.alpha_intervals[0].frequency_hz = 13.0;
        assert!(s.validate().is_err());
        s.alpha_intervals[0].frequency_hz = 12.0;
        assert!(s.validate().is_ok());
        s.chew_episodes.push(ChewEpisode {
            t_start: 1.0,
            t_end: 3.0,
            burst_rate_hz: 3.0,
            burst_amplitude_uv: 10.0,
            channels: vec![2, 3],
        });
        assert!(s.validate().is_err());
        assert!(Scenario::from_toml("duration = 1.0\nbogus = 1").is_err());
    }
}
