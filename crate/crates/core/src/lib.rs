//! Acquisition-side building blocks for an 8-channel, 24-bit EEG front end.
//!
//! - [`protocol`]: bit-exact frame codec, register map, command set, count/µV conversion
//! - [`simulator`]: register-accurate simulated device driven by a ground-truth [`simulator::Scenario`]
//! - [`dsp`]: biquad band-pass/notch design, streaming and zero-phase filtering, Welch PSD
//! - [`detect`]: blink, chew and alpha-rhythm detectors

pub mod detect;
pub mod dsp;
pub mod protocol;
pub mod simulator;

/// Number of electrode channels on the device.
pub const NUM_CHANNELS: usize = 8;
