//! Simulated acquisition device.
//!
//! [`SimDevice`] executes the device command set against a register image and
//! synthesizes frames from a [`Scenario`] through a [`SignalModel`]. It is
//! clocked by sample index, never by wall time.

mod device;
mod model;
mod scenario;

pub use device::{Mode, SimDevice};
pub use model::{SignalModel, DISCONNECTED_LEVEL_UV};
pub use scenario::{
    AlphaInterval, BlinkEvent, ChewEpisode, Contact, ContactChange, MainsHum, Scenario,
};

use crate::dsp::SignalBlock;
use crate::protocol::{
    decode_frame, raw_to_microvolts, reg, Command, ProtocolError, RegisterFile, Violation,
};
use crate::NUM_CHANNELS;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("{command} not allowed in {mode:?} mode")]
    State { command: &'static str, mode: Mode },
    #[error("register write rejected: {}", join(.0))]
    Rejected(Vec<Violation>),
    #[error(transparent)]
    Command(#[from] ProtocolError),
    #[error("lead-off detection is disabled")]
    LeadOffDisabled,
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("{0}")]
    Domain(String),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Runs `scenario` through a fresh [`SimDevice`] configured with `registers`
/// and returns the decoded microvolt signal for the whole duration.
pub fn render(scenario: &Scenario, registers: &RegisterFile) -> Result<SignalBlock, SimError> {
    let image = registers.to_registers().map_err(SimError::Rejected)?;
    let mut dev = SimDevice::new(scenario.clone())?;
    dev.set_vref(registers.vref)?;
    dev.send_command(&Command::Reset)?;
    dev.send_command(&Command::Wreg {
        addr: reg::CONFIG1,
        values: image[reg::CONFIG1 as usize..].to_vec(),
    })?;
    dev.send_command(&Command::Start)?;
    dev.send_command(&Command::Rdatac)?;
    let fs = f64::from(registers.sample_rate);
    let n = (scenario.duration * fs).round() as usize;
    let mut data = (0..NUM_CHANNELS)
        .map(|_| Vec::with_capacity(n))
        .collect::<Vec<_>>();
    for bytes in dev.step(n)? {
        let frame = decode_frame(&bytes)?;
        for (ch, out) in data.iter_mut().enumerate() {
            out.push(raw_to_microvolts(
                frame.channels[ch],
                registers.channel_gain[ch],
                registers.vref,
            )?);
        }
    }
    SignalBlock::new(fs, 0.0, data).map_err(|e| SimError::Domain(e.to_string()))
}
