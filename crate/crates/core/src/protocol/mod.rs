//! Device wire protocol.
//!
//! A device frame is 27 bytes: a 24-bit status word followed by eight 24-bit
//! two's-complement channel words, every word most-significant byte first.
//! The top nibble of a valid status word is `0xC`.

mod command;
mod convert;
mod frame;
mod registers;

pub use command::Command;
pub use convert::{
    lsb_microvolts, microvolts_to_raw, raw_to_microvolts, Quantized, RAW_MAX, RAW_MIN,
};
pub use frame::{
    decode_frame, decode_frame_strict, encode_frame, sign_extend_24, SampleFrame, FRAME_LEN,
    STATUS_SYNC,
};
pub use registers::{
    validate_config, RegisterFile, Violation, DEFAULT_VREF, DEVICE_ID, GAINS, NUM_REGISTERS,
    SAMPLE_RATES,
};

/// Register addresses of the device register map.
pub mod reg {
    pub use super::registers::addr::*;
}

/// Common-mode rejection ratio figure from the device datasheet row. Documentation only.
pub const CMRR_DB: f64 = 120.0;
/// Signal-to-noise figure from the device datasheet row. Documentation only.
pub const SNR_DB: f64 = 130.0;
/// Input-referred internal noise, µV RMS.
pub const INTERNAL_NOISE_UV: f64 = 0.4;
/// Input-referred external (environment) noise, µV RMS.
pub const EXTERNAL_NOISE_UV: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("value {value:#x} does not fit in 24 bits")]
    WordRange { value: u32 },
    #[error("channel {channel} value {value} outside 24-bit signed range")]
    ChannelRange { channel: usize, value: i32 },
    #[error("frame must be {expected} bytes, got {actual}")]
    FrameLength { expected: usize, actual: usize },
    #[error("status word {:#08x} lacks sync nibble 0xC", frame.status)]
    Sync { frame: SampleFrame },
    #[error("gain {0} not in {{1,2,4,6,8,12,24}}")]
    Gain(u32),
    #[error("reference voltage must be positive, got {0}")]
    Vref(f64),
    #[error("register range {addr:#04x}+{count} outside register map")]
    RegisterRange { addr: u8, count: usize },
    #[error("unknown command opcode {0:#04x}")]
    Opcode(u8),
    #[error("command truncated")]
    Truncated,
}
