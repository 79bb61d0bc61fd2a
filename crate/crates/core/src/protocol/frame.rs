use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::NUM_CHANNELS;

/// Size of one device frame in bytes.
pub const FRAME_LEN: usize = 3 + 3 * NUM_CHANNELS;

/// Status word with the sync nibble set and all flags clear.
pub const STATUS_SYNC: u32 = 0xC0_0000;

const WORD_MASK: u32 = 0xFF_FFFF;

/// One device read: the status word plus eight raw channel counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SampleFrame {
    pub status: u32,
    pub channels: [i32; NUM_CHANNELS],
}

impl SampleFrame {
    pub fn new(status: u32, channels: [i32; NUM_CHANNELS]) -> Self {
        Self { status, channels }
    }

    /// True when the status word carries the `0xC` sync nibble.
    pub fn has_sync(&self) -> bool {
        (self.status >> 20) & 0xF == 0xC
    }

    /// Positive-electrode lead-off flags carried in status bits 19..12.
    pub fn lead_off_p(&self) -> [bool; NUM_CHANNELS] {
        let bits = (self.status >> 12) & 0xFF;
        std::array::from_fn(|ch| bits & (1 << ch) != 0)
    }
}

/// Interprets a 24-bit word as two's complement.
pub fn sign_extend_24(word: u32) -> Result<i32, ProtocolError> {
    if word > WORD_MASK {
        return Err(ProtocolError::WordRange { value: word });
    }
    Ok(((word << 8) as i32) >> 8)
}

#[inline]
fn read_word(bytes: &[u8]) -> u32 {
    (u32::from(bytes[0]) << 16) | (u32::from(bytes[1]) << 8) | u32::from(bytes[2])
}

#[inline]
fn write_word(out: &mut [u8], word: u32) {
    out[0] = (word >> 16) as u8;
    out[1] = (word >> 8) as u8;
    out[2] = word as u8;
}

/// Decodes a 27-byte frame. Only the length is checked; use
/// [`SampleFrame::has_sync`] or [`decode_frame_strict`] for the sync marker.
pub fn decode_frame(bytes: &[u8]) -> Result<SampleFrame, ProtocolError> {
    if bytes.len() != FRAME_LEN {
        return Err(ProtocolError::FrameLength {
            expected: FRAME_LEN,
            actual: bytes.len(),
        });
    }
    let status = read_word(&bytes[0..3]);
    let channels = std::array::from_fn(|ch| {
        let off = 3 + 3 * ch;
        // a 24-bit word always sign-extends
        ((read_word(&bytes[off..off + 3]) << 8) as i32) >> 8
    });
    Ok(SampleFrame { status, channels })
}

/// Like [`decode_frame`] but a missing sync nibble is an error that still
/// carries the decoded frame.
pub fn decode_frame_strict(bytes: &[u8]) -> Result<SampleFrame, ProtocolError> {
    let frame = decode_frame(bytes)?;
    if frame.has_sync() {
        Ok(frame)
    } else {
        Err(ProtocolError::Sync { frame })
    }
}

pub fn encode_frame(frame: &SampleFrame) -> Result<[u8; FRAME_LEN], ProtocolError> {
    if frame.status > WORD_MASK {
        return Err(ProtocolError::WordRange {
            value: frame.status,
        });
    }
    let mut out = [0u8; FRAME_LEN];
    write_word(&mut out[0..3], frame.status);
    for (ch, &value) in frame.channels.iter().enumerate() {
        if !(super::RAW_MIN..=super::RAW_MAX).contains(&value) {
            return Err(ProtocolError::ChannelRange { channel: ch, value });
        }
        let off = 3 + 3 * ch;
        write_word(&mut out[off..off + 3], value as u32 & WORD_MASK);
    }
    Ok(out)
}
