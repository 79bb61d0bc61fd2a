use super::{registers::is_valid_gain, ProtocolError};

/// Largest positive raw count.
pub const RAW_MAX: i32 = (1 << 23) - 1;
/// Most negative raw count.
pub const RAW_MIN: i32 = -(1 << 23);

const FULL_CODE_SPAN: f64 = (1u32 << 24) as f64;

fn check(gain: u32, vref: f64) -> Result<(), ProtocolError> {
    if !is_valid_gain(gain) {
        return Err(ProtocolError::Gain(gain));
    }
    if !(vref > 0.0 && vref.is_finite()) {
        return Err(ProtocolError::Vref(vref));
    }
    Ok(())
}

/// Microvolts per count for a bipolar 24-bit converter: `2·vref / (gain·2^24)`.
pub fn lsb_microvolts(gain: u32, vref: f64) -> Result<f64, ProtocolError> {
    check(gain, vref)?;
    Ok(2.0 * vref / f64::from(gain) / FULL_CODE_SPAN * 1e6)
}

/// Converts a raw count to input-referred microvolts.
///
/// The reference voltage is a parameter because the device's reference is
/// board-specific; 4.5 V is the usual value for this class of converter.
pub fn raw_to_microvolts(raw: i32, gain: u32, vref: f64) -> Result<f64, ProtocolError> {
    Ok(f64::from(raw) * lsb_microvolts(gain, vref)?)
}

/// Result of quantizing a microvolt value to a raw count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quantized {
    pub raw: i32,
    pub saturated: bool,
}

/// Round-to-nearest quantizer, saturating at the converter rails.
pub fn microvolts_to_raw(value: f64, gain: u32, vref: f64) -> Result<Quantized, ProtocolError> {
    let lsb = lsb_microvolts(gain, vref)?;
    let code = (value / lsb).round();
    Ok(if code.is_nan() {
        Quantized {
            raw: 0,
            saturated: true,
        }
    } else if code > f64::from(RAW_MAX) {
        Quantized {
            raw: RAW_MAX,
            saturated: true,
        }
    } else if code < f64::from(RAW_MIN) {
        Quantized {
            raw: RAW_MIN,
            saturated: true,
        }
    } else {
        Quantized {
            raw: code as i32,
            saturated: false,
        }
    })
}
