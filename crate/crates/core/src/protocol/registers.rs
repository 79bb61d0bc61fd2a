use std::fmt;

use serde::{Deserialize, Serialize};

use crate::NUM_CHANNELS;

/// Supported output data rates, samples per second.
pub const SAMPLE_RATES: [u32; 7] = [250, 500, 1000, 2000, 4000, 8000, 16000];
/// Supported programmable gains.
pub const GAINS: [u32; 7] = [1, 2, 4, 6, 8, 12, 24];
/// Default external reference voltage.
pub const DEFAULT_VREF: f64 = 4.5;
/// Number of addressable registers.
pub const NUM_REGISTERS: usize = 0x18;
/// Value of the read-only ID register.
pub const DEVICE_ID: u8 = 0x3E;

pub mod addr {
    pub const ID: u8 = 0x00;
    pub const CONFIG1: u8 = 0x01;
    pub const CONFIG2: u8 = 0x02;
    pub const CONFIG3: u8 = 0x03;
    pub const LOFF: u8 = 0x04;
    pub const CH1SET: u8 = 0x05;
    pub const BIAS_SENSP: u8 = 0x0D;
    pub const BIAS_SENSN: u8 = 0x0E;
    pub const LOFF_SENSP: u8 = 0x0F;
    pub const LOFF_SENSN: u8 = 0x10;
    pub const LOFF_FLIP: u8 = 0x11;
    pub const LOFF_STATP: u8 = 0x12;
    pub const LOFF_STATN: u8 = 0x13;
    pub const GPIO: u8 = 0x14;
    pub const MISC1: u8 = 0x15;
    pub const MISC2: u8 = 0x16;
    pub const CONFIG4: u8 = 0x17;

    /// Registers the host cannot write.
    pub fn is_read_only(a: u8) -> bool {
        matches!(a, ID | LOFF_STATP | LOFF_STATN)
    }
}

// CONFIG1 keeps its reserved bits at 0b1001_0xxx.
const CONFIG1_FIXED: u8 = 0x90;
const CONFIG2_DEFAULT: u8 = 0xC0;
// PD_REFBUF plus reserved bits.
const CONFIG3_BASE: u8 = 0xE0;
const CONFIG3_PD_BIAS: u8 = 0x04;
const CONFIG4_PD_LOFF_COMP: u8 = 0x02;
const CHSET_PD: u8 = 0x80;

pub(crate) fn is_valid_gain(g: u32) -> bool {
    GAINS.contains(&g)
}

fn rate_code(rate: u32) -> Option<u8> {
    // 16 kSPS is code 0, each step halves the rate, 250 SPS is code 6.
    SAMPLE_RATES
        .iter()
        .rev()
        .position(|&r| r == rate)
        .map(|i| i as u8)
}

fn gain_code(gain: u32) -> Option<u8> {
    GAINS.iter().position(|&g| g == gain).map(|i| i as u8)
}

/// Host-side view of the device configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterFile {
    pub sample_rate: u32,
    pub channel_gain: [u32; NUM_CHANNELS],
    pub channel_enabled: [bool; NUM_CHANNELS],
    pub bias_enabled: bool,
    pub lead_off_enabled: bool,
    /// Reference voltage in volts. Not a device register; kept alongside for conversion.
    pub vref: f64,
}

impl Default for RegisterFile {
    /// Power-on configuration: 250 SPS, gain 24, all channels on, bias on, lead-off off.
    fn default() -> Self {
        Self {
            sample_rate: 250,
            channel_gain: [24; NUM_CHANNELS],
            channel_enabled: [true; NUM_CHANNELS],
            bias_enabled: true,
            lead_off_enabled: false,
            vref: DEFAULT_VREF,
        }
    }
}

/// One failed configuration check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.detail)
    }
}

fn set_string(values: &[u32]) -> String {
    let parts: Vec<String> = values.iter().map(u32::to_string).collect();
    format!("{{{}}}", parts.join(","))
}

/// Checks every configuration invariant; an empty list means the file is valid.
pub fn validate_config(reg: &RegisterFile) -> Vec<Violation> {
    let mut out = Vec::new();
    if !SAMPLE_RATES.contains(&reg.sample_rate) {
        out.push(Violation {
            field: "sample_rate".into(),
            detail: format!(
                "sample_rate={} not in {}",
                reg.sample_rate,
                set_string(&SAMPLE_RATES)
            ),
        });
    }
    for (ch, &g) in reg.channel_gain.iter().enumerate() {
        if !is_valid_gain(g) {
            out.push(Violation {
                field: format!("channel_gain[{ch}]"),
                detail: format!("channel_gain[{ch}]={g} not in {}", set_string(&GAINS)),
            });
        }
    }
    if !(reg.vref > 0.0 && reg.vref.is_finite()) {
        out.push(Violation {
            field: "vref".into(),
            detail: format!("vref={} must be > 0", reg.vref),
        });
    }
    out
}

impl RegisterFile {
    pub fn is_valid(&self) -> bool {
        validate_config(self).is_empty()
    }

    /// Register image for this configuration. Fails with the violation list
    /// when the configuration is not representable.
    pub fn to_registers(&self) -> Result<[u8; NUM_REGISTERS], Vec<Violation>> {
        let violations = validate_config(self);
        if !violations.is_empty() {
            return Err(violations);
        }
        let mut r = [0u8; NUM_REGISTERS];
        r[addr::ID as usize] = DEVICE_ID;
        r[addr::CONFIG1 as usize] = CONFIG1_FIXED | rate_code(self.sample_rate).unwrap();
        r[addr::CONFIG2 as usize] = CONFIG2_DEFAULT;
        r[addr::CONFIG3 as usize] = CONFIG3_BASE
            | if self.bias_enabled {
                CONFIG3_PD_BIAS
            } else {
                0
            };
        for ch in 0..NUM_CHANNELS {
            let pd = if self.channel_enabled[ch] {
                0
            } else {
                CHSET_PD
            };
            r[addr::CH1SET as usize + ch] = pd | (gain_code(self.channel_gain[ch]).unwrap() << 4);
        }
        if self.bias_enabled {
            r[addr::BIAS_SENSP as usize] = 0xFF;
            r[addr::BIAS_SENSN as usize] = 0xFF;
        }
        if self.lead_off_enabled {
            r[addr::LOFF_SENSP as usize] = 0xFF;
            r[addr::CONFIG4 as usize] = CONFIG4_PD_LOFF_COMP;
        }
        Ok(r)
    }

    /// Decodes a register image. Reserved rate or gain codes are violations.
    pub fn from_registers(regs: &[u8; NUM_REGISTERS], vref: f64) -> Result<Self, Vec<Violation>> {
        let mut violations = Vec::new();
        let dr = regs[addr::CONFIG1 as usize] & 0x07;
        let sample_rate = if (dr as usize) < SAMPLE_RATES.len() {
            SAMPLE_RATES[SAMPLE_RATES.len() - 1 - dr as usize]
        } else {
            violations.push(Violation {
                field: "sample_rate".into(),
                detail: format!("CONFIG1 data-rate code {dr} is reserved"),
            });
            0
        };
        let mut channel_gain = [0u32; NUM_CHANNELS];
        let mut channel_enabled = [false; NUM_CHANNELS];
        for ch in 0..NUM_CHANNELS {
            let v = regs[addr::CH1SET as usize + ch];
            channel_enabled[ch] = v & CHSET_PD == 0;
            let code = (v >> 4) & 0x07;
            match GAINS.get(code as usize) {
                Some(&g) => channel_gain[ch] = g,
                None => violations.push(Violation {
                    field: format!("channel_gain[{ch}]"),
                    detail: format!("CH{}SET gain code {code} is reserved", ch + 1),
                }),
            }
        }
        let file = Self {
            sample_rate,
            channel_gain,
            channel_enabled,
            bias_enabled: regs[addr::CONFIG3 as usize] & CONFIG3_PD_BIAS != 0,
            lead_off_enabled: regs[addr::CONFIG4 as usize] & CONFIG4_PD_LOFF_COMP != 0,
            vref,
        };
        if violations.is_empty() {
            violations = validate_config(&file);
        }
        if violations.is_empty() {
            Ok(file)
        } else {
            Err(violations)
        }
    }
}
