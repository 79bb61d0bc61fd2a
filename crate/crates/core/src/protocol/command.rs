use super::{ProtocolError, NUM_REGISTERS};

/// Device command set. Opcodes follow the usual ADS1299-family encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Wakeup,
    Standby,
    Reset,
    Start,
    Stop,
    /// Enter continuous-read mode.
    Rdatac,
    /// Leave continuous-read mode.
    Sdatac,
    /// Read a single frame.
    Rdata,
    Rreg {
        addr: u8,
        count: usize,
    },
    Wreg {
        addr: u8,
        values: Vec<u8>,
    },
}

fn check_range(addr: u8, count: usize) -> Result<(), ProtocolError> {
    if count == 0 || addr as usize + count > NUM_REGISTERS {
        return Err(ProtocolError::RegisterRange { addr, count });
    }
    Ok(())
}

impl Command {
    /// Checks that register commands address the register map.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        match self {
            Command::Rreg { addr, count } => check_range(*addr, *count),
            Command::Wreg { addr, values } => check_range(*addr, values.len()),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Wakeup => "WAKEUP",
            Command::Standby => "STANDBY",
            Command::Reset => "RESET",
            Command::Start => "START",
            Command::Stop => "STOP",
            Command::Rdatac => "RDATAC",
            Command::Sdatac => "SDATAC",
            Command::Rdata => "RDATA",
            Command::Rreg { .. } => "RREG",
            Command::Wreg { .. } => "WREG",
        }
    }

    /// Serializes to the SPI byte sequence.
    pub fn to_bytes(&self) -> Result<Vec<u8>, ProtocolError> {
        self.validate()?;
        Ok(match self {
            Command::Wakeup => vec![0x02],
            Command::Standby => vec![0x04],
            Command::Reset => vec![0x06],
            Command::Start => vec![0x08],
            Command::Stop => vec![0x0A],
            Command::Rdatac => vec![0x10],
            Command::Sdatac => vec![0x11],
            Command::Rdata => vec![0x12],
            Command::Rreg { addr, count } => vec![0x20 | addr, (*count - 1) as u8],
            Command::Wreg { addr, values } => {
                let mut out = vec![0x40 | addr, (values.len() - 1) as u8];
                out.extend_from_slice(values);
                out
            }
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProtocolError> {
        let (&op, rest) = bytes.split_first().ok_or(ProtocolError::Truncated)?;
        let cmd = match op {
            0x02 => Command::Wakeup,
            0x04 => Command::Standby,
            0x06 => Command::Reset,
            0x08 => Command::Start,
            0x0A => Command::Stop,
            0x10 => Command::Rdatac,
            0x11 => Command::Sdatac,
            0x12 => Command::Rdata,
            op if op & 0xE0 == 0x20 || op & 0xE0 == 0x40 => {
                let addr = op & 0x1F;
                let count = *rest.first().ok_or(ProtocolError::Truncated)? as usize + 1;
                if op & 0xE0 == 0x20 {
                    Command::Rreg { addr, count }
                } else {
                    let values = rest.get(1..1 + count).ok_or(ProtocolError::Truncated)?;
                    Command::Wreg {
                        addr,
                        values: values.to_vec(),
                    }
                }
            }
            other => return Err(ProtocolError::Opcode(other)),
        };
        cmd.validate()?;
        Ok(cmd)
    }
}
