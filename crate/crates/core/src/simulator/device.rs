use serde::{Deserialize, Serialize};

use super::{Contact, Scenario, SignalModel, SimError};
use crate::protocol::{
    encode_frame, microvolts_to_raw, reg, Command, RegisterFile, SampleFrame, FRAME_LEN,
    NUM_REGISTERS, STATUS_SYNC,
};
use crate::NUM_CHANNELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    PoweredDown,
    Standby,
    Idle,
    ContinuousRead,
}

/// Register-accurate device model.
///
/// Starts powered down; `RESET` loads the default registers and enters
/// `Idle`. Scenario time wraps at the scenario duration so a device can be
/// streamed indefinitely; noise keeps running.
#[derive(Debug, Clone)]
pub struct SimDevice {
    regs: [u8; NUM_REGISTERS],
    registers: RegisterFile,
    mode: Mode,
    converting: bool,
    clock: u64,
    // time base of the current sample rate segment
    segment_start_clock: u64,
    segment_start_time: f64,
    model: SignalModel,
    scenario: Scenario,
}

impl SimDevice {
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        let registers = RegisterFile::default();
        let regs = registers.to_registers().map_err(SimError::Rejected)?;
        let model = SignalModel::new(&scenario, f64::from(registers.sample_rate))?;
        Ok(Self {
            regs,
            registers,
            mode: Mode::PoweredDown,
            converting: false,
            clock: 0,
            segment_start_clock: 0,
            segment_start_time: 0.0,
            model,
            scenario,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn registers(&self) -> &RegisterFile {
        &self.registers
    }

    pub fn register_image(&self) -> &[u8; NUM_REGISTERS] {
        &self.regs
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn is_converting(&self) -> bool {
        self.converting
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Device time of sample `clock`.
    fn time_of(&self, clock: u64) -> f64 {
        self.segment_start_time
            + (clock - self.segment_start_clock) as f64 / f64::from(self.registers.sample_rate)
    }

    fn scenario_time(&self, t: f64) -> f64 {
        t.rem_euclid(self.scenario.duration)
    }

    /// Device time of the next sample.
    pub fn time(&self) -> f64 {
        self.time_of(self.clock)
    }

    fn apply_registers(
        &mut self,
        regs: [u8; NUM_REGISTERS],
        file: RegisterFile,
    ) -> Result<(), SimError> {
        if file.sample_rate != self.registers.sample_rate {
            self.segment_start_time = self.time();
            self.segment_start_clock = self.clock;
            self.model = SignalModel::new(&self.scenario, f64::from(file.sample_rate))?;
        }
        self.regs = regs;
        self.registers = file;
        Ok(())
    }

    pub fn send_command(&mut self, cmd: &Command) -> Result<Vec<u8>, SimError> {
        cmd.validate()?;
        let state_err = |mode| SimError::State {
            command: cmd.name(),
            mode,
        };
        if self.mode == Mode::PoweredDown && *cmd != Command::Reset {
            return Err(state_err(self.mode));
        }
        match cmd {
            Command::Reset => {
                let file = RegisterFile {
                    vref: self.registers.vref,
                    ..RegisterFile::default()
                };
                let regs = file.to_registers().map_err(SimError::Rejected)?;
                self.apply_registers(regs, file)?;
                self.mode = Mode::Idle;
                self.converting = false;
            }
            Command::Wakeup => {
                if self.mode == Mode::Standby {
                    self.mode = Mode::Idle;
                }
            }
            Command::Standby => {
                self.mode = Mode::Standby;
                self.converting = false;
            }
            Command::Start => self.converting = true,
            Command::Stop => self.converting = false,
            Command::Rdatac => match self.mode {
                Mode::Idle | Mode::ContinuousRead => self.mode = Mode::ContinuousRead,
                m => return Err(state_err(m)),
            },
            Command::Sdatac => {
                if self.mode == Mode::ContinuousRead {
                    self.mode = Mode::Idle;
                }
            }
            Command::Rdata => {
                if self.mode != Mode::Idle {
                    return Err(state_err(self.mode));
                }
                return Ok(self.next_frame().to_vec());
            }
            Command::Rreg { addr, count } => {
                if self.mode != Mode::Idle {
                    return Err(state_err(self.mode));
                }
                let a = *addr as usize;
                return Ok(self.regs[a..a + count].to_vec());
            }
            Command::Wreg { addr, values } => {
                if self.mode != Mode::Idle {
                    return Err(state_err(self.mode));
                }
                let mut image = self.regs;
                for (i, &v) in values.iter().enumerate() {
                    let a = *addr + i as u8;
                    if !reg::is_read_only(a) {
                        image[a as usize] = v;
                    }
                }
                let file = RegisterFile::from_registers(&image, self.registers.vref)
                    .map_err(SimError::Rejected)?;
                self.apply_registers(image, file)?;
            }
        }
        Ok(Vec::new())
    }

    /// Sets the host-side reference voltage used for quantization.
    pub fn set_vref(&mut self, vref: f64) -> Result<(), SimError> {
        if !(vref > 0.0 && vref.is_finite()) {
            return Err(SimError::Domain(format!("vref {vref} must be positive")));
        }
        self.registers.vref = vref;
        Ok(())
    }

    fn contacts_at(&self, t: f64) -> [Contact; NUM_CHANNELS] {
        let ts = self.scenario_time(t);
        std::array::from_fn(|ch| self.scenario.contact_at(ch, ts))
    }

    fn next_frame(&mut self) -> [u8; FRAME_LEN] {
        let t = self.time();
        let ts = self.scenario_time(t);
        let n = self.clock - self.segment_start_clock;
        let mut channels = [0i32; NUM_CHANNELS];
        for (ch, out) in channels.iter_mut().enumerate() {
            if !self.registers.channel_enabled[ch] {
                continue;
            }
            let uv = self.model.value(n, ts, ch);
            // gain and vref were validated when written
            *out = microvolts_to_raw(uv, self.registers.channel_gain[ch], self.registers.vref)
                .map(|q| q.raw)
                .unwrap_or(0);
        }
        let mut loff = 0u8;
        if self.registers.lead_off_enabled {
            for (ch, c) in self.contacts_at(t).iter().enumerate() {
                if *c == Contact::Disconnected {
                    loff |= 1 << ch;
                }
            }
        }
        self.regs[reg::LOFF_STATP as usize] = loff;
        let status = STATUS_SYNC | (u32::from(loff) << 12);
        self.clock += 1;
        encode_frame(&SampleFrame::new(status, channels)).expect("quantized values fit 24 bits")
    }

    /// Produces `n_frames` frames in continuous-read mode.
    pub fn step(&mut self, n_frames: usize) -> Result<Vec<[u8; FRAME_LEN]>, SimError> {
        if self.mode != Mode::ContinuousRead {
            return Err(SimError::State {
                command: "step",
                mode: self.mode,
            });
        }
        Ok((0..n_frames).map(|_| self.next_frame()).collect())
    }

    /// Per-channel lead-off fault flags at the most recent sample.
    pub fn lead_off_status(&self) -> Result<[bool; NUM_CHANNELS], SimError> {
        if !self.registers.lead_off_enabled {
            return Err(SimError::LeadOffDisabled);
        }
        let t = self.time_of(self.clock.saturating_sub(1).max(self.segment_start_clock));
        Ok(self.contacts_at(t).map(|c| c == Contact::Disconnected))
    }
}
