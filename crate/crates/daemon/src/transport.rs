use std::time::{Duration, Instant};

use pieeg_core::protocol::{reg, Command, ProtocolError, RegisterFile, FRAME_LEN};
use pieeg_core::simulator::{Scenario, SimDevice, SimError};

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("device: {0}")]
    Device(#[from] SimError),
    #[error("frame: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("transport i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("end of stream")]
    EndOfStream,
}

/// Byte-level endpoint to an acquisition device.
///
/// Frames are delivered exactly once and in device order.
pub trait DeviceTransport: Send {
    fn send_command(&mut self, cmd: &Command) -> Result<Vec<u8>, TransportError>;

    fn read_frames(&mut self, n: usize) -> Result<Vec<[u8; FRAME_LEN]>, TransportError>;

    /// Register state as the device currently holds it.
    fn registers(&self) -> RegisterFile;
}

/// Transport backed by the in-process simulator. Frames are produced as
/// fast as they can be synthesized; wrap in [`Paced`] for real time.
#[derive(Debug)]
pub struct SimTransport {
    device: SimDevice,
}

impl SimTransport {
    pub fn new(scenario: Scenario, vref: f64) -> Result<Self, TransportError> {
        let mut device = SimDevice::new(scenario)?;
        device.set_vref(vref)?;
        Ok(Self { device })
    }

    pub fn device(&self) -> &SimDevice {
        &self.device
    }
}

impl DeviceTransport for SimTransport {
    fn send_command(&mut self, cmd: &Command) -> Result<Vec<u8>, TransportError> {
        Ok(self.device.send_command(cmd)?)
    }

    fn read_frames(&mut self, n: usize) -> Result<Vec<[u8; FRAME_LEN]>, TransportError> {
        Ok(self.device.step(n)?)
    }

    fn registers(&self) -> RegisterFile {
        self.device.registers().clone()
    }
}

/// Delivers frames no faster than the device sample rate.
#[derive(Debug)]
pub struct Paced<T> {
    inner: T,
    origin: Option<(Instant, u32)>,
    frames: u64,
}

impl<T: DeviceTransport> Paced<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            origin: None,
            frames: 0,
        }
    }

    pub fn into_inner(self) -> T {
        self.inner
    }
}

impl<T: DeviceTransport> DeviceTransport for Paced<T> {
    fn send_command(&mut self, cmd: &Command) -> Result<Vec<u8>, TransportError> {
        self.inner.send_command(cmd)
    }

    fn read_frames(&mut self, n: usize) -> Result<Vec<[u8; FRAME_LEN]>, TransportError> {
        let fs = self.inner.registers().sample_rate;
        let origin = match self.origin {
            Some((t, rate)) if rate == fs => t,
            _ => {
                let t = Instant::now();
                self.origin = Some((t, fs));
                self.frames = 0;
                t
            }
        };
        let frames = self.inner.read_frames(n)?;
        self.frames += frames.len() as u64;
        let due = origin + Duration::from_secs_f64(self.frames as f64 / f64::from(fs));
        let now = Instant::now();
        if due > now {
            std::thread::sleep(due - now);
        }
        Ok(frames)
    }

    fn registers(&self) -> RegisterFile {
        self.inner.registers()
    }
}

/// Transport that serves a fixed frame sequence, e.g. from a recording.
///
/// Register writes are accepted and reflected; the frames themselves are
/// returned unchanged.
#[derive(Debug)]
pub struct FrameTransport {
    frames: std::vec::IntoIter<[u8; FRAME_LEN]>,
    registers: RegisterFile,
}

impl FrameTransport {
    pub fn new(frames: Vec<[u8; FRAME_LEN]>, registers: RegisterFile) -> Self {
        Self {
            frames: frames.into_iter(),
            registers,
        }
    }
}

impl DeviceTransport for FrameTransport {
    fn send_command(&mut self, cmd: &Command) -> Result<Vec<u8>, TransportError> {
        if let Command::Wreg { addr, values } = cmd {
            let mut image = self
                .registers
                .to_registers()
                .map_err(|v| TransportError::Device(SimError::Rejected(v)))?;
            for (i, &v) in values.iter().enumerate() {
                let a = *addr + i as u8;
                if !reg::is_read_only(a) {
                    image[a as usize] = v;
                }
            }
            self.registers = RegisterFile::from_registers(&image, self.registers.vref)
                .map_err(|v| TransportError::Device(SimError::Rejected(v)))?;
        }
        Ok(Vec::new())
    }

    fn read_frames(&mut self, n: usize) -> Result<Vec<[u8; FRAME_LEN]>, TransportError> {
        let out: Vec<_> = self.frames.by_ref().take(n).collect();
        if out.is_empty() && n > 0 {
            return Err(TransportError::EndOfStream);
        }
        Ok(out)
    }

    fn registers(&self) -> RegisterFile {
        self.registers.clone()
    }
}
