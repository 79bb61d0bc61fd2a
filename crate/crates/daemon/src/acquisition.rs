//! Producer loop: owns the transport, converts frames to blocks and fans
//! them out to sinks through per-sink bounded queues.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use pieeg_core::detect::{DetectionEvent, DetectionPipeline, PipelineConfig};
use pieeg_core::dsp::{design_bandpass, BiquadCascade, SignalBlock};
use pieeg_core::protocol::{
    decode_frame, raw_to_microvolts, reg, validate_config, Command, RegisterFile, FRAME_LEN,
};
use pieeg_core::NUM_CHANNELS;
use tokio::sync::oneshot;

use crate::messages::StatusMessage;
use crate::recording::{RecordingError, RecordingHeader, RecordingWriter};
use crate::ring::RingBuffer;
use crate::session::{unix_micros, Session, SessionError};
use crate::transport::{DeviceTransport, TransportError};

pub const DEFAULT_BLOCK_SECONDS: f64 = 0.05;
pub const DEFAULT_SINK_CAPACITY: usize = 100;
const BANDPASS: (f64, f64, usize) = (1.0, 30.0, 4);

#[derive(Debug, thiserror::Error)]
pub enum AcquisitionError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Recording(#[from] RecordingError),
    #[error("filter design: {0}")]
    Filter(String),
    #[error("acquisition thread panicked")]
    Panicked,
}

/// One block of converted samples with uniform metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplesBlock {
    pub seq: u64,
    pub gain: [u32; NUM_CHANNELS],
    pub filtered: bool,
    /// Microvolts; `t0` is device time in seconds.
    pub block: SignalBlock,
    pub lead_off: [bool; NUM_CHANNELS],
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamItem {
    Samples(Arc<SamplesBlock>),
    Event(Arc<DetectionEvent>),
    Status(Arc<StatusMessage>),
}

#[derive(Debug)]
pub struct Sink {
    pub name: String,
    pub queue: RingBuffer<StreamItem>,
}

impl Sink {
    pub fn dropped(&self) -> u64 {
        self.queue.dropped()
    }
}

/// Sink registry shared by the producer, workers and network clients.
///
/// A sink is released when every handle except the hub's own is dropped.
#[derive(Debug, Default)]
pub struct Hub {
    sinks: Mutex<Vec<Arc<Sink>>>,
    retired_drops: AtomicU64,
    closed: AtomicBool,
}

impl Hub {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn subscribe(&self, name: impl Into<String>, capacity: usize) -> Arc<Sink> {
        let sink = Arc::new(Sink {
            name: name.into(),
            queue: RingBuffer::new(capacity),
        });
        self.sinks.lock().unwrap().push(sink.clone());
        sink
    }

    pub fn publish(&self, item: StreamItem) {
        let mut sinks = self.sinks.lock().unwrap();
        sinks.retain(|s| {
            let live = Arc::strong_count(s) > 1;
            if !live {
                self.retired_drops.fetch_add(s.dropped(), Ordering::Relaxed);
            }
            live
        });
        for s in sinks.iter() {
            s.queue.push(item.clone());
        }
    }

    /// Total items dropped across all sinks, including released ones.
    pub fn drops(&self) -> u64 {
        let live: u64 = self.sinks.lock().unwrap().iter().map(|s| s.dropped()).sum();
        live + self.retired_drops.load(Ordering::Relaxed)
    }

    pub fn sink_count(&self) -> usize {
        self.sinks.lock().unwrap().len()
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::Acquire)
    }

    fn close(&self) {
        self.closed.store(true, Ordering::Release);
        for s in self.sinks.lock().unwrap().iter() {
            s.queue.wake();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    /// `None` applies to every channel.
    SetGain {
        channel: Option<usize>,
        gain: u32,
    },
    SetSps(u32),
    Filter(bool),
    RecordStart(PathBuf),
    RecordStop,
}

pub type Reply = Result<String, String>;

#[derive(Debug)]
struct ControlRequest {
    control: Control,
    reply: oneshot::Sender<Reply>,
}

#[derive(Debug, Clone)]
pub struct AcquisitionConfig {
    pub block_seconds: f64,
    /// Stop after this many frames; `None` runs until stopped.
    pub max_frames: Option<u64>,
    /// Record from the first frame.
    pub record_path: Option<PathBuf>,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            block_seconds: DEFAULT_BLOCK_SECONDS,
            max_frames: None,
            record_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub frames: u64,
    pub blocks: u64,
    pub sync_errors: u64,
}

#[derive(Debug)]
struct Shared {
    session: RwLock<Session>,
    status: RwLock<StatusMessage>,
    stop: AtomicBool,
    frames: AtomicU64,
}

/// Control surface of a running acquisition.
#[derive(Debug)]
pub struct AcquisitionHandle {
    hub: Arc<Hub>,
    shared: Arc<Shared>,
    control: Mutex<Sender<ControlRequest>>,
    thread: Mutex<Option<JoinHandle<Result<RunSummary, AcquisitionError>>>>,
}

impl AcquisitionHandle {
    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    pub fn session(&self) -> Session {
        self.shared.session.read().unwrap().clone()
    }

    /// Current status with a live drop count.
    pub fn status(&self) -> StatusMessage {
        let mut s = self.shared.status.read().unwrap().clone();
        s.drops = self.hub.drops();
        s.frames = self.shared.frames.load(Ordering::Relaxed);
        s
    }

    pub fn frames(&self) -> u64 {
        self.shared.frames.load(Ordering::Relaxed)
    }

    pub fn is_running(&self) -> bool {
        self.thread
            .lock()
            .unwrap()
            .as_ref()
            .is_some_and(|t| !t.is_finished())
    }

    fn enqueue(&self, control: Control) -> Result<oneshot::Receiver<Reply>, String> {
        let (tx, rx) = oneshot::channel();
        self.control
            .lock()
            .unwrap()
            .send(ControlRequest { control, reply: tx })
            .map_err(|_| "acquisition is not running".to_string())?;
        Ok(rx)
    }

    /// Queues a control change; it is applied at the next block boundary.
    pub async fn request(&self, control: Control) -> Reply {
        let rx = self.enqueue(control)?;
        rx.await.map_err(|_| "acquisition stopped".to_string())?
    }

    /// Blocking form of [`request`](Self::request). Must not be called from
    /// inside an async runtime.
    pub fn request_blocking(&self, control: Control) -> Reply {
        let rx = self.enqueue(control)?;
        rx.blocking_recv()
            .map_err(|_| "acquisition stopped".to_string())?
    }

    pub fn stop(&self) {
        self.shared.stop.store(true, Ordering::Release);
    }

    /// Waits for the producer to exit.
    pub fn join(&self) -> Result<RunSummary, AcquisitionError> {
        match self.thread.lock().unwrap().take() {
            Some(t) => t.join().unwrap_or(Err(AcquisitionError::Panicked)),
            None => Ok(RunSummary::default()),
        }
    }
}

impl Drop for AcquisitionHandle {
    fn drop(&mut self) {
        self.stop();
        if let Some(t) = self.thread.get_mut().unwrap().take() {
            let _ = t.join();
        }
    }
}

struct Producer<T> {
    transport: T,
    hub: Arc<Hub>,
    shared: Arc<Shared>,
    controls: Receiver<ControlRequest>,
    config: AcquisitionConfig,
    registers: RegisterFile,
    filter_enabled: bool,
    filter: BiquadCascade,
    recorder: Option<RecordingWriter>,
    block_len: usize,
    seq: u64,
    device_time: f64,
    next_status: f64,
    lead_off: [bool; NUM_CHANNELS],
    summary: RunSummary,
}

fn write_config(t: &mut dyn DeviceTransport, regs: &RegisterFile) -> Result<(), AcquisitionError> {
    let image = regs.to_registers().map_err(SessionError::Registers)?;
    t.send_command(&Command::Wreg {
        addr: reg::CONFIG1,
        values: image[reg::CONFIG1 as usize..].to_vec(),
    })?;
    Ok(())
}

fn bandpass(fs: u32) -> Result<BiquadCascade, AcquisitionError> {
    design_bandpass(f64::from(fs), BANDPASS.0, BANDPASS.1, BANDPASS.2)
        .map_err(|e| AcquisitionError::Filter(e.to_string()))
}

fn block_len(fs: u32, seconds: f64) -> usize {
    ((f64::from(fs) * seconds).round() as usize).max(1)
}

/// Configures the device (RESET, WREG, START, RDATAC) and starts the
/// producer thread. Blocks are delivered to every sink registered on `hub`.
pub fn run_acquisition<T: DeviceTransport + 'static>(
    mut transport: T,
    session: Session,
    hub: Arc<Hub>,
    config: AcquisitionConfig,
) -> Result<AcquisitionHandle, AcquisitionError> {
    session.validate()?;
    if !(config.block_seconds > 0.0) {
        return Err(AcquisitionError::Filter(
            "block length must be positive".into(),
        ));
    }
    transport.send_command(&Command::Reset)?;
    write_config(&mut transport, &session.registers)?;
    transport.send_command(&Command::Start)?;
    transport.send_command(&Command::Rdatac)?;

    let mut session = session;
    let recorder = match &config.record_path {
        Some(path) => {
            session.recording_path = Some(path.clone());
            Some(RecordingWriter::create(
                path,
                RecordingHeader::from_session(&session)?,
            )?)
        }
        None => None,
    };
    let registers = session.registers.clone();
    let status = StatusMessage {
        lead_off: [false; NUM_CHANNELS],
        drops: 0,
        recording: recorder.is_some(),
        labels: session.channel_labels.clone(),
        fs: registers.sample_rate,
        gain: registers.channel_gain,
        filter: session.filter_enabled,
        frames: 0,
    };
    let shared = Arc::new(Shared {
        status: RwLock::new(status),
        stop: AtomicBool::new(false),
        frames: AtomicU64::new(0),
        session: RwLock::new(session.clone()),
    });
    let (tx, rx) = mpsc::channel();
    let mut producer = Producer {
        filter: bandpass(registers.sample_rate)?,
        block_len: block_len(registers.sample_rate, config.block_seconds),
        transport,
        hub: hub.clone(),
        shared: shared.clone(),
        controls: rx,
        config,
        filter_enabled: session.filter_enabled,
        registers,
        recorder,
        seq: 0,
        device_time: 0.0,
        next_status: 0.0,
        lead_off: [false; NUM_CHANNELS],
        summary: RunSummary::default(),
    };
    let thread = std::thread::Builder::new()
        .name("acquisition".into())
        .spawn(move || {
            let result = producer.run();
            producer.shutdown();
            if let Err(e) = &result {
                tracing::error!("acquisition stopped: {e}");
            }
            result.map(|_| producer.summary)
        })
        .map_err(TransportError::Io)?;
    Ok(AcquisitionHandle {
        hub,
        shared,
        control: Mutex::new(tx),
        thread: Mutex::new(Some(thread)),
    })
}

impl<T: DeviceTransport> Producer<T> {
    fn run(&mut self) -> Result<(), AcquisitionError> {
        self.publish_status();
        while !self.shared.stop.load(Ordering::Acquire) {
            self.drain_controls();
            let mut want = self.block_len;
            if let Some(max) = self.config.max_frames {
                let left = max.saturating_sub(self.summary.frames);
                if left == 0 {
                    break;
                }
                want = want.min(left as usize);
            }
            let frames = match self.transport.read_frames(want) {
                Ok(f) => f,
                Err(TransportError::EndOfStream) => break,
                Err(e) => return Err(e.into()),
            };
            self.process(&frames)?;
        }
        Ok(())
    }

    fn shutdown(&mut self) {
        if let Some(rec) = self.recorder.take() {
            if let Err(e) = rec.finish() {
                tracing::error!("closing recording: {e}");
            }
        }
        self.shared.session.write().unwrap().recording_path = None;
        self.shared.status.write().unwrap().recording = false;
        self.publish_status();
        // answer controls that raced with shutdown
        while let Ok(req) = self.controls.try_recv() {
            let _ = req.reply.send(Err("acquisition stopped".into()));
        }
        self.hub.close();
    }

    fn process(&mut self, frames: &[[u8; FRAME_LEN]]) -> Result<(), AcquisitionError> {
        if frames.is_empty() {
            return Ok(());
        }
        let gains = self.registers.channel_gain;
        let vref = self.registers.vref;
        let mut data = (0..NUM_CHANNELS)
            .map(|_| Vec::with_capacity(frames.len()))
            .collect::<Vec<_>>();
        for bytes in frames {
            let frame = decode_frame(bytes).map_err(TransportError::from)?;
            if !frame.has_sync() {
                self.summary.sync_errors += 1;
            }
            self.lead_off = frame.lead_off_p();
            for (ch, out) in data.iter_mut().enumerate() {
                let uv = raw_to_microvolts(frame.channels[ch], gains[ch], vref)
                    .map_err(TransportError::from)?;
                out.push(uv);
            }
        }
        if let Some(rec) = &mut self.recorder {
            rec.write_frames(frames)?;
        }
        let fs = f64::from(self.registers.sample_rate);
        let mut block = SignalBlock {
            fs,
            t0: self.device_time,
            data,
        };
        if self.filter_enabled {
            self.filter
                .process_in_place(&mut block)
                .map_err(|e| AcquisitionError::Filter(e.to_string()))?;
        }
        let n = frames.len() as u64;
        self.summary.frames += n;
        self.summary.blocks += 1;
        self.shared.frames.fetch_add(n, Ordering::Relaxed);
        self.device_time += n as f64 / fs;
        self.hub.publish(StreamItem::Samples(Arc::new(SamplesBlock {
            seq: self.seq,
            gain: gains,
            filtered: self.filter_enabled,
            block,
            lead_off: self.lead_off,
        })));
        self.seq += 1;
        if self.device_time >= self.next_status {
            self.publish_status();
        }
        Ok(())
    }

    fn publish_status(&mut self) {
        let status = {
            let mut s = self.shared.status.write().unwrap();
            s.lead_off = self.lead_off;
            s.drops = self.hub.drops();
            s.recording = self.recorder.is_some();
            s.fs = self.registers.sample_rate;
            s.gain = self.registers.channel_gain;
            s.filter = self.filter_enabled;
            s.frames = self.summary.frames;
            s.clone()
        };
        self.hub.publish(StreamItem::Status(Arc::new(status)));
        self.next_status = self.device_time.floor() + 1.0;
    }

    fn drain_controls(&mut self) {
        loop {
            match self.controls.try_recv() {
                Ok(req) => {
                    let reply = self.apply(req.control);
                    if reply.is_ok() {
                        self.publish_status();
                    }
                    let _ = req.reply.send(reply);
                }
                Err(TryRecvError::Empty | TryRecvError::Disconnected) => return,
            }
        }
    }

    fn reconfigure(&mut self, next: RegisterFile) -> Reply {
        let violations = validate_config(&next);
        if !violations.is_empty() {
            return Err(violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "));
        }
        if self.recorder.is_some() {
            return Err("configuration is locked while recording".into());
        }
        let t = &mut self.transport;
        let res = t
            .send_command(&Command::Sdatac)
            .map_err(AcquisitionError::from)
            .and_then(|_| write_config(t, &next))
            .and_then(|_| {
                t.send_command(&Command::Rdatac)
                    .map(drop)
                    .map_err(Into::into)
            });
        if let Err(e) = res {
            // try to resume streaming with the old configuration
            let _ = self.transport.send_command(&Command::Rdatac);
            return Err(e.to_string());
        }
        if next.sample_rate != self.registers.sample_rate {
            self.filter = bandpass(next.sample_rate).map_err(|e| e.to_string())?;
            self.block_len = block_len(next.sample_rate, self.config.block_seconds);
        }
        self.registers = next.clone();
        self.shared.session.write().unwrap().registers = next;
        Ok(String::new())
    }

    fn apply(&mut self, control: Control) -> Reply {
        match control {
            Control::SetGain { channel, gain } => {
                let mut next = self.registers.clone();
                match channel {
                    Some(ch) if ch < NUM_CHANNELS => next.channel_gain[ch] = gain,
                    Some(ch) => return Err(format!("channel {ch} out of range 0..7")),
                    None => next.channel_gain = [gain; NUM_CHANNELS],
                }
                self.reconfigure(next)?;
                Ok(format!("gain {:?}", self.registers.channel_gain))
            }
            Control::SetSps(sps) => {
                let next = RegisterFile {
                    sample_rate: sps,
                    ..self.registers.clone()
                };
                self.reconfigure(next)?;
                Ok(format!("sample rate {sps}"))
            }
            Control::Filter(on) => {
                if on && !self.filter_enabled {
                    self.filter.reset();
                }
                self.filter_enabled = on;
                self.shared.session.write().unwrap().filter_enabled = on;
                Ok(format!("filter {}", if on { "on" } else { "off" }))
            }
            Control::RecordStart(path) => {
                if let Some(r) = &self.recorder {
                    return Err(format!("already recording to {}", r.path().display()));
                }
                let session = {
                    let mut s = self.shared.session.read().unwrap().clone();
                    s.started_at = unix_micros();
                    s
                };
                let header = RecordingHeader::from_session(&session).map_err(|e| e.to_string())?;
                let writer = RecordingWriter::create(&path, header).map_err(|e| e.to_string())?;
                self.recorder = Some(writer);
                self.shared.session.write().unwrap().recording_path = Some(path.clone());
                Ok(format!("recording to {}", path.display()))
            }
            Control::RecordStop => {
                let rec = self.recorder.take().ok_or("not recording")?;
                let path = rec.path().to_path_buf();
                self.shared.session.write().unwrap().recording_path = None;
                let n = rec.finish().map_err(|e| e.to_string())?;
                Ok(format!("{n} frames written to {}", path.display()))
            }
        }
    }
}

/// Runs a [`DetectionPipeline`] over the sample stream of `hub` on its own
/// thread and publishes each event back to the hub. The thread returns every
/// event once the hub closes.
pub fn spawn_detector(
    hub: Arc<Hub>,
    config: PipelineConfig,
    capacity: usize,
) -> Result<JoinHandle<Result<Vec<DetectionEvent>, String>>, String> {
    let mut pipeline = DetectionPipeline::new(config).map_err(|e| e.to_string())?;
    let sink = hub.subscribe("detect", capacity);
    std::thread::Builder::new()
        .name("detect".into())
        .spawn(move || {
            let mut all = Vec::new();
            let emit = |events: Vec<DetectionEvent>, all: &mut Vec<DetectionEvent>| {
                for e in events {
                    hub.publish(StreamItem::Event(Arc::new(e.clone())));
                    all.push(e);
                }
            };
            loop {
                let item = match sink.queue.pop_timeout(Duration::from_millis(50)) {
                    Some(item) => item,
                    None if hub.is_closed() && sink.queue.is_empty() => break,
                    None => continue,
                };
                if let StreamItem::Samples(b) = item {
                    let events = pipeline
                        .process(&b.block, b.filtered)
                        .map_err(|e| e.to_string())?;
                    emit(events, &mut all);
                }
            }
            let rest = pipeline.flush();
            emit(rest, &mut all);
            Ok(all)
        })
        .map_err(|e| e.to_string())
}
