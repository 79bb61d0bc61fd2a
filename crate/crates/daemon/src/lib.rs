//! Acquisition daemon: drives a device transport, fans converted blocks out
//! to sinks, persists raw frames and serves the HTTP/WebSocket interface.

pub mod acquisition;
pub mod analysis;
pub mod messages;
pub mod recording;
pub mod ring;
pub mod server;
pub mod session;
pub mod transport;

pub use acquisition::{
    run_acquisition, spawn_detector, AcquisitionConfig, AcquisitionError, AcquisitionHandle,
    Control, Hub, RunSummary, SamplesBlock, Sink, StreamItem,
};
pub use recording::{export_csv, Recording, RecordingError, RecordingHeader, RecordingWriter};
pub use ring::RingBuffer;
pub use session::{Session, DEFAULT_LABELS};
pub use transport::{DeviceTransport, FrameTransport, Paced, SimTransport, TransportError};

/// Default port of the network service; `PIEEG_PORT` overrides it.
pub const DEFAULT_PORT: u16 = 9090;
