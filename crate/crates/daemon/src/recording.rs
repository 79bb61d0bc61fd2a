//! Binary recording format.
//!
//! A 64-byte little-endian header followed by raw 27-byte device frames:
//!
//! ```text
//! 0  magic "PIEG"          4
//! 4  version u8 = 1        1
//! 5  channels u8 = 8       1
//! 6  flags u16             2   bit 0: file still being written
//! 8  sample_rate u32       4
//! 12 vref_volts f32        4
//! 16 gains u8 x 8          8
//! 24 start_unix_micros u64 8
//! 32 labels: 8 x (len u8 + UTF-8), zero padded to offset 64
//! ```

use std::fs::File;
use std::io::{BufWriter, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use pieeg_core::dsp::SignalBlock;
use pieeg_core::protocol::{decode_frame, raw_to_microvolts, RegisterFile, FRAME_LEN};
use pieeg_core::NUM_CHANNELS;

use crate::session::Session;

pub const MAGIC: &[u8; 4] = b"PIEG";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 64;
pub const FLAG_PARTIAL: u16 = 0x0001;
const LABELS_OFFSET: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum RecordingError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("not a recording (magic {0:?})")]
    Magic([u8; 4]),
    #[error("unsupported recording version {0}")]
    Version(u8),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("frame {index}: {detail}")]
    Frame { index: usize, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordingHeader {
    pub flags: u16,
    pub sample_rate: u32,
    pub vref: f32,
    pub gains: [u8; NUM_CHANNELS],
    pub start_unix_micros: u64,
    pub labels: Vec<String>,
}

impl RecordingHeader {
    pub fn from_session(session: &Session) -> Result<Self, RecordingError> {
        let r = &session.registers;
        let header = Self {
            flags: 0,
            sample_rate: r.sample_rate,
            vref: r.vref as f32,
            gains: r.channel_gain.map(|g| g as u8),
            start_unix_micros: session.started_at,
            labels: session.channel_labels.clone(),
        };
        header.encode()?;
        Ok(header)
    }

    pub fn encode(&self) -> Result<[u8; HEADER_LEN], RecordingError> {
        let mut h = [0u8; HEADER_LEN];
        h[0..4].copy_from_slice(MAGIC);
        h[4] = VERSION;
        h[5] = NUM_CHANNELS as u8;
        h[6..8].copy_from_slice(&self.flags.to_le_bytes());
        h[8..12].copy_from_slice(&self.sample_rate.to_le_bytes());
        h[12..16].copy_from_slice(&self.vref.to_le_bytes());
        h[16..24].copy_from_slice(&self.gains);
        h[24..32].copy_from_slice(&self.start_unix_micros.to_le_bytes());
        if self.labels.len() != NUM_CHANNELS {
            return Err(RecordingError::Header(format!(
                "{} labels, expected {NUM_CHANNELS}",
                self.labels.len()
            )));
        }
        let mut at = LABELS_OFFSET;
        for label in &self.labels {
            let bytes = label.as_bytes();
            if at + 1 + bytes.len() > HEADER_LEN {
                return Err(RecordingError::Header(
                    "channel labels exceed 32 bytes".into(),
                ));
            }
            h[at] = bytes.len() as u8;
            h[at + 1..at + 1 + bytes.len()].copy_from_slice(bytes);
            at += 1 + bytes.len();
        }
        Ok(h)
    }

    pub fn decode(h: &[u8]) -> Result<Self, RecordingError> {
        if h.len() < 4 || &h[0..4] != MAGIC {
            let mut m = [0u8; 4];
            m[..h.len().min(4)].copy_from_slice(&h[..h.len().min(4)]);
            return Err(RecordingError::Magic(m));
        }
        if h.len() < HEADER_LEN {
            return Err(RecordingError::Header(format!("{} header bytes", h.len())));
        }
        if h[4] != VERSION {
            return Err(RecordingError::Version(h[4]));
        }
        if h[5] as usize != NUM_CHANNELS {
            return Err(RecordingError::Header(format!("{} channels", h[5])));
        }
        let mut labels = Vec::with_capacity(NUM_CHANNELS);
        let mut at = LABELS_OFFSET;
        for _ in 0..NUM_CHANNELS {
            let len = *h
                .get(at)
                .ok_or_else(|| RecordingError::Header("label block".into()))?
                as usize;
            let bytes = h
                .get(at + 1..at + 1 + len)
                .filter(|_| at + 1 + len <= HEADER_LEN)
                .ok_or_else(|| RecordingError::Header("label overruns header".into()))?;
            labels.push(
                String::from_utf8(bytes.to_vec())
                    .map_err(|_| RecordingError::Header("label is not UTF-8".into()))?,
            );
            at += 1 + len;
        }
        let u32_at = |i: usize| u32::from_le_bytes(h[i..i + 4].try_into().unwrap());
        Ok(Self {
            flags: u16::from_le_bytes([h[6], h[7]]),
            sample_rate: u32_at(8),
            vref: f32::from_le_bytes(h[12..16].try_into().unwrap()),
            gains: h[16..24].try_into().unwrap(),
            start_unix_micros: u64::from_le_bytes(h[24..32].try_into().unwrap()),
            labels,
        })
    }

    pub fn is_partial(&self) -> bool {
        self.flags & FLAG_PARTIAL != 0
    }

    /// Register view of the header: rate, gains and vref.
    pub fn registers(&self) -> RegisterFile {
        RegisterFile {
            sample_rate: self.sample_rate,
            channel_gain: self.gains.map(u32::from),
            vref: f64::from(self.vref),
            ..RegisterFile::default()
        }
    }
}

/// Streaming writer. The header carries the partial flag until
/// [`finish`](RecordingWriter::finish) succeeds, so an interrupted file is
/// recognisable.
#[derive(Debug)]
pub struct RecordingWriter {
    path: PathBuf,
    out: BufWriter<File>,
    header: RecordingHeader,
    frames: u64,
}

impl RecordingWriter {
    pub fn create(path: impl AsRef<Path>, header: RecordingHeader) -> Result<Self, RecordingError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| RecordingError::Io {
            path: path.clone(),
            source,
        };
        let mut header = header;
        header.flags |= FLAG_PARTIAL;
        let bytes = header.encode()?;
        let mut out = BufWriter::new(File::create(&path).map_err(io)?);
        out.write_all(&bytes).map_err(io)?;
        Ok(Self {
            path,
            out,
            header,
            frames: 0,
        })
    }

    fn io(&self, source: std::io::Error) -> RecordingError {
        RecordingError::Io {
            path: self.path.clone(),
            source,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn frames_written(&self) -> u64 {
        self.frames
    }

    pub fn write_frame(&mut self, frame: &[u8; FRAME_LEN]) -> Result<(), RecordingError> {
        self.out.write_all(frame).map_err(|e| self.io(e))?;
        self.frames += 1;
        Ok(())
    }

    pub fn write_frames(&mut self, frames: &[[u8; FRAME_LEN]]) -> Result<(), RecordingError> {
        frames.iter().try_for_each(|f| self.write_frame(f))
    }

    /// Flushes, clears the partial flag and returns the frame count.
    pub fn finish(mut self) -> Result<u64, RecordingError> {
        self.out.flush().map_err(|e| self.io(e))?;
        self.header.flags &= !FLAG_PARTIAL;
        let file = self.out.get_mut();
        file.seek(SeekFrom::Start(6)).map_err(|e| self.io(e))?;
        let flags = self.header.flags.to_le_bytes();
        let file = self.out.get_mut();
        let res = file.write_all(&flags).and_then(|_| file.sync_all());
        res.map_err(|e| self.io(e))?;
        Ok(self.frames)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub header: RecordingHeader,
    pub frames: Vec<[u8; FRAME_LEN]>,
    /// Recoverable problems: a truncated trailing frame or an unfinished file.
    pub warnings: Vec<String>,
}

impl Recording {
    pub fn parse(bytes: &[u8]) -> Result<Self, RecordingError> {
        let header = RecordingHeader::decode(bytes)?;
        let body = &bytes[HEADER_LEN..];
        let frames: Vec<[u8; FRAME_LEN]> = body
            .chunks_exact(FRAME_LEN)
            .map(|c| c.try_into().unwrap())
            .collect();
        let mut warnings = Vec::new();
        let tail = body.len() % FRAME_LEN;
        if tail != 0 {
            warnings.push(format!(
                "truncated: {tail} trailing bytes after {} complete frames",
                frames.len()
            ));
        }
        if header.is_partial() {
            warnings.push("recording was not finished cleanly".into());
        }
        Ok(Self {
            header,
            frames,
            warnings,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, RecordingError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| RecordingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&bytes)
    }

    pub fn fs(&self) -> f64 {
        f64::from(self.header.sample_rate)
    }

    /// Decodes the frames to microvolts using the header gains and vref.
    pub fn to_block(&self) -> Result<SignalBlock, RecordingError> {
        let gains = self.header.gains.map(u32::from);
        let vref = f64::from(self.header.vref);
        let mut data = (0..NUM_CHANNELS)
            .map(|_| Vec::with_capacity(self.frames.len()))
            .collect::<Vec<_>>();
        for (index, bytes) in self.frames.iter().enumerate() {
            let err = |e: &dyn std::fmt::Display| RecordingError::Frame {
                index,
                detail: e.to_string(),
            };
            let frame = decode_frame(bytes).map_err(|e| err(&e))?;
            for (ch, out) in data.iter_mut().enumerate() {
                out.push(
                    raw_to_microvolts(frame.channels[ch], gains[ch], vref).map_err(|e| err(&e))?,
                );
            }
        }
        if self.frames.is_empty() {
            return Ok(SignalBlock {
                fs: self.fs(),
                t0: 0.0,
                data,
            });
        }
        SignalBlock::new(self.fs(), 0.0, data).map_err(|e| RecordingError::Header(e.to_string()))
    }
}

/// Writes one CSV row per frame; returns the number of data rows.
pub fn export_csv(recording: &Recording, out: impl Write) -> Result<usize, RecordingError> {
    let block = recording.to_block()?;
    let mut out = BufWriter::new(out);
    let io = |source| RecordingError::Io {
        path: PathBuf::from("<csv>"),
        source,
    };
    let mut header = String::from("t_s");
    for ch in 1..=NUM_CHANNELS {
        header.push_str(&format!(",ch{ch}_uV"));
    }
    writeln!(out, "{header}").map_err(io)?;
    let mut line = String::new();
    for n in 0..block.len() {
        line.clear();
        line.push_str(&format!("{:.6}", n as f64 / block.fs));
        for ch in &block.data {
            line.push_str(&format!(",{:.6}", ch[n]));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(block.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_roundtrip_and_layout() {
        let session = Session::default();
        let h = RecordingHeader::from_session(&session).unwrap();
        let bytes = h.encode().unwrap();
        assert_eq!(&bytes[0..4], b"PIEG");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 8);
        assert_eq!(&bytes[8..12], &250u32.to_le_bytes());
        assert_eq!(&bytes[16..24], &[24; 8]);
        assert_eq!(&bytes[32..36], &[3, b'F', b'p', b'1']);
        assert_eq!(RecordingHeader::decode(&bytes).unwrap(), h);
    }

    #[test]
    fn rejects_long_labels_and_bad_version() {
        let mut h = RecordingHeader::from_session(&Session::default()).unwrap();
        h.labels[0] = "a-very-long-electrode-label".into();
        assert!(matches!(h.encode(), Err(RecordingError::Header(_))));
        let mut bytes = RecordingHeader::from_session(&Session::default())
            .unwrap()
            .encode()
            .unwrap();
        bytes[4] = 2;
        assert!(matches!(
            RecordingHeader::decode(&bytes),
            Err(RecordingError::Version(2))
        ));
    }
}
