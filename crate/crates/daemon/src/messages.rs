//! WebSocket wire documents.

use std::path::PathBuf;

use pieeg_core::detect::DetectionEvent;
use pieeg_core::NUM_CHANNELS;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::acquisition::{Control, SamplesBlock};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplesMessage {
    pub seq: u64,
    pub fs: f64,
    pub gain: [u32; NUM_CHANNELS],
    pub unit: String,
    pub t0: f64,
    pub filtered: bool,
    /// One row of 8 values per sample.
    pub data: Vec<[f64; NUM_CHANNELS]>,
}

impl From<&SamplesBlock> for SamplesMessage {
    fn from(b: &SamplesBlock) -> Self {
        let data = (0..b.block.len())
            .map(|n| std::array::from_fn(|ch| b.block.data[ch][n]))
            .collect();
        Self {
            seq: b.seq,
            fs: b.block.fs,
            gain: b.gain,
            unit: "uV".into(),
            t0: b.block.t0,
            filtered: b.filtered,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusMessage {
    pub lead_off: [bool; NUM_CHANNELS],
    pub drops: u64,
    pub recording: bool,
    pub labels: Vec<String>,
    pub fs: u32,
    pub gain: [u32; NUM_CHANNELS],
    pub filter: bool,
    pub frames: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Samples(SamplesMessage),
    Event(DetectionEvent),
    Status(StatusMessage),
    Ack {
        #[serde(rename = "ref")]
        reference: Value,
        detail: String,
    },
    Error {
        #[serde(rename = "ref")]
        reference: Value,
        detail: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSelector", into = "RawSelector")]
pub enum ChannelSelector {
    All,
    Index(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawSelector {
    Index(usize),
    Word(String),
}

impl TryFrom<RawSelector> for ChannelSelector {
    type Error = String;

    fn try_from(raw: RawSelector) -> Result<Self, String> {
        match raw {
            RawSelector::Index(i) => Ok(Self::Index(i)),
            RawSelector::Word(w) if w == "all" => Ok(Self::All),
            RawSelector::Word(w) => Err(format!("channel must be \"all\" or 0..7, got {w:?}")),
        }
    }
}

impl From<ChannelSelector> for RawSelector {
    fn from(c: ChannelSelector) -> Self {
        match c {
            ChannelSelector::All => RawSelector::Word("all".into()),
            ChannelSelector::Index(i) => RawSelector::Index(i),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordAction {
    Start,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    SetGain {
        channel: ChannelSelector,
        value: u32,
    },
    SetSps {
        value: u32,
    },
    Filter {
        enabled: bool,
    },
    Record {
        action: RecordAction,
        path: Option<PathBuf>,
    },
}

impl ClientMessage {
    /// Parses a client document. On failure returns the reply reference and
    /// an error detail.
    pub fn parse(text: &str) -> Result<(Value, Self), (Value, String)> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| (Value::Null, format!("malformed message: {e}")))?;
        let reference = value
            .get("ref")
            .or_else(|| value.get("type"))
            .cloned()
            .unwrap_or(Value::Null);
        match serde_json::from_value::<ClientMessage>(value) {
            Ok(m) => Ok((reference, m)),
            Err(e) => Err((reference, format!("invalid message: {e}"))),
        }
    }

    pub fn into_control(self) -> Result<Control, String> {
        Ok(match self {
            ClientMessage::SetGain { channel, value } => Control::SetGain {
                channel: match channel {
                    ChannelSelector::All => None,
                    ChannelSelector::Index(i) if i < NUM_CHANNELS => Some(i),
                    ChannelSelector::Index(i) => {
                        return Err(format!("channel {i} out of range 0..7"))
                    }
                },
                gain: value,
            },
            ClientMessage::SetSps { value } => Control::SetSps(value),
            ClientMessage::Filter { enabled } => Control::Filter(enabled),
            ClientMessage::Record {
                action: RecordAction::Start,
                path,
            } => Control::RecordStart(path.ok_or_else(|| "record start needs a path".to_string())?),
            ClientMessage::Record {
                action: RecordAction::Stop,
                ..
            } => Control::RecordStop,
        })
    }
}
