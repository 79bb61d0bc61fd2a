use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use pieeg_core::protocol::{validate_config, RegisterFile, Violation};
use pieeg_core::NUM_CHANNELS;
use serde::{Deserialize, Serialize};

pub const DEFAULT_LABELS: [&str; NUM_CHANNELS] = ["Fp1", "Fp2", "C3", "C4", "P7", "P8", "O1", "O2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub registers: RegisterFile,
    pub channel_labels: Vec<String>,
    /// Wall-clock start, microseconds since the Unix epoch.
    pub started_at: u64,
    pub filter_enabled: bool,
    pub recording_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("invalid registers: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Registers(Vec<Violation>),
    #[error("channel labels: {0}")]
    Labels(String),
}

pub fn unix_micros() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_micros() as u64)
        .unwrap_or(0)
}

fn next_id() -> String {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    format!("{:x}-{:x}-{n}", unix_micros(), std::process::id())
}

impl Session {
    pub fn new(registers: RegisterFile) -> Self {
        Self {
            id: next_id(),
            registers,
            channel_labels: DEFAULT_LABELS.iter().map(|s| s.to_string()).collect(),
            started_at: unix_micros(),
            filter_enabled: true,
            recording_path: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.channel_labels = labels;
        self
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let v = validate_config(&self.registers);
        if !v.is_empty() {
            return Err(SessionError::Registers(v));
        }
        let labels = &self.channel_labels;
        if labels.len() != NUM_CHANNELS {
            return Err(SessionError::Labels(format!(
                "expected {NUM_CHANNELS} labels, got {}",
                labels.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || l.len() > u8::MAX as usize {
                return Err(SessionError::Labels(format!(
                    "label {i} has invalid length"
                )));
            }
            if labels[..i].contains(l) {
                return Err(SessionError::Labels(format!("duplicate label {l}")));
            }
        }
        Ok(())
    }
}

impl Default for Session {
    fn default() -> Self {
        Self::new(RegisterFile::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_ids_unique() {
        let a = Session::default();
        let b = Session::default();
        a.validate().unwrap();
        assert_ne!(a.id, b.id);
        assert_eq!(a.channel_labels[0], "Fp1");
        assert_eq!(a.channel_labels[7], "O2");
    }

    #[test]
    fn rejects_duplicate_labels_and_bad_registers() {
        let mut s = Session::default();
        s.channel_labels[1] = "Fp1".into();
        assert!(matches!(s.validate(), Err(SessionError::Labels(_))));
        let mut s = Session::default();
        s.registers.sample_rate = 300;
        assert!(matches!(s.validate(), Err(SessionError::Registers(_))));
    }
}
