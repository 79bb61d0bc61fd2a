//! Offline analysis of a recording: zero-phase band-pass, detectors and a
//! per-channel band-power table.

use std::io::Write;

use pieeg_core::detect::{alpha_index, DetectionEvent, DetectionPipeline, PipelineConfig};
use pieeg_core::dsp::{band_power, design_bandpass, filtfilt, welch_psd, SignalBlock, WelchParams};
use serde::Serialize;

use crate::recording::{Recording, RecordingError};

pub const BANDS: [(&str, f64, f64); 4] = [
    ("delta", 1.0, 4.0),
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 12.0),
    ("beta", 12.0, 30.0),
];

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Recording(#[from] RecordingError),
    #[error("{0}")]
    Dsp(String),
    #[error("detector: {0}")]
    Detect(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandPowerRow {
    pub channel: usize,
    pub label: String,
    /// µV² per band, in [`BANDS`] order.
    pub power: [f64; 4],
    pub alpha_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub fs: f64,
    pub frames: usize,
    pub duration_s: f64,
    pub events: Vec<DetectionEvent>,
    pub band_power: Vec<BandPowerRow>,
    pub warnings: Vec<String>,
}

fn run(
    pipeline: &mut DetectionPipeline,
    block: &SignalBlock,
    prefiltered: bool,
) -> Result<Vec<DetectionEvent>, AnalysisError> {
    let mut events = pipeline
        .process(block, prefiltered)
        .map_err(|e| AnalysisError::Detect(e.to_string()))?;
    events.extend(pipeline.flush());
    Ok(events)
}

/// Blink detection runs on the zero-phase 1–30 Hz filtered signal; chew and
/// alpha run on the unfiltered signal.
pub fn analyze(
    recording: &Recording,
    config: PipelineConfig,
) -> Result<AnalysisReport, AnalysisError> {
    let block = recording.to_block()?;
    let mut warnings = recording.warnings.clone();
    let mut events = Vec::new();
    if !block.is_empty() {
        if config.blink.is_some() {
            let bp = design_bandpass(block.fs, 1.0, 30.0, 4)
                .map_err(|e| AnalysisError::Dsp(e.to_string()))?;
            let pad = (3.0 * block.fs) as usize;
            let zero_phase = filtfilt(&bp, &block, pad.min(block.len() - 1));
            let mut p = DetectionPipeline::new(PipelineConfig {
                chew: None,
                alpha: None,
                ..config.clone()
            })
            .map_err(|e| AnalysisError::Detect(e.to_string()))?;
            events.extend(run(&mut p, &zero_phase, true)?);
        }
        if config.chew.is_some() || config.alpha.is_some() {
            let mut p = DetectionPipeline::new(PipelineConfig {
                blink: None,
                ..config
            })
            .map_err(|e| AnalysisError::Detect(e.to_string()))?;
            events.extend(run(&mut p, &block, false)?);
        }
    }
    events.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));

    let mut band_power_rows = Vec::new();
    match welch_psd(&block, WelchParams::default()) {
        Ok(spec) => {
            let mut per_band = Vec::new();
            for (_, lo, hi) in BANDS {
                per_band.push(
                    band_power(&spec, lo, hi.min(block.fs / 2.0))
                        .map_err(|e| AnalysisError::Dsp(e.to_string()))?,
                );
            }
            let ai = alpha_index(&block).unwrap_or_else(|_| vec![0.0; block.channels()]);
            for ch in 0..block.channels() {
                band_power_rows.push(BandPowerRow {
                    channel: ch,
                    label: recording.header.labels.get(ch).cloned().unwrap_or_default(),
                    power: std::array::from_fn(|b| per_band[b][ch]),
                    alpha_index: ai[ch],
                });
            }
        }
        Err(e) => warnings.push(format!("band power skipped: {e}")),
    }
    Ok(AnalysisReport {
        fs: recording.fs(),
        frames: recording.frames.len(),
        duration_s: recording.frames.len() as f64 / recording.fs(),
        events,
        band_power: band_power_rows,
        warnings,
    })
}

pub fn write_band_power_csv(rows: &[BandPowerRow], mut out: impl Write) -> std::io::Result<()> {
    write!(out, "channel,label")?;
    for (name, _, _) in BANDS {
        write!(out, ",{name}_uV2")?;
    }
    writeln!(out, ",alpha_index")?;
    for r in rows {
        write!(out, "{},{}", r.channel, r.label)?;
        for p in r.power {
            write!(out, ",{p:.6}")?;
        }
        writeln!(out, ",{:.6}", r.alpha_index)?;
    }
    Ok(())
}
