use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pieeg_core::detect::{DetectionEvent, EventKind, PipelineConfig};
use pieeg_core::protocol::{validate_config, RegisterFile};
use pieeg_core::simulator::Scenario;
use pieeg_daemon::analysis::{analyze, write_band_power_csv};
use pieeg_daemon::{
    export_csv, run_acquisition, server, spawn_detector, AcquisitionConfig, FrameTransport, Hub,
    Paced, Recording, Session, SimTransport, DEFAULT_PORT,
};
use serde_json::json;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Scenario(#[from] pieeg_core::simulator::SimError),
    #[error(transparent)]
    Acquisition(#[from] pieeg_daemon::AcquisitionError),
    #[error(transparent)]
    Recording(#[from] pieeg_daemon::RecordingError),
    #[error(transparent)]
    Transport(#[from] pieeg_daemon::TransportError),
    #[error(transparent)]
    Analysis(#[from] pieeg_daemon::analysis::AnalysisError),
    #[error(transparent)]
    Serve(#[from] server::ServeError),
    #[error("detector: {0}")]
    Detect(String),
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "pieeg",
    version,
    about = "Simulated 8-channel EEG acquisition chain"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run a scenario through the simulator and acquisition pipeline into a recording.
    Simulate(AcquireArgs),
    /// Acquire from a named transport in real time into a recording.
    Record {
        #[arg(long, value_enum, default_value_t = TransportKind::Sim)]
        transport: TransportKind,
        #[command(flatten)]
        acquire: AcquireArgs,
    },
    /// Stream a recording through the causal filter and detectors.
    Replay {
        #[arg(long = "in")]
        input: PathBuf,
        /// Pace playback at the recorded sample rate.
        #[arg(long)]
        realtime: bool,
        #[command(flatten)]
        detect: DetectArgs,
    },
    /// Zero-phase filter plus detectors over a recording; prints a JSON report.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        /// Also write the per-channel band-power table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        detect: DetectArgs,
    },
    /// Run the acquisition daemon with the HTTP/WebSocket service.
    Serve {
        #[arg(long, env = "PIEEG_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[command(flatten)]
        device: DeviceArgs,
        #[command(flatten)]
        detect: DetectArgs,
    },
    /// Convert a recording to CSV in microvolts.
    Export {
        #[arg(long = "in")]
        input: PathBuf,
        /// Output path, or `-` for stdout.
        #[arg(long)]
        csv: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TransportKind {
    /// In-process simulator.
    Sim,
}

#[derive(Debug, Args)]
struct DeviceArgs {
    #[arg(long, default_value_t = 250)]
    sps: u32,
    /// Gain applied to every channel.
    #[arg(long, default_value_t = 24)]
    gain: u32,
    #[arg(long, default_value_t = pieeg_core::protocol::DEFAULT_VREF)]
    vref: f64,
    #[arg(long)]
    lead_off: bool,
    /// Disable the streaming 1–30 Hz band-pass.
    #[arg(long)]
    no_filter: bool,
}

#[derive(Debug, Args)]
struct AcquireArgs {
    /// Scenario file; without one, background noise only.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Seconds to acquire; defaults to the scenario duration.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    device: DeviceArgs,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Detectors to run, comma separated.
    #[arg(long, value_delimiter = ',', default_values = ["blink", "chew", "alpha"])]
    detect: Vec<String>,
}

impl DetectArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let kinds = self
            .detect
            .iter()
            .map(|k| k.parse::<EventKind>().map_err(CliError::Usage))
            .collect::<Result<Vec<_>>>()?;
        Ok(PipelineConfig::only(&kinds))
    }
}

impl DeviceArgs {
    fn session(&self) -> Result<Session> {
        let regs = RegisterFile {
            sample_rate: self.sps,
            channel_gain: [self.gain; 8],
            vref: self.vref,
            lead_off_enabled: self.lead_off,
            ..RegisterFile::default()
        };
        let v = validate_config(&regs);
        if !v.is_empty() {
            let msg = v
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            return Err(CliError::Usage(msg));
        }
        let mut s = Session::new(regs);
        s.filter_enabled = !self.no_filter;
        Ok(s)
    }
}

fn load_scenario(path: Option<&Path>, duration: Option<f64>) -> Result<Scenario> {
    match path {
        Some(p) => Ok(Scenario::load(p)?),
        None => Ok(Scenario::new(duration.unwrap_or(10.0), 0)),
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer(&mut out, v).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn acquire(args: &AcquireArgs, paced: bool) -> Result<()> {
    let scenario = load_scenario(args.scenario.as_deref(), args.duration)?;
    let session = args.device.session()?;
    let duration = args.duration.unwrap_or(scenario.duration);
    if !(duration > 0.0) {
        return Err(CliError::Usage(format!(
            "duration must be positive, got {duration}"
        )));
    }
    let frames = (duration * f64::from(session.registers.sample_rate)).round() as u64;
    let config = AcquisitionConfig {
        max_frames: Some(frames),
        record_path: Some(args.out.clone()),
        ..AcquisitionConfig::default()
    };
    let sim = SimTransport::new(scenario, session.registers.vref)?;
    let handle = if paced {
        run_acquisition(Paced::new(sim), session, Hub::new(), config)?
    } else {
        run_acquisition(sim, session, Hub::new(), config)?
    };
    let summary = handle.join()?;
    tracing::info!(
        "{} frames written to {}",
        summary.frames,
        args.out.display()
    );
    print_json(&json!({
        "out": args.out,
        "frames": summary.frames,
        "sample_rate": args.device.sps,
        "sync_errors": summary.sync_errors,
    }))
}

fn event_line(e: &DetectionEvent) -> serde_json::Value {
    json!({"type": "event", "kind": e.kind, "t_start": e.t_start, "t_end": e.t_end, "channels": e.channels, "score": e.score})
}

fn replay(input: &Path, realtime: bool, detect: &DetectArgs) -> Result<()> {
    let rec = Recording::read(input)?;
    for w in &rec.warnings {
        tracing::warn!("{}: {w}", input.display());
    }
    let registers = rec.header.registers();
    let mut session = Session::new(registers.clone()).with_labels(rec.header.labels.clone());
    session.started_at = rec.header.start_unix_micros;
    let hub = Hub::new();
    // room for every block of an unpaced replay, plus status and event items
    let blocks = rec.frames.len() as f64 / (rec.fs() * AcquisitionConfig::default().block_seconds);
    let capacity = 2 * blocks.ceil() as usize + 64;
    let detector =
        spawn_detector(hub.clone(), detect.config()?, capacity).map_err(CliError::Detect)?;
    let transport = FrameTransport::new(rec.frames.clone(), registers);
    let handle = if realtime {
        run_acquisition(
            Paced::new(transport),
            session,
            hub,
            AcquisitionConfig::default(),
        )?
    } else {
        run_acquisition(transport, session, hub, AcquisitionConfig::default())?
    };
    handle.join()?;
    let events = detector
        .join()
        .map_err(|_| CliError::Detect("detector thread panicked".into()))?
        .map_err(CliError::Detect)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for e in &events {
        writeln!(out, "{}", event_line(e))?;
    }
    Ok(())
}

fn analyze_cmd(input: &Path, csv: Option<&Path>, detect: &DetectArgs) -> Result<()> {
    let rec = Recording::read(input)?;
    for w in &rec.warnings {
        tracing::warn!("{}: {w}", input.display());
    }
    let report = analyze(&rec, detect.config()?)?;
    if let Some(path) = csv {
        let mut f = BufWriter::new(File::create(path)?);
        write_band_power_csv(&report.band_power, &mut f)?;
        f.flush()?;
    }
    print_json(&report)
}

fn export(input: &Path, csv: &Path) -> Result<()> {
    let rec = Recording::read(input)?;
    for w in &rec.warnings {
        tracing::warn!("{}: {w}", input.display());
    }
    if csv == Path::new("-") {
        export_csv(&rec, io::stdout().lock())?;
    } else {
        let rows = export_csv(&rec, File::create(csv)?)?;
        print_json(&json!({"csv": csv, "rows": rows}))?;
    }
    Ok(())
}

fn serve(
    port: u16,
    scenario: Option<&Path>,
    device: &DeviceArgs,
    detect: &DetectArgs,
) -> Result<()> {
    let scenario = load_scenario(scenario, Some(600.0))?;
    let session = device.session()?;
    let hub = Hub::new();
    let _detector =
        spawn_detector(hub.clone(), detect.config()?, 1024).map_err(CliError::Detect)?;
    let transport = Paced::new(SimTransport::new(scenario, session.registers.vref)?);
    let handle = Arc::new(run_acquisition(
        transport,
        session,
        hub,
        AcquisitionConfig::default(),
    )?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = server::bind(port).await?;
        tracing::info!("listening on {}", listener.local_addr()?);
        let h = handle.clone();
        server::serve(h, listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok::<_, CliError>(())
    })?;
    handle.stop();
    handle.join()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Simulate(args) => acquire(&args, false),
        Cmd::Record {
            transport: TransportKind::Sim,
            acquire: args,
        } => acquire(&args, true),
        Cmd::Replay {
            input,
            realtime,
            detect,
        } => replay(&input, realtime, &detect),
        Cmd::Analyze { input, csv, detect } => analyze_cmd(&input, csv.as_deref(), &detect),
        Cmd::Serve {
            port,
            scenario,
            device,
            detect,
        } => serve(port, scenario.as_deref(), &device, &detect),
        Cmd::Export { input, csv } => export(&input, &csv),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::FAILURE;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
