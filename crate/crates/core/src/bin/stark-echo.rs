use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stark_echo::fit::DecayMode;
use stark_echo::io::config::Provenance;
use stark_echo::io::csv::{echo_to_string, trace_to_string};
use stark_echo::io::{records_to_string, ColumnMap, RunConfig};
use stark_echo::pipeline;
use stark_echo::scan::Channel;
use stark_echo::{Error, Result};

#[derive(Parser)]
#[command(name = "stark-echo", version, about = "Stark-modulated photon echo simulation and fitting")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Decay {
    Auto,
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    OnTime,
    Voltage,
}

#[derive(clap::Args)]
struct Overrides {
    /// Scan axis
    #[arg(long, value_enum)]
    axis: Option<Axis>,
    /// Number of scan points
    #[arg(long)]
    samples: Option<usize>,
    /// Noise seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    fit_decay: Option<Decay>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one echo; records on stdout, echo waveform CSV to --out
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        o: Overrides,
    },
    /// Sweep on-time or voltage; trace CSV to --out, fit records on stdout
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        o: Overrides,
    },
    /// Fit one channel of a trace CSV
    Fit {
        trace: PathBuf,
        /// Fit options and channel are taken from here when given
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        channel: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        fit_decay: Option<Decay>,
    },
    /// Normalize a raw CSV of echo areas into a trace CSV
    Ingest {
        raw: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        x_col: Option<String>,
        #[arg(long)]
        parallel_col: Option<String>,
        #[arg(long)]
        perp_col: Option<String>,
        #[arg(long)]
        total_col: Option<String>,
        /// us, ns, V or V/cm
        #[arg(long)]
        x_unit: Option<String>,
        /// Plate separation in cm
        #[arg(long)]
        thickness: Option<f64>,
        /// Applied voltage for on-time traces
        #[arg(long)]
        voltage: Option<f64>,
        /// Fixed on-time in us for voltage traces
        #[arg(long)]
        on_time: Option<f64>,
    },
    /// Stark coefficient table from fit record files
    Table {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn decay_mode(d: Decay) -> DecayMode {
    match d {
        Decay::Auto => DecayMode::Auto,
        Decay::On => DecayMode::On,
        Decay::Off => DecayMode::Off,
    }
}

fn load(path: &Path, o: &Overrides) -> Result<(RunConfig, Provenance)> {
    let (mut cfg, prov) = RunConfig::load(path)?;
    if let Some(a) = o.axis {
        cfg.scan.axis = match a {
            Axis::OnTime => "on_time",
            Axis::Voltage => "voltage",
        }
        .into();
    }
    if let Some(n) = o.samples {
        cfg.scan.samples = n;
    }
    if let Some(s) = o.seed {
        cfg.noise.seed = s;
    }
    if let Some(d) = o.fit_decay {
        cfg.fit.decay = decay_mode(d).as_str().into();
    }
    Ok((cfg, prov))
}

/// Writes to `out`, or stdout when there is no destination.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Simulate { config, out, o } => {
            let (cfg, prov) = load(&config, &o)?;
            let (obs, rec) = pipeline::run_simulate(&cfg, Some(&prov))?;
            if let Some(p) = out.or(cfg.output.path.map(PathBuf::from)) {
                std::fs::write(p, echo_to_string(&obs))?;
            }
            emit(None, &records_to_string(&[rec])?)
        }
        Cmd::Scan { config, out, o } => {
            let (cfg, prov) = load(&config, &o)?;
            let out = out
                .or(cfg.output.path.clone().map(PathBuf::from))
                .ok_or_else(|| Error::Config("scan needs --out or output.path for the trace CSV".into()))?;
            let res = pipeline::run_scan(&cfg, Some(&prov))?;
            std::fs::write(&out, trace_to_string(&res.trace)?)?;
            emit(None, &records_to_string(&res.records)?)
        }
        Cmd::Fit { trace, config, channel, out, fit_decay } => {
            let cfg = match &config {
                Some(p) => RunConfig::load(p)?.0,
                None => RunConfig::default(),
            };
            let mut opts = cfg.fit_options()?;
            if let Some(d) = fit_decay {
                opts.decay = decay_mode(d);
            }
            let ch = match channel {
                Some(c) => Channel::parse(&c)?,
                None => cfg.channel()?,
            };
            let (_, rec) = pipeline::run_fit(&trace, ch, &opts)?;
            emit(out.as_deref(), &records_to_string(&[rec])?)
        }
        Cmd::Ingest { raw, out, x_col, parallel_col, perp_col, total_col, x_unit, thickness, voltage, on_time } => {
            let map = ColumnMap {
                x: x_col,
                parallel: parallel_col,
                perp: perp_col,
                total: total_col,
                x_unit,
                thickness,
                voltage,
                on_time,
            };
            let ex = pipeline::run_ingest(&raw, &map)?;
            for w in &ex.warnings {
                eprintln!("record=warning message={w:?}");
            }
            emit(out.as_deref(), &trace_to_string(&ex.trace)?)
        }
        Cmd::Table { records, out } => emit(out.as_deref(), &pipeline::run_table(&records)?),
    }
}

fn error_record(kind: &str, msg: &str) {
    let flat = msg.replace(['\n', '\r'], " ");
    eprintln!("record=error kind={kind} message={:?}", flat.trim());
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            error_record("usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error_record(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
