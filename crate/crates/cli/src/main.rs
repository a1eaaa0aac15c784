//! `coexmap` command-line entry point.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_channels, parse_window, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "coexmap",
    version,
    about = "2.4 GHz interference sensing, identification and mapping"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Time window START,END in seconds.
    #[arg(long, global = true, value_parser = parse_window, allow_hyphen_values = true)]
    window: Option<(f64, f64)>,
    /// Technology or family (wlan, bt, ble, zigbee, all, or a single name);
    /// comma-separated or repeated.
    #[arg(long, global = true, value_delimiter = ',')]
    tech: Vec<String>,
    /// Channel indices, e.g. 0,3,10-15.
    #[arg(long, global = true, value_parser = parse_channels)]
    channels: Option<Vec<u8>>,
    #[arg(long, global = true)]
    bin_seconds: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the scenario and write the ledger, traces, dataset and reports.
    Simulate,
    /// Train and evaluate classifiers on a labeled dataset.
    TrainEval {
        /// Labeled dataset CSV; overrides the config.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Render per-technology power maps and per-node spectrograms.
    Map {
        /// Concatenated report file from `simulate`; the scenario is
        /// simulated when absent.
        #[arg(long)]
        reports: Option<PathBuf>,
    },
    /// Render power and busy-time spectrograms.
    Spectrogram {
        #[arg(long)]
        reports: Option<PathBuf>,
        /// Single node; every node when absent.
        #[arg(long)]
        node: Option<u16>,
    },
    /// Encode or decode interference reports.
    ReportCodec {
        #[command(subcommand)]
        action: CodecAction,
    },
}

#[derive(Subcommand, Debug)]
enum CodecAction {
    /// Print a report file as JSON, one report per line.
    Decode { input: PathBuf },
    /// Encode a JSON array of reports into a report file.
    Encode {
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

impl Cli {
    fn run_config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(w) = self.window {
            cfg.map.window_s = Some(w);
        }
        if !self.tech.is_empty() {
            cfg.map.techs = self.tech.clone();
        }
        if let Some(c) = &self.channels {
            cfg.map.channels = Some(c.clone());
        }
        if let Some(b) = self.bin_seconds {
            cfg.map.bin_seconds = b;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = cli
        .run_config()
        .map_err(commands::Failure::Usage)
        .and_then(|cfg| match &cli.command {
            Command::Simulate => commands::simulate(&cfg),
            Command::TrainEval { dataset } => commands::train_eval(&cfg, dataset.as_deref()),
            Command::Map { reports } => commands::map(&cfg, reports.as_deref()),
            Command::Spectrogram { reports, node } => commands::spectrogram(&cfg, reports.as_deref(), *node),
            Command::ReportCodec { action } => match action {
                CodecAction::Decode { input } => commands::decode_reports(input),
                CodecAction::Encode { input, output } => commands::encode_reports(input, output),
            },
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
