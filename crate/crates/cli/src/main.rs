//! `snnforge`: validate, quantize, simulate, size and generate clock-driven
//! spiking network accelerators from the command line.
//!
//! Exit codes: 0 on success, 2 for bad input data (raster shape or syntax),
//! 3 for bad network or device configuration, 1 for anything else.

mod commands;
mod encode;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use snnforge_core::network::Accumulator;
use snnforge_core::quant::SweepDim;
use snnforge_core::{Error, Propagation};

#[derive(Parser, Debug)]
#[command(name = "snnforge", version, about = "Fixed-point SNN accelerator workbench")]
struct Cli {
    /// Worker threads for batch commands (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// More log output on stderr; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a network config and print its topology.
    Validate { config: PathBuf },
    /// Quantize a real-valued config into raw weight files.
    Quantize(QuantizeArgs),
    /// Run inference on a raster or a dataset directory.
    Sim(SimArgs),
    /// Accuracy as a function of one bit width.
    Sweep(SweepArgs),
    /// Rate-encode a vector file or an image directory into rasters.
    Encode(EncodeArgs),
    /// BRAM usage and predicted latency on a device.
    Estimate(EstimateArgs),
    /// Generate the VHDL bundle for a network.
    Hdl(HdlArgs),
}

#[derive(Args, Debug)]
struct QuantizeArgs {
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Name of the written config (default: the config's name).
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    neuron_bits: Option<u32>,
    #[arg(long)]
    ff_bits: Option<u32>,
    #[arg(long)]
    fb_bits: Option<u32>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Mode {
    Pipelined,
    Immediate,
}

impl From<Mode> for Propagation {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Pipelined => Propagation::Pipelined,
            Mode::Immediate => Propagation::Immediate,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum AccumulatorArg {
    Saturating,
    Wide,
}

impl From<AccumulatorArg> for Accumulator {
    fn from(a: AccumulatorArg) -> Self {
        match a {
            AccumulatorArg::Saturating => Accumulator::Saturating,
            AccumulatorArg::Wide => Accumulator::Wide,
        }
    }
}

#[derive(Args, Debug)]
struct SimArgs {
    config: PathBuf,
    /// A raster file, or a directory of rasters with an optional labels.csv.
    input: PathBuf,
    /// Override the config's propagation mode.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum, default_value = "saturating")]
    accumulator: AccumulatorArg,
    /// Process silent steps like any other step.
    #[arg(long)]
    no_skip: bool,
    #[arg(long, default_value_t = 100.0)]
    clock_mhz: f64,
    /// Write a JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum DimArg {
    Neuron,
    Ff,
    Fb,
    Grid,
}

impl From<DimArg> for SweepDim {
    fn from(d: DimArg) -> Self {
        match d {
            DimArg::Neuron => SweepDim::Neuron,
            DimArg::Ff => SweepDim::Ff,
            DimArg::Fb => SweepDim::Fb,
            DimArg::Grid => SweepDim::Grid,
        }
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Config with real-valued weights.
    config: PathBuf,
    /// Labelled dataset directory.
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "neuron")]
    dim: DimArg,
    /// Widths as a list (`8,6,4`) or a range (`32-1`).
    #[arg(long, default_value = "32-1")]
    widths: String,
    /// Write the CSV table here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    /// CSV file with one vector per line, or a directory of PNG/PGM images.
    input: PathBuf,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// The first CSV column is a class label.
    #[arg(long)]
    labeled: bool,
    /// Write packed binary rasters.
    #[arg(long)]
    packed: bool,
    #[arg(long, default_value = "sample")]
    prefix: String,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    config: PathBuf,
    #[arg(long, default_value = "XC7Z020")]
    device: String,
    /// Device catalog JSON replacing the built-in one.
    #[arg(long, env = "SNNFORGE_DEVICES")]
    devices: Option<PathBuf>,
    /// Assumed activity `FF` or `FF,FB` for every layer.
    #[arg(long, conflicts_with = "dataset")]
    activity: Option<String>,
    /// Measure activity by simulating this dataset directory.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 100.0)]
    clock_mhz: f64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HdlArgs {
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Entity prefix (default: the config's name).
    #[arg(long)]
    name: Option<String>,
    /// Raster replayed by the testbench.
    #[arg(long)]
    stimulus: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_data_error() => 2,
        Error::Config { .. } | Error::Json(_) | Error::UnsupportedEncoding(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // keep 2 reserved for data errors
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Validate { config } => commands::validate(&config),
        Command::Quantize(a) => commands::quantize(a),
        Command::Sim(a) => commands::sim(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Encode(a) => encode::run(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Hdl(a) => commands::hdl(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
