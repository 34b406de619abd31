//! Command-line driver. Every command is a function of its flags, the config
//! file and its input files; the exit code classifies failures.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;

pub use config::{DataConfig, RunConfig};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CHECK_FAILED: u8 = 1;
    pub const BAD_ARGS: u8 = 2;
    pub const DATA_MISMATCH: u8 = 3;
    pub const FORMAT: u8 = 4;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "disentangle", version, about = "Fine-grained adversarial disentanglement on synthetic audio")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    LeakyReluSlope,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled dataset file.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on one or more dataset files.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Dataset file; repeat for several datasets.
        #[arg(long = "data", required = true)]
        data: Vec<PathBuf>,
        /// Model output path.
        #[arg(long, alias = "model")]
        out: PathBuf,
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Probe matrix, reconstruction and swap agreement of a trained model.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Report output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode sample a's latent with sample b's labels and read it back.
    Swap {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        factor: usize,
        #[arg(long)]
        a: usize,
        #[arg(long)]
        b: usize,
        /// Write the synthesized features as JSON.
        #[arg(long, alias = "out")]
        dump: Option<PathBuf>,
    },
    /// Finite-difference check of every network family's gradients.
    GradCheck {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, hide = true, value_enum)]
        inject_fault: Option<Fault>,
    },
}

/// Parses `args` (including the program name) and runs the command,
/// writing human-readable output to `out`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::BAD_ARGS } else { exit::OK };
            let _ = if code == exit::OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => exit::OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    use commands as c;
    match cmd {
        Command::GenData { config, seed, out: path } => {
            let cfg = RunConfig::load(config.as_deref())?.with_seed(seed);
            c::gen_data(&cfg, &path, out).map(drop)
        }
        Command::Train {
            config,
            seed,
            data,
            out: path,
            history,
        } => {
            let cfg = RunConfig::load(config.as_deref())?.with_seed(seed);
            c::train(&cfg, &data, &path, history.as_deref(), out).map(drop)
        }
        Command::Eval {
            config,
            seed,
            model,
            train,
            test,
            out: path,
        } => {
            let cfg = RunConfig::load(config.as_deref())?.with_seed(seed);
            c::eval(&cfg, &model, &train, &test, &path, out).map(drop)
        }
        Command::Swap {
            model,
            data,
            factor,
            a,
            b,
            dump,
        } => c::swap(&model, &data, factor, a, b, dump.as_deref(), out).map(drop),
        Command::GradCheck { seed, inject_fault } => {
            let fault = inject_fault.map(|Fault::LeakyReluSlope| disentangle_core::numerics::BackwardFault::LeakyReluSlope);
            c::grad_check(seed.unwrap_or(0), fault, out).map(drop)
        }
    }
}
