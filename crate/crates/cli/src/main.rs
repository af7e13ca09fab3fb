//! `rydkerr` command line: forward spectra, synthetic interferograms, phase
//! extraction, fits and manifest-driven pipelines.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod cli;
mod extract;
mod fit;
mod output;
mod pipeline;
mod spectrum;
mod synth;

use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};

/// Error tagged with the exit code it should produce.
#[derive(Debug)]
pub struct Coded {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for Coded {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Coded {}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_SIGNAL: u8 = 4;

pub fn coded(code: u8, message: impl Into<String>) -> anyhow::Error {
    Coded {
        code,
        message: message.into(),
    }
    .into()
}

/// Exit code for an error chain: the outermost tagged error wins, then the
/// class of the first library error found.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(c) = cause.downcast_ref::<Coded>() {
            return c.code;
        }
        if let Some(e) = cause.downcast_ref::<rydkerr::Error>() {
            return match e.kind() {
                rydkerr::ErrorKind::Config => EXIT_CONFIG,
                rydkerr::ErrorKind::Numeric => EXIT_NUMERIC,
                rydkerr::ErrorKind::SignalProcessing => EXIT_SIGNAL,
                rydkerr::ErrorKind::Io => EXIT_FAILURE,
            };
        }
        if cause.is::<rydkerr::interferometry::ExtractError>() {
            return EXIT_SIGNAL;
        }
    }
    EXIT_FAILURE
}

pub fn run(cli: &Cli) -> anyhow::Result<Vec<std::path::PathBuf>> {
    match &cli.command {
        Command::Spectrum(a) => spectrum::run(&cli.globals, a),
        Command::Synth(a) => synth::run(&cli.globals, a),
        Command::Extract(a) => extract::run(&cli.globals, a),
        Command::Fit(a) => fit::run(&cli.globals, a),
        Command::Pipeline(a) => pipeline::run(&cli.globals, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
