//! `tsds`: build a cache from granules, serve it, fetch from a server, and
//! validate a cache directory.
//!
//! Exit status is 0 on success, 1 when the inputs or the request are at
//! fault, and 2 on internal failures (I/O, bind errors, unreadable catalog).

mod build;
mod get;
mod serve;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tsds", version, about = "Time-series data server tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build or refresh cached series from a dataset manifest.
    Build {
        /// Build manifest (TOML).
        manifest: PathBuf,
        /// Directory the .bin/.ncml/provenance files are written to.
        #[arg(long, short)]
        out: PathBuf,
        /// Granule parsing threads (0 = one per core).
        #[arg(long, short, default_value_t = 0)]
        jobs: usize,
        /// Print a JSON summary instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Serve the cache over HTTP.
    Serve(serve::ServeArgs),
    /// Download a URL to a file, verifying full .bin downloads against the
    /// MD5 in their metadata.
    Get {
        url: String,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Check every series in a directory against its metadata's MD5 and length.
    Validate {
        dir: PathBuf,
        /// Print a JSON summary instead of text.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Build { manifest, out, jobs, json } => build::run(&manifest, &out, jobs, json),
        Command::Serve(args) => serve::run(args),
        Command::Get { url, out } => get::run(&url, &out),
        Command::Validate { dir, json } => validate::run(&dir, json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn init_logging(default: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}
