//! `gesture-asr`: command-line front end for the gesture-aware ASR toolkit.
//!
//! Exit codes: 0 success, 1 when some item failed, 2 on usage or
//! configuration errors.

mod backends;
mod commands;
mod config;

use clap::{Args, CommandFactory, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "gesture-asr",
    version,
    about = "Gesture-aware speech recognition toolkit"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Flat TOML config file; GESTURE_ASR_* variables override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Confidence threshold for the token filter.
    #[arg(long, global = true, value_name = "TAU")]
    pub threshold: Option<f64>,
    /// Use the offline mock backends.
    #[arg(long, global = true)]
    pub mock: bool,
    /// Utterances processed at once.
    #[arg(long, global = true, value_name = "N")]
    pub parallel: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a CHAT file (printed back in canonical form) or a corpus directory.
    Parse { path: PathBuf },
    /// Per-label gesture statistics over a corpus.
    Stats {
        #[arg(long)]
        root: PathBuf,
        /// table, csv or json.
        #[arg(long, default_value = "table")]
        format: String,
    },
    /// Word error rate over reference/hypothesis pairs.
    Wer {
        /// JSON lines of {id, ref, hyp}.
        #[arg(long, conflicts_with_all = ["ref_dir", "hyp_dir"], required_unless_present = "ref_dir")]
        manifest: Option<PathBuf>,
        /// Directory of reference .txt files, paired by file stem.
        #[arg(long, requires = "hyp_dir")]
        ref_dir: Option<PathBuf>,
        #[arg(long, requires = "ref_dir")]
        hyp_dir: Option<PathBuf>,
    },
    /// Drop low-confidence tokens from a transcript JSON file.
    Filter {
        /// Transcript JSON, or `-` for stdin.
        #[arg(long)]
        input: PathBuf,
        /// Keep tokens whose confidence equals the threshold.
        #[arg(long)]
        inclusive: bool,
    },
    /// Gesture events from CHAT annotations or from video frames.
    Gestures {
        #[arg(long, conflicts_with = "frames", required_unless_present = "frames")]
        cha: Option<PathBuf>,
        /// Directory of frame images named with a millisecond timestamp.
        #[arg(long)]
        frames: Option<PathBuf>,
        /// Item id passed to the backend; defaults to the directory name.
        #[arg(long)]
        id: Option<String>,
        #[arg(long, requires = "end_ms")]
        start_ms: Option<u64>,
        #[arg(long, requires = "start_ms")]
        end_ms: Option<u64>,
    },
    /// Rewrite one transcript with gesture labels.
    Rewrite {
        #[arg(long, default_value = "")]
        text: String,
        /// Gesture label; repeat for several.
        #[arg(long = "gesture")]
        gestures: Vec<String>,
        #[arg(long, default_value = "cli")]
        id: String,
    },
    /// Run ASR, filtering, gesture recognition and rewriting over a manifest.
    Pipeline {
        /// JSON lines of items.
        #[arg(long)]
        manifest: PathBuf,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Original / ASR / Ours comparison from a pipeline report.
    CaseReport {
        #[arg(long)]
        report: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!();
            let _ = Cli::command().write_long_help(&mut std::io::stderr());
            return ExitCode::from(2);
        }
    };
    match commands::run(&cli.global, cli.command) {
        Ok(commands::Outcome::Success) => ExitCode::SUCCESS,
        Ok(commands::Outcome::ItemFailures) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
