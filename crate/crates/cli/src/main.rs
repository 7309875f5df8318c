//! `actionvlm` command-line front end.

mod commands;
mod config;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use actionvlm::experiment::AblationMode;
use clap::{Parser, Subcommand};

pub const VERSION: &str = concat!("actionvlm ", env!("CARGO_PKG_VERSION"));

#[derive(Parser, Debug)]
#[command(name = "actionvlm", version, about = "Language-advantage debiasing on synthetic action-localization corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model on a corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from the checkpoint and optimizer state in this run directory.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint and write a metrics report.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Also evaluate a conflict-injected twin of the corpus and report LAP.
        #[arg(long)]
        conflict: bool,
        /// Also run the ambiguity probe on generated distractor clips.
        #[arg(long)]
        probe: bool,
        /// Evaluation options; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and compare ablation variants against the learned gate.
    Ablate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: AblationMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the logs and reports of a run directory as text.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<AblationMode, String> {
    s.parse().map_err(|e: actionvlm::Error| e.to_string())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen { config, out } => commands::gen(&config, out),
        Command::Train {
            corpus,
            config,
            out,
            resume,
        } => commands::train(&corpus, &config, out, resume.as_deref()),
        Command::Eval {
            ckpt,
            corpus,
            conflict,
            probe,
            config,
            out,
        } => commands::eval(&ckpt, &corpus, conflict, probe, config.as_deref(), &out),
        Command::Ablate {
            corpus,
            config,
            mode,
            out,
        } => commands::ablate(&corpus, &config, mode, out),
        Command::Report { run } => commands::report(&run),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
        Err(_) => ExitCode::from(3),
    }
}
