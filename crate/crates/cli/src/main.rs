//! `persona`: clean, synthesize, train, predict and evaluate from the shell.

mod commands;
mod opts;
mod svg;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use opts::Opts;

#[derive(Parser)]
#[command(name = "persona", version, about = "Big-5 personality prediction from tweets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean tweets: stdin to stdout line by line, or a whole corpus with --corpus.
    Clean {
        #[command(flatten)]
        opts: Opts,
        #[command(flatten)]
        clean: CleanArgs,
    },
    /// Write a seeded synthetic corpus, embedding table and lexicon.
    Synth {
        #[command(flatten)]
        opts: Opts,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Train one model per trait and write a model bundle.
    Train {
        #[command(flatten)]
        opts: Opts,
    },
    /// Predict traits for every user of a corpus with a trained bundle.
    Predict {
        #[command(flatten)]
        opts: Opts,
    },
    /// Report how much of a corpus each feature set's vocabulary covers.
    Coverage {
        #[command(flatten)]
        opts: Opts,
    },
    /// Run one of the evaluation settings and write its report.
    Eval {
        #[command(flatten)]
        opts: Opts,
        #[arg(long, value_enum)]
        setting: Setting,
        /// Average each user's predictions over subsets before correlating.
        #[arg(long)]
        average_predictions: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Setting {
    Full,
    Sampling,
    Reallife,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Hashtags {
    Drop,
    Strip,
}

#[derive(Debug, Clone, Args)]
struct CleanArgs {
    /// Remove `#tag` tokens, or keep the word without the marker.
    #[arg(long, value_enum, default_value = "drop")]
    hashtags: Hashtags,
    /// Remove `@user` tokens instead of keeping the name.
    #[arg(long)]
    drop_mentions: bool,
}

#[derive(Debug, Clone, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 300)]
    users: usize,
    #[arg(long, default_value_t = 200)]
    tweets: usize,
    /// Additional held-out users written to test.jsonl with few tweets each.
    #[arg(long, default_value_t = 0)]
    test_users: usize,
    #[arg(long, default_value_t = 28.0)]
    test_tweets_mean: f64,
    #[arg(long, default_value_t = 11.0)]
    test_tweets_std: f64,
    #[arg(long, default_value_t = 25)]
    dim: usize,
    #[arg(long, default_value_t = 2000)]
    vocab: usize,
    #[arg(long, default_value_t = 30)]
    categories: usize,
    /// Trait noise standard deviation; defaults to the signal's, so half
    /// the trait variance is explained by the text.
    #[arg(long)]
    noise: Option<f64>,
}

/// Why a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(persona_core::Error),
    Io(PathBuf, std::io::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) if e.is_numerical() => 3,
            Failure::Core(_) | Failure::Io(..) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<persona_core::Error> for Failure {
    fn from(e: persona_core::Error) -> Self {
        Failure::Core(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Clean { opts, clean } => commands::clean(&opts.resolve()?, &clean),
        Command::Synth { opts, synth } => commands::synth(&opts.resolve()?, &synth),
        Command::Train { opts } => commands::train(&opts.resolve()?),
        Command::Predict { opts } => commands::predict(&opts.resolve()?),
        Command::Coverage { opts } => commands::coverage(&opts.resolve()?),
        Command::Eval {
            opts,
            setting,
            average_predictions,
        } => commands::eval(&opts.resolve()?, setting, average_predictions),
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            if matches!(f, Failure::Usage(_)) {
                eprintln!("run `persona help` for usage");
            }
            ExitCode::from(f.code())
        }
    }
}
