//! `actlang`: infer, forecast, simulate and price procedure-code grammars;
//! solve conversation chains and tree walks; report on assembly words.
//!
//! Exit status is 0 on success, 2 when the input is at fault and 1 for
//! internal failures. Every artifact starts with a provenance header.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "actlang", version, about = "Stochastic grammars of procedure codes and conversation chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Write the artifact here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tab-separated tables or a structured (JSON) document.
    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
    /// Alphabet file (`code<TAB>description`); defaults to the built-in one.
    #[arg(long, global = true)]
    pub alphabet: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Tsv,
    Struct,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Corpus to leveled grammar.
    Infer {
        corpus: PathBuf,
    },
    /// Yearly corpora to linear trends, one year's prediction and the limit.
    Forecast {
        corpora: Vec<PathBuf>,
        /// Year to predict; defaults to the year after the last corpus.
        #[arg(long)]
        year: Option<i32>,
        /// Evaluate the published coefficient blocks instead of fitting.
        #[arg(long)]
        published: bool,
    },
    /// Words drawn from a grammar file.
    Gen {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n: u64,
        /// Attach geometric repetition counts with this mean (≥ 1).
        #[arg(long)]
        counts: Option<f64>,
    },
    /// Cost statistics of a word list under a price list.
    Cost {
        words: PathBuf,
        /// Price list; defaults to the built-in example prices.
        #[arg(long)]
        prices: Option<PathBuf>,
    },
    /// Trajectory of a continuous-time chain.
    Ctmc {
        chain: PathBuf,
        #[arg(long)]
        t: f64,
        /// Number of equal steps between 0 and `t`.
        #[arg(long, default_value_t = 10)]
        steps: usize,
        /// Initial distribution, comma separated; all mass on the first state by default.
        #[arg(long)]
        p0: Option<String>,
    },
    /// Trajectory of the theme walk on a semantic tree.
    TreeWalk {
        tree: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        /// Starting theme; the root by default.
        #[arg(long)]
        start: Option<String>,
    },
    /// Structure report of an assembly word.
    Aword {
        word: PathBuf,
        /// Declarations of element, action and process ids.
        #[arg(long)]
        decl: Option<PathBuf>,
        /// Assembly times of the inner nodes in pre-order, comma separated.
        #[arg(long)]
        times: Option<String>,
        /// Workers per station, to turn stations into head counts.
        #[arg(long)]
        workers: Option<u32>,
    },
}

/// A failure with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn input(msg: impl Into<String>) -> Self {
        Failure { code: 2, msg: msg.into() }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Failure { code: 1, msg: msg.into() }
    }

    /// Attribute a library error to `path`, with its line when known.
    pub fn at(path: &std::path::Path, e: actlang::Error) -> Self {
        let code = if e.is_input() { 2 } else { 1 };
        let msg = match &e {
            actlang::Error::Parse { line, msg } => format!("{}:{line}: {msg}", path.display()),
            _ => format!("{}: {e}", path.display()),
        };
        Failure { code, msg }
    }
}

impl From<actlang::Error> for Failure {
    fn from(e: actlang::Error) -> Self {
        if e.is_input() {
            Failure::input(e.to_string())
        } else {
            Failure::internal(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.command, &cli.common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("actlang: {}", f.msg.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
