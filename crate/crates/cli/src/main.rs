use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use regcomb::monoid::MonoidKind;
use regcomb::Alphabet;
use regcomb_cli::commands::{self, CliError, LoadOptions, Source, DEFAULT_LIMIT};

#[derive(Parser)]
#[command(name = "regcomb", version, about = "Evaluate, compile and extract regular cost functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Value monoid; inferred from the input when omitted.
    #[arg(long, global = true, value_parser = parse_monoid)]
    monoid: Option<MonoidKind>,
    /// Input alphabet as a string of symbols; inferred when omitted.
    #[arg(long, global = true)]
    alphabet: Option<String>,
    /// Write the result to a file instead of stdout.
    #[arg(short = 'o', long = "output", global = true)]
    output: Option<String>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Input {
    /// Expression text.
    #[arg(short = 'e', long = "expr")]
    expr: Option<String>,
    /// File holding an expression.
    #[arg(short = 'f', long = "file")]
    file: Option<String>,
    /// Machine or cascade JSON file.
    #[arg(short = 'm', long = "machine")]
    machine: Option<String>,
}

impl Input {
    fn source(&self) -> Source {
        match (&self.expr, &self.file, &self.machine) {
            (Some(e), _, _) => Source::Text(e.clone()),
            (_, Some(f), _) => Source::File(f.clone()),
            (_, _, Some(m)) => Source::Machine(m.clone()),
            _ => unreachable!("clap requires one input"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate on each input string; prints one value per line, `bot` where undefined.
    Eval {
        #[command(flatten)]
        input: Input,
        /// Input string (repeatable).
        #[arg(short = 'i', long = "input", required = true)]
        inputs: Vec<String>,
    },
    /// Compile an expression into a machine cascade (JSON).
    Compile {
        #[command(flatten)]
        input: Input,
    },
    /// Extract an expression from an additive machine over integers.
    ExtractComm {
        #[command(flatten)]
        input: Input,
    },
    /// Extract an expression from a copyless machine.
    ExtractNoncomm {
        #[command(flatten)]
        input: Input,
        /// Fail on machines that are not normalized instead of normalizing them.
        #[arg(long)]
        skip_normalize: bool,
        /// Compare the result with the machine on all inputs up to this length.
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Print the domain as a regex (or DOT with --dot).
    Domain {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        dot: bool,
    },
    /// Print a machine, cascade or compiled expression in DOT.
    Dot {
        #[command(flatten)]
        input: Input,
    },
    /// Compare two functions on all inputs up to a length. Each side is an
    /// expression, an expression file or a machine JSON file.
    CheckEquiv {
        lhs: String,
        rhs: String,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
        /// Maximum number of strings to compare.
        #[arg(long, default_value_t = DEFAULT_LIMIT)]
        limit: u64,
    },
}

fn parse_monoid(s: &str) -> Result<MonoidKind, String> {
    s.parse().map_err(|_| format!("unknown monoid `{s}` (expected str or int)"))
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let opts = LoadOptions { monoid: cli.monoid, alphabet: cli.alphabet.as_deref().map(Alphabet::from_symbols) };
    let load = |input: &Input| commands::load(&input.source(), &opts);
    match &cli.command {
        Command::Eval { input, inputs } => commands::cmd_eval(&load(input)?, inputs),
        Command::Compile { input } => commands::cmd_compile(&load(input)?),
        Command::ExtractComm { input } => commands::cmd_extract_comm(&load(input)?),
        Command::ExtractNoncomm { input, skip_normalize, max_len } => {
            commands::cmd_extract_noncomm(&load(input)?, *skip_normalize, *max_len)
        }
        Command::Domain { input, dot } => commands::cmd_domain(&load(input)?, *dot),
        Command::Dot { input } => commands::cmd_dot(&load(input)?),
        Command::CheckEquiv { lhs, rhs, max_len, limit } => {
            let l = commands::load(&Source::guess(lhs), &opts)?;
            let r = commands::load(&Source::guess(rhs), &opts)?;
            Ok(format!("{}\n", commands::cmd_check_equiv(&l, &r, *max_len, *limit)?))
        }
    }
}

fn write_output(path: Option<&str>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {p}")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(text) => match write_output(cli.output.as_deref(), &text) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
