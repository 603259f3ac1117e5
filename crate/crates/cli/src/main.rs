mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use regop::linalg::PExponent;

#[derive(Parser, Debug)]
#[command(
    name = "regop",
    version,
    about = "Norm brackets for maps between matrix algebras"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Output {
    /// Write the report here instead of standard output.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn parse_p(s: &str) -> Result<PExponent, String> {
    s.parse().map_err(|e: regop::Error| e.to_string())
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Bracket the vector-valued Schatten norm of a block matrix.
    Vnorm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_p)]
        p: PExponent,
        /// Random starts for the lower-bound ascent.
        #[arg(long, default_value_t = 6)]
        restarts: usize,
        #[arg(long)]
        seed: u64,
        /// Stopping tolerance of the factorization solver.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Upper bound for the pairing norm of a block matrix.
    Rho {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_p)]
        p: PExponent,
        #[arg(long, default_value_t = 2)]
        restarts: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Completely bounded norm of a map.
    Cbnorm {
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Complete positivity test via the Choi matrix.
    Cpcheck {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Kraus operators of a completely positive map.
    Kraus {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Bracket the norm of a map on Schatten classes.
    Spnorm {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = parse_p)]
        p: PExponent,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Bracket the regular norm of a map.
    Regnorm {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = parse_p)]
        p: PExponent,
        /// Highest amplification level K of the lower-bound search.
        #[arg(long = "levels", short = 'K', default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 4)]
        restarts: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Split a map into four completely positive parts.
    Decompose {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = parse_p)]
        p: PExponent,
        #[command(flatten)]
        output: Output,
    },
    /// Pair a map with a block matrix and check the duality inequality.
    Pair {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_p)]
        p: PExponent,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Extend a map given on a subspace with small regular norm.
    Extend {
        #[arg(long)]
        subspace: PathBuf,
        #[arg(long, value_parser = parse_p)]
        p: PExponent,
        #[arg(long, short = 'K', default_value_t = 2)]
        levels: usize,
        #[arg(long, default_value_t = 2)]
        restarts: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Generate a random instance.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        /// Input dimension, or outer dimension of a block matrix.
        #[arg(long)]
        n: usize,
        /// Output dimension, or inner dimension of a block matrix.
        #[arg(long)]
        m: usize,
        /// Choi rank of a completely positive map.
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Run the acceptance criteria.
    Verify {
        #[arg(long)]
        seed: u64,
        /// Run only these criteria (repeatable).
        #[arg(long = "criterion", value_parser = clap::value_parser!(u8).range(1..=14))]
        criteria: Vec<u8>,
        /// Emit a JSON report instead of one line per criterion.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenKind {
    Map,
    CpMap,
    Block,
    /// A random map restricted to the upper-triangular matrices.
    SubspaceMap,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
