// SPDX-License-Identifier: Apache-2.0

//! `sied`: key management, embed/extract, grading and histogram export.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 grade expectation mismatch,
//! 64 usage error, 65 malformed input data.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "sied", version, about = "Steganography in encrypted domains: embed, extract and grade")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SeedArg {
    /// Seed for every random choice; falls back to SIED_SEED.
    #[arg(long, env = "SIED_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a Paillier key pair or an LWE secret key.
    Keygen(KeygenArgs),
    /// Embed a message into a cover and write the stego bundle.
    Embed(EmbedArgs),
    /// Extract the hidden bits from a stego bundle and print them as hex.
    Extract(ExtractArgs),
    /// Decrypt a bundle's records as the legitimate receiver.
    Decrypt(DecryptArgs),
    /// Grade a scheme against the four attack levels.
    Grade(GradeArgs),
    /// Export plain and stego trace histograms as CSV.
    Hist(HistArgs),
    /// Run the sender, channel, receiver scenario and print a transcript.
    Demo(DemoArgs),
}

#[derive(Args, Debug)]
pub struct KeygenArgs {
    /// `paillier` or `lwe-toy`.
    #[arg(long)]
    pub scheme: String,
    #[arg(long, default_value_t = 512)]
    pub prime_bits: u64,
    #[arg(long, default_value_t = 32)]
    pub lwe_n: usize,
    #[arg(long, default_value_t = 12289)]
    pub lwe_q: u32,
    #[arg(long, default_value_t = 3.2)]
    pub lwe_sigma: f64,
    /// Output prefix; writes `<out>.pk.json` and `<out>.sk.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    #[arg(long)]
    pub scheme: String,
    /// Key files (Paillier public/secret, LWE secret); repeatable.
    #[arg(long = "key")]
    pub keys: Vec<PathBuf>,
    /// Cover JSON: `{"plaintexts":[..]}` or `{"public":pk,"ciphertexts":[..]}`.
    #[arg(long)]
    pub cover: PathBuf,
    /// Message as MSB-first hex.
    #[arg(long)]
    pub message: String,
    /// Message length in bits; defaults to four per hex digit.
    #[arg(long)]
    pub bits: Option<usize>,
    /// EVR bit positions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub positions: Option<Vec<u64>>,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the process trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Where to write side information (the marked-DE location map).
    #[arg(long)]
    pub side_info: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[arg(long)]
    pub scheme: String,
    #[arg(long = "key")]
    pub keys: Vec<PathBuf>,
    /// A stego bundle, or a bare JSON array of ciphertexts.
    #[arg(long)]
    pub stego: PathBuf,
    #[arg(long)]
    pub side_info: Option<PathBuf>,
    /// Truncate the output to this many bits.
    #[arg(long)]
    pub bits: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DecryptArgs {
    #[arg(long = "key")]
    pub keys: Vec<PathBuf>,
    #[arg(long)]
    pub stego: PathBuf,
}

#[derive(Args, Debug)]
pub struct GradeArgs {
    #[arg(long)]
    pub scheme: String,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub prime_bits: Option<u64>,
    #[arg(long)]
    pub kca_images: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit 2 unless the resisted level equals this.
    #[arg(long)]
    pub expect: Option<String>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct HistArgs {
    /// Trace file (one number per line) to histogram as the stego trace.
    #[arg(long, conflicts_with = "scheme")]
    pub trace: Option<PathBuf>,
    /// Baseline trace file for `--trace`.
    #[arg(long, requires = "trace")]
    pub baseline: Option<PathBuf>,
    /// Generate traces by running this scheme.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub prime_bits: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    #[arg(long)]
    pub scheme: String,
    /// Message length in bits.
    #[arg(long, default_value_t = 16)]
    pub bits: usize,
    /// Number of cover samples.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long, default_value_t = 128)]
    pub prime_bits: u64,
    #[command(flatten)]
    seed: SeedArg,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Keygen(a) => {
            let seed = a.seed.seed.unwrap_or(0);
            commands::keygen(&a, seed)
        }
        Command::Embed(a) => {
            let seed = a.seed.seed.unwrap_or(0);
            commands::embed(&a, seed)
        }
        Command::Extract(a) => commands::extract(&a),
        Command::Decrypt(a) => commands::decrypt(&a),
        Command::Grade(a) => {
            let seed = a.seed.seed;
            commands::grade(&a, seed)
        }
        Command::Hist(a) => {
            let seed = a.seed.seed;
            commands::hist(&a, seed)
        }
        Command::Demo(a) => {
            let seed = a.seed.seed.unwrap_or(0);
            commands::demo(&a, seed)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sied: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
