mod commands;
mod diag;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use diag::{Diag, EXIT_USAGE};
use hlsflow_core::sim::DEFAULT_SEED;

#[derive(Parser)]
#[command(name = "hlsflow", version, about = "Affine loop nests to Verilog, with a cycle-accurate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated kernel as a .mlir file.
    Gen(GenArgs),
    /// Lower a kernel and write Verilog, hardware IR and testbench artifacts.
    Compile(CompileArgs),
    /// Run the reference interpreter and print the final memories as JSON.
    Run(RunArgs),
    /// Simulate the lowered hardware and print cycles and final memories as JSON.
    Simulate(SimulateArgs),
    /// Simulate GEMM at several sizes and print a cycle/resource table.
    Bench(BenchArgs),
    /// Print resource counts and predicted cycles for each function.
    Report(ReportArgs),
    /// Re-run every fixture pipeline and compare artifact hashes.
    CheckFixtures(CheckFixturesArgs),
    /// Convert testbench output from an external Verilog simulator into memory JSON.
    ImportDump(ImportDumpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Kernel {
    Gemm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmitKind {
    Verilog,
    Hwir,
    Testbench,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TableFormat {
    Csv,
    Text,
}

#[derive(Args)]
pub struct OutDir {
    /// Output directory.
    #[arg(short = 'o', long = "out-dir", env = "HLSFLOW_OUT_DIR", default_value = ".")]
    pub dir: PathBuf,
}

#[derive(Args)]
pub struct Source {
    /// Input .mlir file.
    pub input: PathBuf,
    /// Function to use when the module defines more than one.
    #[arg(long = "func")]
    pub func: Option<String>,
    /// Unroll the loop at PATH fully or by factor K, e.g. `0.0.0:full` or `@f:0.1:4`.
    #[arg(long = "unroll", value_name = "PATH:full|K")]
    pub unroll: Vec<String>,
}

#[derive(Args)]
pub struct Memories {
    /// Bind a memref argument to a JSON image; unbound memories start as zeros.
    #[arg(long = "mem", value_name = "NAME=PATH")]
    pub mem: Vec<String>,
}

#[derive(Args)]
pub struct GenArgs {
    pub kind: Kernel,
    /// Matrix size.
    pub n: u64,
    #[command(flatten)]
    pub out: OutDir,
    /// Print to standard output instead of writing a file.
    #[arg(long)]
    pub stdout: bool,
}

#[derive(Args)]
pub struct CompileArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub out: OutDir,
    /// Artifacts to write.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "verilog,hwir")]
    pub emit: Vec<EmitKind>,
    #[command(flatten)]
    pub mems: Memories,
    /// Testbench timeout in cycles.
    #[arg(long, default_value_t = 100_000_000)]
    pub max_cycles: u64,
    /// Make the testbench compare memories against the interpreter result.
    #[arg(long)]
    pub self_check: bool,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub mems: Memories,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub mems: Memories,
    #[arg(long, default_value_t = 100_000_000)]
    pub max_cycles: u64,
    /// Write the per-cycle list of active groups to this file.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    /// Also run the interpreter and fail if the memories differ.
    #[arg(long)]
    pub check: bool,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    pub sizes: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "nested,flattened")]
    pub variants: Vec<hlsflow_core::sim::Variant>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: TableFormat,
    /// Write the table to this file instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub source: Source,
}

#[derive(Args)]
pub struct CheckFixturesArgs {
    /// Fixture directory containing manifest.json.
    #[arg(default_value = "fixtures")]
    pub dir: PathBuf,
    /// Regenerate derived fixtures and refresh the manifest hashes.
    #[arg(long)]
    pub bless: bool,
}

#[derive(Args)]
pub struct ImportDumpArgs {
    /// Captured standard output of the emitted testbench.
    pub dump: PathBuf,
    /// Design the dump came from; maps memory cells back to argument names.
    #[arg(long, value_name = "MLIR")]
    pub design: Option<PathBuf>,
    #[arg(long = "func")]
    pub func: Option<String>,
    #[arg(long = "unroll", value_name = "PATH:full|K")]
    pub unroll: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let mut warnings: Vec<Diag> = Vec::new();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Compile(a) => commands::compile(a, &mut warnings),
        Command::Run(a) => commands::run(a, &mut warnings),
        Command::Simulate(a) => commands::simulate(a, &mut warnings),
        Command::Bench(a) => commands::bench(a),
        Command::Report(a) => commands::report(a),
        Command::CheckFixtures(a) => commands::check_fixtures(a),
        Command::ImportDump(a) => commands::import_dump(a),
    };
    for w in &warnings {
        eprintln!("{w}");
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            for d in &f.diags {
                eprintln!("{d}");
            }
            ExitCode::from(f.code)
        }
    }
}
