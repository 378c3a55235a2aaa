use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qcontext::pipeline::{benchmark_run, compile_pipeline, suite_files, Libraries, Mode, ModeMetrics, PipelineConfig};
use qcontext::qasm::{emit_qasm, parse_qasm};
use qcontext::topology::CouplingMap;
use qcontext::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_COMPILE: u8 = 2;
const EXIT_VERIFY: u8 = 3;

/// Context-aware Toffoli and CNOT decomposition for fixed-coupling devices.
#[derive(Parser, Debug)]
#[command(name = "qcontext", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Compile one OpenQASM 2 file.
    Compile {
        #[arg(long)]
        input: PathBuf,
        /// Builtin name (line-N, ring-N, full-N, heavy-hex-27) or a JSON file.
        #[arg(long)]
        coupling: String,
        #[arg(long, value_enum, default_value = "qcontext")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Check the lowered circuit against the input.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 10)]
        verify_max_qubits: usize,
        /// Write a JSON report.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the native circuit as OpenQASM.
        #[arg(long)]
        emit: Option<PathBuf>,
        /// Write the basis-level (CNOT) circuit as OpenQASM.
        #[arg(long)]
        emit_basis: Option<PathBuf>,
        /// Gates per side scored around each Toffoli.
        #[arg(long, default_value_t = 12)]
        window: usize,
        /// Record wall time (reports stop being reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Compile a suite in both modes and compare.
    Bench {
        /// Directory of .qasm files.
        #[arg(long, required_unless_present = "files")]
        suite: Option<PathBuf>,
        /// Individual files, in addition to or instead of a suite.
        files: Vec<PathBuf>,
        #[arg(long)]
        coupling: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        timing: bool,
    },
    /// Dump a variant library as JSON.
    Library {
        #[arg(long, value_enum)]
        kind: LibKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Qcontext,
    #[value(alias = "trios-baseline")]
    Trios,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Qcontext => Mode::Qcontext,
            ModeArg::Trios => Mode::Trios,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LibKind {
    Basis,
    Native,
}

#[derive(Serialize)]
struct CompileReport<'a> {
    benchmark: String,
    nq: usize,
    coupling: &'a str,
    mode: Mode,
    seed: u64,
    #[serde(flatten)]
    metrics: &'a ModeMetrics,
    toffoli_variants: Vec<String>,
    num_swaps: usize,
    initial_layout: &'a [usize],
    final_layout: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    verify_distance: Option<f64>,
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(Error::from),
        None => Ok(()),
    }
}

/// Print, ignoring a closed pipe.
fn stdout(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Verification(_) => EXIT_VERIFY,
        _ => EXIT_COMPILE,
    }
}

fn run(cmd: Cmd) -> Result<u8, Error> {
    match cmd {
        Cmd::Compile { input, coupling, mode, seed, verify, verify_max_qubits, report, emit, emit_basis, window, timing } => {
            let circuit = parse_qasm(&std::fs::read_to_string(&input)?)?;
            let map = CouplingMap::load(&coupling)?;
            let cfg = PipelineConfig { mode: mode.into(), seed, window, verify, verify_max_qubits, timing, ..PipelineConfig::default() };
            let out = compile_pipeline(&circuit, &map, &cfg, Libraries::shared()?)?;
            let m = &out.metrics;
            println!("CR_r {}  CR_b {}  #sx {}  basis CNOTs {}", m.cr_r, m.cr_b, m.sx, m.basis_cx);
            if let Some(d) = out.verify_distance {
                println!("verified: phase distance {d:.3e}");
            }
            write_out(&emit, &emit_qasm(&out.native)?)?;
            write_out(&emit_basis, &emit_qasm(&out.basis)?)?;
            let rep = CompileReport {
                benchmark: input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                nq: circuit.num_qubits,
                coupling: &coupling,
                mode: cfg.mode,
                seed,
                metrics: m,
                toffoli_variants: out.toffoli_variants.iter().map(ToString::to_string).collect(),
                num_swaps: out.routed.num_swaps,
                initial_layout: &out.routed.initial_layout,
                final_layout: &out.routed.final_layout,
                verify_distance: out.verify_distance,
            };
            write_out(&report, &(serde_json::to_string_pretty(&rep)? + "\n"))?;
            Ok(0)
        }
        Cmd::Bench { suite, mut files, coupling, seed, report, verify, timing } => {
            if let Some(dir) = suite {
                files.extend(suite_files(&dir)?);
            }
            if files.is_empty() {
                eprintln!("error: no .qasm files to run");
                return Ok(EXIT_USAGE);
            }
            let cfg = PipelineConfig { seed, verify, timing, ..PipelineConfig::default() };
            let rep = benchmark_run(&files, &coupling, &cfg)?;
            stdout(&rep.to_table());
            write_out(&report, &rep.to_json())?;
            if rep.failures.iter().any(|f| f.error.starts_with("verification failed")) {
                Ok(EXIT_VERIFY)
            } else if rep.failures.is_empty() {
                Ok(0)
            } else {
                Ok(EXIT_COMPILE)
            }
        }
        Cmd::Library { kind, out } => {
            let libs = Libraries::shared()?;
            let text = match kind {
                LibKind::Basis => libs.basis.to_json(),
                LibKind::Native => libs.native.to_json(),
            };
            match out {
                Some(_) => write_out(&out, &text)?,
                None => stdout(&(text + "\n")),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QCONTEXT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
