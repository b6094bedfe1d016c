use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use promptvm::backends::{BackendError, HttpBackend, HttpBackendConfig, Recorder, ReplayBackend};
use promptvm::tm::{RunStatus, Tape};
use promptvm::verify::{VerificationReport, VerifyError};
use promptvm::vm::{decode_state, head_position, tape_cells, Decoded, VmError};
use promptvm::{
    compile_program, enumerate_cases, init_memory, lockstep_run, parse_tm, tm_run, u15_2,
    verify_transitions, CompletionBackend, Lockstep, Machine, Mode, PromptProgram, RuleBackend,
    RunOutcome, TuringMachine,
};
use serde_json::{json, Value as Json};

const BUILTINS: &[&str] = &["u15_2"];

/// Stored-instruction prompt computer: compile Turing machines to prompt
/// programs, run them against a completion backend and check the results.
#[derive(Parser)]
#[command(name = "promptvm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a machine to a prompt program (JSON).
    Compile(CompileArgs),
    /// Execute a prompt program on the prompt computer.
    Run(RunArgs),
    /// Run a machine on the direct interpreter.
    Oracle(OracleArgs),
    /// Check the backend's completion for every transition prompt.
    Verify(VerifyArgs),
    /// Run the prompt computer and the interpreter side by side.
    Lockstep(LockstepArgs),
    /// Run or verify while logging every completion to a cassette.
    Record(CassetteArgs),
    /// Run or verify with completions served from a cassette.
    Replay(CassetteArgs),
}

#[derive(Args)]
struct MachineSource {
    /// Built-in machine name (`u15_2`).
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
    /// Machine description file.
    #[arg(long, value_name = "FILE", conflicts_with = "builtin")]
    tm: Option<PathBuf>,
}

#[derive(Args)]
struct TapeArgs {
    /// Initial symbols for cells 0, 1, ...
    #[arg(long, default_value = "")]
    tape: String,
    /// Initial head position.
    #[arg(long, default_value = "0", allow_negative_numbers = true, value_parser = parse_int)]
    head: BigInt,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Rule,
    Http,
    Replay,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value_t = BackendKind::Rule)]
    backend: BackendKind,
    /// JSON configuration for the http backend.
    #[arg(long, value_name = "FILE")]
    http_config: Option<PathBuf>,
    /// Cassette for the replay backend.
    #[arg(long, value_name = "FILE")]
    cassette: Option<PathBuf>,
}

#[derive(Args)]
struct CompileArgs {
    #[command(flatten)]
    machine: MachineSource,
    /// Write the program here instead of stdout.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    machine: MachineSource,
    /// Compiled program file; replaces compiling the machine.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["builtin", "tm"])]
    program: Option<PathBuf>,
    #[command(flatten)]
    tape: TapeArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long, default_value_t = promptvm::vm::DEFAULT_MAX_CYCLES)]
    max_cycles: u64,
    /// Stream one JSON line per cycle to stdout; the summary goes to stderr.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    machine: MachineSource,
    #[command(flatten)]
    tape: TapeArgs,
    #[arg(long, default_value_t = promptvm::vm::DEFAULT_MAX_CYCLES)]
    max_steps: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Semantic,
    Both,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    machine: MachineSource,
    /// Check this program file instead of the freshly compiled one.
    #[arg(long, value_name = "FILE")]
    program: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct LockstepArgs {
    #[command(flatten)]
    machine: MachineSource,
    /// Run this program file instead of the freshly compiled one.
    #[arg(long, value_name = "FILE")]
    program: Option<PathBuf>,
    #[command(flatten)]
    tape: TapeArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long, default_value_t = promptvm::vm::DEFAULT_MAX_CYCLES)]
    max_cycles: u64,
}

#[derive(Args)]
struct CassetteArgs {
    #[arg(long, value_name = "FILE")]
    cassette: PathBuf,
    #[command(subcommand)]
    command: Wrapped,
}

#[derive(Subcommand)]
enum Wrapped {
    Run(RunArgs),
    Verify(VerifyArgs),
}

fn parse_int(s: &str) -> Result<BigInt, String> {
    s.parse().map_err(|_| format!("`{s}` is not an integer"))
}

enum Failure {
    Usage(String),
    Backend(String),
    Fault(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Fault(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Backend(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Backend(m) | Failure::Fault(m) => m,
        }
    }
}

impl From<VmError> for Failure {
    fn from(e: VmError) -> Self {
        match e {
            VmError::Backend(e) => Failure::Backend(e.to_string()),
            other => Failure::Fault(other.to_string()),
        }
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Vm(e) => e.into(),
            VerifyError::Tm(e) => Failure::Usage(e.to_string()),
            VerifyError::Compile(e) => Failure::Usage(e.to_string()),
            other => Failure::Fault(other.to_string()),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compile(args) => compile(args),
        Command::Run(args) => open_backend(&args.backend).and_then(|b| run(&args, b)),
        Command::Oracle(args) => oracle(args),
        Command::Verify(args) => open_backend(&args.backend).and_then(|b| verify(&args, b)),
        Command::Lockstep(args) => lockstep(args),
        Command::Record(args) => record(args),
        Command::Replay(args) => replay(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("promptvm: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_machine(source: &MachineSource) -> Result<TuringMachine, Failure> {
    match (&source.builtin, &source.tm) {
        (Some(name), None) if name == "u15_2" => Ok(u15_2()),
        (Some(name), None) => Err(Failure::Usage(format!(
            "unknown builtin `{name}` (available: {})",
            BUILTINS.join(", ")
        ))),
        (None, Some(path)) => parse_tm(&read_file(path)?)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        _ => Err(Failure::Usage("give one of --builtin or --tm".into())),
    }
}

fn load_program(path: &Path) -> Result<PromptProgram, Failure> {
    PromptProgram::from_json(&read_file(path)?)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn compile_machine(tm: &TuringMachine) -> Result<PromptProgram, Failure> {
    compile_program(tm).map_err(|e| Failure::Usage(e.to_string()))
}

fn check_tape(tm: &TuringMachine, tape: &str) -> Result<(), Failure> {
    match tape.chars().find(|c| !tm.symbols().contains(c)) {
        Some(c) => Err(Failure::Usage(format!(
            "tape symbol `{c}` is not in the machine's alphabet"
        ))),
        None => Ok(()),
    }
}

fn open_backend(args: &BackendArgs) -> Result<Box<dyn CompletionBackend>, Failure> {
    match args.backend {
        BackendKind::Rule => Ok(Box::new(RuleBackend)),
        BackendKind::Http => {
            let path = args
                .http_config
                .as_deref()
                .ok_or_else(|| Failure::Usage("--backend http needs --http-config".into()))?;
            let config = HttpBackendConfig::from_json(&read_file(path)?)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let backend = HttpBackend::new(config).map_err(|e| match e {
                BackendError::Config(m) => Failure::Usage(m),
                other => Failure::Backend(other.to_string()),
            })?;
            Ok(Box::new(backend))
        }
        BackendKind::Replay => {
            let path = args
                .cassette
                .as_deref()
                .ok_or_else(|| Failure::Usage("--backend replay needs --cassette".into()))?;
            Ok(Box::new(open_cassette(path)?))
        }
    }
}

fn open_cassette(path: &Path) -> Result<ReplayBackend, Failure> {
    ReplayBackend::load(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn int_json(n: &BigInt) -> Json {
    match i64::try_from(n) {
        Ok(small) => json!(small),
        Err(_) => json!(n.to_string()),
    }
}

fn tape_json(span: Option<(BigInt, String)>) -> Json {
    match span {
        Some((origin, symbols)) => json!({ "origin": int_json(&origin), "symbols": symbols }),
        None => json!({ "origin": 0, "symbols": "" }),
    }
}

fn compile(args: CompileArgs) -> Outcome {
    let tm = load_machine(&args.machine)?;
    let text = compile_machine(&tm)?.to_json() + "\n";
    match &args.output {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn run(args: &RunArgs, backend: Box<dyn CompletionBackend>) -> Outcome {
    let program = match &args.program {
        Some(path) => load_program(path)?,
        None => {
            let tm = load_machine(&args.machine)?;
            check_tape(&tm, &args.tape.tape)?;
            compile_machine(&tm)?
        }
    };
    let memory = init_memory(&program, &args.tape.tape, args.tape.head.clone());
    let mut machine = Machine::new(memory, backend);

    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut write_error = None;
    let report = machine.run_observed(args.max_cycles, |event| {
        if args.trace && write_error.is_none() {
            let line = serde_json::to_string(event).expect("trace event serializes");
            if let Err(e) = writeln!(out, "{line}") {
                write_error = Some(e);
            }
        }
    });
    if let Some(e) = write_error {
        return Err(Failure::Usage(format!("writing trace: {e}")));
    }

    let memory = machine.memory();
    let (status, code, error) = match report.outcome {
        RunOutcome::Halted => ("halted", 0, None),
        RunOutcome::NotHalted => ("not_halted", 4, None),
        RunOutcome::Failed(e) => {
            let failure = Failure::from(e);
            ("failed", failure.code(), Some(failure.message().to_owned()))
        }
    };
    let state = match decode_state(memory, &program) {
        Decoded::State(q) => json!(q),
        Decoded::Halted => json!("halt"),
        Decoded::Unknown => Json::Null,
    };
    let cells = tape_cells(memory);
    let span =
        cells
            .first_key_value()
            .zip(cells.last_key_value())
            .map(|((first, _), (last, _))| {
                let mut symbols = String::new();
                let mut i = first.clone();
                while &i <= last {
                    symbols.push_str(cells.get(&i).map_or(memory.blank(), String::as_str));
                    i += 1;
                }
                (first.clone(), symbols)
            });
    let mut summary = json!({
        "status": status,
        "cycles": report.cycles,
        "state": state,
        "head": head_position(memory).map_or(Json::Null, int_json),
        "tape": tape_json(span),
    });
    if let Some(message) = error {
        summary["error"] = json!(message);
    }
    if args.trace {
        out.flush()
            .map_err(|e| Failure::Usage(format!("writing trace: {e}")))?;
        eprintln!("{summary}");
    } else {
        writeln!(out, "{summary}").map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(code)
}

fn oracle(args: OracleArgs) -> Outcome {
    let tm = load_machine(&args.machine)?;
    check_tape(&tm, &args.tape.tape)?;
    let result = tm_run(&tm, &args.tape.tape, args.tape.head.clone(), args.max_steps)
        .map_err(|e| Failure::Fault(e.to_string()))?;
    let halted = result.status == RunStatus::Halted;
    let tape: &Tape = &result.config.tape;
    println!(
        "{}",
        json!({
            "status": if halted { "halted" } else { "not_halted" },
            "steps": result.steps,
            "cycles": result.cycles(),
            "state": result.config.state,
            "head": int_json(&result.config.head),
            "tape": tape_json(tape.span()),
        })
    );
    Ok(if halted { 0 } else { 4 })
}

fn verify(args: &VerifyArgs, mut backend: Box<dyn CompletionBackend>) -> Outcome {
    let tm = load_machine(&args.machine)?;
    let program = match &args.program {
        Some(path) => load_program(path)?,
        None => compile_machine(&tm)?,
    };
    let cases = enumerate_cases(&tm, &program)?;
    let modes: &[Mode] = match args.mode {
        ModeArg::Exact => &[Mode::Exact],
        ModeArg::Semantic => &[Mode::Semantic],
        ModeArg::Both => &[Mode::Exact, Mode::Semantic],
    };
    let mut report = VerificationReport::default();
    for &mode in modes {
        let part = verify_transitions(&tm, &program, &cases, &mut backend, mode);
        eprintln!(
            "{mode}: {}/{} cases passed",
            part.passed,
            part.passed + part.failed
        );
        for case in part.failures() {
            eprintln!(
                "  FAIL ({}, {}): {}",
                case.state,
                case.symbol,
                case.detail.as_deref().unwrap_or("")
            );
        }
        report.merge(part);
    }
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match &args.report {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(if report.all_passed() {
        0
    } else if report.failures().any(|c| c.actual.is_none()) {
        3
    } else {
        1
    })
}

fn lockstep(args: LockstepArgs) -> Outcome {
    let tm = load_machine(&args.machine)?;
    check_tape(&tm, &args.tape.tape)?;
    let program = match &args.program {
        Some(path) => load_program(path)?,
        None => compile_machine(&tm)?,
    };
    let backend = open_backend(&args.backend)?;
    let result = lockstep_run(
        &program,
        &tm,
        &args.tape.tape,
        args.tape.head.clone(),
        args.max_cycles,
        backend,
    )?;
    println!(
        "{}",
        serde_json::to_string(&result).expect("result serializes")
    );
    if let Lockstep::Divergent(d) = &result {
        eprintln!("divergence at {d}");
    }
    Ok(if result.is_equivalent() { 0 } else { 1 })
}

fn record(args: CassetteArgs) -> Outcome {
    let backend_args = match &args.command {
        Wrapped::Run(a) => &a.backend,
        Wrapped::Verify(a) => &a.backend,
    };
    if backend_args.backend == BackendKind::Replay {
        return Err(Failure::Usage(
            "cannot record from the replay backend".into(),
        ));
    }
    let inner = open_backend(backend_args)?;
    let recorder = Recorder::create(inner, &args.cassette)
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.cassette.display())))?;
    let backend: Box<dyn CompletionBackend> = Box::new(recorder);
    match &args.command {
        Wrapped::Run(a) => run(a, backend),
        Wrapped::Verify(a) => verify(a, backend),
    }
}

fn replay(args: CassetteArgs) -> Outcome {
    let backend_args = match &args.command {
        Wrapped::Run(a) => &a.backend,
        Wrapped::Verify(a) => &a.backend,
    };
    if backend_args.backend == BackendKind::Http {
        return Err(Failure::Usage(
            "replay serves completions from the cassette; drop --backend http".into(),
        ));
    }
    let backend: Box<dyn CompletionBackend> = Box::new(open_cassette(&args.cassette)?);
    match &args.command {
        Wrapped::Run(a) => run(a, backend),
        Wrapped::Verify(a) => verify(a, backend),
    }
}
