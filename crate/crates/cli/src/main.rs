use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use metrisability::job::{
    check_exit_code, cmd_check, cmd_invariants, cmd_recover, cmd_selftest, cmd_tractor,
    recovery_exit_code, JobError, JobSpec, EXIT_INPUT, EXIT_NEGATIVE, EXIT_OK,
};
use metrisability::EvalMode;
use serde_json::json;

#[derive(Parser)]
#[command(name = "metrisability", version, about = "Decide whether a 2D projective structure is metrisable")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-point Liouville invariants, ν₅, V and det M.
    Invariants(JobArgs),
    /// Metrisability verdict per point, with a summary.
    Check(JobArgs),
    /// Tractor determinant cross-check and projective-change invariance.
    Tractor(JobArgs),
    /// Reconstruct a metric on a grid when the structure is metrisable.
    Recover(JobArgs),
    /// Run the built-in checks on reference structures.
    Selftest(OutputArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Report destination (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct JobArgs {
    /// JSON job file.
    #[arg(long)]
    input: PathBuf,
    /// Arithmetic override; defaults to the job's `arithmetic` field.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Rational,
    Float,
    Auto,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rational => EvalMode::Rational,
            ModeArg::Float => EvalMode::Float,
            ModeArg::Auto => EvalMode::Auto,
        }
    }
}

fn load(args: &JobArgs) -> Result<JobSpec, JobError> {
    let src = fs::read_to_string(&args.input).map_err(|e| JobError {
        code: "io",
        message: format!("cannot read {}: {e}", args.input.display()),
        field: None,
        point: None,
    })?;
    let mut job = JobSpec::from_json(&src)?;
    if let Some(m) = args.mode {
        job.arithmetic = m.into();
    }
    Ok(job)
}

fn emit(out: &OutputArgs, value: &serde_json::Value) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    text.push('\n');
    match &out.output {
        Some(path) => fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| e.to_string()),
    }
}

fn run(cli: Cli) -> Result<(serde_json::Value, i32, OutputArgs), (JobError, OutputArgs)> {
    let to_value = |v: Result<serde_json::Value, serde_json::Error>| v.expect("reports serialise");
    match cli.command {
        Command::Selftest(out) => {
            let items = cmd_selftest();
            let code = if items.iter().all(|i| i.passed) { EXIT_OK } else { EXIT_NEGATIVE };
            Ok((to_value(serde_json::to_value(&items)), code, out))
        }
        Command::Invariants(a) => match load(&a).and_then(|j| cmd_invariants(&j)) {
            Ok(r) => Ok((to_value(serde_json::to_value(&r)), EXIT_OK, a.out)),
            Err(e) => Err((e, a.out)),
        },
        Command::Check(a) => match load(&a).and_then(|j| cmd_check(&j)) {
            Ok(r) => Ok((to_value(serde_json::to_value(&r)), check_exit_code(&r), a.out)),
            Err(e) => Err((e, a.out)),
        },
        Command::Tractor(a) => match load(&a).and_then(|j| cmd_tractor(&j)) {
            Ok(r) => Ok((to_value(serde_json::to_value(&r)), EXIT_OK, a.out)),
            Err(e) => Err((e, a.out)),
        },
        Command::Recover(a) => match load(&a).and_then(|j| cmd_recover(&j)) {
            Ok(r) => Ok((to_value(serde_json::to_value(&r)), recovery_exit_code(&r), a.out)),
            Err(e) => Err((e, a.out)),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (value, code, out) = match run(cli) {
        Ok(v) => v,
        Err((e, out)) => {
            eprintln!("error: {e}");
            (json!({ "error": e }), EXIT_INPUT, out)
        }
    };
    if let Err(msg) = emit(&out, &value) {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_INPUT as u8);
    }
    ExitCode::from(code as u8)
}
