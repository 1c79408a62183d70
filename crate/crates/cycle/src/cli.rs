//! Command-line interface. Exit codes: 0 satisfied or success, 1 usage or
//! IO error, 2 cycle aborted.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chaos_core::{CycleRecord, SCHEMA_VERSION};
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{BackendKind, CycleConfig};
use crate::engine::dangling_selectors;
use crate::gateway::{render_transcript, Backend, Gateway, HttpBackend, RecordingBackend, ReplayBackend, ScriptedBackend};
use crate::improvement::SimProvider;
use crate::pipeline::{ledger_json, run_cycle};
use crate::project::{load_project_dir, validate_project_input};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_ABORTED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "chaos-cycle", version, about = "Run chaos-engineering cycles over Kubernetes manifests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one cycle and write its artifacts.
    Run {
        input_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// File whose text replaces the input's instructions.txt.
        #[arg(long)]
        instructions: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse the input and print the deploy order.
    Validate { input_dir: PathBuf },
    /// Render the cost ledger and outcome of a record.json.
    Report {
        record: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
    },
    /// Run a cycle from a per-role output script and save the replay transcript.
    Transcript {
        input_dir: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        instructions: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run(args: impl IntoIterator<Item = OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(rendered.as_bytes()) } else { stdout.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Run {
            input_dir,
            config,
            instructions,
            out,
            backend,
            transcript,
            seed,
        } => cmd_run(&input_dir, config.as_deref(), instructions.as_deref(), &out, backend, transcript, seed, stdout),
        Command::Validate { input_dir } => cmd_validate(&input_dir, stdout),
        Command::Report { record, format } => cmd_report(&record, format, stdout),
        Command::Transcript {
            input_dir,
            script,
            config,
            instructions,
            output,
        } => cmd_transcript(&input_dir, &script, config.as_deref(), instructions.as_deref(), &output, stdout),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(stderr, "error: {message}");
            EXIT_ERROR
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<CycleConfig, String> {
    match path {
        Some(p) => CycleConfig::load(p).map_err(|e| e.to_string()),
        None => Ok(CycleConfig::default()),
    }
}

fn load_input(dir: &Path, instructions: Option<&Path>) -> Result<chaos_core::ProjectInput, String> {
    if !dir.is_dir() {
        return Err(format!("{} is not a directory", dir.display()));
    }
    let mut input = load_project_dir(dir).map_err(|e| e.to_string())?;
    if let Some(path) = instructions {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        input.instructions = Some(text.trim().to_string());
    }
    Ok(input)
}

fn build_backend(config: &CycleConfig) -> Result<Box<dyn Backend>, String> {
    match config.backend {
        BackendKind::Replay => {
            let path = config.transcript.as_ref().ok_or("the replay backend needs --transcript or `transcript` in the config")?;
            Ok(Box::new(ReplayBackend::load(path).map_err(|e| e.to_string())?))
        }
        BackendKind::Http => {
            let key = std::env::var(&config.api_key_env).ok();
            Ok(Box::new(HttpBackend::new(&config.api_base, key, &config.model, Duration::from_secs(config.timeout_s))))
        }
    }
}

fn exit_for(record: &CycleRecord) -> i32 {
    if record.outcome.is_satisfied() {
        EXIT_OK
    } else {
        EXIT_ABORTED
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    input_dir: &Path,
    config: Option<&Path>,
    instructions: Option<&Path>,
    out: &Path,
    backend: Option<BackendKind>,
    transcript: Option<PathBuf>,
    seed: Option<u64>,
    stdout: &mut dyn Write,
) -> Result<i32, String> {
    let mut config = load_config(config)?;
    if let Some(b) = backend {
        config.backend = b;
    }
    if transcript.is_some() {
        config.transcript = transcript;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    let input = load_input(input_dir, instructions)?;
    let gateway = Gateway::new(build_backend(&config)?, config.prices()).with_temperature(config.temperature);
    let mut provider = SimProvider::new(config.seed, config.sim);
    let record = run_cycle(&input, &config, &gateway, &mut provider, Some(out)).map_err(|e| e.to_string())?;
    let _ = writeln!(stdout, "outcome: {}", record.outcome);
    for d in &record.diagnostics {
        let _ = writeln!(stdout, "diagnostic: {d}");
    }
    let _ = writeln!(stdout, "artifacts: {}", out.display());
    Ok(exit_for(&record))
}

fn cmd_validate(input_dir: &Path, stdout: &mut dyn Write) -> Result<i32, String> {
    let input = load_input(input_dir, None)?;
    let set = validate_project_input(&input).map_err(|e| e.to_string())?;
    let _ = writeln!(stdout, "{} resources in deploy order:", set.resources().count());
    for file in set.files() {
        for r in &file.resources {
            let _ = writeln!(stdout, "  {}  {}", file.path, r.id());
        }
    }
    for w in dangling_selectors(&set) {
        let _ = writeln!(stdout, "warning: service {} selector {} matches no pod template", w.service, w.selector);
    }
    Ok(EXIT_OK)
}

/// Reads a record, checking the schema version before the full parse.
pub fn read_record(path: &Path) -> Result<CycleRecord, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let version = value.get("schema_version").and_then(serde_json::Value::as_u64);
    if version != Some(u64::from(SCHEMA_VERSION)) {
        return Err(format!("{}: schema version {version:?} is not supported (expected {SCHEMA_VERSION})", path.display()));
    }
    let record: CycleRecord = serde_json::from_value(value).map_err(|e| format!("{}: {e}", path.display()))?;
    record.validate(u32::MAX).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(record)
}

fn cmd_report(path: &Path, format: ReportFormat, stdout: &mut dyn Write) -> Result<i32, String> {
    let record = read_record(path)?;
    let text = match format {
        ReportFormat::Json => ledger_json(&record.ledger),
        ReportFormat::Table => format!("{}\nOutcome: {}\n", record.ledger.render_table(), record.outcome),
    };
    stdout.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}

fn cmd_transcript(
    input_dir: &Path,
    script: &Path,
    config: Option<&Path>,
    instructions: Option<&Path>,
    output: &Path,
    stdout: &mut dyn Write,
) -> Result<i32, String> {
    let config = load_config(config)?;
    let input = load_input(input_dir, instructions)?;
    let scripted = ScriptedBackend::load(script).map_err(|e| e.to_string())?;
    let recorder = std::sync::Arc::new(RecordingBackend::new(scripted));
    let gateway = Gateway::new(Box::new(recorder.clone()), config.prices()).with_temperature(config.temperature);
    let mut provider = SimProvider::new(config.seed, config.sim);
    let record = run_cycle(&input, &config, &gateway, &mut provider, None).map_err(|e| e.to_string())?;
    std::fs::write(output, render_transcript(&recorder.entries())).map_err(|e| format!("{}: {e}", output.display()))?;
    let _ = writeln!(stdout, "outcome: {}", record.outcome);
    for (role, n) in recorder.inner().remaining() {
        let _ = writeln!(stdout, "unused script outputs for {role}: {n}");
    }
    Ok(exit_for(&record))
}
