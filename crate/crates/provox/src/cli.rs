//! Argument parsing and subcommand dispatch.

use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use provox_core::eval::{load_contexts, run_study, EvalCondition, ReferencePlan, StudyOptions};
use provox_core::par::Strategy;
use provox_core::planner::BackendConfig;
use provox_core::session::transcript::{read_transcript, replay, TranscriptWriter};
use provox_core::session::{ContextFile, Mode, Session, SessionConfig};
use provox_core::sim::SceneSpec;

use crate::backend::{build, BackendArgs, ConfigFile};

#[derive(Debug, Parser)]
#[command(name = "provox", version, about = "Teach, plan and simulate tabletop robot tasks")]
pub struct Cli {
    /// TOML file with a `[backend]` table.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interactive session on stdin/stdout.
    Repl(ReplArgs),
    /// Run the four-condition efficacy study.
    Eval(EvalArgs),
    /// Re-execute a transcript and verify its world hashes.
    Replay(ReplayArgs),
    /// Serve sessions over HTTP with a server-sent event stream.
    Serve(ServeArgs),
}

#[derive(Debug, clap::Args)]
pub struct ReplArgs {
    /// Scene description (JSON).
    #[arg(long)]
    pub scene: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Context file with a goal and taught functions.
    #[arg(long)]
    pub context: Option<PathBuf>,
    /// Offer a suggestion after every executed plan (default).
    #[arg(long, overrides_with = "no_proactive")]
    pub proactive: bool,
    /// Wait for instructions instead of suggesting.
    #[arg(long)]
    pub no_proactive: bool,
    /// Start in meta-prompting mode instead of live.
    #[arg(long)]
    pub meta: bool,
    /// Gate user instructions on confirmation too.
    #[arg(long)]
    pub confirm_user_plans: bool,
    /// Append every interaction step to this JSON-lines file.
    #[arg(long, value_name = "FILE")]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Directory of context files, one per user.
    #[arg(long)]
    pub contexts: PathBuf,
    /// Reference plan file.
    #[arg(long)]
    pub reference: PathBuf,
    /// Scene description (JSON).
    #[arg(long)]
    pub scene: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Comma-separated subset of full, fixed-goal, fixed-api, fixed-context.
    #[arg(long, value_delimiter = ',')]
    pub conditions: Option<Vec<EvalCondition>>,
    /// Rounds per rollout; defaults to the reference length plus two.
    #[arg(long)]
    pub step_cap: Option<usize>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report to this file.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Run rollouts on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, clap::Args)]
pub struct ReplayArgs {
    /// JSON-lines transcript written by `repl --transcript`.
    pub transcript: PathBuf,
    /// Scene the transcript was recorded in.
    #[arg(long)]
    pub scene: PathBuf,
    /// Context the recorded session started from.
    #[arg(long)]
    pub context: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ServeArgs {
    /// TCP port to listen on.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Default scene. Its directory also serves named scenes.
    #[arg(long)]
    pub scene: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
}

/// A failure reported as `error: <Code>: <message>` with exit status 1.
#[derive(Debug)]
pub struct CliError {
    pub code: String,
    pub message: String,
}

impl CliError {
    pub fn new(code: &str, message: impl std::fmt::Display) -> Self {
        CliError { code: code.to_string(), message: message.to_string() }
    }
}

fn load_scene(path: &Path) -> Result<SceneSpec, CliError> {
    SceneSpec::load(path).map_err(|e| CliError::new(e.code(), format!("{}: {e}", path.display())))
}

fn load_context(path: &Path) -> Result<ContextFile, CliError> {
    ContextFile::load(path).map_err(|e| CliError::new("InvalidContext", format!("{}: {e}", path.display())))
}

fn base_config(cli: &Cli) -> Result<BackendConfig, CliError> {
    match &cli.config {
        Some(path) => ConfigFile::load(path).map(|c| c.backend).map_err(|e| CliError::new("InvalidConfig", e)),
        None => Ok(BackendConfig::default()),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let base = base_config(&cli)?;
    match &cli.command {
        Command::Repl(args) => run_repl(args, &base),
        Command::Eval(args) => run_eval(args, &base),
        Command::Replay(args) => run_replay(args),
        Command::Serve(args) => run_serve(args, &base),
    }
}

fn run_repl(args: &ReplArgs, base: &BackendConfig) -> Result<(), CliError> {
    let scene = load_scene(&args.scene)?;
    let cfg = args.backend.resolve(base);
    let (planner, namer) = build(&cfg).map_err(|e| CliError::new(e.code(), e))?;
    let config = SessionConfig {
        proactive: !args.no_proactive,
        auto_confirm_user_plans: !args.confirm_user_plans,
        max_retries: cfg.max_retries,
        ..SessionConfig::default()
    };
    let mode = if args.meta { Mode::MetaPrompting } else { Mode::Live };
    let session = match &args.context {
        Some(path) => Session::from_context(scene, &load_context(path)?, mode, config, planner),
        None => Session::new(scene, mode, config, planner),
    }
    .map_err(|e| CliError::new(e.code(), e))?
    .with_namer(namer)
    .with_backend_config(cfg);
    let mut transcript = match &args.transcript {
        Some(path) => Some(TranscriptWriter::create(path).map_err(|e| CliError::new("TranscriptIo", e))?),
        None => None,
    };
    let stdin = io::stdin();
    let stdout = io::stdout();
    crate::repl::run(session, stdin.lock(), stdout.lock(), transcript.as_mut()).map_err(|e| CliError::new("Io", e))
}

fn run_eval(args: &EvalArgs, base: &BackendConfig) -> Result<(), CliError> {
    let scene = load_scene(&args.scene)?;
    let reference = ReferencePlan::load(&args.reference).map_err(|e| CliError::new(e.code(), e))?;
    reference.check(&scene).map_err(|e| CliError::new(e.code(), e))?;
    let contexts = load_contexts(&args.contexts).map_err(|e| CliError::new(e.code(), e))?;
    let cfg = args.backend.resolve(base);
    let (planner, _) = build(&cfg).map_err(|e| CliError::new(e.code(), e))?;
    let options = StudyOptions {
        conditions: args.conditions.clone().unwrap_or_else(|| EvalCondition::ALL.to_vec()),
        step_cap: args.step_cap,
        max_retries: cfg.max_retries,
        strategy: if args.sequential { Strategy::Sequential } else { Strategy::Parallel },
    };
    let report = run_study(&contexts, &reference, &scene, planner.as_ref(), &options).map_err(|e| CliError::new(e.code(), e))?;
    let json = serde_json::to_string_pretty(&report).expect("reports serialize");
    if let Some(path) = &args.output {
        std::fs::write(path, format!("{json}\n")).map_err(|e| CliError::new("Io", e))?;
    }
    let mut out = io::stdout().lock();
    let text = if args.json { format!("{json}\n") } else { report.to_table() };
    out.write_all(text.as_bytes()).map_err(|e| CliError::new("Io", e))
}

fn run_replay(args: &ReplayArgs) -> Result<(), CliError> {
    let scene = load_scene(&args.scene)?;
    let steps = read_transcript(&args.transcript).map_err(|e| CliError::new(e.code(), e))?;
    let context = args.context.as_deref().map(load_context).transpose()?;
    let report = replay(&steps, &scene, context.as_ref()).map_err(|e| CliError::new(e.code(), e))?;
    println!("replayed {} executed steps; final world hash {}", report.executed_steps, report.final_hash);
    Ok(())
}

fn run_serve(args: &ServeArgs, base: &BackendConfig) -> Result<(), CliError> {
    let scene = load_scene(&args.scene)?;
    let cfg = args.backend.resolve(base);
    cfg.validate().map_err(|e| CliError::new(e.code(), e))?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| CliError::new("InvalidAddress", e))?;
    let scene_dir = args.scene.parent().map(Path::to_path_buf);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new("Io", e))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::new("Io", e))?;
        tracing::info!(%addr, "listening");
        let app = crate::service::router(crate::service::AppState::new(scene, scene_dir, cfg));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::new("Io", e))
    })
}

