use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;
use wayfinder_core::config::{BackendKind, ConfigError, GatewayConfig};
use wayfinder_core::eval::{
    emit_report, recoverability_drill, render_table, replay, EvalError, Recording, ReplayOptions, Transport,
    DEFAULT_RESUME_DELAY_MS,
};
use wayfinder_core::perception::{CostLedger, PerceptionBackend};
use wayfinder_core::protocol::dump_stream;
use wayfinder_core::session::{bind, build_backend, serve_tcp, serve_ws, Recorder, ServeError, SystemClock};
use wayfinder_core::{Gateway, Pipeline};

const EXIT_CONFIG: u8 = 1;
const EXIT_BIND: u8 = 2;
const REAPER_PERIOD: Duration = Duration::from_millis(500);
const RECORDING_STUB_SCRIPT: &str = "stub_script.json";

#[derive(Debug, Parser)]
#[command(name = "wayfinder", version, about = "Edge navigation gateway")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the gateway on its TCP and WebSocket listeners.
    Serve(ServeArgs),
    /// Run the gateway and record every analyzed frame for later replay.
    Record {
        #[command(flatten)]
        serve: ServeArgs,
        /// Output directory; one sub-directory per session.
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a recording through a loopback client and score it.
    Replay(ReplayArgs),
    /// Print an annotated hex listing of a captured byte stream.
    ProtocolDump { file: PathBuf },
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    listen_tcp: Option<SocketAddr>,
    #[arg(long)]
    listen_ws: Option<SocketAddr>,
    #[arg(long)]
    backend: Option<BackendKind>,
    /// Record analyzed frames under this directory.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TransportArg {
    Loopback,
    Tcp,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    recording: PathBuf,
    #[arg(long)]
    backend: BackendKind,
    /// JSON report path; a text table is written next to it with `.txt`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Drive time from the recorded timestamps instead of waiting them out.
    #[arg(long)]
    fast: bool,
    /// Also run the disconnect/resume drill and include its result.
    #[arg(long)]
    drill: bool,
    #[arg(long, default_value_t = DEFAULT_RESUME_DELAY_MS)]
    resume_delay_ms: u64,
    /// Check labelled expected texts verbatim.
    #[arg(long)]
    exact_text: bool,
    #[arg(long, value_enum, default_value_t = TransportArg::Loopback)]
    transport: TransportArg,
    /// Dispatched instruction log; defaults to `<recording>/instructions.jsonl`.
    #[arg(long)]
    instructions_out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e)
    }
}

impl From<ServeError> for Failure {
    fn from(e: ServeError) -> Self {
        let code = match e {
            ServeError::Bind { .. } => EXIT_BIND,
            _ => EXIT_CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure::config(e)
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which is reserved for bind failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let default_level = match cli.command {
        Command::Serve(_) | Command::Record { .. } => "info",
        Command::Replay(_) | Command::ProtocolDump { .. } => "warn",
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)))
        .with_writer(std::io::stderr)
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = runtime.block_on(async {
        match cli.command {
            Command::Serve(args) => {
                let record = args.record.clone();
                serve(args, record).await
            }
            Command::Record { serve: args, out } => serve(args, Some(out)).await,
            Command::Replay(args) => run_replay(args).await,
            Command::ProtocolDump { file } => protocol_dump(&file),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

async fn serve(args: ServeArgs, record: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = GatewayConfig::load(&args.config)?;
    if let Some(addr) = args.listen_tcp {
        cfg.listen.tcp = Some(addr);
    }
    if let Some(addr) = args.listen_ws {
        cfg.listen.ws = Some(addr);
    }
    if let Some(kind) = args.backend {
        cfg.backend.name = kind;
    }
    if cfg.listen.tcp.is_none() && cfg.listen.ws.is_none() {
        return Err(Failure::config("no listener configured (listen.tcp or listen.ws)"));
    }

    let backend = build_backend(&cfg, Arc::new(CostLedger::new(cfg.backend.remote_unit_cost_usd)))?;
    let pipeline = Pipeline::new(backend, &cfg)?;
    let recorder = match record {
        Some(dir) => Some(
            Recorder::start(&dir, cfg.calibration.clone())
                .map_err(|e| Failure::config(format!("{}: {e}", dir.display())))?,
        ),
        None => None,
    };

    // bind everything before serving anything, so a busy port fails fast
    let tcp = match cfg.listen.tcp {
        Some(addr) => Some(bind(addr).await?),
        None => None,
    };
    let ws = match cfg.listen.ws {
        Some(addr) => Some(bind(addr).await?),
        None => None,
    };

    let gw = Gateway::with_recorder(pipeline, &cfg, Arc::new(SystemClock::new()), recorder);
    gw.spawn_reaper(REAPER_PERIOD);
    let mut tasks = tokio::task::JoinSet::new();
    if let Some(listener) = tcp {
        tracing::info!(addr = %listener.local_addr().map_err(ServeError::from)?, "tcp listener ready");
        tasks.spawn(serve_tcp(gw.clone(), listener));
    }
    if let Some(listener) = ws {
        tracing::info!(addr = %listener.local_addr().map_err(ServeError::from)?, "websocket listener ready (client at /app)");
        tasks.spawn(serve_ws(gw.clone(), listener, cfg.listen.app_dir.clone()));
    }
    tracing::info!(backend = ?cfg.backend.name, "gateway running; Ctrl-C or SIGTERM to stop");

    let outcome = tokio::select! {
        _ = shutdown_signal() => Ok(()),
        Some(done) = tasks.join_next() => match done {
            Ok(r) => r.map_err(Failure::from),
            Err(e) => Err(Failure::config(format!("listener task failed: {e}"))),
        },
    };
    gw.shutdown();
    while tasks.join_next().await.is_some() {}
    if let Some(r) = gw.recorder() {
        r.sync().await;
        tracing::info!(dir = %r.root().display(), "recordings flushed");
    }
    outcome
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

fn replay_backend(
    cfg: &mut GatewayConfig,
    kind: BackendKind,
    recording: &Path,
) -> Result<Arc<dyn PerceptionBackend>, Failure> {
    cfg.backend.name = kind;
    if kind == BackendKind::Stub && cfg.backend.script.is_none() {
        let bundled = recording.join(RECORDING_STUB_SCRIPT);
        if bundled.is_file() {
            cfg.backend.script = Some(bundled);
        }
    }
    Ok(build_backend(
        cfg,
        Arc::new(CostLedger::new(cfg.backend.remote_unit_cost_usd)),
    )?)
}

async fn run_replay(args: ReplayArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(path) => GatewayConfig::load(path)?,
        None => {
            let mut cfg = GatewayConfig::default();
            cfg.apply_env();
            cfg
        }
    };
    let recording = Recording::load(&args.recording)?;
    let backend = replay_backend(&mut cfg, args.backend, &args.recording)?;
    let transport = match args.transport {
        TransportArg::Loopback => Transport::Loopback,
        TransportArg::Tcp => Transport::Tcp,
    };
    let opts = ReplayOptions {
        fast: args.fast,
        transport,
        exact_text: args.exact_text,
        instructions_out: Some(
            args.instructions_out
                .clone()
                .unwrap_or_else(|| args.recording.join(wayfinder_core::eval::recording::INSTRUCTIONS_FILE)),
        ),
    };
    let mut report = replay(&recording, backend.clone(), &cfg, &opts).await?;
    if args.drill {
        let drill = recoverability_drill(&recording, backend, &cfg, transport, args.resume_delay_ms).await?;
        report.reliability.recoverability = Some(drill);
    }
    let (json, txt) =
        emit_report(&report, &args.report).map_err(|e| Failure::config(format!("{}: {e}", args.report.display())))?;
    print!("{}", render_table(&report));
    tracing::info!(json = %json.display(), text = %txt.display(), "report written");
    Ok(())
}

fn protocol_dump(file: &Path) -> Result<(), Failure> {
    let bytes = std::fs::read(file).map_err(|e| Failure::config(format!("{}: {e}", file.display())))?;
    print!("{}", dump_stream(&bytes));
    Ok(())
}
