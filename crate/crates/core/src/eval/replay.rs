use std::collections::HashSet;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use futures::stream::{SplitSink, SplitStream};
use futures::{SinkExt, StreamExt};
use tokio::io::{AsyncRead, AsyncWrite};
use tokio::sync::{broadcast, mpsc};
use tokio::task::JoinHandle;
use tokio::time::Instant;
use tokio_util::codec::Framed;
use uuid::Uuid;

use super::client::{hello_payload, WireClient};
use super::recording::{write_jsonl, LoggedInstruction, Recording};
use super::report::{
    percentile, CautionEvent, Counts, DrillResult, EvalReport, ExactTextResult, Functional, Performance, Portability,
    Reliability, Usability, USABILITY_STATUS,
};
use super::EvalError;
use crate::config::GatewayConfig;
use crate::perception::PerceptionBackend;
use crate::protocol::{InstructionPayload, Message, MsgType, WireCodec};
use crate::session::{
    serve_tcp, Clock, FrameTrace, Gateway, ManualClock, MetricsSnapshot, Pipeline, SessionPhase, SystemClock,
};
use crate::types::{Direction, Priority, SignClass};

/// Where the manual clock starts in fast mode.
pub const FAST_CLOCK_BASE_MS: u64 = 1_000_000;
pub const DEFAULT_RESUME_DELAY_MS: u64 = 2_000;
pub const MIN_DRILL_FRAMES: usize = 10;
const REPLAY_FPS_HINT: f64 = 2.0;
/// Slack on top of the backend timeout when waiting for the gateway.
const WAIT_SLACK: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transport {
    /// In-process pipe; no sockets.
    #[default]
    Loopback,
    /// Real TCP socket on 127.0.0.1.
    Tcp,
}

impl Transport {
    pub fn as_str(self) -> &'static str {
        match self {
            Transport::Loopback => "loopback",
            Transport::Tcp => "tcp",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReplayOptions {
    /// Drive a manual clock from recorded timestamps and process every
    /// frame to completion before sending the next. Deterministic.
    pub fast: bool,
    pub transport: Transport,
    /// Also check `expected_texts` labels verbatim.
    pub exact_text: bool,
    /// Where to write the dispatched instructions as JSON lines.
    pub instructions_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
struct Disruption {
    after_frame: usize,
    resume_delay_ms: u64,
}

/// An INSTRUCTION as the client received it.
#[derive(Debug, Clone, PartialEq)]
pub struct Heard {
    pub payload: InstructionPayload,
    pub sign_class: Option<SignClass>,
}

struct RunOutput {
    traces: Vec<FrameTrace>,
    heard: Vec<Heard>,
    errors_received: usize,
    metrics: MetricsSnapshot,
    resumed: Option<bool>,
    frames_sent: usize,
    bytes_sent: u64,
    bytes_received: u64,
    backend_name: String,
}

/// Class and direction encoded in a dedup key such as `exit_door:right`.
pub fn parse_dedup_key(key: &str) -> Option<(SignClass, Direction)> {
    let (class, dir) = key.split_once(':')?;
    let class = SignClass::from_code(&class.to_uppercase())?;
    let dir = Direction::ALL.into_iter().find(|d| d.as_str() == dir)?;
    Some((class, dir))
}

trait Io: AsyncRead + AsyncWrite + Unpin + Send {}
impl<T: AsyncRead + AsyncWrite + Unpin + Send> Io for T {}

type BoxIo = Box<dyn Io>;

struct Connector {
    gw: Gateway,
    transport: Transport,
    tcp_addr: Option<std::net::SocketAddr>,
}

impl Connector {
    async fn new(gw: &Gateway, transport: Transport) -> Result<Self, EvalError> {
        let tcp_addr = match transport {
            Transport::Loopback => None,
            Transport::Tcp => {
                let listener = crate::session::bind(([127, 0, 0, 1], 0).into())
                    .await
                    .map_err(|e| EvalError::Transport(e.to_string()))?;
                let addr = listener.local_addr().map_err(|e| EvalError::Transport(e.to_string()))?;
                tokio::spawn(serve_tcp(gw.clone(), listener));
                Some(addr)
            }
        };
        Ok(Connector {
            gw: gw.clone(),
            transport,
            tcp_addr,
        })
    }

    async fn connect(&self) -> Result<WireClient<BoxIo>, EvalError> {
        let io: BoxIo = match self.transport {
            Transport::Loopback => {
                let (client, server) = tokio::io::duplex(1 << 20);
                tokio::spawn(crate::session::serve_io(self.gw.clone(), server));
                Box::new(client)
            }
            Transport::Tcp => {
                let addr = self.tcp_addr.expect("bound in new");
                let s = tokio::net::TcpStream::connect(addr)
                    .await
                    .map_err(|e| EvalError::Transport(e.to_string()))?;
                let _ = s.set_nodelay(true);
                Box::new(s)
            }
        };
        Ok(WireClient::new(io))
    }
}

struct LiveConnection {
    session_id: Uuid,
    sink: SplitSink<Framed<BoxIo, WireCodec>, Message>,
    reader: JoinHandle<()>,
}

fn spawn_reader(
    mut stream: SplitStream<Framed<BoxIo, WireCodec>>,
    tx: mpsc::UnboundedSender<Message>,
) -> JoinHandle<()> {
    tokio::spawn(async move {
        while let Some(Ok(m)) = stream.next().await {
            if tx.send(m).is_err() {
                break;
            }
        }
    })
}

async fn open(
    connector: &Connector,
    resume: Option<Uuid>,
    units: crate::types::Units,
    inbox: &mpsc::UnboundedSender<Message>,
) -> Result<(LiveConnection, bool), EvalError> {
    let mut client = connector.connect().await?;
    let ack = client
        .hello(&hello_payload(units, REPLAY_FPS_HINT, resume))
        .await
        .map_err(|e| EvalError::Transport(e.to_string()))?;
    let session_id = client.session_id;
    let (sink, stream) = client.into_framed().split();
    let reader = spawn_reader(stream, inbox.clone());
    Ok((
        LiveConnection {
            session_id,
            sink,
            reader,
        },
        ack.resumed,
    ))
}

/// Messages a trace put on the wire.
fn wire_messages(t: &FrameTrace) -> usize {
    if !t.delivered {
        0
    } else if t.error.is_some() {
        1
    } else {
        t.dispatched.len()
    }
}

struct Collector {
    traces_rx: mpsc::UnboundedReceiver<FrameTrace>,
    inbox_rx: mpsc::UnboundedReceiver<Message>,
    traces: Vec<FrameTrace>,
    messages: Vec<Message>,
    expected_messages: usize,
    deadline: Duration,
}

impl Collector {
    /// Blocks until the trace for `seq` has arrived and every message the
    /// gateway sent so far has reached the client.
    async fn settle(&mut self, seq: u64) -> Result<(), EvalError> {
        let deadline = Instant::now() + self.deadline;
        while !self.traces.iter().any(|t| t.frame_seq == seq) {
            let t = tokio::time::timeout_at(deadline, self.traces_rx.recv())
                .await
                .map_err(|_| EvalError::Timeout(format!("no analysis of frame {seq}")))?
                .ok_or_else(|| EvalError::Transport("trace channel closed".into()))?;
            self.expected_messages += wire_messages(&t);
            self.traces.push(t);
        }
        while let Ok(t) = self.traces_rx.try_recv() {
            self.expected_messages += wire_messages(&t);
            self.traces.push(t);
        }
        while self.messages.len() < self.expected_messages {
            let m = tokio::time::timeout_at(deadline, self.inbox_rx.recv())
                .await
                .map_err(|_| EvalError::Timeout(format!("instructions for frame {seq} never arrived")))?
                .ok_or_else(|| EvalError::Transport("connection closed early".into()))?;
            self.messages.push(m);
        }
        Ok(())
    }
}

async fn run(
    recording: &Recording,
    backend: Arc<dyn PerceptionBackend>,
    cfg: &GatewayConfig,
    opts: &ReplayOptions,
    disruption: Option<Disruption>,
) -> Result<RunOutput, EvalError> {
    let backend_name = backend.name().to_string();
    let manual = opts.fast.then(|| Arc::new(ManualClock::new(FAST_CLOCK_BASE_MS)));
    let clock: Arc<dyn Clock> = match &manual {
        Some(m) => m.clone(),
        None => Arc::new(SystemClock::new()),
    };
    let gw = Gateway::new(Pipeline::new(backend, cfg)?, cfg, clock);
    let frames: Vec<Vec<u8>> = (0..recording.len())
        .map(|i| recording.frame_bytes(i))
        .collect::<Result<_, _>>()?;

    let mut broadcast_rx = gw.subscribe();
    let (trace_tx, traces_rx) = mpsc::unbounded_channel();
    tokio::spawn(async move {
        loop {
            match broadcast_rx.recv().await {
                Ok(t) => {
                    if trace_tx.send(t).is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(missed = n, "replay fell behind the trace stream");
                }
                Err(broadcast::error::RecvError::Closed) => return,
            }
        }
    });
    let (inbox_tx, inbox_rx) = mpsc::unbounded_channel();
    let mut col = Collector {
        traces_rx,
        inbox_rx,
        traces: Vec::new(),
        messages: Vec::new(),
        expected_messages: 0,
        deadline: cfg.backend.timeout() + WAIT_SLACK,
    };

    let connector = Connector::new(&gw, opts.transport).await?;
    let units = cfg.composer.units;
    let (mut conn, _) = open(&connector, None, units, &inbox_tx).await?;
    let mut resumed = None;
    let mut bytes_sent = 0u64;
    let t0 = recording.manifest.frames.first().map_or(0, |f| f.timestamp_ms);
    let start = Instant::now();
    let mut offset_ms = 0u64;

    for (i, jpeg) in frames.into_iter().enumerate() {
        let seq = i as u64 + 1;
        let ts = recording.manifest.frames[i].timestamp_ms;
        let rel = ts - t0 + offset_ms;
        match &manual {
            Some(m) => m.set(FAST_CLOCK_BASE_MS + rel),
            None => tokio::time::sleep_until(start + Duration::from_millis(rel)).await,
        }
        let msg = Message::new(MsgType::Frame, conn.session_id, seq, ts, jpeg);
        bytes_sent += msg.encoded_len() as u64;
        conn.sink
            .send(msg)
            .await
            .map_err(|e| EvalError::Transport(e.to_string()))?;
        if opts.fast {
            col.settle(seq).await?;
        }

        if let Some(d) = disruption.filter(|d| d.after_frame == i + 1) {
            if !opts.fast {
                col.settle(seq).await?;
            }
            let old = conn.session_id;
            drop(conn.sink);
            conn.reader.abort();
            let wait_until = Instant::now() + col.deadline;
            while gw.phase(old) == SessionPhase::Active {
                if Instant::now() > wait_until {
                    return Err(EvalError::Timeout(
                        "gateway never noticed the dropped connection".into(),
                    ));
                }
                tokio::time::sleep(Duration::from_millis(2)).await;
            }
            match &manual {
                Some(m) => {
                    m.advance(d.resume_delay_ms);
                }
                None => tokio::time::sleep(Duration::from_millis(d.resume_delay_ms)).await,
            }
            offset_ms += d.resume_delay_ms;
            gw.expire_sessions(gw.now_ms());
            let (c, r) = open(&connector, Some(old), units, &inbox_tx).await?;
            conn = c;
            resumed = Some(r);
        }
    }
    let frames_sent = recording.len();
    if frames_sent > 0 && !opts.fast {
        col.settle(frames_sent as u64).await?;
    }
    let bye = Message::new(MsgType::Bye, conn.session_id, frames_sent as u64 + 1, 0, Vec::new());
    bytes_sent += bye.encoded_len() as u64;
    let _ = conn.sink.send(bye).await;
    drop(conn.sink);
    conn.reader.abort();
    let metrics = gw.metrics();
    gw.shutdown();

    let bytes_received = col.messages.iter().map(|m| m.encoded_len() as u64).sum();
    let mut heard = Vec::new();
    let mut errors_received = 0;
    for m in &col.messages {
        match m.msg_type {
            MsgType::Instruction => {
                let payload = InstructionPayload::parse(&m.payload)
                    .map_err(|e| EvalError::Transport(format!("bad INSTRUCTION from gateway: {e}")))?;
                let sign_class = parse_dedup_key(&payload.dedup_key).map(|(c, _)| c);
                heard.push(Heard { payload, sign_class });
            }
            MsgType::Error => errors_received += 1,
            _ => {}
        }
    }
    col.traces.sort_by_key(|t| t.frame_seq);
    Ok(RunOutput {
        traces: col.traces,
        heard,
        errors_received,
        metrics,
        resumed,
        frames_sent,
        bytes_sent,
        bytes_received,
        backend_name,
    })
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn score(recording: &Recording, out: &RunOutput, cfg: &GatewayConfig, opts: &ReplayOptions) -> EvalReport {
    let mut labeled = 0;
    let mut detected = 0;
    for label in &recording.labels {
        let trace = out.traces.iter().find(|t| t.frame_seq == label.frame);
        for want in &label.cues {
            labeled += 1;
            if trace.is_some_and(|t| {
                t.cues
                    .iter()
                    .any(|c| c.sign_class == want.class && c.direction == want.direction)
            }) {
                detected += 1;
            }
        }
    }

    let mut judged = 0;
    let mut correct = 0;
    for h in &out.heard {
        let Some(label) = recording.label(h.payload.frame_seq) else {
            continue;
        };
        judged += 1;
        let ok = label
            .cues
            .iter()
            .any(|c| Some(c.class) == h.sign_class && Some(c.direction) == h.payload.direction);
        if ok {
            correct += 1;
        }
    }

    let exact_text = opts.exact_text.then(|| {
        let mut expected = 0;
        let mut missing = Vec::new();
        for label in &recording.labels {
            for text in &label.expected_texts {
                expected += 1;
                let heard = out
                    .heard
                    .iter()
                    .any(|h| h.payload.frame_seq == label.frame && &h.payload.text == text);
                if !heard {
                    missing.push(format!("frame {}: {text}", label.frame));
                }
            }
        }
        ExactTextResult {
            expected,
            matched: expected - missing.len(),
            missing,
        }
    });

    let collect = |f: fn(&FrameTrace) -> f64| out.traces.iter().map(f).collect::<Vec<f64>>();
    let overhead = collect(|t| t.overhead_ms);
    let e2e = collect(|t| t.e2e_ms);
    let inference = collect(|t| t.inference_ms);

    let mut seen = HashSet::new();
    let repeats = out
        .heard
        .iter()
        .filter(|h| !seen.insert(h.payload.dedup_key.clone()))
        .count();

    let mode = if opts.fast { "fast" } else { "realtime" };
    let units = match cfg.composer.units {
        crate::types::Units::Feet => "feet",
        crate::types::Units::Meters => "meters",
    };
    EvalReport {
        recording: recording
            .dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        functional: Functional {
            completeness: ratio(detected, labeled),
            correctness: ratio(correct, judged),
            labeled_cues: labeled,
            detected_labeled_cues: detected,
            judged_instructions: judged,
            correct_instructions: correct,
            exact_text,
        },
        performance: Performance {
            samples: out.traces.len(),
            overhead_p50_ms: percentile(&overhead, 50.0),
            overhead_p95_ms: percentile(&overhead, 95.0),
            e2e_p50_ms: percentile(&e2e, 50.0),
            e2e_p95_ms: percentile(&e2e, 95.0),
            inference_p50_ms: percentile(&inference, 50.0),
            inference_p95_ms: percentile(&inference, 95.0),
        },
        reliability: Reliability { recoverability: None },
        usability: Usability {
            status: USABILITY_STATUS.to_string(),
            instructions: out.heard.len(),
            instructions_per_frame: ratio(out.heard.len(), out.frames_sent),
            repetition_rate: ratio(repeats, out.heard.len()),
        },
        portability: Portability {
            backend: out.backend_name.clone(),
            transport: opts.transport.as_str().to_string(),
            mode: mode.to_string(),
            units: units.to_string(),
            profiles: vec![format!("{}/{}/{mode}", out.backend_name, opts.transport.as_str())],
        },
        counts: Counts {
            frames_sent: out.frames_sent,
            frames_analyzed: out.traces.len(),
            frames_superseded: out.metrics.frames_superseded,
            frames_stale: out.metrics.frames_stale,
            format_errors: out.metrics.format_errors,
            backend_errors: out.metrics.backend_errors,
            error_messages_received: out.errors_received,
            bytes_sent: out.bytes_sent,
            bytes_received: out.bytes_received,
        },
    }
}

/// Streams the recording through a fresh gateway and scores what the
/// client heard against the labels.
pub async fn replay(
    recording: &Recording,
    backend: Arc<dyn PerceptionBackend>,
    cfg: &GatewayConfig,
    opts: &ReplayOptions,
) -> Result<EvalReport, EvalError> {
    let out = run(recording, backend, cfg, opts, None).await?;
    if let Some(path) = &opts.instructions_out {
        let logged: Vec<LoggedInstruction> = out
            .traces
            .iter()
            .filter(|t| t.delivered)
            .flat_map(|t| t.dispatched.iter().map(LoggedInstruction::from))
            .collect();
        write_jsonl(path, &logged).map_err(|e| crate::config::ConfigError::io(path, e))?;
    }
    Ok(score(recording, &out, cfg, opts))
}

fn cautions(heard: &[Heard]) -> Vec<CautionEvent> {
    let mut v: Vec<CautionEvent> = heard
        .iter()
        .filter(|h| h.payload.priority == Priority::Caution as u8)
        .map(|h| CautionEvent {
            frame_seq: h.payload.frame_seq,
            dedup_key: h.payload.dedup_key.clone(),
        })
        .collect();
    v.sort();
    v
}

/// Elements of `a` not matched one-for-one in `b`; both sorted.
fn multiset_minus(a: &[CautionEvent], b: &[CautionEvent]) -> Vec<CautionEvent> {
    let mut rest = b.to_vec();
    let mut out = Vec::new();
    for x in a {
        match rest.iter().position(|y| y == x) {
            Some(i) => {
                rest.remove(i);
            }
            None => out.push(x.clone()),
        }
    }
    out
}

fn list(events: &[CautionEvent]) -> String {
    if events.is_empty() {
        return "none".into();
    }
    events
        .iter()
        .map(|e| format!("{}@{}", e.dedup_key, e.frame_seq))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Runs the recording twice in fast mode: once uninterrupted, once with the
/// connection dropped after frame ⌊n/2⌋ and resumed `resume_delay_ms`
/// later. Passes iff the caution instructions heard are identical.
pub async fn recoverability_drill(
    recording: &Recording,
    backend: Arc<dyn PerceptionBackend>,
    cfg: &GatewayConfig,
    transport: Transport,
    resume_delay_ms: u64,
) -> Result<DrillResult, EvalError> {
    let n = recording.len();
    if n < MIN_DRILL_FRAMES {
        return Err(EvalError::Precondition(format!(
            "recoverability drill needs at least {MIN_DRILL_FRAMES} frames, recording has {n}"
        )));
    }
    let opts = ReplayOptions {
        fast: true,
        transport,
        ..Default::default()
    };
    let oracle = run(recording, backend.clone(), cfg, &opts, None).await?;
    let drop_after = n / 2;
    let disrupted = run(
        recording,
        backend,
        cfg,
        &opts,
        Some(Disruption {
            after_frame: drop_after,
            resume_delay_ms,
        }),
    )
    .await?;

    let oracle_cautions = cautions(&oracle.heard);
    let observed_cautions = cautions(&disrupted.heard);
    let lost = multiset_minus(&oracle_cautions, &observed_cautions);
    let duplicated = multiset_minus(&observed_cautions, &oracle_cautions);
    let resumed = disrupted.resumed.unwrap_or(false);
    let passed = lost.is_empty() && duplicated.is_empty();
    let detail = if passed {
        format!(
            "{} caution(s) match the uninterrupted run across a reconnect after frame {drop_after}",
            oracle_cautions.len()
        )
    } else if !resumed {
        format!(
            "dedup state lost: resume refused, session restarted fresh; lost: {}; duplicated: {}",
            list(&lost),
            list(&duplicated)
        )
    } else {
        format!(
            "caution mismatch after resume; lost: {}; duplicated: {}",
            list(&lost),
            list(&duplicated)
        )
    };
    Ok(DrillResult {
        passed,
        detail,
        drop_after_frame: drop_after,
        resume_delay_ms,
        resumed,
        oracle_cautions,
        observed_cautions,
        lost,
        duplicated,
    })
}
