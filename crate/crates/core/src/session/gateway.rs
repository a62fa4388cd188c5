use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, mpsc, Notify};
use tokio::task::JoinHandle;
use tokio_util::sync::CancellationToken;
use uuid::Uuid;

use super::metrics::{bump, FrameTrace, Metrics, MetricsSnapshot};
use super::pipeline::{jpeg_dims, Pipeline};
use super::recorder::Recorder;
use super::Clock;
use crate::compose::{compose, filter_and_schedule, DedupMemory};
use crate::config::{GatewayConfig, SessionConfig};
use crate::eval::recording::LoggedInstruction;
use crate::perception::analyze_with_timeout;
use crate::protocol::{ErrorPayload, HelloAckPayload, HelloPayload, Message, MsgType};
use crate::types::{Frame, Units};

const TRACE_CAPACITY: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionPhase {
    Active,
    Disconnected,
    /// Reported for ids the registry no longer holds.
    Expired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Active,
    Disconnected { since_ms: u64 },
}

#[derive(Debug)]
struct Attachment {
    conn_id: u64,
    tx: mpsc::Sender<Message>,
    cancel: CancellationToken,
}

#[derive(Debug)]
struct SessionState {
    status: Status,
    last_seen_ms: u64,
    highest_frame_seq: Option<u64>,
    dedup: DedupMemory,
    units: Units,
    accepted_fps: f64,
    attachment: Option<Attachment>,
    out_seq: u64,
}

struct Session {
    id: Uuid,
    state: Mutex<SessionState>,
    mailbox: Mutex<Option<Frame>>,
    wake: Notify,
    stop: CancellationToken,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Session {
    async fn next_frame(&self) -> Frame {
        loop {
            if let Some(f) = lock(&self.mailbox).take() {
                return f;
            }
            self.wake.notified().await;
        }
    }
}

/// Read-only view of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: Uuid,
    pub phase: SessionPhase,
    pub last_seen_ms: u64,
    pub highest_frame_seq: Option<u64>,
    pub dedup_memory: DedupMemory,
    pub units: Units,
    pub accepted_fps: f64,
    pub connected: bool,
    pub pending_frame_seq: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmitOutcome {
    /// The frame now sits in the mailbox. `superseded` names the
    /// unprocessed frame it replaced, if any.
    Accepted { superseded: Option<u64> },
    /// Sequence not above the highest already seen; dropped.
    Stale,
    /// No active session with that id.
    NotActive,
}

/// A connection's handle on its session.
#[derive(Debug, Clone)]
pub struct AttachToken {
    pub conn_id: u64,
    /// Cancelled when the gateway takes the session away from this
    /// connection (timeout, expiry, shutdown).
    pub cancel: CancellationToken,
}

struct Inner {
    pipeline: Pipeline,
    clock: Arc<dyn Clock>,
    session_cfg: SessionConfig,
    sessions: Mutex<HashMap<Uuid, Arc<Session>>>,
    metrics: Metrics,
    traces: broadcast::Sender<FrameTrace>,
    recorder: Option<Recorder>,
    next_conn: AtomicU64,
    shutdown: CancellationToken,
}

/// The session registry and per-session pipelines. Cloning shares state.
///
/// Each session owns a depth-1 latest-wins mailbox and one worker task, so
/// at most one frame per session is under analysis at any time.
#[derive(Clone)]
pub struct Gateway {
    inner: Arc<Inner>,
}

impl Gateway {
    pub fn new(pipeline: Pipeline, cfg: &GatewayConfig, clock: Arc<dyn Clock>) -> Self {
        Self::with_recorder(pipeline, cfg, clock, None)
    }

    pub fn with_recorder(
        pipeline: Pipeline,
        cfg: &GatewayConfig,
        clock: Arc<dyn Clock>,
        recorder: Option<Recorder>,
    ) -> Self {
        let (traces, _) = broadcast::channel(TRACE_CAPACITY);
        Gateway {
            inner: Arc::new(Inner {
                pipeline,
                clock,
                session_cfg: cfg.session,
                sessions: Mutex::new(HashMap::new()),
                metrics: Metrics::default(),
                traces,
                recorder,
                next_conn: AtomicU64::new(1),
                shutdown: CancellationToken::new(),
            }),
        }
    }

    pub fn now_ms(&self) -> u64 {
        self.inner.clock.now_ms()
    }

    pub fn session_config(&self) -> SessionConfig {
        self.inner.session_cfg
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        self.inner.metrics.snapshot()
    }

    pub fn recorder(&self) -> Option<&Recorder> {
        self.inner.recorder.as_ref()
    }

    pub(crate) fn count_received(&self) {
        bump(&self.inner.metrics.frames_received);
    }

    pub(crate) fn count_format_error(&self) {
        bump(&self.inner.metrics.format_errors);
    }

    /// Per-frame traces of everything analyzed from now on.
    pub fn subscribe(&self) -> broadcast::Receiver<FrameTrace> {
        self.inner.traces.subscribe()
    }

    pub fn shutdown_token(&self) -> CancellationToken {
        self.inner.shutdown.clone()
    }

    /// Stops every worker and detaches every connection.
    pub fn shutdown(&self) {
        self.inner.shutdown.cancel();
        let sessions = lock(&self.inner.sessions);
        for s in sessions.values() {
            s.stop.cancel();
            if let Some(a) = lock(&s.state).attachment.take() {
                a.cancel.cancel();
            }
        }
    }

    /// Resumes the named session when it is DISCONNECTED and inside its
    /// reconnect window; otherwise starts a fresh one.
    pub fn open_session(&self, hello: &HelloPayload) -> HelloAckPayload {
        let inner = &self.inner;
        let now = inner.clock.now_ms();
        let accepted_fps = hello.fps_hint.min(inner.session_cfg.max_fps);
        let mut sessions = lock(&inner.sessions);

        let resume_id = hello.resume_session_id.as_deref().and_then(|s| Uuid::parse_str(s).ok());
        if let Some(id) = resume_id {
            let mut expired_now = false;
            if let Some(s) = sessions.get(&id) {
                let mut st = lock(&s.state);
                if let Status::Disconnected { since_ms } = st.status {
                    if now.saturating_sub(since_ms) <= inner.session_cfg.reconnect_window_ms {
                        st.status = Status::Active;
                        st.last_seen_ms = now;
                        st.units = hello.units;
                        st.accepted_fps = accepted_fps;
                        bump(&inner.metrics.sessions_resumed);
                        tracing::info!(session = %id, "session resumed");
                        return HelloAckPayload {
                            session_id: id.to_string(),
                            accepted_fps,
                            resumed: true,
                        };
                    }
                    expired_now = true;
                }
            }
            if expired_now {
                if let Some(s) = sessions.remove(&id) {
                    s.stop.cancel();
                    bump(&inner.metrics.sessions_expired);
                }
            }
        }

        let id = Uuid::new_v4();
        let session = Arc::new(Session {
            id,
            state: Mutex::new(SessionState {
                status: Status::Active,
                last_seen_ms: now,
                highest_frame_seq: None,
                dedup: DedupMemory::default(),
                units: hello.units,
                accepted_fps,
                attachment: None,
                out_seq: 0,
            }),
            mailbox: Mutex::new(None),
            wake: Notify::new(),
            stop: inner.shutdown.child_token(),
        });
        sessions.insert(id, session.clone());
        drop(sessions);
        bump(&inner.metrics.sessions_opened);
        if let Some(r) = &inner.recorder {
            r.open(id);
        }
        tokio::spawn(worker(self.inner.clone(), session));
        tracing::info!(session = %id, client = %hello.client_name, "session opened");
        HelloAckPayload {
            session_id: id.to_string(),
            accepted_fps,
            resumed: false,
        }
    }

    /// Routes the session's outbound messages to `tx`. A previous
    /// connection still attached is cancelled.
    pub fn attach(&self, session_id: Uuid, tx: mpsc::Sender<Message>) -> Option<AttachToken> {
        let s = lock(&self.inner.sessions).get(&session_id).cloned()?;
        let mut st = lock(&s.state);
        if st.status != Status::Active {
            return None;
        }
        let conn_id = self.inner.next_conn.fetch_add(1, Ordering::Relaxed);
        let cancel = self.inner.shutdown.child_token();
        if let Some(old) = st.attachment.replace(Attachment {
            conn_id,
            tx,
            cancel: cancel.clone(),
        }) {
            old.cancel.cancel();
        }
        Some(AttachToken { conn_id, cancel })
    }

    /// The connection went away: the session becomes DISCONNECTED and its
    /// reconnect window starts. A pending unprocessed frame is dropped.
    pub fn detach(&self, session_id: Uuid, conn_id: u64) {
        let Some(s) = lock(&self.inner.sessions).get(&session_id).cloned() else {
            return;
        };
        let mut st = lock(&s.state);
        if st.attachment.as_ref().is_some_and(|a| a.conn_id == conn_id) {
            st.attachment = None;
            st.status = Status::Disconnected {
                since_ms: self.inner.clock.now_ms(),
            };
            lock(&s.mailbox).take();
            tracing::info!(session = %session_id, "session disconnected");
        }
    }

    pub fn heartbeat(&self, session_id: Uuid) {
        if let Some(s) = lock(&self.inner.sessions).get(&session_id) {
            let mut st = lock(&s.state);
            if st.status == Status::Active {
                st.last_seen_ms = self.inner.clock.now_ms();
            }
        }
    }

    /// BYE: the session ends now, with no reconnect window.
    pub fn close_session(&self, session_id: Uuid) {
        if let Some(s) = lock(&self.inner.sessions).remove(&session_id) {
            s.stop.cancel();
            lock(&s.state).attachment = None;
            tracing::info!(session = %session_id, "session closed by client");
        }
    }

    pub fn session(&self, session_id: Uuid) -> Option<SessionInfo> {
        let s = lock(&self.inner.sessions).get(&session_id).cloned()?;
        let pending_frame_seq = lock(&s.mailbox).as_ref().map(|f| f.seq);
        let st = lock(&s.state);
        Some(SessionInfo {
            session_id,
            phase: match st.status {
                Status::Active => SessionPhase::Active,
                Status::Disconnected { .. } => SessionPhase::Disconnected,
            },
            last_seen_ms: st.last_seen_ms,
            highest_frame_seq: st.highest_frame_seq,
            dedup_memory: st.dedup.clone(),
            units: st.units,
            accepted_fps: st.accepted_fps,
            connected: st.attachment.is_some(),
            pending_frame_seq,
        })
    }

    pub fn phase(&self, session_id: Uuid) -> SessionPhase {
        self.session(session_id).map_or(SessionPhase::Expired, |i| i.phase)
    }

    pub fn session_count(&self) -> usize {
        lock(&self.inner.sessions).len()
    }

    /// Latest-wins ingestion. Frames at or below the highest sequence seen
    /// are stale; a newer frame replaces any unprocessed one.
    pub fn submit_frame(&self, frame: Frame) -> SubmitOutcome {
        let inner = &self.inner;
        let Some(s) = lock(&inner.sessions).get(&frame.session_id).cloned() else {
            return SubmitOutcome::NotActive;
        };
        {
            let mut st = lock(&s.state);
            if st.status != Status::Active {
                return SubmitOutcome::NotActive;
            }
            st.last_seen_ms = inner.clock.now_ms();
            if st.highest_frame_seq.is_some_and(|h| frame.seq <= h) {
                bump(&inner.metrics.frames_stale);
                return SubmitOutcome::Stale;
            }
            st.highest_frame_seq = Some(frame.seq);
        }
        let superseded = lock(&s.mailbox).replace(frame).map(|old| old.seq);
        bump(&inner.metrics.frames_accepted);
        if superseded.is_some() {
            bump(&inner.metrics.frames_superseded);
        }
        s.wake.notify_one();
        SubmitOutcome::Accepted { superseded }
    }

    /// ACTIVE sessions silent longer than the session timeout become
    /// DISCONNECTED; DISCONNECTED sessions past the reconnect window are
    /// removed and returned.
    pub fn expire_sessions(&self, now_ms: u64) -> Vec<Uuid> {
        let inner = &self.inner;
        let cfg = inner.session_cfg;
        let mut expired = Vec::new();
        lock(&inner.sessions).retain(|id, s| {
            let mut st = lock(&s.state);
            match st.status {
                Status::Active if now_ms.saturating_sub(st.last_seen_ms) > cfg.session_timeout_ms => {
                    st.status = Status::Disconnected { since_ms: now_ms };
                    if let Some(a) = st.attachment.take() {
                        a.cancel.cancel();
                    }
                    lock(&s.mailbox).take();
                    tracing::info!(session = %id, "session timed out");
                    true
                }
                Status::Disconnected { since_ms } if now_ms.saturating_sub(since_ms) > cfg.reconnect_window_ms => {
                    s.stop.cancel();
                    expired.push(*id);
                    false
                }
                _ => true,
            }
        });
        for id in &expired {
            bump(&inner.metrics.sessions_expired);
            tracing::info!(session = %id, "session expired");
        }
        expired
    }

    /// Runs `expire_sessions` on a fixed period until shutdown.
    pub fn spawn_reaper(&self, period: Duration) -> JoinHandle<()> {
        let gw = self.clone();
        let stop = self.inner.shutdown.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                tokio::select! {
                    _ = stop.cancelled() => return,
                    _ = tick.tick() => { gw.expire_sessions(gw.now_ms()); }
                }
            }
        })
    }

    /// Builds an outbound message stamped with the session's next sequence.
    pub fn outbound(&self, session_id: Uuid, msg_type: MsgType, payload: Vec<u8>) -> Message {
        let seq = lock(&self.inner.sessions).get(&session_id).map(|s| {
            let mut st = lock(&s.state);
            st.out_seq += 1;
            st.out_seq
        });
        Message::new(
            msg_type,
            session_id,
            seq.unwrap_or(0),
            self.inner.clock.now_ms(),
            payload,
        )
    }
}

async fn worker(inner: Arc<Inner>, session: Arc<Session>) {
    loop {
        let frame = tokio::select! {
            biased;
            _ = session.stop.cancelled() => return,
            f = session.next_frame() => f,
        };
        run_pipeline_step(&inner, &session, frame).await;
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

/// Sends `messages` to the attached connection, stamping sequence numbers.
/// False when nothing is attached or the connection went away mid-send.
async fn deliver(inner: &Inner, session: &Session, messages: Vec<(MsgType, Vec<u8>)>) -> bool {
    let (tx, stamped) = {
        let mut st = lock(&session.state);
        let Some(a) = &st.attachment else {
            return false;
        };
        let tx = a.tx.clone();
        let now = inner.clock.now_ms();
        let stamped: Vec<Message> = messages
            .into_iter()
            .map(|(t, p)| {
                st.out_seq += 1;
                Message::new(t, session.id, st.out_seq, now, p)
            })
            .collect();
        (tx, stamped)
    };
    for m in stamped {
        if tx.send(m).await.is_err() {
            return false;
        }
    }
    true
}

async fn run_pipeline_step(inner: &Inner, session: &Session, frame: Frame) {
    let p = &inner.pipeline;
    let picked = Instant::now();
    let queue = picked.saturating_duration_since(frame.received_at);
    bump(&inner.metrics.analyses);

    let t0 = Instant::now();
    let result = analyze_with_timeout(&*p.backend, &frame, &p.questions, p.backend_timeout).await;
    let inference = t0.elapsed();

    let mut trace = FrameTrace {
        session_id: session.id,
        frame_seq: frame.seq,
        cues: Vec::new(),
        dispatched: Vec::new(),
        deferred: 0,
        duplicates: 0,
        delivered: false,
        error: None,
        inference_ms: ms(inference),
        rewrite_ms: 0.0,
        queue_ms: ms(queue),
        overhead_ms: 0.0,
        e2e_ms: 0.0,
    };
    let mut rewrite = Duration::ZERO;

    match result {
        Err(e) => {
            bump(&inner.metrics.backend_errors);
            tracing::warn!(session = %session.id, seq = frame.seq, error = %e, "backend failure");
            let payload = ErrorPayload {
                code: e.code().to_string(),
                message: e.to_string(),
                retryable: e.retryable(),
                frame_seq: Some(frame.seq),
            };
            let body = serde_json::to_vec(&payload).expect("error payload serializes");
            trace.delivered = deliver(inner, session, vec![(MsgType::Error, body)]).await;
            trace.error = Some(e.to_string());
        }
        Ok(obs) => {
            let dims = jpeg_dims(&frame.jpeg);
            let cues = p.interpreter.interpret(&obs, dims.unwrap_or(p.fallback_dims));
            let (units, mut memory) = {
                let st = lock(&session.state);
                (st.units, st.dedup.clone())
            };
            let candidates = compose(&cues, units, frame.seq);
            let schedule = filter_and_schedule(candidates, &mut memory, inner.clock.now_ms(), p.schedule);

            let mut dispatched = Vec::with_capacity(schedule.dispatch.len());
            if let Some(r) = &p.rewriter {
                let tr = Instant::now();
                for i in schedule.dispatch {
                    dispatched.push(r.rewrite(i).await);
                }
                rewrite = tr.elapsed();
            } else {
                dispatched = schedule.dispatch;
            }

            let messages = dispatched
                .iter()
                .map(|i| {
                    let body = serde_json::to_vec(&i.to_payload()).expect("instruction payload serializes");
                    (MsgType::Instruction, body)
                })
                .collect::<Vec<_>>();
            trace.delivered = messages.is_empty() || deliver(inner, session, messages).await;
            // what was not heard is not remembered as said
            if trace.delivered {
                lock(&session.state).dedup = memory;
                inner
                    .metrics
                    .instructions_dispatched
                    .fetch_add(dispatched.len() as u64, Ordering::Relaxed);
            }
            if let Some(r) = &inner.recorder {
                r.frame(
                    session.id,
                    frame.timestamp_ms,
                    dims,
                    frame.jpeg.clone(),
                    dispatched.iter().map(LoggedInstruction::from).collect(),
                );
            }
            trace.cues = cues;
            trace.deferred = schedule.deferred.len();
            trace.duplicates = schedule.duplicates;
            trace.dispatched = dispatched;
        }
    }

    let total = frame.received_at.elapsed();
    let overhead = total.saturating_sub(inference + rewrite + queue);
    inner.metrics.record_overhead(ms(overhead));
    trace.rewrite_ms = ms(rewrite);
    trace.overhead_ms = ms(overhead);
    trace.e2e_ms = ms(total);
    let _ = inner.traces.send(trace);
}
