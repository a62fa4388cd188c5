use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::compose::Instruction;
use crate::interpret::NavCue;

/// Gateway-wide counters. Cheap to bump from any task.
#[derive(Debug, Default)]
pub struct Metrics {
    pub(crate) frames_received: AtomicU64,
    pub(crate) frames_accepted: AtomicU64,
    pub(crate) frames_superseded: AtomicU64,
    pub(crate) frames_stale: AtomicU64,
    pub(crate) format_errors: AtomicU64,
    pub(crate) backend_errors: AtomicU64,
    pub(crate) analyses: AtomicU64,
    pub(crate) instructions_dispatched: AtomicU64,
    pub(crate) sessions_opened: AtomicU64,
    pub(crate) sessions_resumed: AtomicU64,
    pub(crate) sessions_expired: AtomicU64,
    overhead_ms: Mutex<Vec<f64>>,
}

pub(crate) fn bump(counter: &AtomicU64) {
    counter.fetch_add(1, Ordering::Relaxed);
}

impl Metrics {
    pub(crate) fn record_overhead(&self, ms: f64) {
        self.overhead_ms.lock().expect("metrics lock").push(ms);
    }

    pub fn snapshot(&self) -> MetricsSnapshot {
        let get = |c: &AtomicU64| c.load(Ordering::Relaxed);
        MetricsSnapshot {
            frames_received: get(&self.frames_received),
            frames_accepted: get(&self.frames_accepted),
            frames_superseded: get(&self.frames_superseded),
            frames_stale: get(&self.frames_stale),
            format_errors: get(&self.format_errors),
            backend_errors: get(&self.backend_errors),
            analyses: get(&self.analyses),
            instructions_dispatched: get(&self.instructions_dispatched),
            sessions_opened: get(&self.sessions_opened),
            sessions_resumed: get(&self.sessions_resumed),
            sessions_expired: get(&self.sessions_expired),
            overhead_ms: self.overhead_ms.lock().expect("metrics lock").clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub frames_received: u64,
    pub frames_accepted: u64,
    pub frames_superseded: u64,
    pub frames_stale: u64,
    pub format_errors: u64,
    pub backend_errors: u64,
    pub analyses: u64,
    pub instructions_dispatched: u64,
    pub sessions_opened: u64,
    pub sessions_resumed: u64,
    pub sessions_expired: u64,
    /// One sample per analyzed frame.
    pub overhead_ms: Vec<f64>,
}

/// Everything the pipeline did with one analyzed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTrace {
    pub session_id: Uuid,
    pub frame_seq: u64,
    pub cues: Vec<NavCue>,
    pub dispatched: Vec<Instruction>,
    pub deferred: usize,
    pub duplicates: usize,
    /// False when no connection was attached to receive the instructions.
    pub delivered: bool,
    pub error: Option<String>,
    /// Wall time spent inside the perception backend.
    pub inference_ms: f64,
    pub rewrite_ms: f64,
    /// Time the frame sat in the mailbox behind another frame's analysis.
    pub queue_ms: f64,
    /// Gateway's own processing time: receipt to dispatch minus inference,
    /// rewriting and mailbox wait.
    pub overhead_ms: f64,
    /// Receipt to dispatch.
    pub e2e_ms: f64,
}
