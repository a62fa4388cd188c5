//! Replay harness: feeds recordings through a loopback client, scores what
//! comes back against labels, and runs the recoverability drill.

mod client;
pub mod recording;
mod replay;
mod report;

pub use client::{connect_loopback, hello_payload, ClientError, WireClient};
pub use recording::{FrameLabel, LabelCue, LoggedInstruction, Manifest, ManifestFrame, Recording};
pub use replay::{
    parse_dedup_key, recoverability_drill, replay, Heard, ReplayOptions, Transport, DEFAULT_RESUME_DELAY_MS,
    FAST_CLOCK_BASE_MS, MIN_DRILL_FRAMES,
};
pub use report::{
    emit_report, percentile, render_table, report_json, text_path, CautionEvent, Counts, DrillResult, EvalReport,
    ExactTextResult, Functional, Performance, Portability, Reliability, Usability, USABILITY_STATUS,
};

use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("timed out: {0}")]
    Timeout(String),
}
