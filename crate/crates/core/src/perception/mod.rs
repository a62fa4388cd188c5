//! Perception backends and the in-process EAST post-processing.
//!
//! Every backend turns a frame (plus the configured questions) into a
//! [`RawObservation`]. Inference itself always happens outside the gateway:
//! in a sidecar process, a remote API, a fixture directory, or a script.

pub mod east;
mod east_backend;
pub mod geometry;
mod limit;
pub mod nms;
mod remote;
mod stub;
mod vqa;

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Frame;

pub use east_backend::{EastBackend, EastSource};
pub use limit::Limited;
pub use remote::{CostLedger, RemoteBackend, REMOTE_API_KEY_ENV};
pub use stub::{ScriptEntry, StubBackend, StubFailure};
pub use vqa::{VqaBackend, VqaClient};

use geometry::Quad;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(2000);

pub const EXIT_SIGN_QUESTION: &str = "Is this an exit sign?";
pub const SUMMARY_QUESTION: &str = "Give a summary of the image";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRegion {
    pub quad: Quad,
    pub score: f64,
    #[serde(default)]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaAnswer {
    pub question: String,
    pub answer: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawObservation {
    pub frame_seq: u64,
    #[serde(default)]
    pub text_regions: Vec<TextRegion>,
    #[serde(default)]
    pub vqa_answers: Vec<VqaAnswer>,
    pub backend_name: String,
    #[serde(default)]
    pub inference_ms: f64,
}

impl RawObservation {
    pub fn empty(frame_seq: u64, backend_name: impl Into<String>) -> Self {
        RawObservation {
            frame_seq,
            text_regions: Vec::new(),
            vqa_answers: Vec::new(),
            backend_name: backend_name.into(),
            inference_ms: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.text_regions.is_empty() && self.vqa_answers.is_empty()
    }

    /// Checks the confidence ranges and geometry a backend must deliver.
    pub fn validate(&self) -> Result<(), BackendError> {
        for a in &self.vqa_answers {
            if !(0.0..=1.0).contains(&a.confidence) {
                return Err(BackendError::Protocol(format!(
                    "answer confidence {} outside [0, 1]",
                    a.confidence
                )));
            }
        }
        for r in &self.text_regions {
            if !(r.score > 0.0 && r.score <= 1.0) {
                return Err(BackendError::Protocol(format!(
                    "region score {} outside (0, 1]",
                    r.score
                )));
            }
            if !r.quad.is_finite() {
                return Err(BackendError::Protocol("non-finite region vertex".into()));
            }
        }
        if self.inference_ms.is_nan() || self.inference_ms < 0.0 {
            return Err(BackendError::Protocol("negative inference time".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend timed out after {0:?}")]
    Timeout(Duration),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("malformed backend response: {0}")]
    Protocol(String),
}

impl BackendError {
    pub fn retryable(&self) -> bool {
        !matches!(self, BackendError::Protocol(_))
    }

    pub fn code(&self) -> &'static str {
        match self {
            BackendError::Timeout(_) => "backend_timeout",
            BackendError::Unavailable(_) => "backend_unavailable",
            BackendError::Protocol(_) => "backend_protocol",
        }
    }
}

#[async_trait]
pub trait PerceptionBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Concurrent analyses the backend accepts; `None` means unbounded.
    fn max_in_flight(&self) -> Option<usize>;

    async fn analyze(&self, frame: &Frame, questions: &[String]) -> Result<RawObservation, BackendError>;
}

/// Runs `backend.analyze` under a deadline and validates what comes back.
pub async fn analyze_with_timeout(
    backend: &dyn PerceptionBackend,
    frame: &Frame,
    questions: &[String],
    timeout: Duration,
) -> Result<RawObservation, BackendError> {
    let obs = tokio::time::timeout(timeout, backend.analyze(frame, questions))
        .await
        .map_err(|_| BackendError::Timeout(timeout))??;
    obs.validate()?;
    Ok(obs)
}

/// Default question set: the exit-sign check, a free-form summary, and one
/// yes/no question per other sign class.
pub fn default_questions() -> Vec<String> {
    let mut q = vec![EXIT_SIGN_QUESTION.to_string(), SUMMARY_QUESTION.to_string()];
    q.extend(
        ["stairs", "elevator", "restroom", "door"]
            .iter()
            .map(|c| format!("Is this a {c} sign?")),
    );
    q
}

pub(crate) fn http_error(e: reqwest::Error, timeout: Duration) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout(timeout)
    } else if e.is_decode() {
        BackendError::Protocol(e.to_string())
    } else {
        BackendError::Unavailable(e.to_string())
    }
}
