use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use serde::Deserialize;

use super::{BackendError, PerceptionBackend, RawObservation, TextRegion, VqaAnswer};
use crate::config::ConfigError;
use crate::types::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubFailure {
    Unavailable,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ScriptEntry {
    pub seq: u64,
    #[serde(default)]
    pub text_regions: Vec<TextRegion>,
    #[serde(default)]
    pub vqa_answers: Vec<VqaAnswer>,
    /// Overrides the script-wide latency for this frame.
    #[serde(default)]
    pub latency_ms: Option<u64>,
    #[serde(default)]
    pub fail: Option<StubFailure>,
}

#[derive(Debug, Deserialize)]
struct Script {
    #[serde(default)]
    latency_ms: u64,
    #[serde(default)]
    entries: Vec<ScriptEntry>,
}

/// Scripted backend: returns the observation written for a frame sequence
/// number, and an empty observation for every other frame.
#[derive(Debug, Clone)]
pub struct StubBackend {
    entries: HashMap<u64, ScriptEntry>,
    latency: Duration,
}

impl StubBackend {
    pub fn new(entries: Vec<ScriptEntry>, latency: Duration) -> Result<Self, ConfigError> {
        let mut map = HashMap::with_capacity(entries.len());
        for e in entries {
            let seq = e.seq;
            if map.insert(seq, e).is_some() {
                return Err(ConfigError::Invalid(format!(
                    "stub script has duplicate entry for seq {seq}"
                )));
            }
        }
        Ok(StubBackend { entries: map, latency })
    }

    pub fn empty() -> Self {
        StubBackend {
            entries: HashMap::new(),
            latency: Duration::ZERO,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let script: Script =
            serde_json::from_str(text).map_err(|e| ConfigError::Invalid(format!("malformed stub script: {e}")))?;
        Self::new(script.entries, Duration::from_millis(script.latency_ms))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[async_trait]
impl PerceptionBackend for StubBackend {
    fn name(&self) -> &str {
        "stub"
    }

    fn max_in_flight(&self) -> Option<usize> {
        None
    }

    async fn analyze(&self, frame: &Frame, _questions: &[String]) -> Result<RawObservation, BackendError> {
        let entry = self.entries.get(&frame.seq);
        let latency = entry
            .and_then(|e| e.latency_ms)
            .map(Duration::from_millis)
            .unwrap_or(self.latency);
        if !latency.is_zero() {
            tokio::time::sleep(latency).await;
        }
        let Some(entry) = entry else {
            return Ok(RawObservation::empty(frame.seq, self.name()));
        };
        match entry.fail {
            Some(StubFailure::Unavailable) => return Err(BackendError::Unavailable("scripted failure".into())),
            Some(StubFailure::Malformed) => return Err(BackendError::Protocol("scripted malformed response".into())),
            None => {}
        }
        Ok(RawObservation {
            frame_seq: frame.seq,
            text_regions: entry.text_regions.clone(),
            vqa_answers: entry.vqa_answers.clone(),
            backend_name: self.name().to_string(),
            inference_ms: latency.as_secs_f64() * 1000.0,
        })
    }
}
