//! Paid remote image-recognition API adapter with exact cost accounting.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use rust_decimal::Decimal;
use serde::Deserialize;

use super::geometry::Quad;
use super::{http_error, BackendError, PerceptionBackend, RawObservation, TextRegion, VqaAnswer};
use crate::types::Frame;

pub const REMOTE_API_KEY_ENV: &str = "WAYFINDER_REMOTE_API_KEY";

/// Labels returned by the API are reported as answers to this question.
pub const LABELS_QUESTION: &str = "What objects are visible?";

/// Counts billable images. The total is derived as count × unit cost in
/// decimal arithmetic, so it never drifts.
#[derive(Debug)]
pub struct CostLedger {
    images_processed: AtomicU64,
    unit_cost_usd: Decimal,
}

impl CostLedger {
    /// One US dollar per thousand processed images.
    pub fn default_unit_cost() -> Decimal {
        Decimal::new(1, 3)
    }

    pub fn new(unit_cost_usd: Decimal) -> Self {
        CostLedger {
            images_processed: AtomicU64::new(0),
            unit_cost_usd,
        }
    }

    pub fn record_success(&self) {
        self.images_processed.fetch_add(1, Ordering::AcqRel);
    }

    pub fn images_processed(&self) -> u64 {
        self.images_processed.load(Ordering::Acquire)
    }

    pub fn unit_cost_usd(&self) -> Decimal {
        self.unit_cost_usd
    }

    pub fn total_usd(&self) -> Decimal {
        Decimal::from(self.images_processed()) * self.unit_cost_usd
    }
}

impl Default for CostLedger {
    fn default() -> Self {
        CostLedger::new(CostLedger::default_unit_cost())
    }
}

#[derive(Debug, Deserialize)]
struct RemoteText {
    text: String,
    confidence: f64,
    quad: Quad,
}

#[derive(Debug, Deserialize)]
struct RemoteLabel {
    label: String,
    confidence: f64,
}

#[derive(Debug, Deserialize)]
struct RemoteReply {
    #[serde(default)]
    text_regions: Vec<RemoteText>,
    #[serde(default)]
    labels: Vec<RemoteLabel>,
}

/// `POST {url}` with the JPEG body and a bearer key. Expected reply:
/// `{"text_regions": [{"text", "confidence", "quad"}], "labels": [{"label", "confidence"}]}`.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    http: reqwest::Client,
    url: String,
    api_key: String,
    timeout: Duration,
    ledger: Arc<CostLedger>,
    max_in_flight: usize,
}

impl RemoteBackend {
    pub fn new(url: impl Into<String>, api_key: impl Into<String>, timeout: Duration, ledger: Arc<CostLedger>) -> Self {
        RemoteBackend {
            http: reqwest::Client::new(),
            url: url.into(),
            api_key: api_key.into(),
            timeout,
            ledger,
            max_in_flight: 4,
        }
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn ledger(&self) -> &Arc<CostLedger> {
        &self.ledger
    }

    async fn call(&self, frame: &Frame) -> Result<RemoteReply, BackendError> {
        let resp = self
            .http
            .post(&self.url)
            .timeout(self.timeout)
            .bearer_auth(&self.api_key)
            .header(reqwest::header::CONTENT_TYPE, "image/jpeg")
            .body(frame.jpeg.clone())
            .send()
            .await
            .map_err(|e| http_error(e, self.timeout))?;
        if !resp.status().is_success() {
            return Err(BackendError::Unavailable(format!(
                "remote API returned {}",
                resp.status()
            )));
        }
        let body = resp.bytes().await.map_err(|e| http_error(e, self.timeout))?;
        serde_json::from_slice(&body).map_err(|e| BackendError::Protocol(format!("remote reply: {e}")))
    }
}

#[async_trait]
impl PerceptionBackend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn max_in_flight(&self) -> Option<usize> {
        Some(self.max_in_flight)
    }

    async fn analyze(&self, frame: &Frame, _questions: &[String]) -> Result<RawObservation, BackendError> {
        let started = Instant::now();
        let reply = self.call(frame).await?;
        let obs = RawObservation {
            frame_seq: frame.seq,
            text_regions: reply
                .text_regions
                .into_iter()
                .map(|t| TextRegion {
                    quad: t.quad,
                    score: t.confidence,
                    text: Some(t.text),
                })
                .collect(),
            vqa_answers: reply
                .labels
                .into_iter()
                .map(|l| VqaAnswer {
                    question: LABELS_QUESTION.to_string(),
                    answer: l.label,
                    confidence: l.confidence,
                })
                .collect(),
            backend_name: self.name().to_string(),
            inference_ms: started.elapsed().as_secs_f64() * 1000.0,
        };
        obs.validate()?;
        self.ledger.record_success();
        Ok(obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ledger_is_exact() {
        let ledger = CostLedger::default();
        assert_eq!(ledger.total_usd(), Decimal::ZERO);
        for _ in 0..1000 {
            ledger.record_success();
        }
        assert_eq!(ledger.total_usd(), Decimal::ONE);
        assert_eq!(ledger.total_usd().to_string(), "1.000");
    }

    #[test]
    fn million_increments_do_not_drift() {
        let ledger = CostLedger::default();
        for _ in 0..1_000_000 {
            ledger.record_success();
        }
        assert_eq!(ledger.total_usd(), Decimal::from(1000));
        let mut float_total = 0.0f64;
        for _ in 0..1_000_000 {
            float_total += 0.001;
        }
        // binary accumulation would have drifted
        assert_ne!(float_total, 1000.0);
    }
}
