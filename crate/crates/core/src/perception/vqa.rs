use std::time::{Duration, Instant};

use async_trait::async_trait;
use reqwest::multipart::{Form, Part};
use serde::Deserialize;

use super::{http_error, BackendError, PerceptionBackend, RawObservation, VqaAnswer};
use crate::types::Frame;

#[derive(Debug, Deserialize)]
struct VqaReply {
    answer: String,
    confidence: f64,
}

/// Client for the sidecar's `POST /v1/vqa` endpoint.
#[derive(Debug, Clone)]
pub struct VqaClient {
    http: reqwest::Client,
    base_url: String,
    timeout: Duration,
}

impl VqaClient {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        VqaClient {
            http: reqwest::Client::new(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            timeout,
        }
    }

    pub async fn ask(&self, jpeg: &[u8], question: &str) -> Result<VqaAnswer, BackendError> {
        let form = Form::new()
            .part(
                "image",
                Part::bytes(jpeg.to_vec())
                    .file_name("frame.jpg")
                    .mime_str("image/jpeg")
                    .expect("static mime"),
            )
            .text("question", question.to_string());
        let resp = self
            .http
            .post(format!("{}/v1/vqa", self.base_url))
            .timeout(self.timeout)
            .multipart(form)
            .send()
            .await
            .map_err(|e| http_error(e, self.timeout))?;
        if !resp.status().is_success() {
            return Err(BackendError::Unavailable(format!("sidecar returned {}", resp.status())));
        }
        let body = resp.bytes().await.map_err(|e| http_error(e, self.timeout))?;
        let reply: VqaReply =
            serde_json::from_slice(&body).map_err(|e| BackendError::Protocol(format!("vqa reply: {e}")))?;
        if !(0.0..=1.0).contains(&reply.confidence) {
            return Err(BackendError::Protocol(format!(
                "vqa confidence {} outside [0, 1]",
                reply.confidence
            )));
        }
        Ok(VqaAnswer {
            question: question.to_string(),
            answer: reply.answer,
            confidence: reply.confidence,
        })
    }
}

/// ViLT/BLIP-style visual question answering through an inference sidecar.
#[derive(Debug, Clone)]
pub struct VqaBackend {
    client: VqaClient,
}

impl VqaBackend {
    pub fn new(client: VqaClient) -> Self {
        VqaBackend { client }
    }
}

#[async_trait]
impl PerceptionBackend for VqaBackend {
    fn name(&self) -> &str {
        "vqa"
    }

    fn max_in_flight(&self) -> Option<usize> {
        Some(1)
    }

    async fn analyze(&self, frame: &Frame, questions: &[String]) -> Result<RawObservation, BackendError> {
        let started = Instant::now();
        let mut answers = Vec::with_capacity(questions.len());
        for q in questions {
            answers.push(self.client.ask(&frame.jpeg, q).await?);
        }
        Ok(RawObservation {
            frame_seq: frame.seq,
            text_regions: Vec::new(),
            vqa_answers: answers,
            backend_name: self.name().to_string(),
            inference_ms: started.elapsed().as_secs_f64() * 1000.0,
        })
    }
}
