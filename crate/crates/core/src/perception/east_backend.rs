use std::path::PathBuf;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use reqwest::multipart::{Form, Part};

use super::east::{east_decode, EastTensors};
use super::nms::locality_aware_nms;
use super::{http_error, BackendError, PerceptionBackend, RawObservation, VqaClient};
use crate::types::Frame;

/// Where EAST tensors come from.
#[derive(Debug, Clone)]
pub enum EastSource {
    /// `POST {base}/v1/east` on an inference sidecar.
    Sidecar { base_url: String },
    /// `{dir}/{seq:04}.json` fixture files; a missing file means an empty
    /// score map.
    Fixtures { dir: PathBuf },
}

/// Text localization: remote EAST inference, in-process decode and NMS.
/// Regions carry no text; an optional VQA client answers the configured
/// questions about the same frame.
#[derive(Debug, Clone)]
pub struct EastBackend {
    source: EastSource,
    http: reqwest::Client,
    timeout: Duration,
    score_threshold: f64,
    iou_threshold: f64,
    vqa: Option<VqaClient>,
}

impl EastBackend {
    pub fn new(source: EastSource, timeout: Duration, score_threshold: f64, iou_threshold: f64) -> Self {
        EastBackend {
            source,
            http: reqwest::Client::new(),
            timeout,
            score_threshold,
            iou_threshold,
            vqa: None,
        }
    }

    pub fn with_vqa(mut self, vqa: VqaClient) -> Self {
        self.vqa = Some(vqa);
        self
    }

    async fn tensors(&self, frame: &Frame) -> Result<Option<EastTensors>, BackendError> {
        match &self.source {
            EastSource::Fixtures { dir } => {
                let path = dir.join(format!("{:04}.json", frame.seq));
                match tokio::fs::read(&path).await {
                    Ok(bytes) => serde_json::from_slice(&bytes)
                        .map(Some)
                        .map_err(|e| BackendError::Protocol(format!("{}: {e}", path.display()))),
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                    Err(e) => Err(BackendError::Unavailable(format!("{}: {e}", path.display()))),
                }
            }
            EastSource::Sidecar { base_url } => {
                let form = Form::new().part(
                    "image",
                    Part::bytes(frame.jpeg.to_vec())
                        .file_name("frame.jpg")
                        .mime_str("image/jpeg")
                        .expect("static mime"),
                );
                let resp = self
                    .http
                    .post(format!("{}/v1/east", base_url.trim_end_matches('/')))
                    .timeout(self.timeout)
                    .multipart(form)
                    .send()
                    .await
                    .map_err(|e| http_error(e, self.timeout))?;
                if !resp.status().is_success() {
                    return Err(BackendError::Unavailable(format!("sidecar returned {}", resp.status())));
                }
                let body = resp.bytes().await.map_err(|e| http_error(e, self.timeout))?;
                serde_json::from_slice(&body)
                    .map(Some)
                    .map_err(|e| BackendError::Protocol(format!("east reply: {e}")))
            }
        }
    }
}

#[async_trait]
impl PerceptionBackend for EastBackend {
    fn name(&self) -> &str {
        "east"
    }

    fn max_in_flight(&self) -> Option<usize> {
        Some(1)
    }

    async fn analyze(&self, frame: &Frame, questions: &[String]) -> Result<RawObservation, BackendError> {
        let started = Instant::now();
        let mut obs = RawObservation::empty(frame.seq, self.name());
        if let Some(t) = self.tensors(frame).await? {
            let decoded = east_decode(&t, self.score_threshold).map_err(|e| BackendError::Protocol(e.to_string()))?;
            obs.text_regions = locality_aware_nms(&decoded, self.iou_threshold);
        }
        if let Some(vqa) = &self.vqa {
            for q in questions {
                obs.vqa_answers.push(vqa.ask(&frame.jpeg, q).await?);
            }
        }
        obs.inference_ms = started.elapsed().as_secs_f64() * 1000.0;
        Ok(obs)
    }
}
