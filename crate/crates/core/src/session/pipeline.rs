use std::io::Cursor;
use std::sync::Arc;
use std::time::Duration;

use crate::compose::{HttpRewriter, Rewriter, ScheduleConfig};
use crate::config::{BackendKind, ConfigError, GatewayConfig};
use crate::interpret::{ImageDims, Interpreter, Lexicon};
use crate::perception::{
    CostLedger, EastBackend, EastSource, Limited, PerceptionBackend, RemoteBackend, StubBackend, VqaBackend, VqaClient,
};

/// Read-only processing chain shared by every session.
pub struct Pipeline {
    pub backend: Arc<dyn PerceptionBackend>,
    pub questions: Vec<String>,
    pub backend_timeout: Duration,
    pub interpreter: Interpreter,
    pub fallback_dims: ImageDims,
    pub schedule: ScheduleConfig,
    pub rewriter: Option<Arc<dyn Rewriter>>,
}

impl Pipeline {
    /// Wraps `backend` in its concurrency limit and takes everything else
    /// from `cfg`.
    pub fn new(backend: Arc<dyn PerceptionBackend>, cfg: &GatewayConfig) -> Result<Self, ConfigError> {
        let lexicon = match &cfg.interpreter.lexicon {
            Some(path) => Lexicon::load(path)?,
            None => Lexicon::default(),
        };
        let interpreter = Interpreter::new(
            lexicon,
            cfg.calibration.calibration()?,
            cfg.interpreter.obstacle_keywords.clone(),
        );
        let rewriter = cfg.composer.rewriter_url.as_deref().map(|url| {
            Arc::new(HttpRewriter::new(
                url,
                Duration::from_millis(cfg.composer.rewriter_timeout_ms),
            )) as Arc<dyn Rewriter>
        });
        Ok(Pipeline {
            backend: Arc::new(Limited::new(backend)),
            questions: cfg.backend.questions.clone(),
            backend_timeout: cfg.backend.timeout(),
            interpreter,
            fallback_dims: cfg.calibration.fallback_dims(),
            schedule: cfg.composer.schedule(),
            rewriter,
        })
    }

    pub fn with_rewriter(mut self, rewriter: Arc<dyn Rewriter>) -> Self {
        self.rewriter = Some(rewriter);
        self
    }
}

/// Constructs the configured backend. The ledger is only used by the
/// remote backend.
pub fn build_backend(cfg: &GatewayConfig, ledger: Arc<CostLedger>) -> Result<Arc<dyn PerceptionBackend>, ConfigError> {
    cfg.validate_backend()?;
    let b = &cfg.backend;
    let timeout = b.timeout();
    Ok(match b.name {
        BackendKind::Stub => {
            let stub = match &b.script {
                Some(path) => StubBackend::load(path)?,
                None => StubBackend::empty(),
            };
            if b.stub_latency_ms > 0 {
                Arc::new(stub.with_latency(Duration::from_millis(b.stub_latency_ms)))
            } else {
                Arc::new(stub)
            }
        }
        BackendKind::East => {
            let source = match (&b.east_fixture_dir, &b.sidecar_url) {
                (Some(dir), _) => EastSource::Fixtures { dir: dir.clone() },
                (None, Some(url)) => EastSource::Sidecar { base_url: url.clone() },
                (None, None) => unreachable!("checked by validate_backend"),
            };
            let mut east = EastBackend::new(source, timeout, b.score_threshold, b.iou_threshold);
            if b.east_with_vqa {
                let url = b.sidecar_url.as_deref().expect("checked by validate_backend");
                east = east.with_vqa(VqaClient::new(url, timeout));
            }
            Arc::new(east)
        }
        BackendKind::Vqa => {
            let url = b.sidecar_url.as_deref().expect("checked by validate_backend");
            Arc::new(VqaBackend::new(VqaClient::new(url, timeout)))
        }
        BackendKind::Remote => {
            let url = b.remote_url.as_deref().expect("checked by validate_backend");
            let key = b.remote_api_key.as_deref().expect("checked by validate_backend");
            Arc::new(RemoteBackend::new(url, key, timeout, ledger).with_max_in_flight(b.remote_max_in_flight))
        }
    })
}

/// Image size from the JPEG header without decoding pixels.
pub fn jpeg_dims(jpeg: &[u8]) -> Option<ImageDims> {
    let reader = image::ImageReader::with_format(Cursor::new(jpeg), image::ImageFormat::Jpeg);
    let (width, height) = reader.into_dimensions().ok()?;
    Some(ImageDims { width, height })
}
