//! Gateway configuration, loaded from a TOML file.
//!
//! ```toml
//! [listen]
//! tcp = "0.0.0.0:7700"
//! ws = "0.0.0.0:7701"
//!
//! [session]
//! heartbeat_interval_ms = 5000
//! session_timeout_ms = 15000
//! reconnect_window_ms = 60000
//!
//! [composer]
//! min_utterance_gap_ms = 2000
//! dedup_window_ms = 5000
//! units = "feet"
//!
//! [backend]
//! name = "stub"
//! script = "corpus/synthetic-walk/stub_script.json"
//!
//! [calibration]
//! focal_length_px = 800.0
//! [calibration.real_heights_m]
//! EXIT_DOOR = 0.19
//! ```

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compose::ScheduleConfig;
use crate::interpret::{Calibration, ImageDims, DEFAULT_OBSTACLE_KEYWORDS};
use crate::perception::{default_questions, REMOTE_API_KEY_ENV};
use crate::types::{SignClass, Units};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ConfigError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ConfigError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ListenConfig {
    pub tcp: Option<SocketAddr>,
    pub ws: Option<SocketAddr>,
    /// Static client assets served under `/app` on the WebSocket listener.
    pub app_dir: Option<PathBuf>,
}

impl Default for ListenConfig {
    fn default() -> Self {
        ListenConfig {
            tcp: Some(([0, 0, 0, 0], 7700).into()),
            ws: Some(([0, 0, 0, 0], 7701).into()),
            app_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub heartbeat_interval_ms: u64,
    pub session_timeout_ms: u64,
    pub reconnect_window_ms: u64,
    /// Upper bound on the frame rate granted in HELLO_ACK.
    pub max_fps: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            heartbeat_interval_ms: 5000,
            session_timeout_ms: 15000,
            reconnect_window_ms: 60000,
            max_fps: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComposerConfig {
    pub min_utterance_gap_ms: u64,
    pub dedup_window_ms: u64,
    pub units: Units,
    pub rewriter_url: Option<String>,
    pub rewriter_timeout_ms: u64,
}

impl Default for ComposerConfig {
    fn default() -> Self {
        ComposerConfig {
            min_utterance_gap_ms: 2000,
            dedup_window_ms: 5000,
            units: Units::Feet,
            rewriter_url: None,
            rewriter_timeout_ms: 300,
        }
    }
}

impl ComposerConfig {
    pub fn schedule(&self) -> ScheduleConfig {
        ScheduleConfig {
            dedup_window_ms: self.dedup_window_ms,
            min_utterance_gap_ms: self.min_utterance_gap_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Stub,
    East,
    Vqa,
    Remote,
}

impl std::str::FromStr for BackendKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "stub" => Ok(BackendKind::Stub),
            "east" => Ok(BackendKind::East),
            "vqa" => Ok(BackendKind::Vqa),
            "remote" => Ok(BackendKind::Remote),
            other => Err(ConfigError::Invalid(format!(
                "unknown backend {other:?} (expected stub, east, vqa or remote)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub name: BackendKind,
    pub timeout_ms: u64,
    pub questions: Vec<String>,
    /// Stub: script file.
    pub script: Option<PathBuf>,
    /// Stub: extra latency per frame.
    pub stub_latency_ms: u64,
    /// East / vqa: inference sidecar base URL.
    pub sidecar_url: Option<String>,
    /// East: read tensors from `{dir}/{seq:04}.json` instead of a sidecar.
    pub east_fixture_dir: Option<PathBuf>,
    /// East: also ask the VQA questions of the sidecar.
    pub east_with_vqa: bool,
    pub score_threshold: f64,
    pub iou_threshold: f64,
    pub remote_url: Option<String>,
    pub remote_api_key: Option<String>,
    pub remote_unit_cost_usd: Decimal,
    pub remote_max_in_flight: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            name: BackendKind::Stub,
            timeout_ms: 2000,
            questions: default_questions(),
            script: None,
            stub_latency_ms: 0,
            sidecar_url: None,
            east_fixture_dir: None,
            east_with_vqa: false,
            score_threshold: 0.8,
            iou_threshold: 0.2,
            remote_url: None,
            remote_api_key: None,
            remote_unit_cost_usd: Decimal::new(1, 3),
            remote_max_in_flight: 4,
        }
    }
}

impl BackendConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub focal_length_px: f64,
    pub real_heights_m: BTreeMap<String, f64>,
    /// Used when a frame's JPEG header cannot be read.
    pub image_width: u32,
    pub image_height: u32,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let cal = Calibration::default();
        CalibrationConfig {
            focal_length_px: cal.focal_length_px,
            real_heights_m: cal
                .real_heights_m
                .iter()
                .map(|(k, v)| (k.code().to_string(), *v))
                .collect(),
            image_width: 640,
            image_height: 480,
        }
    }
}

impl CalibrationConfig {
    pub fn calibration(&self) -> Result<Calibration, ConfigError> {
        let mut heights = BTreeMap::new();
        for (k, v) in &self.real_heights_m {
            let class = SignClass::from_code(k)
                .ok_or_else(|| ConfigError::Invalid(format!("unknown sign class {k:?} in calibration")))?;
            heights.insert(class, *v);
        }
        let cal = Calibration {
            focal_length_px: self.focal_length_px,
            real_heights_m: heights,
        };
        cal.validate().map_err(ConfigError::Invalid)?;
        Ok(cal)
    }

    pub fn fallback_dims(&self) -> ImageDims {
        ImageDims {
            width: self.image_width,
            height: self.image_height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpreterConfig {
    pub lexicon: Option<PathBuf>,
    pub obstacle_keywords: Vec<String>,
}

impl Default for InterpreterConfig {
    fn default() -> Self {
        InterpreterConfig {
            lexicon: None,
            obstacle_keywords: DEFAULT_OBSTACLE_KEYWORDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub listen: ListenConfig,
    pub session: SessionConfig,
    pub composer: ComposerConfig,
    pub backend: BackendConfig,
    pub calibration: CalibrationConfig,
    pub interpreter: InterpreterConfig,
}

impl GatewayConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: GatewayConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, resolves relative file references against its
    /// directory, and applies the remote API key override from the
    /// environment.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        let mut cfg: GatewayConfig = toml::from_str(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        cfg.apply_env();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        fix(&mut self.backend.script);
        fix(&mut self.backend.east_fixture_dir);
        fix(&mut self.interpreter.lexicon);
        fix(&mut self.listen.app_dir);
    }

    pub fn apply_env(&mut self) {
        if let Ok(key) = std::env::var(REMOTE_API_KEY_ENV) {
            if !key.is_empty() {
                self.backend.remote_api_key = Some(key);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let s = &self.session;
        for (name, v) in [
            ("session.heartbeat_interval_ms", s.heartbeat_interval_ms),
            ("session.session_timeout_ms", s.session_timeout_ms),
            ("session.reconnect_window_ms", s.reconnect_window_ms),
            ("composer.min_utterance_gap_ms", self.composer.min_utterance_gap_ms),
            ("composer.dedup_window_ms", self.composer.dedup_window_ms),
            ("composer.rewriter_timeout_ms", self.composer.rewriter_timeout_ms),
            ("backend.timeout_ms", self.backend.timeout_ms),
        ] {
            if v == 0 {
                return bad(format!("{name} must be > 0"));
            }
        }
        if s.session_timeout_ms < 2 * s.heartbeat_interval_ms {
            return bad(format!(
                "session_timeout_ms ({}) must be at least twice heartbeat_interval_ms ({})",
                s.session_timeout_ms, s.heartbeat_interval_ms
            ));
        }
        if !(s.max_fps >= 0.1 && s.max_fps <= 30.0) {
            return bad(format!("session.max_fps {} outside [0.1, 30]", s.max_fps));
        }
        let b = &self.backend;
        for (name, v) in [
            ("score_threshold", b.score_threshold),
            ("iou_threshold", b.iou_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("backend.{name} {v} outside (0, 1)"));
            }
        }
        if b.remote_unit_cost_usd.is_sign_negative() {
            return bad("backend.remote_unit_cost_usd must be >= 0".into());
        }
        self.calibration.calibration()?;
        if self.calibration.image_width == 0 || self.calibration.image_height == 0 {
            return bad("calibration image dimensions must be positive".into());
        }
        Ok(())
    }

    /// Backend-specific requirements, checked when the backend is built.
    pub fn validate_backend(&self) -> Result<(), ConfigError> {
        let b = &self.backend;
        let missing = |what: &str| Err(ConfigError::Invalid(format!("backend {:?} requires {what}", b.name)));
        match b.name {
            BackendKind::Stub => Ok(()),
            BackendKind::Vqa if b.sidecar_url.is_none() => missing("backend.sidecar_url"),
            BackendKind::East if b.sidecar_url.is_none() && b.east_fixture_dir.is_none() => {
                missing("backend.sidecar_url or backend.east_fixture_dir")
            }
            BackendKind::East if b.east_with_vqa && b.sidecar_url.is_none() => missing("backend.sidecar_url"),
            BackendKind::Remote if b.remote_url.is_none() => missing("backend.remote_url"),
            BackendKind::Remote if b.remote_api_key.is_none() => {
                missing(&format!("an API key (backend.remote_api_key or {REMOTE_API_KEY_ENV})"))
            }
            _ => Ok(()),
        }
    }
}
