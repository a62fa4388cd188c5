//! JSON payloads carried inside protocol messages.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Direction, Priority, Units};

const JPEG_SOI: [u8; 2] = [0xFF, 0xD8];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("frame payload is empty")]
    Empty,
    #[error("frame payload is not a JPEG (starts with {0:02X?})")]
    NotJpeg(Vec<u8>),
}

/// Accepts iff the payload is non-empty and opens with the JPEG SOI marker.
pub fn validate_frame_payload(payload: &[u8]) -> Result<(), FormatError> {
    if payload.is_empty() {
        return Err(FormatError::Empty);
    }
    if !payload.starts_with(&JPEG_SOI) {
        return Err(FormatError::NotJpeg(payload[..payload.len().min(4)].to_vec()));
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum PayloadError {
    #[error("malformed payload JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid payload: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloPayload {
    pub client_name: String,
    pub fps_hint: f64,
    pub units: Units,
    #[serde(default)]
    pub resume_session_id: Option<String>,
}

impl HelloPayload {
    pub fn parse(bytes: &[u8]) -> Result<Self, PayloadError> {
        let hello: HelloPayload = serde_json::from_slice(bytes)?;
        if !(0.1..=30.0).contains(&hello.fps_hint) {
            return Err(PayloadError::Invalid(format!(
                "fps_hint {} outside [0.1, 30]",
                hello.fps_hint
            )));
        }
        Ok(hello)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloAckPayload {
    pub session_id: String,
    pub accepted_fps: f64,
    pub resumed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionPayload {
    pub text: String,
    pub priority: u8,
    pub direction: Option<Direction>,
    pub distance_m: Option<f64>,
    pub dedup_key: String,
    pub frame_seq: u64,
}

impl InstructionPayload {
    pub fn parse(bytes: &[u8]) -> Result<Self, PayloadError> {
        let p: InstructionPayload = serde_json::from_slice(bytes)?;
        if p.text.is_empty() {
            return Err(PayloadError::Invalid("empty instruction text".into()));
        }
        Priority::try_from(p.priority).map_err(PayloadError::Invalid)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: String,
    pub message: String,
    pub retryable: bool,
    #[serde(default)]
    pub frame_seq: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jpeg_soi_check() {
        assert!(validate_frame_payload(&[0xFF, 0xD8, 0xFF, 0xE0]).is_ok());
        assert_eq!(validate_frame_payload(&[]), Err(FormatError::Empty));
        assert!(matches!(
            validate_frame_payload(&[0x89, 0x50, 0x4E, 0x47]),
            Err(FormatError::NotJpeg(_))
        ));
        assert!(validate_frame_payload(&[0xFF]).is_err());
    }

    #[test]
    fn hello_fps_bounds() {
        let ok = br#"{"client_name":"t","fps_hint":2,"units":"feet","resume_session_id":null}"#;
        assert!(HelloPayload::parse(ok).is_ok());
        let slow = br#"{"client_name":"t","fps_hint":0.05,"units":"meters"}"#;
        assert!(matches!(HelloPayload::parse(slow), Err(PayloadError::Invalid(_))));
        let fast = br#"{"client_name":"t","fps_hint":31,"units":"meters"}"#;
        assert!(HelloPayload::parse(fast).is_err());
        assert!(HelloPayload::parse(b"{").is_err());
    }

    #[test]
    fn instruction_payload_schema() {
        let p = InstructionPayload {
            text: "There's an exit door 10 feet ahead on your right".into(),
            priority: 1,
            direction: Some(Direction::Right),
            distance_m: Some(3.05),
            dedup_key: "exit_door:right".into(),
            frame_seq: 3,
        };
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains(r#""direction":"right""#));
        assert_eq!(InstructionPayload::parse(json.as_bytes()).unwrap(), p);

        let bad = br#"{"text":"x","priority":3,"direction":null,"distance_m":null,"dedup_key":"k","frame_seq":1}"#;
        assert!(InstructionPayload::parse(bad).is_err());
        let bad_dir = br#"{"text":"x","priority":1,"direction":"up","distance_m":null,"dedup_key":"k","frame_seq":1}"#;
        assert!(InstructionPayload::parse(bad_dir).is_err());
    }
}
