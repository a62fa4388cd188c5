//! Domain types shared across the gateway.

use std::fmt;
use std::time::Instant;

use bytes::Bytes;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

/// One captured camera image as received from a client.
#[derive(Debug, Clone)]
pub struct Frame {
    pub session_id: Uuid,
    pub seq: u64,
    /// Client wall clock at capture.
    pub timestamp_ms: u64,
    pub jpeg: Bytes,
    pub received_at: Instant,
}

impl Frame {
    pub fn new(session_id: Uuid, seq: u64, timestamp_ms: u64, jpeg: impl Into<Bytes>) -> Self {
        Frame {
            session_id,
            seq,
            timestamp_ms,
            jpeg: jpeg.into(),
            received_at: Instant::now(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Ahead,
    Right,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Ahead => "ahead",
            Direction::Right => "right",
        }
    }

    pub const ALL: [Direction; 3] = [Direction::Left, Direction::Ahead, Direction::Right];
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SignClass {
    ExitDoor,
    Stairs,
    Elevator,
    Restroom,
    Door,
    Obstacle,
    UnknownSign,
}

impl SignClass {
    pub const ALL: [SignClass; 7] = [
        SignClass::ExitDoor,
        SignClass::Stairs,
        SignClass::Elevator,
        SignClass::Restroom,
        SignClass::Door,
        SignClass::Obstacle,
        SignClass::UnknownSign,
    ];

    /// Upper-case identifier used in config and data files.
    pub fn code(self) -> &'static str {
        match self {
            SignClass::ExitDoor => "EXIT_DOOR",
            SignClass::Stairs => "STAIRS",
            SignClass::Elevator => "ELEVATOR",
            SignClass::Restroom => "RESTROOM",
            SignClass::Door => "DOOR",
            SignClass::Obstacle => "OBSTACLE",
            SignClass::UnknownSign => "UNKNOWN_SIGN",
        }
    }

    pub fn from_code(code: &str) -> Option<SignClass> {
        SignClass::ALL.into_iter().find(|c| c.code() == code)
    }

    /// Stairs and obstacles are the hazard classes.
    pub fn is_hazard(self) -> bool {
        matches!(self, SignClass::Stairs | SignClass::Obstacle)
    }

    /// Spoken noun phrase.
    pub fn phrase(self) -> &'static str {
        match self {
            SignClass::ExitDoor => "exit door",
            SignClass::Stairs => "stairs",
            SignClass::Elevator => "elevator",
            SignClass::Restroom => "restroom",
            SignClass::Door => "door",
            SignClass::Obstacle => "obstacle",
            SignClass::UnknownSign => "sign",
        }
    }
}

impl fmt::Display for SignClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Feet,
    Meters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Priority {
    Info = 0,
    Guidance = 1,
    Caution = 2,
}

impl From<Priority> for u8 {
    fn from(p: Priority) -> u8 {
        p as u8
    }
}

impl TryFrom<u8> for Priority {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(Priority::Info),
            1 => Ok(Priority::Guidance),
            2 => Ok(Priority::Caution),
            other => Err(format!("priority {other} not in 0..=2")),
        }
    }
}
