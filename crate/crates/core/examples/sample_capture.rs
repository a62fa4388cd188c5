//! Writes a short client/server exchange as raw wire bytes, for trying out
//! `wayfinder protocol-dump`.
//!
//! `cargo run -p wayfinder-core --example sample_capture -- capture.bin`

use uuid::Uuid;
use wayfinder_core::compose::compose;
use wayfinder_core::interpret::NavCue;
use wayfinder_core::protocol::{HelloAckPayload, HelloPayload, Message, MsgType};
use wayfinder_core::{Direction, SignClass, Units};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "capture.bin".into());
    let id = Uuid::parse_str("6f1c2a8e-3b4d-4e5f-9a0b-1c2d3e4f5a6b")?;
    let t0 = 1_760_000_000_000u64;

    let hello = HelloPayload {
        client_name: "demo".into(),
        fps_hint: 2.0,
        units: Units::Feet,
        resume_session_id: None,
    };
    let ack = HelloAckPayload {
        session_id: id.to_string(),
        accepted_fps: 2.0,
        resumed: false,
    };
    let jpeg = vec![0xFF, 0xD8, 0xFF, 0xE0, 0x00, 0x10, 0x4A, 0x46, 0x49, 0x46, 0x00, 0x01];
    let cue = NavCue::new(SignClass::ExitDoor, Direction::Right, Some(3.04), 1.0);
    let instruction = compose(&[cue], Units::Feet, 1).remove(0).to_payload();

    let msgs = [
        Message::new(MsgType::Hello, Uuid::nil(), 0, t0, serde_json::to_vec(&hello)?),
        Message::new(MsgType::HelloAck, id, 1, t0 + 2, serde_json::to_vec(&ack)?),
        Message::new(MsgType::Frame, id, 1, t0 + 10, jpeg),
        Message::new(MsgType::Instruction, id, 2, t0 + 45, serde_json::to_vec(&instruction)?),
        Message::new(MsgType::Heartbeat, id, 2, t0 + 5000, Vec::new()),
        Message::new(MsgType::Bye, id, 3, t0 + 6000, Vec::new()),
    ];
    let mut bytes = Vec::new();
    for m in &msgs {
        bytes.extend(m.encode()?);
    }
    std::fs::write(&out, &bytes)?;
    println!("wrote {} messages, {} bytes to {out}", msgs.len(), bytes.len());
    Ok(())
}
