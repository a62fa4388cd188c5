use std::fmt::Write;

use super::{decode_message, Decoded, MsgType, HEADER_LEN};

const PAYLOAD_PREVIEW: usize = 32;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02X}")).collect::<Vec<_>>().join(" ")
}

/// Renders a captured byte stream as an annotated hex listing, one block
/// per message. Stops at the first protocol error or trailing partial
/// message and says so.
pub fn dump_stream(bytes: &[u8]) -> String {
    let mut out = String::new();
    let mut offset = 0usize;
    let mut index = 0usize;
    while offset < bytes.len() {
        let rest = &bytes[offset..];
        match decode_message(rest) {
            Ok(Decoded::Message { message, consumed }) => {
                let h = &rest[..HEADER_LEN];
                let _ = writeln!(
                    out,
                    "#{index} @{offset:#010x} {} ({consumed} bytes)",
                    message.msg_type.name()
                );
                let _ = writeln!(out, "  {:<45} magic \"WF\"", hex(&h[0..2]));
                let _ = writeln!(out, "  {:<45} version {}", hex(&h[2..3]), h[2]);
                let _ = writeln!(out, "  {:<45} msg_type {}", hex(&h[3..4]), message.msg_type.name());
                let _ = writeln!(out, "  {:<45} session_id {}", hex(&h[4..20]), message.session_id);
                let _ = writeln!(out, "  {:<45} sequence {}", hex(&h[20..28]), message.sequence);
                let _ = writeln!(out, "  {:<45} timestamp_ms {}", hex(&h[28..36]), message.timestamp_ms);
                let _ = writeln!(out, "  {:<45} payload_len {}", hex(&h[36..40]), message.payload.len());
                if !message.payload.is_empty() {
                    let shown = &message.payload[..message.payload.len().min(PAYLOAD_PREVIEW)];
                    let more = message.payload.len() - shown.len();
                    let _ = write!(out, "  payload: {}", hex(shown));
                    if more > 0 {
                        let _ = write!(out, " ... (+{more} bytes)");
                    }
                    let _ = writeln!(out);
                    if message.msg_type != MsgType::Frame {
                        if let Ok(text) = std::str::from_utf8(&message.payload) {
                            let _ = writeln!(out, "  text: {text}");
                        }
                    }
                }
                offset += consumed;
                index += 1;
            }
            Ok(Decoded::NeedMoreBytes) => {
                let _ = writeln!(out, "@{offset:#010x} truncated: {} trailing bytes", rest.len());
                break;
            }
            Err(e) => {
                let _ = writeln!(out, "@{offset:#010x} {e}");
                break;
            }
        }
    }
    let _ = writeln!(out, "{index} message(s), {offset} bytes decoded");
    out
}
