use std::fmt::Display;

use futures::{Stream, StreamExt};
use tokio::sync::mpsc;
use uuid::Uuid;

use super::Gateway;
use crate::protocol::{validate_frame_payload, ErrorPayload, HelloPayload, Message, MsgType};
use crate::types::Frame;

/// Outbound queue depth per connection.
pub const OUTBOUND_CAPACITY: usize = 64;

/// How a connection ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConnectionEnd {
    /// Client said BYE; the session is gone.
    Bye,
    /// Transport closed or failed; the session is resumable.
    Dropped,
    /// The gateway took the session away (timeout, takeover, shutdown).
    Revoked,
    /// The client broke the protocol; the session is resumable.
    ProtocolViolation(String),
    /// The handshake never completed; no session was created.
    Rejected(String),
}

fn error_body(code: &str, message: impl Into<String>, retryable: bool, frame_seq: Option<u64>) -> Vec<u8> {
    serde_json::to_vec(&ErrorPayload {
        code: code.to_string(),
        message: message.into(),
        retryable,
        frame_seq,
    })
    .expect("error payload serializes")
}

async fn reject(out: &mpsc::Sender<Message>, gw: &Gateway, code: &str, message: String) -> ConnectionEnd {
    let m = Message::new(
        MsgType::Error,
        Uuid::nil(),
        0,
        gw.now_ms(),
        error_body(code, message.clone(), false, None),
    );
    let _ = out.send(m).await;
    ConnectionEnd::Rejected(message)
}

/// Drives one client connection over any transport.
///
/// `inbound` yields decoded messages; `out` feeds the transport writer.
/// The first message must be HELLO. The writer sees the channel close when
/// this returns and the session no longer holds a clone of the sender.
pub async fn handle_connection<S, E>(gw: Gateway, mut inbound: S, out: mpsc::Sender<Message>) -> ConnectionEnd
where
    S: Stream<Item = Result<Message, E>> + Unpin,
    E: Display,
{
    let first = match inbound.next().await {
        None => return ConnectionEnd::Rejected("closed before HELLO".into()),
        Some(Err(e)) => return reject(&out, &gw, "protocol", e.to_string()).await,
        Some(Ok(m)) => m,
    };
    if first.msg_type != MsgType::Hello {
        let msg = format!("expected HELLO, got {}", first.msg_type.name());
        return reject(&out, &gw, "protocol", msg).await;
    }
    let hello = match HelloPayload::parse(&first.payload) {
        Ok(h) => h,
        Err(e) => return reject(&out, &gw, "bad_hello", e.to_string()).await,
    };

    let ack = gw.open_session(&hello);
    let session_id = Uuid::parse_str(&ack.session_id).expect("gateway issues valid ids");
    let Some(token) = gw.attach(session_id, out.clone()) else {
        return reject(&out, &gw, "session", "session unavailable".into()).await;
    };
    let ack_msg = gw.outbound(
        session_id,
        MsgType::HelloAck,
        serde_json::to_vec(&ack).expect("ack serializes"),
    );
    if out.send(ack_msg).await.is_err() {
        gw.detach(session_id, token.conn_id);
        return ConnectionEnd::Dropped;
    }

    let send_error = |code: &str, message: String, retryable: bool, seq: Option<u64>| {
        gw.outbound(session_id, MsgType::Error, error_body(code, message, retryable, seq))
    };

    let end = loop {
        let next = tokio::select! {
            biased;
            _ = token.cancel.cancelled() => break ConnectionEnd::Revoked,
            n = inbound.next() => n,
        };
        let msg = match next {
            None => break ConnectionEnd::Dropped,
            Some(Err(e)) => {
                let reason = e.to_string();
                let _ = out.send(send_error("protocol", reason.clone(), false, None)).await;
                break ConnectionEnd::ProtocolViolation(reason);
            }
            Some(Ok(m)) => m,
        };
        match msg.msg_type {
            MsgType::Frame => {
                gw.count_received();
                if !msg.session_id.is_nil() && msg.session_id != session_id {
                    let e = send_error(
                        "session_mismatch",
                        format!("frame for session {} on session {session_id}", msg.session_id),
                        false,
                        Some(msg.sequence),
                    );
                    let _ = out.send(e).await;
                    continue;
                }
                if let Err(e) = validate_frame_payload(&msg.payload) {
                    gw.count_format_error();
                    let _ = out
                        .send(send_error("bad_frame", e.to_string(), false, Some(msg.sequence)))
                        .await;
                    continue;
                }
                gw.submit_frame(Frame::new(session_id, msg.sequence, msg.timestamp_ms, msg.payload));
            }
            MsgType::Heartbeat => gw.heartbeat(session_id),
            MsgType::Bye => {
                gw.close_session(session_id);
                break ConnectionEnd::Bye;
            }
            other => {
                let reason = format!("unexpected {} from client", other.name());
                let _ = out.send(send_error("protocol", reason.clone(), false, None)).await;
                break ConnectionEnd::ProtocolViolation(reason);
            }
        }
    };
    if end != ConnectionEnd::Bye {
        gw.detach(session_id, token.conn_id);
    }
    tracing::debug!(session = %session_id, end = ?end, "connection finished");
    end
}
