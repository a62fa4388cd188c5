use futures::{SinkExt, StreamExt};
use tokio::io::{AsyncRead, AsyncWrite, DuplexStream};
use tokio_util::codec::Framed;
use uuid::Uuid;

use crate::protocol::{CodecError, HelloAckPayload, HelloPayload, Message, MsgType, WireCodec};
use crate::session::{serve_io, Gateway};
use crate::types::Units;

const LOOPBACK_BUFFER: usize = 1 << 20;

/// Minimal protocol client used by the harness and tests.
pub struct WireClient<T> {
    framed: Framed<T, WireCodec>,
    pub session_id: Uuid,
    seq: u64,
}

pub fn hello_payload(units: Units, fps_hint: f64, resume: Option<Uuid>) -> HelloPayload {
    HelloPayload {
        client_name: "wayfinder-harness".into(),
        fps_hint,
        units,
        resume_session_id: resume.map(|id| id.to_string()),
    }
}

/// In-process pipe to `gw`, served by the same code path as a TCP socket.
pub fn connect_loopback(gw: &Gateway) -> WireClient<DuplexStream> {
    let (client, server) = tokio::io::duplex(LOOPBACK_BUFFER);
    tokio::spawn(serve_io(gw.clone(), server));
    WireClient::new(client)
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("connection closed")]
    Closed,
    #[error("unexpected {0} during handshake: {1}")]
    Handshake(&'static str, String),
    #[error("bad HELLO_ACK: {0}")]
    Ack(#[from] serde_json::Error),
}

impl<T: AsyncRead + AsyncWrite + Unpin> WireClient<T> {
    pub fn new(io: T) -> Self {
        WireClient {
            framed: Framed::new(io, WireCodec),
            session_id: Uuid::nil(),
            seq: 0,
        }
    }

    pub async fn send(&mut self, msg: Message) -> Result<(), ClientError> {
        self.framed.send(msg).await?;
        Ok(())
    }

    pub async fn recv(&mut self) -> Result<Message, ClientError> {
        match self.framed.next().await {
            Some(r) => Ok(r?),
            None => Err(ClientError::Closed),
        }
    }

    /// Sends HELLO and waits for the acknowledgement.
    pub async fn hello(&mut self, hello: &HelloPayload) -> Result<HelloAckPayload, ClientError> {
        self.seq += 1;
        let body = serde_json::to_vec(hello)?;
        self.send(Message::new(MsgType::Hello, Uuid::nil(), self.seq, 0, body))
            .await?;
        let reply = self.recv().await?;
        if reply.msg_type != MsgType::HelloAck {
            return Err(ClientError::Handshake(
                reply.msg_type.name(),
                String::from_utf8_lossy(&reply.payload).into_owned(),
            ));
        }
        let ack: HelloAckPayload = serde_json::from_slice(&reply.payload)?;
        self.session_id = reply.session_id;
        Ok(ack)
    }

    pub async fn send_frame(&mut self, seq: u64, timestamp_ms: u64, jpeg: Vec<u8>) -> Result<(), ClientError> {
        let msg = Message::new(MsgType::Frame, self.session_id, seq, timestamp_ms, jpeg);
        self.send(msg).await
    }

    pub async fn heartbeat(&mut self) -> Result<(), ClientError> {
        self.seq += 1;
        let msg = Message::new(MsgType::Heartbeat, self.session_id, self.seq, 0, Vec::new());
        self.send(msg).await
    }

    pub async fn bye(&mut self) -> Result<(), ClientError> {
        self.seq += 1;
        let msg = Message::new(MsgType::Bye, self.session_id, self.seq, 0, Vec::new());
        self.send(msg).await
    }

    pub fn into_framed(self) -> Framed<T, WireCodec> {
        self.framed
    }
}
