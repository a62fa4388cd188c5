//! Binary framing for the client ↔ gateway link.
//!
//! Every protocol message is a fixed 40-byte header followed by
//! `payload_len` bytes of payload:
//!
//! ```text
//! offset  size  field
//!      0     2  magic          0x57 0x46 ("WF")
//!      2     1  version        1
//!      3     1  msg_type       1..=7
//!      4    16  session_id     UUID bytes, all-zero in HELLO
//!     20     8  sequence       u64 big-endian
//!     28     8  timestamp_ms   u64 big-endian, sender wall clock
//!     36     4  payload_len    u32 big-endian, <= 8 MiB
//! ```
//!
//! The same bytes travel over a TCP stream (back to back) and over
//! WebSocket (exactly one protocol message per binary WebSocket message).

mod codec;
mod dump;
mod payload;

pub use codec::{CodecError, FrameDecoder, WireCodec};
pub use dump::dump_stream;
pub use payload::{
    validate_frame_payload, ErrorPayload, FormatError, HelloAckPayload, HelloPayload, InstructionPayload, PayloadError,
};

use bytes::Bytes;
use thiserror::Error;
use uuid::Uuid;

pub const MAGIC: [u8; 2] = [0x57, 0x46];
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 40;
pub const MAX_PAYLOAD_LEN: usize = 8 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Hello = 1,
    HelloAck = 2,
    Frame = 3,
    Instruction = 4,
    Heartbeat = 5,
    Error = 6,
    Bye = 7,
}

impl MsgType {
    pub const ALL: [MsgType; 7] = [
        MsgType::Hello,
        MsgType::HelloAck,
        MsgType::Frame,
        MsgType::Instruction,
        MsgType::Heartbeat,
        MsgType::Error,
        MsgType::Bye,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MsgType::Hello => "HELLO",
            MsgType::HelloAck => "HELLO_ACK",
            MsgType::Frame => "FRAME",
            MsgType::Instruction => "INSTRUCTION",
            MsgType::Heartbeat => "HEARTBEAT",
            MsgType::Error => "ERROR",
            MsgType::Bye => "BYE",
        }
    }
}

impl TryFrom<u8> for MsgType {
    type Error = u8;

    fn try_from(value: u8) -> Result<Self, u8> {
        MsgType::ALL.into_iter().find(|t| *t as u8 == value).ok_or(value)
    }
}

/// Header fields as supplied by the caller; `payload_len` is derived from
/// the payload at encode time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeaderFields {
    pub msg_type: u8,
    pub session_id: Uuid,
    pub sequence: u64,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub msg_type: MsgType,
    pub session_id: Uuid,
    pub sequence: u64,
    pub timestamp_ms: u64,
    pub payload: Bytes,
}

impl Message {
    pub fn new(
        msg_type: MsgType,
        session_id: Uuid,
        sequence: u64,
        timestamp_ms: u64,
        payload: impl Into<Bytes>,
    ) -> Self {
        Message {
            msg_type,
            session_id,
            sequence,
            timestamp_ms,
            payload: payload.into(),
        }
    }

    pub fn header_fields(&self) -> HeaderFields {
        HeaderFields {
            msg_type: self.msg_type as u8,
            session_id: self.session_id,
            sequence: self.sequence,
            timestamp_ms: self.timestamp_ms,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, EncodeError> {
        encode_message(self.header_fields(), &self.payload)
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD_LEN} byte cap")]
    PayloadTooLarge(usize),
    #[error("invalid msg_type {0}")]
    InvalidMsgType(u8),
}

/// Header field that a decode failure is attributed to.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("protocol error in magic: expected 57 46, got {0:02X?}")]
    BadMagic(Vec<u8>),
    #[error("protocol error in version: unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("protocol error in msg_type: unknown type {0}")]
    UnknownMsgType(u8),
    #[error("protocol error in payload_len: {0} exceeds the {MAX_PAYLOAD_LEN} byte cap")]
    PayloadTooLarge(u32),
    #[error("protocol error in framing: {0} trailing bytes after message")]
    TrailingBytes(usize),
}

impl ProtocolError {
    /// Name of the violated header field.
    pub fn field(&self) -> &'static str {
        match self {
            ProtocolError::BadMagic(_) => "magic",
            ProtocolError::UnsupportedVersion(_) => "version",
            ProtocolError::UnknownMsgType(_) => "msg_type",
            ProtocolError::PayloadTooLarge(_) => "payload_len",
            ProtocolError::TrailingBytes(_) => "framing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    Message { message: Message, consumed: usize },
    NeedMoreBytes,
}

pub fn encode_message(fields: HeaderFields, payload: &[u8]) -> Result<Vec<u8>, EncodeError> {
    if MsgType::try_from(fields.msg_type).is_err() {
        return Err(EncodeError::InvalidMsgType(fields.msg_type));
    }
    if payload.len() > MAX_PAYLOAD_LEN {
        return Err(EncodeError::PayloadTooLarge(payload.len()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(fields.msg_type);
    out.extend_from_slice(fields.session_id.as_bytes());
    out.extend_from_slice(&fields.sequence.to_be_bytes());
    out.extend_from_slice(&fields.timestamp_ms.to_be_bytes());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

/// Checks whatever header bytes are present. A short prefix is only
/// rejected when the bytes it does contain already violate the format.
fn check_prefix(buf: &[u8]) -> Result<(), ProtocolError> {
    let magic_len = buf.len().min(2);
    if buf[..magic_len] != MAGIC[..magic_len] {
        return Err(ProtocolError::BadMagic(buf[..magic_len].to_vec()));
    }
    if let Some(&version) = buf.get(2) {
        if version != VERSION {
            return Err(ProtocolError::UnsupportedVersion(version));
        }
    }
    if let Some(&msg_type) = buf.get(3) {
        MsgType::try_from(msg_type).map_err(ProtocolError::UnknownMsgType)?;
    }
    if buf.len() >= HEADER_LEN {
        let len = read_u32(&buf[36..40]);
        if len as usize > MAX_PAYLOAD_LEN {
            return Err(ProtocolError::PayloadTooLarge(len));
        }
    }
    Ok(())
}

fn read_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes(b.try_into().expect("4 bytes"))
}

fn read_u64(b: &[u8]) -> u64 {
    u64::from_be_bytes(b.try_into().expect("8 bytes"))
}

pub fn decode_message(buf: &[u8]) -> Result<Decoded, ProtocolError> {
    check_prefix(buf)?;
    if buf.len() < HEADER_LEN {
        return Ok(Decoded::NeedMoreBytes);
    }
    let payload_len = read_u32(&buf[36..40]) as usize;
    let total = HEADER_LEN + payload_len;
    if buf.len() < total {
        return Ok(Decoded::NeedMoreBytes);
    }
    let msg_type = MsgType::try_from(buf[3]).map_err(ProtocolError::UnknownMsgType)?;
    let session_id = Uuid::from_slice(&buf[4..20]).expect("16 bytes");
    let message = Message {
        msg_type,
        session_id,
        sequence: read_u64(&buf[20..28]),
        timestamp_ms: read_u64(&buf[28..36]),
        payload: Bytes::copy_from_slice(&buf[HEADER_LEN..total]),
    };
    Ok(Decoded::Message {
        message,
        consumed: total,
    })
}

/// Decodes a buffer that must hold exactly one message, as delivered by a
/// WebSocket binary frame.
pub fn decode_exact(buf: &[u8]) -> Result<Option<Message>, ProtocolError> {
    match decode_message(buf)? {
        Decoded::NeedMoreBytes => Ok(None),
        Decoded::Message { message, consumed } if consumed == buf.len() => Ok(Some(message)),
        Decoded::Message { consumed, .. } => Err(ProtocolError::TrailingBytes(buf.len() - consumed)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fields(msg_type: MsgType, sequence: u64) -> HeaderFields {
        HeaderFields {
            msg_type: msg_type as u8,
            session_id: Uuid::from_u128(0x0102_0304_0506_0708_090a_0b0c_0d0e_0f10),
            sequence,
            timestamp_ms: 1_700_000_000_000,
        }
    }

    #[test]
    fn heartbeat_is_bare_header() {
        let bytes = encode_message(fields(MsgType::Heartbeat, 1), &[]).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN);
        assert_eq!(&bytes[36..40], &[0, 0, 0, 0]);
        assert_eq!(&bytes[..4], &[0x57, 0x46, 1, 5]);
    }

    #[test]
    fn sequence_is_big_endian_at_offset_20() {
        let bytes = encode_message(fields(MsgType::Frame, 7), &[0xFF, 0xD8, 0xFF]).unwrap();
        assert_eq!(bytes.len(), 43);
        assert_eq!(&bytes[20..28], &[0, 0, 0, 0, 0, 0, 0, 7]);
        assert_eq!(&bytes[36..40], &[0, 0, 0, 3]);
    }

    #[test]
    fn encode_rejects_bad_type_and_oversize() {
        let mut f = fields(MsgType::Frame, 1);
        f.msg_type = 9;
        assert_eq!(encode_message(f, &[]), Err(EncodeError::InvalidMsgType(9)));
        let big = vec![0u8; MAX_PAYLOAD_LEN + 1];
        assert_eq!(
            encode_message(fields(MsgType::Frame, 1), &big),
            Err(EncodeError::PayloadTooLarge(MAX_PAYLOAD_LEN + 1))
        );
        assert!(encode_message(fields(MsgType::Frame, 1), &big[..MAX_PAYLOAD_LEN]).is_ok());
    }

    #[test]
    fn truncated_header_needs_more() {
        let bytes = encode_message(fields(MsgType::Heartbeat, 3), &[]).unwrap();
        assert_eq!(decode_message(&bytes[..39]), Ok(Decoded::NeedMoreBytes));
        assert_eq!(decode_message(&[]), Ok(Decoded::NeedMoreBytes));
    }

    #[test]
    fn bad_magic_is_reported() {
        let mut bytes = encode_message(fields(MsgType::Heartbeat, 3), &[]).unwrap();
        bytes[0] = 0x58;
        let err = decode_message(&bytes).unwrap_err();
        assert_eq!(err.field(), "magic");
        // the very first byte is already enough to reject
        assert_eq!(decode_message(&bytes[..1]).unwrap_err().field(), "magic");
    }

    #[test]
    fn version_type_and_length_violations() {
        let good = encode_message(fields(MsgType::Heartbeat, 3), &[]).unwrap();

        let mut v = good.clone();
        v[2] = 2;
        assert_eq!(decode_message(&v[..3]), Err(ProtocolError::UnsupportedVersion(2)));

        let mut t = good.clone();
        t[3] = 0;
        assert_eq!(decode_message(&t[..4]), Err(ProtocolError::UnknownMsgType(0)));

        let mut l = good.clone();
        l[36..40].copy_from_slice(&((MAX_PAYLOAD_LEN as u32) + 1).to_be_bytes());
        assert_eq!(decode_message(&l).unwrap_err().field(), "payload_len");
    }

    #[test]
    fn decode_consumes_exactly_one_message() {
        let mut bytes = encode_message(fields(MsgType::Frame, 1), &[0xFF, 0xD8]).unwrap();
        bytes.extend(encode_message(fields(MsgType::Bye, 2), &[]).unwrap());
        match decode_message(&bytes).unwrap() {
            Decoded::Message { message, consumed } => {
                assert_eq!(consumed, 42);
                assert_eq!(message.msg_type, MsgType::Frame);
                assert_eq!(&message.payload[..], &[0xFF, 0xD8]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(decode_exact(&bytes), Err(ProtocolError::TrailingBytes(40)));
    }
}
