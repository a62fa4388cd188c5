use bytes::{Buf, BytesMut};
use tokio_util::codec::{Decoder, Encoder};

use super::{decode_message, Decoded, EncodeError, Message, ProtocolError};

/// Incremental decoder for a byte stream. Bytes may be pushed in arbitrary
/// pieces; complete messages are yielded in order.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: BytesMut,
    failed: Option<ProtocolError>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Next complete message, `Ok(None)` if more bytes are required.
    ///
    /// After an error the decoder stays failed; the connection must be closed.
    pub fn next_message(&mut self) -> Result<Option<Message>, ProtocolError> {
        if let Some(e) = &self.failed {
            return Err(e.clone());
        }
        match decode_message(&self.buf) {
            Ok(Decoded::Message { message, consumed }) => {
                self.buf.advance(consumed);
                Ok(Some(message))
            }
            Ok(Decoded::NeedMoreBytes) => Ok(None),
            Err(e) => {
                self.failed = Some(e.clone());
                Err(e)
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `tokio_util` codec for stream transports.
#[derive(Debug, Default, Clone, Copy)]
pub struct WireCodec;

impl Decoder for WireCodec {
    type Item = Message;
    type Error = CodecError;

    fn decode(&mut self, src: &mut BytesMut) -> Result<Option<Message>, CodecError> {
        match decode_message(src)? {
            Decoded::Message { message, consumed } => {
                src.advance(consumed);
                Ok(Some(message))
            }
            Decoded::NeedMoreBytes => Ok(None),
        }
    }
}

impl Encoder<Message> for WireCodec {
    type Error = CodecError;

    fn encode(&mut self, item: Message, dst: &mut BytesMut) -> Result<(), CodecError> {
        dst.extend_from_slice(&item.encode()?);
        Ok(())
    }
}
