//! Wire codec for the frame transport: every message is a 4-byte
//! little-endian payload length followed by the payload bytes. A session
//! opens with a two-byte handshake naming the protocol version and how
//! frame payloads are encoded.

use alloc::vec::Vec;
use core::fmt;

use crate::imaging::{Frame, ImagingError};

pub const LENGTH_HEADER_BYTES: usize = 4;
/// A header announcing more than this is treated as corruption, not a
/// frame to buffer.
pub const MAX_PAYLOAD_BYTES: usize = 16 * 1024 * 1024;
pub const PROTOCOL_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    EmptyPayload,
    PayloadTooLarge { got: usize, max: usize },
    /// The stream ended inside a header or a payload.
    Truncated { needed: usize, have: usize },
    BadVersion(u8),
    BadFormat(u8),
    BadRawPayload(ImagingError),
    RawPayloadShape { expected: usize, got: usize },
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolError::EmptyPayload => write!(f, "zero-length payload"),
            ProtocolError::PayloadTooLarge { got, max } => {
                write!(f, "payload of {got} bytes exceeds the {max} byte cap")
            }
            ProtocolError::Truncated { needed, have } => {
                write!(f, "stream ended mid-message: {have} of {needed} bytes")
            }
            ProtocolError::BadVersion(v) => write!(f, "unsupported protocol version {v}"),
            ProtocolError::BadFormat(b) => write!(f, "unknown payload format byte {b}"),
            ProtocolError::BadRawPayload(e) => write!(f, "raw frame payload: {e}"),
            ProtocolError::RawPayloadShape { expected, got } => {
                write!(f, "raw frame payload length {got}, dimensions say {expected}")
            }
        }
    }
}

impl core::error::Error for ProtocolError {}

/// How frame payloads are encoded on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadFormat {
    Png,
    RawRgb,
}

impl PayloadFormat {
    pub fn byte(self) -> u8 {
        match self {
            PayloadFormat::Png => 0,
            PayloadFormat::RawRgb => 1,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self, ProtocolError> {
        match b {
            0 => Ok(PayloadFormat::Png),
            1 => Ok(PayloadFormat::RawRgb),
            other => Err(ProtocolError::BadFormat(other)),
        }
    }
}

/// The two bytes a server sends when a client connects.
pub fn handshake_bytes(format: PayloadFormat) -> [u8; 2] {
    [PROTOCOL_VERSION, format.byte()]
}

pub fn parse_handshake(bytes: [u8; 2]) -> Result<PayloadFormat, ProtocolError> {
    if bytes[0] != PROTOCOL_VERSION {
        return Err(ProtocolError::BadVersion(bytes[0]));
    }
    PayloadFormat::from_byte(bytes[1])
}

/// Frame a payload for the wire: 4-byte little-endian length, then the
/// payload verbatim.
pub fn encode_message(payload: &[u8]) -> Result<Vec<u8>, ProtocolError> {
    if payload.is_empty() {
        return Err(ProtocolError::EmptyPayload);
    }
    if payload.len() > MAX_PAYLOAD_BYTES {
        return Err(ProtocolError::PayloadTooLarge { got: payload.len(), max: MAX_PAYLOAD_BYTES });
    }
    let mut out = Vec::with_capacity(LENGTH_HEADER_BYTES + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

/// Incremental decoder: feed byte chunks exactly as the transport
/// delivers them, pull out complete payloads. Decoding never depends on
/// where the chunk boundaries fall.
#[derive(Debug, Default)]
pub struct StreamDecoder {
    buf: Vec<u8>,
    read: usize,
}

impl StreamDecoder {
    pub fn new() -> Self {
        StreamDecoder::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        // reclaim consumed space once it dominates the buffer
        if self.read > 4096 && self.read * 2 > self.buf.len() {
            self.buf.drain(..self.read);
            self.read = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    fn pending(&self) -> &[u8] {
        &self.buf[self.read..]
    }

    /// Next complete payload, or None until more bytes arrive. A header
    /// announcing a zero-length or oversized payload is an error.
    pub fn next_message(&mut self) -> Result<Option<Vec<u8>>, ProtocolError> {
        let pending = self.pending();
        if pending.len() < LENGTH_HEADER_BYTES {
            return Ok(None);
        }
        let len = u32::from_le_bytes(pending[..LENGTH_HEADER_BYTES].try_into().unwrap()) as usize;
        if len == 0 {
            return Err(ProtocolError::EmptyPayload);
        }
        if len > MAX_PAYLOAD_BYTES {
            return Err(ProtocolError::PayloadTooLarge { got: len, max: MAX_PAYLOAD_BYTES });
        }
        if pending.len() < LENGTH_HEADER_BYTES + len {
            return Ok(None);
        }
        let start = self.read + LENGTH_HEADER_BYTES;
        let payload = self.buf[start..start + len].to_vec();
        self.read = start + len;
        if self.read == self.buf.len() {
            self.buf.clear();
            self.read = 0;
        }
        Ok(Some(payload))
    }

    /// How many bytes are sitting undecoded (a partial message).
    pub fn buffered(&self) -> usize {
        self.pending().len()
    }

    /// Declare end of stream: an error if a message was cut off.
    pub fn finish(self) -> Result<(), ProtocolError> {
        let pending = self.pending();
        if pending.is_empty() {
            return Ok(());
        }
        let needed = if pending.len() < LENGTH_HEADER_BYTES {
            LENGTH_HEADER_BYTES
        } else {
            let len =
                u32::from_le_bytes(pending[..LENGTH_HEADER_BYTES].try_into().unwrap()) as usize;
            LENGTH_HEADER_BYTES + len
        };
        Err(ProtocolError::Truncated { needed, have: pending.len() })
    }
}

/// Decode a complete byte stream into its payloads; Truncated if it ends
/// mid-message.
pub fn decode_stream(bytes: &[u8]) -> Result<Vec<Vec<u8>>, ProtocolError> {
    let mut dec = StreamDecoder::new();
    dec.push(bytes);
    let mut out = Vec::new();
    while let Some(payload) = dec.next_message()? {
        out.push(payload);
    }
    dec.finish()?;
    Ok(out)
}

/// Raw frame payload: width and height as little-endian u32, then
/// row-major RGB bytes.
pub fn encode_raw_rgb(frame: &Frame) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + frame.pixels.len());
    out.extend_from_slice(&(frame.width as u32).to_le_bytes());
    out.extend_from_slice(&(frame.height as u32).to_le_bytes());
    out.extend_from_slice(&frame.pixels);
    out
}

/// Rebuild a frame from a raw payload; the receiver stamps the time.
pub fn decode_raw_rgb(payload: &[u8], timestamp_ms: u64) -> Result<Frame, ProtocolError> {
    if payload.len() < 8 {
        return Err(ProtocolError::RawPayloadShape { expected: 8, got: payload.len() });
    }
    let width = u32::from_le_bytes(payload[..4].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(payload[4..8].try_into().unwrap()) as usize;
    let expected = 8 + width * height * 3;
    if payload.len() != expected {
        return Err(ProtocolError::RawPayloadShape { expected, got: payload.len() });
    }
    Frame::new(width, height, payload[8..].to_vec(), timestamp_ms)
        .map_err(ProtocolError::BadRawPayload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn header_is_little_endian_length() {
        let msg = encode_message(b"hello").unwrap();
        assert_eq!(&msg[..4], &[0x05, 0x00, 0x00, 0x00]);
        assert_eq!(&msg[4..], b"hello");
    }

    #[test]
    fn empty_payload_is_rejected() {
        assert_eq!(encode_message(b""), Err(ProtocolError::EmptyPayload));
    }

    #[test]
    fn round_trips_random_payloads() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let mut joined = Vec::new();
        let mut sent = Vec::new();
        for _ in 0..50 {
            let n = rng.gen_range(1..2000);
            let payload: Vec<u8> = (0..n).map(|_| rng.gen()).collect();
            joined.extend_from_slice(&encode_message(&payload).unwrap());
            sent.push(payload);
        }
        assert_eq!(decode_stream(&joined).unwrap(), sent);
    }

    #[test]
    fn decoding_ignores_chunk_boundaries() {
        let a = encode_message(b"first").unwrap();
        let b = encode_message(&[7u8; 300]).unwrap();
        let mut joined = a.clone();
        joined.extend_from_slice(&b);
        for cut in 0..=joined.len() {
            let mut dec = StreamDecoder::new();
            dec.push(&joined[..cut]);
            let mut got = Vec::new();
            while let Some(p) = dec.next_message().unwrap() {
                got.push(p);
            }
            dec.push(&joined[cut..]);
            while let Some(p) = dec.next_message().unwrap() {
                got.push(p);
            }
            assert_eq!(got.len(), 2, "cut at {cut}");
            assert_eq!(got[0], b"first");
            assert_eq!(got[1], vec![7u8; 300]);
            assert_eq!(dec.finish(), Ok(()));
        }
    }

    #[test]
    fn truncation_is_an_error() {
        // header alone
        assert_eq!(
            decode_stream(&[10, 0, 0, 0]),
            Err(ProtocolError::Truncated { needed: 14, have: 4 })
        );
        // partial header
        assert_eq!(
            decode_stream(&[10, 0]),
            Err(ProtocolError::Truncated { needed: 4, have: 2 })
        );
        // payload cut short
        let mut bytes = encode_message(b"abcdef").unwrap();
        bytes.pop();
        assert!(matches!(decode_stream(&bytes), Err(ProtocolError::Truncated { .. })));
    }

    #[test]
    fn corrupt_headers_are_errors_not_buffers() {
        assert_eq!(decode_stream(&[0, 0, 0, 0, 1]), Err(ProtocolError::EmptyPayload));
        let huge = (MAX_PAYLOAD_BYTES as u32 + 1).to_le_bytes();
        assert!(matches!(
            decode_stream(&huge),
            Err(ProtocolError::PayloadTooLarge { .. })
        ));
    }

    #[test]
    fn handshake_round_trips_and_rejects_junk() {
        for format in [PayloadFormat::Png, PayloadFormat::RawRgb] {
            assert_eq!(parse_handshake(handshake_bytes(format)), Ok(format));
        }
        assert_eq!(parse_handshake([2, 0]), Err(ProtocolError::BadVersion(2)));
        assert_eq!(parse_handshake([1, 9]), Err(ProtocolError::BadFormat(9)));
    }

    #[test]
    fn raw_rgb_payload_round_trips() {
        let frame = Frame::filled(20, 14, [9, 120, 200], 777);
        let payload = encode_raw_rgb(&frame);
        let back = decode_raw_rgb(&payload, 777).unwrap();
        assert_eq!(back, frame);

        let mut bad = payload.clone();
        bad.pop();
        assert!(matches!(
            decode_raw_rgb(&bad, 0),
            Err(ProtocolError::RawPayloadShape { .. })
        ));
    }

    #[test]
    fn long_sessions_reclaim_buffer_space() {
        let msg = encode_message(&[3u8; 1000]).unwrap();
        let mut dec = StreamDecoder::new();
        for _ in 0..100 {
            dec.push(&msg);
            assert_eq!(dec.next_message().unwrap().unwrap(), vec![3u8; 1000]);
        }
        assert_eq!(dec.buffered(), 0);
        // consumed space does not accumulate unboundedly
        assert!(dec.buf.len() < 3 * msg.len(), "buffer kept {} bytes", dec.buf.len());
        assert_eq!(dec.finish(), Ok(()));
    }
}
