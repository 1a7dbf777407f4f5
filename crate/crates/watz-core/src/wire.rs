//! Bit-exact wire format: a length-prefixed frame envelope over TCP and
//! the four protocol message payloads.
//!
//! Every frame is `"WATZ" || msg_type(1) || payload_len(4, BE) || payload`.
//! Byte-offset tables for all payloads live in `docs/wire-format.md`.

use std::io::{Read, Write};

use crate::crypto::{IV_LEN, KEY_LEN, POINT_LEN, SIGNATURE_LEN, TAG_LEN};

/// Frame magic, first bytes of every frame.
pub const FRAME_MAGIC: [u8; 4] = *b"WATZ";
/// Hard cap on a frame payload; larger lengths are rejected before reading.
pub const MAX_PAYLOAD_LEN: u32 = 16 * 1024 * 1024;
/// Fixed frame header size: magic, type, payload length.
pub const FRAME_HEADER_LEN: usize = 9;

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("bad frame magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unknown message type {0}")]
    UnknownMsgType(u8),
    #[error("payload length {0} exceeds {MAX_PAYLOAD_LEN}")]
    Oversize(u32),
    #[error("stream ended inside a frame")]
    Truncated,
    #[error("malformed {0} payload: {1}")]
    Malformed(&'static str, &'static str),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// The four protocol messages, in exchange order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[repr(u8)]
pub enum MsgType {
    Msg0 = 0,
    Msg1 = 1,
    Msg2 = 2,
    Msg3 = 3,
}

impl TryFrom<u8> for MsgType {
    type Error = WireError;

    fn try_from(value: u8) -> Result<Self, WireError> {
        match value {
            0 => Ok(MsgType::Msg0),
            1 => Ok(MsgType::Msg1),
            2 => Ok(MsgType::Msg2),
            3 => Ok(MsgType::Msg3),
            other => Err(WireError::UnknownMsgType(other)),
        }
    }
}

/// Encodes one frame.
pub fn encode_frame(msg_type: MsgType, payload: &[u8]) -> Result<Vec<u8>, WireError> {
    if payload.len() > MAX_PAYLOAD_LEN as usize {
        return Err(WireError::Oversize(payload.len() as u32));
    }
    let mut frame = Vec::with_capacity(FRAME_HEADER_LEN + payload.len());
    frame.extend_from_slice(&FRAME_MAGIC);
    frame.push(msg_type as u8);
    frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    frame.extend_from_slice(payload);
    Ok(frame)
}

/// Reads exactly one frame from the stream.
pub fn read_frame(reader: &mut impl Read) -> Result<(MsgType, Vec<u8>), WireError> {
    let mut header = [0u8; FRAME_HEADER_LEN];
    read_exact(reader, &mut header)?;
    let magic: [u8; 4] = header[..4].try_into().unwrap();
    if magic != FRAME_MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    let msg_type = MsgType::try_from(header[4])?;
    let len = u32::from_be_bytes(header[5..9].try_into().unwrap());
    if len > MAX_PAYLOAD_LEN {
        return Err(WireError::Oversize(len));
    }
    let mut payload = vec![0u8; len as usize];
    read_exact(reader, &mut payload)?;
    Ok((msg_type, payload))
}

/// Encodes and writes one frame.
pub fn write_frame(
    writer: &mut impl Write,
    msg_type: MsgType,
    payload: &[u8],
) -> Result<(), WireError> {
    let frame = encode_frame(msg_type, payload)?;
    writer.write_all(&frame)?;
    Ok(())
}

fn read_exact(reader: &mut impl Read, buf: &mut [u8]) -> Result<(), WireError> {
    reader.read_exact(buf).map_err(|err| {
        if err.kind() == std::io::ErrorKind::UnexpectedEof {
            WireError::Truncated
        } else {
            WireError::Io(err)
        }
    })
}

/// msg0: the attester's public session key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Msg0Payload {
    pub g_a: [u8; POINT_LEN],
}

impl Msg0Payload {
    pub const LEN: usize = POINT_LEN;

    pub fn encode(&self) -> Vec<u8> {
        self.g_a.to_vec()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() != Self::LEN {
            return Err(WireError::Malformed("msg0", "length must be 65"));
        }
        let g_a = point_field(bytes, "msg0")?;
        Ok(Self { g_a })
    }
}

/// msg1: `G_v || V || SIGN_V(G_v || G_a) || MAC_Km(content)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Msg1Payload {
    pub g_v: [u8; POINT_LEN],
    pub v_identity: [u8; POINT_LEN],
    pub signature: [u8; SIGNATURE_LEN],
    pub mac: [u8; KEY_LEN],
}

impl Msg1Payload {
    pub const LEN: usize = POINT_LEN + POINT_LEN + SIGNATURE_LEN + KEY_LEN;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::LEN);
        out.extend_from_slice(&self.g_v);
        out.extend_from_slice(&self.v_identity);
        out.extend_from_slice(&self.signature);
        out.extend_from_slice(&self.mac);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() != Self::LEN {
            return Err(WireError::Malformed("msg1", "length must be 210"));
        }
        let g_v = point_field(&bytes[..65], "msg1")?;
        let v_identity = point_field(&bytes[65..130], "msg1")?;
        Ok(Self {
            g_v,
            v_identity,
            signature: bytes[130..194].try_into().unwrap(),
            mac: bytes[194..210].try_into().unwrap(),
        })
    }

    /// Bytes covered by the trailing MAC: everything preceding it.
    pub fn content(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::LEN - KEY_LEN);
        out.extend_from_slice(&self.g_v);
        out.extend_from_slice(&self.v_identity);
        out.extend_from_slice(&self.signature);
        out
    }
}

/// Bytes covered by the msg1 signature: both public session keys.
pub fn msg1_signature_input(g_v: &[u8; POINT_LEN], g_a: &[u8; POINT_LEN]) -> [u8; 130] {
    let mut out = [0u8; 130];
    out[..65].copy_from_slice(g_v);
    out[65..].copy_from_slice(g_a);
    out
}

/// msg2: `G_a || evidence_len(4, BE) || evidence || SIGN_A(evidence) || MAC_Km(content)`.
///
/// The evidence region carries its own length prefix so the layout stays
/// self-describing if the evidence format grows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Msg2Payload {
    pub g_a: [u8; POINT_LEN],
    pub evidence: Vec<u8>,
    pub signature: [u8; SIGNATURE_LEN],
    pub mac: [u8; KEY_LEN],
}

impl Msg2Payload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(POINT_LEN + 4 + self.evidence.len() + SIGNATURE_LEN + KEY_LEN);
        out.extend_from_slice(&self.g_a);
        out.extend_from_slice(&(self.evidence.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.evidence);
        out.extend_from_slice(&self.signature);
        out.extend_from_slice(&self.mac);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        const FIXED: usize = POINT_LEN + 4 + SIGNATURE_LEN + KEY_LEN;
        if bytes.len() < FIXED {
            return Err(WireError::Malformed("msg2", "shorter than fixed fields"));
        }
        let g_a = point_field(&bytes[..65], "msg2")?;
        let evidence_len = u32::from_be_bytes(bytes[65..69].try_into().unwrap()) as usize;
        if bytes.len() != FIXED + evidence_len {
            return Err(WireError::Malformed("msg2", "length prefix disagrees with payload"));
        }
        let evidence = bytes[69..69 + evidence_len].to_vec();
        let rest = &bytes[69 + evidence_len..];
        Ok(Self {
            g_a,
            evidence,
            signature: rest[..64].try_into().unwrap(),
            mac: rest[64..80].try_into().unwrap(),
        })
    }

    /// Bytes covered by the trailing MAC: everything preceding it.
    pub fn content(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(POINT_LEN + 4 + self.evidence.len() + SIGNATURE_LEN);
        out.extend_from_slice(&self.g_a);
        out.extend_from_slice(&(self.evidence.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.evidence);
        out.extend_from_slice(&self.signature);
        out
    }
}

/// msg3: `iv || AES-GCM(secret blob)`, ciphertext includes the tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Msg3Payload {
    pub iv: [u8; IV_LEN],
    pub ciphertext: Vec<u8>,
}

impl Msg3Payload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(IV_LEN + self.ciphertext.len());
        out.extend_from_slice(&self.iv);
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < IV_LEN + TAG_LEN {
            return Err(WireError::Malformed("msg3", "too short for iv and tag"));
        }
        Ok(Self {
            iv: bytes[..IV_LEN].try_into().unwrap(),
            ciphertext: bytes[IV_LEN..].to_vec(),
        })
    }
}

fn point_field(bytes: &[u8], msg: &'static str) -> Result<[u8; POINT_LEN], WireError> {
    if bytes[0] != 0x04 {
        return Err(WireError::Malformed(msg, "curve point must be uncompressed SEC1"));
    }
    Ok(bytes.try_into().unwrap())
}
