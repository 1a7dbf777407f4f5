//! Signed evidence record: the attester's proof of what it is running.
//!
//! Layout (197 bytes):
//!
//! | offset | len | field                   |
//! |--------|-----|-------------------------|
//! |      0 |  32 | anchor                  |
//! |     32 |   4 | version (BE)            |
//! |     36 |  32 | claim (bytecode hash)   |
//! |     68 |  65 | attestation public key  |
//! |    133 |  64 | signature over [0, 133) |
//!
//! The record stays in clear on the wire; only its signature protects it.

use crate::crypto::{self, POINT_LEN, SIGNATURE_LEN};

/// Serialized evidence length.
pub const EVIDENCE_LEN: usize = 197;
/// Length of the region covered by the evidence signature.
pub const SIGNED_REGION_LEN: usize = 133;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvidenceError {
    #[error("malformed evidence: expected {EVIDENCE_LEN} bytes, got {0}")]
    Malformed(usize),
    #[error("evidence hex form is invalid")]
    BadHex,
}

/// Signed claim record issued by the attestation service.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evidence {
    /// Binds the evidence to one handshake: `SHA-256(G_a || G_v)`.
    pub anchor: [u8; 32],
    /// Runtime release number, lets verifiers exclude outdated systems.
    pub version: u32,
    /// SHA-256 of the Wasm bytecode as loaded.
    pub claim: [u8; 32],
    /// Public half of the device attestation key pair.
    pub attestation_public_key: [u8; POINT_LEN],
    /// ECDSA signature over the four preceding fields.
    pub signature: [u8; SIGNATURE_LEN],
}

impl Evidence {
    pub fn to_bytes(&self) -> [u8; EVIDENCE_LEN] {
        let mut out = [0u8; EVIDENCE_LEN];
        out[..32].copy_from_slice(&self.anchor);
        out[32..36].copy_from_slice(&self.version.to_be_bytes());
        out[36..68].copy_from_slice(&self.claim);
        out[68..133].copy_from_slice(&self.attestation_public_key);
        out[133..].copy_from_slice(&self.signature);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EvidenceError> {
        if bytes.len() != EVIDENCE_LEN {
            return Err(EvidenceError::Malformed(bytes.len()));
        }
        Ok(Self {
            anchor: bytes[..32].try_into().unwrap(),
            version: u32::from_be_bytes(bytes[32..36].try_into().unwrap()),
            claim: bytes[36..68].try_into().unwrap(),
            attestation_public_key: bytes[68..133].try_into().unwrap(),
            signature: bytes[133..].try_into().unwrap(),
        })
    }

    /// The signed fields in serialized order, without the signature.
    pub fn signing_input(&self) -> [u8; SIGNED_REGION_LEN] {
        let bytes = self.to_bytes();
        bytes[..SIGNED_REGION_LEN].try_into().unwrap()
    }

    /// Checks the signature against the embedded attestation public key.
    pub fn verify_signature(&self) -> bool {
        crypto::ecdsa_verify(
            &self.attestation_public_key,
            &self.signing_input(),
            &self.signature,
        )
    }

    /// Lowercase hex text form, used by the CLI.
    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(text: &str) -> Result<Self, EvidenceError> {
        let bytes = hex::decode(text.trim()).map_err(|_| EvidenceError::BadHex)?;
        Self::from_bytes(&bytes)
    }
}

/// Signed prefix of a serialized evidence record.
pub fn signed_region(serialized: &[u8]) -> Result<&[u8], EvidenceError> {
    if serialized.len() != EVIDENCE_LEN {
        return Err(EvidenceError::Malformed(serialized.len()));
    }
    Ok(&serialized[..SIGNED_REGION_LEN])
}

/// Transport anchor: `SHA-256(G_a || G_v)`, in that order.
pub fn compute_anchor(g_a: &[u8; POINT_LEN], g_v: &[u8; POINT_LEN]) -> [u8; 32] {
    let mut input = [0u8; 2 * POINT_LEN];
    input[..POINT_LEN].copy_from_slice(g_a);
    input[POINT_LEN..].copy_from_slice(g_v);
    crypto::sha256(&input)
}
