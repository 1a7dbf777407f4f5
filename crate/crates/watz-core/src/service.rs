//! Attestation service: the only component holding the root-of-trust seed
//! and the private attestation key.
//!
//! On real hardware this sits behind a kernel privilege boundary; here the
//! module boundary stands in for it. Nothing in the public surface returns
//! or formats the seed or the private scalar.

use crate::crypto::{self, SigningKeypair, POINT_LEN};
use crate::evidence::Evidence;
use crate::timing::{self, CostCategory, ProtocolMessage};

/// Runtime release number embedded in issued evidence.
pub const CURRENT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ServiceError {
    #[error("root-of-trust seed must be exactly 64 hex characters")]
    InvalidSeed,
}

/// Write-once root-of-trust seed, stand-in for a hardware-fused secret.
pub struct RootOfTrust {
    seed: [u8; 32],
}

impl RootOfTrust {
    pub fn new(seed: [u8; 32]) -> Self {
        Self { seed }
    }

    /// Parses a 64-hex-character seed, as sourced from a file or an
    /// environment variable.
    pub fn from_hex(text: &str) -> Result<Self, ServiceError> {
        let bytes = hex::decode(text.trim()).map_err(|_| ServiceError::InvalidSeed)?;
        let seed: [u8; 32] = bytes.try_into().map_err(|_| ServiceError::InvalidSeed)?;
        Ok(Self::new(seed))
    }
}

impl std::fmt::Debug for RootOfTrust {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("RootOfTrust(..)")
    }
}

/// Holds the attestation key pair derived from the root of trust and
/// issues signed evidence for claims.
pub struct AttestationService {
    keypair: SigningKeypair,
    version: u32,
}

impl AttestationService {
    /// Derives the attestation key pair from the seed. Deterministic:
    /// the same seed always yields the same key pair.
    pub fn new(root: &RootOfTrust, version: u32) -> Self {
        let keypair = crypto::derive_attestation_keypair(&root.seed);
        Self { keypair, version }
    }

    /// Public attestation key, exported as the endorsement value.
    pub fn public_attestation_key(&self) -> [u8; POINT_LEN] {
        *self.keypair.public_point()
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    /// Issues evidence binding `claim` to `anchor` under this device's
    /// attestation key. Deterministic for fixed inputs.
    pub fn issue_evidence(&self, anchor: [u8; 32], claim: [u8; 32]) -> Evidence {
        let mut evidence = Evidence {
            anchor,
            version: self.version,
            claim,
            attestation_public_key: *self.keypair.public_point(),
            signature: [0; 64],
        };
        // Evidence signing is the asymmetric cost of producing msg2.
        evidence.signature = timing::span(
            ProtocolMessage::Msg2,
            CostCategory::AsymmetricCrypto,
            || self.keypair.sign(&evidence.signing_input()),
        );
        log::debug!(
            "issued evidence version={} claim={} anchor={}",
            self.version,
            hex::encode(claim),
            hex::encode(anchor)
        );
        evidence
    }
}

impl std::fmt::Debug for AttestationService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AttestationService")
            .field("public", &hex::encode(self.public_attestation_key()))
            .field("version", &self.version)
            .finish_non_exhaustive()
    }
}
