//! Attester-side protocol state machine.
//!
//! Drives one attestation run: emit msg0, appraise msg1, build msg2 around
//! issued evidence, decrypt msg3. The machine is transport-free; callers
//! pump frames. Phases only move forward, and any authentication failure
//! parks the session in `Failed` permanently.

use p256::elliptic_curve::rand_core::{CryptoRng, RngCore};

use crate::crypto::{
    self, CryptoError, SessionKeyPair, SessionKeys, POINT_LEN,
};
use crate::evidence::{compute_anchor, Evidence};
use crate::timing::{self, CostCategory, ProtocolMessage};
use crate::wire::{msg1_signature_input, Msg0Payload, Msg1Payload, Msg2Payload, Msg3Payload};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttesterPhase {
    Started,
    HandshakeDone,
    QuoteSent,
    Completed,
    Failed,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AttesterError {
    /// The configured verifier key is not a valid curve point.
    #[error("expected verifier key is not a valid curve point")]
    InvalidVerifierKey,
    /// msg1 MAC did not verify under the derived MAC key.
    #[error("msg1 MAC mismatch")]
    MacMismatch,
    /// msg1 carried a verifier identity other than the expected one.
    #[error("verifier identity mismatch")]
    IdentityMismatch,
    /// msg1 signature over the session keys did not verify.
    #[error("msg1 signature invalid")]
    SignatureInvalid,
    /// Peer session key was off-curve or otherwise invalid.
    #[error("peer session key rejected: {0}")]
    InvalidPeerPoint(CryptoError),
    /// msg3 failed authenticated decryption.
    #[error("msg3 decryption failed")]
    DecryptionError,
    /// Evidence passed to build_msg2 is bound to a different handshake.
    #[error("evidence anchor does not match this session")]
    AnchorMismatch,
    /// Operation invoked outside its phase.
    #[error("operation invalid in phase {actual:?}")]
    WrongPhase { actual: AttesterPhase },
}

/// One attestation run from the attester's point of view.
#[derive(Debug)]
pub struct AttesterSession {
    phase: AttesterPhase,
    keypair: SessionKeyPair,
    expected_verifier_key: [u8; POINT_LEN],
    peer_g_v: Option<[u8; POINT_LEN]>,
    keys: Option<SessionKeys>,
    anchor: Option<[u8; 32]>,
}

impl AttesterSession {
    /// Opens a session with a fresh ephemeral key pair and returns msg0.
    pub fn start(
        expected_verifier_key: [u8; POINT_LEN],
        rng: &mut (impl CryptoRng + RngCore),
    ) -> Result<(Self, Msg0Payload), AttesterError> {
        let keypair = timing::span(ProtocolMessage::Msg0, CostCategory::KeyGeneration, || {
            SessionKeyPair::generate(rng)
        });
        Self::start_with_keypair(keypair, expected_verifier_key)
    }

    /// Opens a session around a caller-supplied key pair. Lets tests pin
    /// `G_a`; production callers use [`AttesterSession::start`].
    pub fn start_with_keypair(
        keypair: SessionKeyPair,
        expected_verifier_key: [u8; POINT_LEN],
    ) -> Result<(Self, Msg0Payload), AttesterError> {
        crypto::validate_point(&expected_verifier_key)
            .map_err(|_| AttesterError::InvalidVerifierKey)?;
        let msg0 = timing::span(ProtocolMessage::Msg0, CostCategory::MemoryManagement, || {
            Msg0Payload {
                g_a: *keypair.public_point(),
            }
        });
        let session = Self {
            phase: AttesterPhase::Started,
            keypair,
            expected_verifier_key,
            peer_g_v: None,
            keys: None,
            anchor: None,
        };
        Ok((session, msg0))
    }

    /// Appraises msg1: derive session keys, then check MAC, identity and
    /// signature in that order. On success the session holds the keys and
    /// the transport anchor.
    pub fn handle_msg1(&mut self, msg1: &Msg1Payload) -> Result<[u8; 32], AttesterError> {
        if self.phase != AttesterPhase::Started {
            return Err(AttesterError::WrongPhase { actual: self.phase });
        }

        let shared = timing::span(ProtocolMessage::Msg1, CostCategory::KeyGeneration, || {
            self.keypair.shared_secret(&msg1.g_v)
        });
        let shared = match shared {
            Ok(shared) => shared,
            Err(err) => return Err(self.fail(AttesterError::InvalidPeerPoint(err))),
        };
        let keys = timing::span(ProtocolMessage::Msg1, CostCategory::KeyGeneration, || {
            crypto::derive_session_keys(&shared)
        });

        let content = timing::span(ProtocolMessage::Msg1, CostCategory::MemoryManagement, || {
            msg1.content()
        });
        let mac_ok = timing::span(ProtocolMessage::Msg1, CostCategory::SymmetricCrypto, || {
            crypto::cmac(&keys.km, &content) == msg1.mac
        });
        if !mac_ok {
            return Err(self.fail(AttesterError::MacMismatch));
        }

        if msg1.v_identity != self.expected_verifier_key {
            return Err(self.fail(AttesterError::IdentityMismatch));
        }

        let signed = msg1_signature_input(&msg1.g_v, self.keypair.public_point());
        let sig_ok = timing::span(ProtocolMessage::Msg1, CostCategory::AsymmetricCrypto, || {
            crypto::ecdsa_verify(&msg1.v_identity, &signed, &msg1.signature)
        });
        if !sig_ok {
            return Err(self.fail(AttesterError::SignatureInvalid));
        }

        let anchor = compute_anchor(self.keypair.public_point(), &msg1.g_v);
        self.peer_g_v = Some(msg1.g_v);
        self.keys = Some(keys);
        self.anchor = Some(anchor);
        self.phase = AttesterPhase::HandshakeDone;
        Ok(anchor)
    }

    /// Wraps issued evidence into msg2 with its MAC. The evidence must be
    /// bound to this session's anchor.
    pub fn build_msg2(&mut self, evidence: &Evidence) -> Result<Msg2Payload, AttesterError> {
        if self.phase != AttesterPhase::HandshakeDone {
            return Err(AttesterError::WrongPhase { actual: self.phase });
        }
        // Misuse, not an attack: reject without burning the session.
        if Some(evidence.anchor) != self.anchor {
            return Err(AttesterError::AnchorMismatch);
        }
        let keys = self.keys.as_ref().expect("keys set at HandshakeDone");

        let mut msg2 = timing::span(ProtocolMessage::Msg2, CostCategory::MemoryManagement, || {
            Msg2Payload {
                g_a: *self.keypair.public_point(),
                evidence: evidence.to_bytes().to_vec(),
                signature: evidence.signature,
                mac: [0; 16],
            }
        });
        let content = timing::span(ProtocolMessage::Msg2, CostCategory::MemoryManagement, || {
            msg2.content()
        });
        msg2.mac = timing::span(ProtocolMessage::Msg2, CostCategory::SymmetricCrypto, || {
            crypto::cmac(&keys.km, &content)
        });
        self.phase = AttesterPhase::QuoteSent;
        Ok(msg2)
    }

    /// Decrypts the provisioned secret blob from msg3.
    pub fn handle_msg3(&mut self, msg3: &Msg3Payload) -> Result<Vec<u8>, AttesterError> {
        if self.phase != AttesterPhase::QuoteSent {
            return Err(AttesterError::WrongPhase { actual: self.phase });
        }
        let keys = self.keys.as_ref().expect("keys set at HandshakeDone");
        let blob = timing::span(ProtocolMessage::Msg3, CostCategory::SymmetricCrypto, || {
            crypto::aead_decrypt(&keys.ke, &msg3.iv, &msg3.ciphertext)
        });
        match blob {
            Ok(blob) => {
                self.phase = AttesterPhase::Completed;
                Ok(blob)
            }
            Err(_) => Err(self.fail(AttesterError::DecryptionError)),
        }
    }

    pub fn phase(&self) -> AttesterPhase {
        self.phase
    }

    /// This session's public session key, `G_a`.
    pub fn public_session_key(&self) -> &[u8; POINT_LEN] {
        self.keypair.public_point()
    }

    /// Transport anchor, available once the handshake completed.
    pub fn anchor(&self) -> Option<[u8; 32]> {
        self.anchor
    }

    /// Derived session keys, available once the handshake completed.
    pub fn session_keys(&self) -> Option<&SessionKeys> {
        self.keys.as_ref()
    }

    fn fail(&mut self, err: AttesterError) -> AttesterError {
        self.phase = AttesterPhase::Failed;
        err
    }
}
