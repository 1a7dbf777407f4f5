//! Verifier-side state machine, appraisal policy and TCP serve loop.
//!
//! Appraisal runs a fixed check order so a doubly-faulty msg2 always
//! reports the first failing check; rejection reasons are stable codes
//! that tests and operators can pin. The secret blob is only ever
//! encrypted and sent after an `accepted` verdict.

use std::collections::HashSet;
use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;

use p256::elliptic_curve::rand_core::{CryptoRng, RngCore};

use crate::crypto::{
    self, SessionKeyPair, SessionKeys, SigningKeypair, IV_LEN, POINT_LEN,
};
use crate::evidence::{compute_anchor, Evidence};
use crate::timing::{self, CostCategory, ProtocolMessage};
use crate::wire::{
    self, msg1_signature_input, Msg0Payload, Msg1Payload, Msg2Payload, Msg3Payload, MsgType,
};

/// Room a msg3 needs besides the blob itself: iv plus GCM tag.
pub const MSG3_OVERHEAD: usize = IV_LEN + crypto::TAG_LEN;
/// Largest secret blob that still fits a single msg3 frame.
pub const MAX_SECRET_BLOB_LEN: usize = wire::MAX_PAYLOAD_LEN as usize - MSG3_OVERHEAD;

#[derive(Debug, thiserror::Error)]
pub enum VerifierError {
    #[error("peer session key rejected: off-curve or invalid point")]
    InvalidPoint,
    #[error("evidence in msg2 is malformed")]
    MalformedEvidence,
    #[error("msg3 requested without an accepted appraisal")]
    NotAccepted,
    #[error("operation invalid in phase {actual:?}")]
    WrongPhase { actual: VerifierPhase },
    #[error("configuration rejected: {0}")]
    Config(String),
}

/// Why an appraisal rejected. `Display` yields the stable reason code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    MacMismatch,
    GaMismatch,
    AnchorMismatch,
    UnendorsedDevice,
    BadEvidenceSignature,
    StaleVersion,
    UnknownClaim,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RejectReason::MacMismatch => "mac-mismatch",
            RejectReason::GaMismatch => "ga-mismatch",
            RejectReason::AnchorMismatch => "anchor-mismatch",
            RejectReason::UnendorsedDevice => "unendorsed-device",
            RejectReason::BadEvidenceSignature => "bad-evidence-signature",
            RejectReason::StaleVersion => "stale-version",
            RejectReason::UnknownClaim => "unknown-claim",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Accepted,
    Rejected(RejectReason),
}

/// Result of appraising one msg2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AppraisalVerdict {
    pub outcome: Outcome,
    /// Claim echoed for logging; zero when rejection precedes parsing.
    pub claim: [u8; 32],
}

impl AppraisalVerdict {
    pub fn accepted(&self) -> bool {
        self.outcome == Outcome::Accepted
    }

    pub fn reason(&self) -> Option<RejectReason> {
        match self.outcome {
            Outcome::Accepted => None,
            Outcome::Rejected(reason) => Some(reason),
        }
    }
}

/// Everything a serving verifier needs: identity, trust anchors, policy
/// and the secret to provision.
pub struct VerifierConfig {
    pub identity: SigningKeypair,
    /// Attestation public keys of genuine devices.
    pub endorsements: HashSet<[u8; POINT_LEN]>,
    /// Known-good bytecode measurements.
    pub reference_values: HashSet<[u8; 32]>,
    /// Evidence below this version is rejected as stale.
    pub min_version: u32,
    pub secret_blob: Vec<u8>,
}

impl VerifierConfig {
    /// Checks the invariants a serving verifier relies on.
    pub fn validate(&self) -> Result<(), VerifierError> {
        if self.endorsements.is_empty() {
            return Err(VerifierError::Config("no endorsements configured".into()));
        }
        if self.reference_values.is_empty() {
            return Err(VerifierError::Config(
                "no reference values configured".into(),
            ));
        }
        if self.secret_blob.len() > MAX_SECRET_BLOB_LEN {
            return Err(VerifierError::Config(format!(
                "secret blob of {} bytes exceeds the {} byte frame budget",
                self.secret_blob.len(),
                MAX_SECRET_BLOB_LEN
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifierPhase {
    AwaitMsg0,
    AwaitMsg2,
    Provisioned,
    Failed,
}

/// One protocol run from the verifier's point of view; one per connection.
pub struct VerifierSession {
    phase: VerifierPhase,
    keypair: Option<SessionKeyPair>,
    peer_g_a: Option<[u8; POINT_LEN]>,
    keys: Option<SessionKeys>,
    accepted: bool,
}

impl VerifierSession {
    pub fn new() -> Self {
        Self {
            phase: VerifierPhase::AwaitMsg0,
            keypair: None,
            peer_g_a: None,
            keys: None,
            accepted: false,
        }
    }

    /// Handles msg0: fresh session key pair, shared-secret derivation and
    /// the signed, MACed msg1 reply.
    pub fn handle_msg0(
        &mut self,
        config: &VerifierConfig,
        msg0: &Msg0Payload,
        rng: &mut (impl CryptoRng + RngCore),
    ) -> Result<Msg1Payload, VerifierError> {
        if self.phase != VerifierPhase::AwaitMsg0 {
            return Err(VerifierError::WrongPhase { actual: self.phase });
        }

        let derived = timing::span(ProtocolMessage::Msg0, CostCategory::KeyGeneration, || {
            let keypair = SessionKeyPair::generate(rng);
            keypair
                .shared_secret(&msg0.g_a)
                .map(|shared| (crypto::derive_session_keys(&shared), keypair))
        });
        let (keys, keypair) = match derived {
            Ok(pair) => pair,
            Err(_) => {
                self.phase = VerifierPhase::Failed;
                return Err(VerifierError::InvalidPoint);
            }
        };

        let signed = msg1_signature_input(keypair.public_point(), &msg0.g_a);
        let signature = timing::span(ProtocolMessage::Msg1, CostCategory::AsymmetricCrypto, || {
            config.identity.sign(&signed)
        });
        let mut msg1 = timing::span(ProtocolMessage::Msg1, CostCategory::MemoryManagement, || {
            Msg1Payload {
                g_v: *keypair.public_point(),
                v_identity: *config.identity.public_point(),
                signature,
                mac: [0; 16],
            }
        });
        let content = msg1.content();
        msg1.mac = timing::span(ProtocolMessage::Msg1, CostCategory::SymmetricCrypto, || {
            crypto::cmac(&keys.km, &content)
        });

        self.peer_g_a = Some(msg0.g_a);
        self.keypair = Some(keypair);
        self.keys = Some(keys);
        self.phase = VerifierPhase::AwaitMsg2;
        Ok(msg1)
    }

    /// Appraises msg2 against the configured policy.
    ///
    /// Checks run in a fixed order, first failure wins:
    /// MAC, G_a match, anchor, endorsement, evidence signature, version,
    /// claim. The session fails permanently on rejection.
    pub fn appraise_msg2(
        &mut self,
        config: &VerifierConfig,
        msg2: &Msg2Payload,
    ) -> Result<AppraisalVerdict, VerifierError> {
        if self.phase != VerifierPhase::AwaitMsg2 {
            return Err(VerifierError::WrongPhase { actual: self.phase });
        }
        let keys = self.keys.as_ref().expect("keys set at AwaitMsg2");
        let peer_g_a = self.peer_g_a.expect("peer key set at AwaitMsg2");
        let keypair = self.keypair.as_ref().expect("keypair set at AwaitMsg2");

        let content = timing::span(ProtocolMessage::Msg2, CostCategory::MemoryManagement, || {
            msg2.content()
        });
        let mac_ok = timing::span(ProtocolMessage::Msg2, CostCategory::SymmetricCrypto, || {
            crypto::cmac(&keys.km, &content) == msg2.mac
        });
        if !mac_ok {
            return Ok(self.reject(RejectReason::MacMismatch, [0; 32]));
        }

        if msg2.g_a != peer_g_a {
            return Ok(self.reject(RejectReason::GaMismatch, [0; 32]));
        }

        let evidence = match Evidence::from_bytes(&msg2.evidence) {
            Ok(evidence) => evidence,
            Err(_) => {
                self.phase = VerifierPhase::Failed;
                return Err(VerifierError::MalformedEvidence);
            }
        };
        let claim = evidence.claim;

        let expected_anchor = compute_anchor(&peer_g_a, keypair.public_point());
        if evidence.anchor != expected_anchor {
            return Ok(self.reject(RejectReason::AnchorMismatch, claim));
        }

        if !config.endorsements.contains(&evidence.attestation_public_key) {
            return Ok(self.reject(RejectReason::UnendorsedDevice, claim));
        }

        let sig_ok = timing::span(ProtocolMessage::Msg2, CostCategory::AsymmetricCrypto, || {
            evidence.verify_signature()
        });
        if !sig_ok {
            return Ok(self.reject(RejectReason::BadEvidenceSignature, claim));
        }

        if evidence.version < config.min_version {
            return Ok(self.reject(RejectReason::StaleVersion, claim));
        }

        if !config.reference_values.contains(&claim) {
            return Ok(self.reject(RejectReason::UnknownClaim, claim));
        }

        self.accepted = true;
        Ok(AppraisalVerdict {
            outcome: Outcome::Accepted,
            claim,
        })
    }

    /// Encrypts the secret blob under a fresh iv. Only callable after an
    /// accepted appraisal; rejection paths can never produce a msg3.
    pub fn build_msg3(
        &mut self,
        config: &VerifierConfig,
        rng: &mut (impl CryptoRng + RngCore),
    ) -> Result<Msg3Payload, VerifierError> {
        if self.phase != VerifierPhase::AwaitMsg2 || !self.accepted {
            if self.phase == VerifierPhase::AwaitMsg2 {
                return Err(VerifierError::NotAccepted);
            }
            return Err(VerifierError::WrongPhase { actual: self.phase });
        }
        let keys = self.keys.as_ref().expect("keys set at AwaitMsg2");
        let mut iv = [0u8; IV_LEN];
        rng.fill_bytes(&mut iv);
        let ciphertext = timing::span(ProtocolMessage::Msg3, CostCategory::SymmetricCrypto, || {
            crypto::aead_encrypt(&keys.ke, &iv, &config.secret_blob)
        });
        self.phase = VerifierPhase::Provisioned;
        Ok(Msg3Payload { iv, ciphertext })
    }

    pub fn phase(&self) -> VerifierPhase {
        self.phase
    }

    /// This session's public session key, `G_v`.
    pub fn public_session_key(&self) -> Option<&[u8; POINT_LEN]> {
        self.keypair.as_ref().map(|kp| kp.public_point())
    }

    /// Derived session keys, available once msg0 was handled.
    pub fn session_keys(&self) -> Option<&SessionKeys> {
        self.keys.as_ref()
    }

    fn reject(&mut self, reason: RejectReason, claim: [u8; 32]) -> AppraisalVerdict {
        self.phase = VerifierPhase::Failed;
        AppraisalVerdict {
            outcome: Outcome::Rejected(reason),
            claim,
        }
    }
}

impl Default for VerifierSession {
    fn default() -> Self {
        Self::new()
    }
}

/// Serves the attestation protocol forever, one session per connection.
/// Individual connection failures are logged and never tear down the loop.
pub fn serve(config: Arc<VerifierConfig>, listener: TcpListener) -> std::io::Result<()> {
    config
        .validate()
        .map_err(|err| std::io::Error::new(std::io::ErrorKind::InvalidInput, err.to_string()))?;
    log::info!("verifier listening on {}", listener.local_addr()?);
    loop {
        match listener.accept() {
            Ok((stream, peer)) => {
                let config = Arc::clone(&config);
                std::thread::spawn(move || {
                    if let Err(err) = handle_connection(&config, stream) {
                        log::warn!("connection {peer}: {err}");
                    }
                });
            }
            Err(err) => {
                log::warn!("accept failed: {err}");
                std::thread::sleep(std::time::Duration::from_millis(10));
            }
        }
    }
}

/// Runs one protocol session over an accepted connection.
///
/// Emits one structured log line per appraisal verdict. On rejection the
/// connection is closed without sending anything.
pub fn handle_connection(
    config: &VerifierConfig,
    mut stream: TcpStream,
) -> Result<(), VerifierError> {
    let peer = stream
        .peer_addr()
        .map(|a| a.to_string())
        .unwrap_or_else(|_| "unknown".into());
    let mut session = VerifierSession::new();

    let msg0 = match read_expected(&mut stream, MsgType::Msg0) {
        Ok(payload) => Msg0Payload::decode(&payload).map_err(|err| {
            log::warn!("connection {peer}: rejected msg0: {err}");
            VerifierError::InvalidPoint
        })?,
        Err(err) => {
            log::warn!("connection {peer}: {err}");
            return Ok(());
        }
    };

    let msg1 = session.handle_msg0(config, &msg0, &mut rand::rngs::OsRng)?;
    write_payload(&mut stream, MsgType::Msg1, &msg1.encode())?;

    let msg2 = match read_expected(&mut stream, MsgType::Msg2) {
        Ok(payload) => match Msg2Payload::decode(&payload) {
            Ok(msg2) => msg2,
            Err(err) => {
                log::warn!("connection {peer}: rejected msg2: {err}");
                return Ok(());
            }
        },
        Err(err) => {
            log::warn!("connection {peer}: {err}");
            return Ok(());
        }
    };

    let verdict = session.appraise_msg2(config, &msg2)?;
    match verdict.outcome {
        Outcome::Accepted => {
            log::info!(
                "appraisal outcome=accepted reason=- claim={} peer={}",
                hex::encode(verdict.claim),
                peer
            );
            let msg3 = session.build_msg3(config, &mut rand::rngs::OsRng)?;
            write_payload(&mut stream, MsgType::Msg3, &msg3.encode())?;
        }
        Outcome::Rejected(reason) => {
            log::info!(
                "appraisal outcome=rejected reason={} claim={} peer={}",
                reason,
                hex::encode(verdict.claim),
                peer
            );
            // close without a reply: nothing leaves on rejection
        }
    }
    Ok(())
}

fn read_expected(stream: &mut TcpStream, expected: MsgType) -> Result<Vec<u8>, String> {
    match wire::read_frame(stream) {
        Ok((msg_type, payload)) if msg_type == expected => Ok(payload),
        Ok((msg_type, _)) => Err(format!("expected {expected:?}, got {msg_type:?}")),
        Err(err) => Err(err.to_string()),
    }
}

fn write_payload(
    stream: &mut TcpStream,
    msg_type: MsgType,
    payload: &[u8],
) -> Result<(), VerifierError> {
    wire::write_frame(stream, msg_type, payload)
        .and_then(|()| stream.flush().map_err(wire::WireError::Io))
        .map_err(|err| VerifierError::Config(format!("send failed: {err}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attester::AttesterSession;
    use crate::service::{AttestationService, RootOfTrust};
    use rand::rngs::OsRng;

    struct Rig {
        config: VerifierConfig,
        service: AttestationService,
    }

    fn rig() -> Rig {
        let service = AttestationService::new(&RootOfTrust::new([0x42; 32]), 3);
        let mut endorsements = HashSet::new();
        endorsements.insert(service.public_attestation_key());
        let mut reference_values = HashSet::new();
        reference_values.insert([0xcc; 32]);
        let config = VerifierConfig {
            identity: SigningKeypair::generate(&mut OsRng),
            endorsements,
            reference_values,
            min_version: 2,
            secret_blob: b"the secret".to_vec(),
        };
        Rig { config, service }
    }

    /// Runs the handshake and returns everything needed to craft msg2s.
    fn handshake(rig: &Rig) -> (AttesterSession, VerifierSession, Msg2Payload) {
        let (mut attester, msg0) =
            AttesterSession::start(*rig.config.identity.public_point(), &mut OsRng).unwrap();
        let mut verifier = VerifierSession::new();
        let msg1 = verifier.handle_msg0(&rig.config, &msg0, &mut OsRng).unwrap();
        let anchor = attester.handle_msg1(&msg1).unwrap();
        let evidence = rig.service.issue_evidence(anchor, [0xcc; 32]);
        let msg2 = attester.build_msg2(&evidence).unwrap();
        (attester, verifier, msg2)
    }

    fn remac(msg2: &mut Msg2Payload, keys: &SessionKeys) {
        msg2.mac = crypto::cmac(&keys.km, &msg2.content());
    }

    #[test]
    fn honest_msg0_produces_verifiable_msg1() {
        let rig = rig();
        let (attester, _msg0) =
            AttesterSession::start(*rig.config.identity.public_point(), &mut OsRng).unwrap();
        let mut verifier = VerifierSession::new();
        let msg0 = Msg0Payload {
            g_a: *attester.public_session_key(),
        };
        let msg1 = verifier.handle_msg0(&rig.config, &msg0, &mut OsRng).unwrap();

        let signed = msg1_signature_input(&msg1.g_v, &msg0.g_a);
        assert!(crypto::ecdsa_verify(
            rig.config.identity.public_point(),
            &signed,
            &msg1.signature
        ));
        // MAC recomputes under independently derived keys
        let keys = verifier.session_keys().unwrap();
        assert_eq!(msg1.mac, crypto::cmac(&keys.km, &msg1.content()));
    }

    #[test]
    fn invalid_msg0_point_fails_the_session() {
        let rig = rig();
        let mut verifier = VerifierSession::new();
        let msg0 = Msg0Payload { g_a: [0u8; 65] };
        assert!(matches!(
            verifier.handle_msg0(&rig.config, &msg0, &mut OsRng),
            Err(VerifierError::InvalidPoint)
        ));
        assert_eq!(verifier.phase(), VerifierPhase::Failed);
    }

    #[test]
    fn honest_msg2_is_accepted() {
        let rig = rig();
        let (_, mut verifier, msg2) = handshake(&rig);
        let verdict = verifier.appraise_msg2(&rig.config, &msg2).unwrap();
        assert!(verdict.accepted());
        assert_eq!(verdict.claim, [0xcc; 32]);
        assert_eq!(verdict.reason(), None);
    }

    #[test]
    fn each_check_reports_its_own_reason() {
        let rig = rig();

        // 1: corrupted MAC
        let (_, mut verifier, mut msg2) = handshake(&rig);
        msg2.mac[5] ^= 1;
        let verdict = verifier.appraise_msg2(&rig.config, &msg2).unwrap();
        assert_eq!(verdict.reason(), Some(RejectReason::MacMismatch));
        assert_eq!(verdict.claim, [0; 32]);
        assert_eq!(verifier.phase(), VerifierPhase::Failed);

        // 2: substituted g_a, re-MACed
        let (attester, mut verifier, mut msg2) = handshake(&rig);
        let (other, _) =
            AttesterSession::start(*rig.config.identity.public_point(), &mut OsRng).unwrap();
        msg2.g_a = *other.public_session_key();
        remac(&mut msg2, attester.session_keys().unwrap());
        let verdict = verifier.appraise_msg2(&rig.config, &msg2).unwrap();
        assert_eq!(verdict.reason(), Some(RejectReason::GaMismatch));

        // 3: evidence bound to a foreign anchor
        let (attester, mut verifier, mut msg2) = handshake(&rig);
        let foreign = rig.service.issue_evidence([0xee; 32], [0xcc; 32]);
        msg2.evidence = foreign.to_bytes().to_vec();
        msg2.signature = foreign.signature;
        remac(&mut msg2, attester.session_keys().unwrap());
        let verdict = verifier.appraise_msg2(&rig.config, &msg2).unwrap();
        assert_eq!(verdict.reason(), Some(RejectReason::AnchorMismatch));

        // 4: unendorsed device key
        let (attester, mut verifier, mut msg2) = handshake(&rig);
        let rogue = AttestationService::new(&RootOfTrust::new([0x99; 32]), 3);
        let evidence = Evidence::from_bytes(&msg2.evidence).unwrap();
        let rogue_evidence = rogue.issue_evidence(evidence.anchor, evidence.claim);
        msg2.evidence = rogue_evidence.to_bytes().to_vec();
        msg2.signature = rogue_evidence.signature;
        remac(&mut msg2, attester.session_keys().unwrap());
        let verdict = verifier.appraise_msg2(&rig.config, &msg2).unwrap();
        assert_eq!(verdict.reason(), Some(RejectReason::UnendorsedDevice));

        // 5: corrupted evidence signature
        let (attester, mut verifier, mut msg2) = handshake(&rig);
        msg2.evidence[140] ^= 1; // inside the signature field
        remac(&mut msg2, attester.session_keys().unwrap());
        let verdict = verifier.appraise_msg2(&rig.config, &msg2).unwrap();
        assert_eq!(verdict.reason(), Some(RejectReason::BadEvidenceSignature));

        // 6: stale version
        let stale_service = AttestationService::new(&RootOfTrust::new([0x42; 32]), 1);
        let (attester, mut verifier, mut msg2) = handshake(&rig);
        let evidence = Evidence::from_bytes(&msg2.evidence).unwrap();
        let stale = stale_service.issue_evidence(evidence.anchor, evidence.claim);
        msg2.evidence = stale.to_bytes().to_vec();
        msg2.signature = stale.signature;
        remac(&mut msg2, attester.session_keys().unwrap());
        let verdict = verifier.appraise_msg2(&rig.config, &msg2).unwrap();
        assert_eq!(verdict.reason(), Some(RejectReason::StaleVersion));

        // 7: unknown claim
        let (attester, mut verifier, mut msg2) = handshake(&rig);
        let evidence = Evidence::from_bytes(&msg2.evidence).unwrap();
        let unknown = rig.service.issue_evidence(evidence.anchor, [0xdd; 32]);
        msg2.evidence = unknown.to_bytes().to_vec();
        msg2.signature = unknown.signature;
        remac(&mut msg2, attester.session_keys().unwrap());
        let verdict = verifier.appraise_msg2(&rig.config, &msg2).unwrap();
        assert_eq!(verdict.reason(), Some(RejectReason::UnknownClaim));
    }

    #[test]
    fn first_failing_check_wins_for_fault_pairs() {
        let rig = rig();

        // Fault injectors, indexed in appraisal order. Each takes the rig,
        // the attester keys and the msg2 under construction.
        type Fault = Box<dyn Fn(&Rig, &SessionKeys, &mut Msg2Payload)>;
        let faults: Vec<(RejectReason, Fault)> = vec![
            (
                RejectReason::MacMismatch,
                Box::new(|_, _, msg2| msg2.mac[0] ^= 1),
            ),
            (
                RejectReason::GaMismatch,
                Box::new(|rig, _, msg2| {
                    let (other, _) =
                        AttesterSession::start(*rig.config.identity.public_point(), &mut OsRng)
                            .unwrap();
                    msg2.g_a = *other.public_session_key();
                }),
            ),
            (
                RejectReason::AnchorMismatch,
                Box::new(|rig, _, msg2| {
                    let old = Evidence::from_bytes(&msg2.evidence).unwrap();
                    let swapped = rig.service.issue_evidence([0x5a; 32], old.claim);
                    msg2.evidence = swapped.to_bytes().to_vec();
                    msg2.signature = swapped.signature;
                }),
            ),
            (
                RejectReason::UnendorsedDevice,
                Box::new(|_, _, msg2| {
                    let old = Evidence::from_bytes(&msg2.evidence).unwrap();
                    let rogue = AttestationService::new(&RootOfTrust::new([0x77; 32]), 3);
                    let swapped = rogue.issue_evidence(old.anchor, old.claim);
                    msg2.evidence = swapped.to_bytes().to_vec();
                    msg2.signature = swapped.signature;
                }),
            ),
            (
                RejectReason::BadEvidenceSignature,
                Box::new(|_, _, msg2| {
                    let len = msg2.evidence.len();
                    msg2.evidence[len - 1] ^= 1;
                }),
            ),
            (
                RejectReason::StaleVersion,
                Box::new(|_, _, msg2| {
                    let old = Evidence::from_bytes(&msg2.evidence).unwrap();
                    let downgraded = AttestationService::new(&RootOfTrust::new([0x42; 32]), 1);
                    let swapped = downgraded.issue_evidence(old.anchor, old.claim);
                    msg2.evidence = swapped.to_bytes().to_vec();
                    msg2.signature = swapped.signature;
                }),
            ),
            (
                RejectReason::UnknownClaim,
                Box::new(|rig, _, msg2| {
                    let old = Evidence::from_bytes(&msg2.evidence).unwrap();
                    let swapped = rig.service.issue_evidence(old.anchor, [0x31; 32]);
                    msg2.evidence = swapped.to_bytes().to_vec();
                    msg2.signature = swapped.signature;
                }),
            ),
        ];

        for i in 0..faults.len() {
            for j in (i + 1)..faults.len() {
                let (attester, mut verifier, mut msg2) = handshake(&rig);
                let keys = attester.session_keys().unwrap().clone();
                // later fault first so the earlier one overwrites shared fields
                faults[j].1(&rig, &keys, &mut msg2);
                faults[i].1(&rig, &keys, &mut msg2);
                // every fault except the MAC one is re-MACed to stay reachable
                if faults[i].0 != RejectReason::MacMismatch {
                    remac(&mut msg2, &keys);
                }
                let verdict = verifier.appraise_msg2(&rig.config, &msg2).unwrap();
                assert_eq!(
                    verdict.reason(),
                    Some(faults[i].0),
                    "faults ({i}, {j}) reported {:?}",
                    verdict.reason()
                );
            }
        }
    }

    #[test]
    fn endorsement_reference_matrix() {
        let rig = rig();
        let rogue = AttestationService::new(&RootOfTrust::new([0x13; 32]), 3);

        let cases = [
            (true, true, None),
            (true, false, Some(RejectReason::UnknownClaim)),
            (false, true, Some(RejectReason::UnendorsedDevice)),
            (false, false, Some(RejectReason::UnendorsedDevice)),
        ];
        for (endorsed, referenced, expected) in cases {
            let (attester, mut verifier, mut msg2) = handshake(&rig);
            let old = Evidence::from_bytes(&msg2.evidence).unwrap();
            let service = if endorsed { &rig.service } else { &rogue };
            let claim = if referenced { [0xcc; 32] } else { [0x55; 32] };
            let swapped = service.issue_evidence(old.anchor, claim);
            msg2.evidence = swapped.to_bytes().to_vec();
            msg2.signature = swapped.signature;
            remac(&mut msg2, attester.session_keys().unwrap());
            let verdict = verifier.appraise_msg2(&rig.config, &msg2).unwrap();
            assert_eq!(
                verdict.reason(),
                expected,
                "endorsed={endorsed} referenced={referenced}"
            );
        }
    }

    #[test]
    fn replayed_msg2_hits_anchor_mismatch() {
        let rig = rig();
        // session 1 completes and its msg2 is captured
        let (_, _, captured) = handshake(&rig);

        // the adversary re-runs the handshake with the same G_a (it replays
        // msg0) and re-MACs the captured evidence under the new session keys
        let scalar = [0x2e; 32];
        let keypair = SessionKeyPair::from_scalar_bytes(&scalar).unwrap();
        let g_a = *keypair.public_point();
        let mut verifier = VerifierSession::new();
        let msg1 = verifier
            .handle_msg0(&rig.config, &Msg0Payload { g_a }, &mut OsRng)
            .unwrap();
        let keys = crypto::derive_session_keys(&keypair.shared_secret(&msg1.g_v).unwrap());

        let mut replay = captured.clone();
        replay.g_a = g_a;
        remac(&mut replay, &keys);
        let verdict = verifier.appraise_msg2(&rig.config, &replay).unwrap();
        assert_eq!(verdict.reason(), Some(RejectReason::AnchorMismatch));
    }

    #[test]
    fn msg3_only_after_acceptance() {
        let rig = rig();

        let (_, mut verifier, mut msg2) = handshake(&rig);
        msg2.mac[0] ^= 1;
        let _ = verifier.appraise_msg2(&rig.config, &msg2).unwrap();
        assert!(matches!(
            verifier.build_msg3(&rig.config, &mut OsRng),
            Err(VerifierError::WrongPhase { .. })
        ));

        let (mut attester, mut verifier, msg2) = handshake(&rig);
        assert!(matches!(
            verifier.build_msg3(&rig.config, &mut OsRng),
            Err(VerifierError::NotAccepted)
        ));
        let verdict = verifier.appraise_msg2(&rig.config, &msg2).unwrap();
        assert!(verdict.accepted());
        let msg3 = verifier.build_msg3(&rig.config, &mut OsRng).unwrap();
        assert_eq!(verifier.phase(), VerifierPhase::Provisioned);
        assert_eq!(attester.handle_msg3(&msg3).unwrap(), b"the secret");
    }

    #[test]
    fn provisioning_runs_use_fresh_ivs() {
        let rig = rig();
        let mut ivs = std::collections::HashSet::new();
        for _ in 0..8 {
            let (_, mut verifier, msg2) = handshake(&rig);
            verifier.appraise_msg2(&rig.config, &msg2).unwrap();
            let msg3 = verifier.build_msg3(&rig.config, &mut OsRng).unwrap();
            assert!(ivs.insert(msg3.iv));
        }
    }

    #[test]
    fn config_validation() {
        assert!(rig().config.validate().is_ok());

        let mut no_endorsements = rig().config;
        no_endorsements.endorsements.clear();
        assert!(matches!(
            no_endorsements.validate(),
            Err(VerifierError::Config(_))
        ));

        let mut oversized = rig().config;
        oversized.secret_blob = vec![0; MAX_SECRET_BLOB_LEN + 1];
        assert!(matches!(oversized.validate(), Err(VerifierError::Config(_))));
    }
}
