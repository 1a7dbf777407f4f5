//! Remote attestation for measured WebAssembly workloads.
//!
//! An attester proves what bytecode it runs by sending signed *evidence*
//! (anchor, runtime version, bytecode hash, attestation public key) over a
//! four-message SIGMA-style exchange; the verifier appraises the evidence
//! against endorsed device keys and reference measurements and, on
//! acceptance, provisions an encrypted secret blob.
//!
//! - [`crypto`]: P-256 ECDHE/ECDSA, AES-CMAC derivations, AES-GCM, SHA-256
//! - [`wire`]: frame envelope and the four message payloads, bit-exact
//! - [`evidence`]: the signed claim record
//! - [`service`]: attestation service guarding the root-of-trust seed
//! - [`attester`] / [`verifier`]: the protocol state machines
//! - [`bench`] / [`timing`]: loopback cost breakdown of the protocol

pub mod attester;
pub mod bench;
pub mod crypto;
pub mod evidence;
pub mod service;
pub mod timing;
pub mod verifier;
pub mod wire;

pub use attester::{AttesterError, AttesterPhase, AttesterSession};
pub use crypto::{SessionKeyPair, SessionKeys, SigningKeypair};
pub use evidence::{compute_anchor, Evidence};
pub use service::{AttestationService, RootOfTrust, CURRENT_VERSION};
pub use verifier::{
    AppraisalVerdict, Outcome, RejectReason, VerifierConfig, VerifierPhase, VerifierSession,
};
