//! Cryptographic suite backing the attestation protocol.
//!
//! Everything runs on NIST P-256 (secp256r1): ECDHE for session keys,
//! ECDSA (SHA-256, RFC 6979 nonces) for signatures, AES-128-CMAC for MACs
//! and key derivation, AES-128-GCM for the secret-blob channel. Points are
//! exchanged as 65-byte uncompressed SEC1 (`0x04 || X || Y`, big-endian).

use aes::Aes128;
use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::Aes128Gcm;
use cmac::{Cmac, Mac};
use p256::ecdsa::signature::hazmat::PrehashVerifier;
use p256::ecdsa::{Signature, SigningKey, VerifyingKey};
use p256::elliptic_curve::rand_core::{CryptoRng, RngCore};
use p256::elliptic_curve::sec1::ToEncodedPoint;
use p256::{PublicKey, SecretKey};
use sha2::{Digest, Sha256};

/// Uncompressed SEC1 point length.
pub const POINT_LEN: usize = 65;
/// Big-endian scalar length.
pub const SCALAR_LEN: usize = 32;
/// 128-bit symmetric key length.
pub const KEY_LEN: usize = 16;
/// `r || s` signature length.
pub const SIGNATURE_LEN: usize = 64;
/// AES-GCM initialisation vector length.
pub const IV_LEN: usize = 12;
/// AES-GCM authentication tag length.
pub const TAG_LEN: usize = 16;

/// Domain separator for the deterministic attestation-key chain.
const KEYGEN_DOMAIN: &[u8] = b"WATZ-ATTEST-V1";
/// Rejection-sampling cap; exceeding it means the hash chain is broken.
const KEYGEN_MAX_ITERATIONS: u32 = 1000;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CryptoError {
    /// Peer point is off-curve, the identity, or not valid SEC1.
    #[error("invalid curve point")]
    InvalidPoint,
    /// Scalar is zero or not below the group order.
    #[error("invalid private scalar")]
    InvalidScalar,
    /// AEAD tag did not authenticate the ciphertext.
    #[error("authenticated decryption failed")]
    AuthFailure,
}

/// Ephemeral ECDHE key pair for one protocol run.
pub struct SessionKeyPair {
    secret: SecretKey,
    public: [u8; POINT_LEN],
}

impl SessionKeyPair {
    /// Generates a fresh key pair from the given entropy source.
    pub fn generate(rng: &mut (impl CryptoRng + RngCore)) -> Self {
        let secret = SecretKey::random(rng);
        let public = encode_point(&secret.public_key());
        Self { secret, public }
    }

    /// Builds a key pair from a fixed scalar. Deterministic; used for
    /// regression vectors and replay-style tests.
    pub fn from_scalar_bytes(scalar: &[u8; SCALAR_LEN]) -> Result<Self, CryptoError> {
        let secret = SecretKey::from_slice(scalar).map_err(|_| CryptoError::InvalidScalar)?;
        let public = encode_point(&secret.public_key());
        Ok(Self { secret, public })
    }

    /// Uncompressed SEC1 encoding of the public session key.
    pub fn public_point(&self) -> &[u8; POINT_LEN] {
        &self.public
    }

    /// ECDH against a peer's public session key; returns the x-coordinate
    /// of the shared point.
    pub fn shared_secret(&self, peer: &[u8; POINT_LEN]) -> Result<SharedSecret, CryptoError> {
        let peer = decode_point(peer)?;
        let shared = p256::ecdh::diffie_hellman(self.secret.to_nonzero_scalar(), peer.as_affine());
        let mut x = [0u8; SCALAR_LEN];
        x.copy_from_slice(shared.raw_secret_bytes());
        Ok(SharedSecret { x })
    }
}

impl std::fmt::Debug for SessionKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // private scalar intentionally absent
        f.debug_struct("SessionKeyPair")
            .field("public", &hex::encode(self.public))
            .finish_non_exhaustive()
    }
}

/// x-coordinate of an ECDH shared point, big-endian.
#[derive(Clone, PartialEq, Eq)]
pub struct SharedSecret {
    x: [u8; SCALAR_LEN],
}

impl SharedSecret {
    pub fn from_bytes(x: [u8; SCALAR_LEN]) -> Self {
        Self { x }
    }

    pub fn as_bytes(&self) -> &[u8; SCALAR_LEN] {
        &self.x
    }
}

impl std::fmt::Debug for SharedSecret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SharedSecret(..)")
    }
}

/// KDK and the two session secrets derived from it.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionKeys {
    /// Key-derivation key, parent of `km` and `ke`.
    pub kdk: [u8; KEY_LEN],
    /// MAC key for the protocol messages.
    pub km: [u8; KEY_LEN],
    /// Encryption key for the secret-blob channel.
    pub ke: [u8; KEY_LEN],
}

impl std::fmt::Debug for SessionKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SessionKeys(..)")
    }
}

/// Derives the session key set from an ECDH shared secret.
///
/// The KDK is `AES-CMAC(0^16, little-endian x)`; `km` and `ke` follow the
/// SGX-style labelled derivation `0x01 || label || 0x00 || 0x0080(LE)` with
/// labels `"SMK"` and `"SK"`.
pub fn derive_session_keys(shared: &SharedSecret) -> SessionKeys {
    let mut x_le = shared.x;
    x_le.reverse();
    let kdk = cmac(&[0u8; KEY_LEN], &x_le);
    let km = cmac(&kdk, &[0x01, b'S', b'M', b'K', 0x00, 0x80, 0x00]);
    let ke = cmac(&kdk, &[0x01, b'S', b'K', 0x00, 0x80, 0x00]);
    SessionKeys { kdk, km, ke }
}

/// RFC 4493 AES-128-CMAC.
pub fn cmac(key: &[u8; KEY_LEN], message: &[u8]) -> [u8; KEY_LEN] {
    let mut mac = <Cmac<Aes128> as Mac>::new_from_slice(key).expect("cmac accepts 16-byte keys");
    mac.update(message);
    mac.finalize().into_bytes().into()
}

/// SHA-256.
pub fn sha256(message: &[u8]) -> [u8; 32] {
    Sha256::digest(message).into()
}

/// Long-term ECDSA key pair. Serves as the attestation key pair on the
/// attester and as the identity key pair on the verifier.
#[derive(Clone)]
pub struct SigningKeypair {
    key: SigningKey,
    public: [u8; POINT_LEN],
}

impl SigningKeypair {
    pub fn generate(rng: &mut (impl CryptoRng + RngCore)) -> Self {
        let key = SigningKey::random(rng);
        let public = encode_point(&PublicKey::from(key.verifying_key()));
        Self { key, public }
    }

    pub fn from_scalar_bytes(scalar: &[u8; SCALAR_LEN]) -> Result<Self, CryptoError> {
        let key = SigningKey::from_slice(scalar).map_err(|_| CryptoError::InvalidScalar)?;
        let public = encode_point(&PublicKey::from(key.verifying_key()));
        Ok(Self { key, public })
    }

    pub fn public_point(&self) -> &[u8; POINT_LEN] {
        &self.public
    }

    /// Signs `SHA-256(message)` with an RFC 6979 nonce and returns the
    /// canonical (low-s) `r || s` form.
    pub fn sign(&self, message: &[u8]) -> [u8; SIGNATURE_LEN] {
        use p256::ecdsa::signature::Signer;
        let sig: Signature = self.key.sign(message);
        let sig = sig.normalize_s().unwrap_or(sig);
        sig.to_bytes().into()
    }
}

impl std::fmt::Debug for SigningKeypair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SigningKeypair")
            .field("public", &hex::encode(self.public))
            .finish_non_exhaustive()
    }
}

/// Verifies a 64-byte `r || s` signature over `SHA-256(message)`.
///
/// Rejects (rather than errors on) malformed keys and signatures, and
/// rejects the malleable high-s form: only low-s signatures are canonical.
pub fn ecdsa_verify(
    public_point: &[u8; POINT_LEN],
    message: &[u8],
    signature: &[u8; SIGNATURE_LEN],
) -> bool {
    let Ok(key) = VerifyingKey::from_sec1_bytes(public_point) else {
        return false;
    };
    let Ok(sig) = Signature::from_slice(signature) else {
        return false;
    };
    if sig.normalize_s().is_some() {
        return false;
    }
    let digest = sha256(message);
    key.verify_prehash(&digest, &sig).is_ok()
}

/// AES-128-GCM with empty associated data; returns `ciphertext || tag`.
pub fn aead_encrypt(ke: &[u8; KEY_LEN], iv: &[u8; IV_LEN], plaintext: &[u8]) -> Vec<u8> {
    let cipher = Aes128Gcm::new(ke.into());
    cipher
        .encrypt(iv.into(), Payload::from(plaintext))
        .expect("in-memory GCM encryption cannot fail")
}

/// Inverse of [`aead_encrypt`]; any modification yields `AuthFailure`.
pub fn aead_decrypt(
    ke: &[u8; KEY_LEN],
    iv: &[u8; IV_LEN],
    ciphertext_and_tag: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    let cipher = Aes128Gcm::new(ke.into());
    cipher
        .decrypt(iv.into(), Payload::from(ciphertext_and_tag))
        .map_err(|_| CryptoError::AuthFailure)
}

/// Deterministically derives the attestation key pair from a 32-byte seed.
///
/// `subkey = SHA-256(domain || seed)`, then candidate scalars
/// `SHA-256(subkey || counter_be32)` are rejection-sampled into `[1, n-1]`.
/// Reproducible bit-for-bit across runs and hosts.
pub fn derive_attestation_keypair(seed: &[u8; 32]) -> SigningKeypair {
    let mut subkey_input = Vec::with_capacity(KEYGEN_DOMAIN.len() + seed.len());
    subkey_input.extend_from_slice(KEYGEN_DOMAIN);
    subkey_input.extend_from_slice(seed);
    let subkey = sha256(&subkey_input);

    for counter in 0..KEYGEN_MAX_ITERATIONS {
        let mut candidate_input = [0u8; 36];
        candidate_input[..32].copy_from_slice(&subkey);
        candidate_input[32..].copy_from_slice(&counter.to_be_bytes());
        let candidate = sha256(&candidate_input);
        if let Ok(keypair) = SigningKeypair::from_scalar_bytes(&candidate) {
            return keypair;
        }
    }
    // Each candidate misses [1, n-1] with probability < 2^-32.
    panic!("attestation key derivation exhausted {KEYGEN_MAX_ITERATIONS} candidates");
}

/// Checks that `point` is a valid non-identity point on P-256.
pub fn validate_point(point: &[u8; POINT_LEN]) -> Result<(), CryptoError> {
    decode_point(point).map(|_| ())
}

fn decode_point(bytes: &[u8; POINT_LEN]) -> Result<PublicKey, CryptoError> {
    PublicKey::from_sec1_bytes(bytes).map_err(|_| CryptoError::InvalidPoint)
}

fn encode_point(key: &PublicKey) -> [u8; POINT_LEN] {
    let encoded = key.to_encoded_point(false);
    encoded
        .as_bytes()
        .try_into()
        .expect("uncompressed SEC1 P-256 point is 65 bytes")
}
