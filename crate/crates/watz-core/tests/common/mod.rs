//! Independent reference implementations used as test oracles. These stay
//! deliberately separate from the code paths they check: the CMAC below is
//! written from the RFC 4493 construction on top of a raw AES block, and
//! the scalar multiplication is schoolbook affine arithmetic on big ints.

use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;
use num_bigint::BigInt;

/// RFC 4493 AES-128-CMAC, straight from the spec's pseudocode.
pub fn ref_cmac(key: &[u8; 16], message: &[u8]) -> [u8; 16] {
    let cipher = Aes128::new(key.into());
    let encrypt = |block: [u8; 16]| -> [u8; 16] {
        let mut b = block.into();
        cipher.encrypt_block(&mut b);
        b.into()
    };

    // subkey generation: L = AES(K, 0), K1 = dbl(L), K2 = dbl(K1)
    let l = encrypt([0u8; 16]);
    let k1 = dbl(&l);
    let k2 = dbl(&k1);

    let n = message.len().div_ceil(16);
    let (n, last_complete) = if n == 0 { (1, false) } else { (n, message.len().is_multiple_of(16)) };

    let mut last = [0u8; 16];
    if last_complete {
        for (i, b) in message[(n - 1) * 16..].iter().enumerate() {
            last[i] = b ^ k1[i];
        }
    } else {
        let tail = &message[(n - 1) * 16..];
        let mut padded = [0u8; 16];
        padded[..tail.len()].copy_from_slice(tail);
        padded[tail.len()] = 0x80;
        for i in 0..16 {
            last[i] = padded[i] ^ k2[i];
        }
    }

    let mut x = [0u8; 16];
    for block in 0..n - 1 {
        let mut y = [0u8; 16];
        for i in 0..16 {
            y[i] = x[i] ^ message[block * 16 + i];
        }
        x = encrypt(y);
    }
    let mut y = [0u8; 16];
    for i in 0..16 {
        y[i] = x[i] ^ last[i];
    }
    encrypt(y)
}

// doubling in GF(2^128) with the CMAC reduction polynomial
fn dbl(block: &[u8; 16]) -> [u8; 16] {
    let mut out = [0u8; 16];
    let mut carry = 0u8;
    for i in (0..16).rev() {
        out[i] = (block[i] << 1) | carry;
        carry = block[i] >> 7;
    }
    if carry == 1 {
        out[15] ^= 0x87;
    }
    out
}

/// Reference P-256 scalar multiplication of the base point, returning the
/// uncompressed SEC1 encoding. Affine double-and-add; slow but independent.
pub fn ref_p256_mul_base(scalar: &[u8; 32]) -> [u8; 65] {
    let p = hex_int("ffffffff00000001000000000000000000000000ffffffffffffffffffffffff");
    let a = &p - BigInt::from(3);
    let gx = hex_int("6b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296");
    let gy = hex_int("4fe342e2fe1a7f9b8ee7eb4a7c0f9e162bce33576b315ececbb6406837bf51f5");

    let k = BigInt::from_bytes_be(num_bigint::Sign::Plus, scalar);
    let mut acc: Option<(BigInt, BigInt)> = None;
    let mut addend = (gx, gy);

    for bit in 0..k.bits() {
        if k.bit(bit) {
            acc = Some(match acc {
                None => addend.clone(),
                Some(point) => add(&point, &addend, &p, &a),
            });
        }
        addend = double(&addend, &p, &a);
    }

    let (x, y) = acc.expect("scalar must be non-zero");
    let mut out = [0u8; 65];
    out[0] = 0x04;
    out[1..33].copy_from_slice(&to_32(&x));
    out[33..].copy_from_slice(&to_32(&y));
    out
}

fn add(
    lhs: &(BigInt, BigInt),
    rhs: &(BigInt, BigInt),
    p: &BigInt,
    a: &BigInt,
) -> (BigInt, BigInt) {
    if lhs.0 == rhs.0 {
        assert_eq!(lhs.1, rhs.1, "oracle does not handle inverse points");
        return double(lhs, p, a);
    }
    let lambda = (&rhs.1 - &lhs.1) * inv(&(&rhs.0 - &lhs.0), p) % p;
    finish(lhs, &rhs.0, &lambda, p)
}

fn double(point: &(BigInt, BigInt), p: &BigInt, a: &BigInt) -> (BigInt, BigInt) {
    let lambda = (BigInt::from(3) * &point.0 * &point.0 + a) * inv(&(BigInt::from(2) * &point.1), p) % p;
    finish(point, &point.0, &lambda, p)
}

fn finish(lhs: &(BigInt, BigInt), rx: &BigInt, lambda: &BigInt, p: &BigInt) -> (BigInt, BigInt) {
    let x = ((lambda * lambda - &lhs.0 - rx) % p + p) % p;
    let y = ((lambda * (&lhs.0 - &x) - &lhs.1) % p + p) % p;
    (x, y)
}

// modular inverse via Fermat: n^(p-2) mod p
fn inv(n: &BigInt, p: &BigInt) -> BigInt {
    let n = ((n % p) + p) % p;
    n.modpow(&(p - BigInt::from(2)), p)
}

fn hex_int(s: &str) -> BigInt {
    BigInt::parse_bytes(s.as_bytes(), 16).unwrap()
}

fn to_32(n: &BigInt) -> [u8; 32] {
    let (_, bytes) = n.to_bytes_be();
    let mut out = [0u8; 32];
    out[32 - bytes.len()..].copy_from_slice(&bytes);
    out
}

/// Parses one whitespace-separated fixture line; "-" denotes empty.
pub fn fields(line: &str) -> Vec<Vec<u8>> {
    line.split_whitespace()
        .map(|part| {
            if part == "-" {
                Vec::new()
            } else {
                hex::decode(part).expect("fixture fields are hex")
            }
        })
        .collect()
}

/// Yields the non-comment lines of a fixture file under `tests/vectors/`.
pub fn fixture_lines(name: &str) -> Vec<String> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/vectors")
        .join(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}
