//! Short signature over a bilinear group.
//!
//! Keys are `sk = (x, y)`, `pk = (u, v) = (g2^x, g2^y)`. A signature on a
//! scalar message `m` is `(s, r)` with `s = g1^(1/(x + m + y*r))` for a random
//! nonce `r`, and it verifies when `e(s, u * g2^m * v^r) = e(g1, g2)`. The
//! scheme is written for asymmetric (type-3) pairings; the desk backend is
//! symmetric and simply uses the same group on both sides.

mod backend;
pub mod bls;
pub mod desk;

use alloc::vec::Vec;

use num_bigint::BigUint;
use rand_core::RngCore;
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;

pub use backend::{CurveId, PairingBackend, SecurityLevel};
pub use bls::Bls12;
pub use desk::Desk;

use crate::{Error, Result};

const HASH_TO_SCALAR_TAG: &[u8] = b"FEDSOV-H2S-v1";

/// Public system parameters of the signature scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupParams<B: PairingBackend> {
    pub curve_id: CurveId,
    /// Prime order of all three groups.
    pub order: BigUint,
    pub g1: B::G1,
    pub g2: B::G2,
    /// `e(g1, g2)`, cached since every verification compares against it.
    pub gt: B::Gt,
}

/// Initializes the signature system for backend `B`.
///
/// Both backends use fixed generators, so the seed does not influence the
/// result; it is accepted so that every setup call can be recorded with the
/// seed of the run that issued it.
pub fn setup<B: PairingBackend>(_seed: Option<u64>) -> GroupParams<B> {
    let g1 = B::g1_generator();
    let g2 = B::g2_generator();
    GroupParams {
        curve_id: B::CURVE_ID,
        order: B::order(),
        g1,
        g2,
        gt: B::pairing(&g1, &g2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecretKey<B: PairingBackend> {
    pub x: B::Scalar,
    pub y: B::Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublicKey<B: PairingBackend> {
    pub u: B::G2,
    pub v: B::G2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyPair<B: PairingBackend> {
    pub sk: SecretKey<B>,
    pub pk: PublicKey<B>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signature<B: PairingBackend> {
    pub s: B::G1,
    pub r: B::Scalar,
}

pub fn keygen<B: PairingBackend, R: RngCore + ?Sized>(params: &GroupParams<B>, rng: &mut R) -> KeyPair<B> {
    let x = B::random_nonzero_scalar(rng);
    let y = B::random_nonzero_scalar(rng);
    KeyPair {
        sk: SecretKey { x, y },
        pk: derive_public(params, &SecretKey { x, y }),
    }
}

/// Builds a key pair from chosen secret scalars.
pub fn keypair_from_secret<B: PairingBackend>(
    params: &GroupParams<B>,
    x: B::Scalar,
    y: B::Scalar,
) -> Result<KeyPair<B>> {
    if B::scalar_is_zero(&x) || B::scalar_is_zero(&y) {
        return Err(Error::Degenerate("secret scalars must be non-zero"));
    }
    let sk = SecretKey { x, y };
    Ok(KeyPair { sk, pk: derive_public(params, &sk) })
}

pub fn derive_public<B: PairingBackend>(params: &GroupParams<B>, sk: &SecretKey<B>) -> PublicKey<B> {
    PublicKey {
        u: B::g2_mul(&params.g2, &sk.x),
        v: B::g2_mul(&params.g2, &sk.y),
    }
}

fn signing_exponent<B: PairingBackend>(m: &B::Scalar, sk: &SecretKey<B>, r: &B::Scalar) -> Option<B::Scalar> {
    let denom = B::scalar_add(&B::scalar_add(&sk.x, m), &B::scalar_mul(&sk.y, r));
    B::scalar_invert(&denom)
}

pub fn sign<B: PairingBackend, R: RngCore + ?Sized>(
    m: &B::Scalar,
    sk: &SecretKey<B>,
    params: &GroupParams<B>,
    rng: &mut R,
) -> Signature<B> {
    let r = B::random_nonzero_scalar(rng);
    sign_with_nonce(m, sk, params, r, rng)
}

/// Signs with a caller-chosen nonce `r`. If `r` is zero or makes
/// `x + m + y*r` vanish, fresh nonces are drawn from `rng` instead.
pub fn sign_with_nonce<B: PairingBackend, R: RngCore + ?Sized>(
    m: &B::Scalar,
    sk: &SecretKey<B>,
    params: &GroupParams<B>,
    mut r: B::Scalar,
    rng: &mut R,
) -> Signature<B> {
    loop {
        if !B::scalar_is_zero(&r) {
            if let Some(exp) = signing_exponent(m, sk, &r) {
                return Signature { s: B::g1_mul(&params.g1, &exp), r };
            }
        }
        r = B::random_nonzero_scalar(rng);
    }
}

pub fn verify<B: PairingBackend>(
    m: &B::Scalar,
    sig: &Signature<B>,
    pk: &PublicKey<B>,
    params: &GroupParams<B>,
) -> bool {
    if B::g1_is_identity(&sig.s) || B::scalar_is_zero(&sig.r) {
        return false;
    }
    let rhs = B::g2_add(
        &B::g2_add(&pk.u, &B::g2_mul(&params.g2, m)),
        &B::g2_mul(&pk.v, &sig.r),
    );
    B::pairing(&sig.s, &rhs) == params.gt
}

/// Verifies encoded inputs. Undecodable bytes are an error, not a rejection.
pub fn verify_encoded<B: PairingBackend>(
    m: &[u8],
    sig: &[u8],
    pk: &[u8],
    params: &GroupParams<B>,
) -> Result<bool> {
    let m = B::decode_scalar(m)?;
    let sig = decode_signature::<B>(sig)?;
    let pk = decode_pk::<B>(pk)?;
    Ok(verify(&m, &sig, &pk, params))
}

pub fn pk_len<B: PairingBackend>() -> usize {
    2 * B::G2_LEN
}

pub fn signature_len<B: PairingBackend>() -> usize {
    B::G1_LEN + B::SCALAR_LEN
}

/// `enc(u) || enc(v)`, fixed length per curve.
pub fn encode_pk<B: PairingBackend>(pk: &PublicKey<B>) -> Vec<u8> {
    let mut out = B::encode_g2(&pk.u);
    out.extend_from_slice(&B::encode_g2(&pk.v));
    out
}

pub fn decode_pk<B: PairingBackend>(bytes: &[u8]) -> Result<PublicKey<B>> {
    if bytes.len() != pk_len::<B>() {
        return Err(Error::MalformedEncoding("public key has the wrong length"));
    }
    let (u, v) = bytes.split_at(B::G2_LEN);
    Ok(PublicKey { u: B::decode_g2(u)?, v: B::decode_g2(v)? })
}

pub fn encode_signature<B: PairingBackend>(sig: &Signature<B>) -> Vec<u8> {
    let mut out = B::encode_g1(&sig.s);
    out.extend_from_slice(&B::encode_scalar(&sig.r));
    out
}

pub fn decode_signature<B: PairingBackend>(bytes: &[u8]) -> Result<Signature<B>> {
    if bytes.len() != signature_len::<B>() {
        return Err(Error::MalformedEncoding("signature has the wrong length"));
    }
    let (s, r) = bytes.split_at(B::G1_LEN);
    Ok(Signature { s: B::decode_g1(s)?, r: B::decode_scalar(r)? })
}

/// Maps an arbitrary byte string into `Z_p` through domain-separated SHAKE-256.
pub fn hash_to_scalar<B: PairingBackend>(message: &[u8], _params: &GroupParams<B>) -> B::Scalar {
    let mut hasher = Shake256::default();
    hasher.update(HASH_TO_SCALAR_TAG);
    hasher.update(message);
    let mut wide = [0u8; 64];
    hasher.finalize_xof().read(&mut wide);
    B::scalar_from_wide(&wide)
}
