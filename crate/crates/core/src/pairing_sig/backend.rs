use alloc::vec::Vec;
use core::fmt::Debug;

use num_bigint::BigUint;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::Result;

/// Identifies the group a key or signature lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveId {
    /// Insecure order-1009 subgroup of `Z_10091^*`, for exhaustive testing.
    DeskToy,
    /// BLS12-381, roughly 128-bit pairing security.
    Bls12_381,
}

impl CurveId {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveId::DeskToy => "desk_toy",
            CurveId::Bls12_381 => "bls12_381",
        }
    }
}

/// Requested security of the signature system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecurityLevel {
    Desk,
    Production,
}

impl SecurityLevel {
    pub fn curve_id(self) -> CurveId {
        match self {
            SecurityLevel::Desk => CurveId::DeskToy,
            SecurityLevel::Production => CurveId::Bls12_381,
        }
    }
}

/// A bilinear group `e: G1 x G2 -> Gt` of prime order with canonical encodings.
///
/// Scalars are integers modulo the group order. Group elements are written
/// additively: `g1_mul(p, k)` is `p^k` in multiplicative notation.
pub trait PairingBackend: Copy + Debug + Default + PartialEq + Send + Sync + 'static {
    type Scalar: Copy + Debug + PartialEq + Send + Sync;
    type G1: Copy + Debug + PartialEq + Send + Sync;
    type G2: Copy + Debug + PartialEq + Send + Sync;
    type Gt: Copy + Debug + PartialEq + Send + Sync;

    const CURVE_ID: CurveId;
    const SCALAR_LEN: usize;
    const G1_LEN: usize;
    const G2_LEN: usize;

    fn order() -> BigUint;

    fn scalar_from_u64(v: u64) -> Self::Scalar;
    /// Reduces 64 uniformly random bytes to a near-uniform scalar.
    fn scalar_from_wide(bytes: &[u8; 64]) -> Self::Scalar;
    fn scalar_add(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_mul(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_invert(a: &Self::Scalar) -> Option<Self::Scalar>;
    fn scalar_is_zero(a: &Self::Scalar) -> bool;

    fn g1_generator() -> Self::G1;
    fn g2_generator() -> Self::G2;
    fn g1_mul(p: &Self::G1, k: &Self::Scalar) -> Self::G1;
    fn g2_mul(p: &Self::G2, k: &Self::Scalar) -> Self::G2;
    fn g2_add(a: &Self::G2, b: &Self::G2) -> Self::G2;
    fn g1_is_identity(p: &Self::G1) -> bool;
    fn gt_is_identity(p: &Self::Gt) -> bool;

    fn pairing(p: &Self::G1, q: &Self::G2) -> Self::Gt;

    /// Big-endian, fixed length `SCALAR_LEN`.
    fn encode_scalar(s: &Self::Scalar) -> Vec<u8>;
    /// Rejects wrong lengths and non-canonical (`>= order`) values.
    fn decode_scalar(bytes: &[u8]) -> Result<Self::Scalar>;
    fn encode_g1(p: &Self::G1) -> Vec<u8>;
    /// Rejects wrong lengths and points outside the prime-order subgroup.
    fn decode_g1(bytes: &[u8]) -> Result<Self::G1>;
    fn encode_g2(p: &Self::G2) -> Vec<u8>;
    fn decode_g2(bytes: &[u8]) -> Result<Self::G2>;

    fn random_scalar<R: RngCore + ?Sized>(rng: &mut R) -> Self::Scalar {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Self::scalar_from_wide(&wide)
    }

    /// Uniform element of `Z_p^*`; zero draws are resampled.
    fn random_nonzero_scalar<R: RngCore + ?Sized>(rng: &mut R) -> Self::Scalar {
        loop {
            let s = Self::random_scalar(rng);
            if !Self::scalar_is_zero(&s) {
                return s;
            }
        }
    }
}
