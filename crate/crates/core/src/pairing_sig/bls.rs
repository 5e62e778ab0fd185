//! BLS12-381 backend. Signatures live in `G1`, public keys in `G2`.

use alloc::vec::Vec;

use bls12_381::{pairing, G1Affine, G1Projective, G2Affine, G2Projective, Gt, Scalar};
use num_bigint::BigUint;

use super::backend::{CurveId, PairingBackend};
use crate::{Error, Result};

const ORDER_BE: [u8; 32] = [
    0x73, 0xed, 0xa7, 0x53, 0x29, 0x9d, 0x7d, 0x48, 0x33, 0x39, 0xd8, 0x08, 0x09, 0xa1, 0xd8, 0x05,
    0x53, 0xbd, 0xa4, 0x02, 0xff, 0xfe, 0x5b, 0xfe, 0xff, 0xff, 0xff, 0xff, 0x00, 0x00, 0x00, 0x01,
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Bls12;

impl PairingBackend for Bls12 {
    type Scalar = Scalar;
    type G1 = G1Projective;
    type G2 = G2Projective;
    type Gt = Gt;

    const CURVE_ID: CurveId = CurveId::Bls12_381;
    const SCALAR_LEN: usize = 32;
    const G1_LEN: usize = 48;
    const G2_LEN: usize = 96;

    fn order() -> BigUint {
        BigUint::from_bytes_be(&ORDER_BE)
    }

    fn scalar_from_u64(v: u64) -> Scalar {
        Scalar::from(v)
    }

    fn scalar_from_wide(bytes: &[u8; 64]) -> Scalar {
        Scalar::from_bytes_wide(bytes)
    }

    fn scalar_add(a: &Scalar, b: &Scalar) -> Scalar {
        a + b
    }

    fn scalar_mul(a: &Scalar, b: &Scalar) -> Scalar {
        a * b
    }

    fn scalar_invert(a: &Scalar) -> Option<Scalar> {
        Option::from(a.invert())
    }

    fn scalar_is_zero(a: &Scalar) -> bool {
        *a == Scalar::zero()
    }

    fn g1_generator() -> G1Projective {
        G1Projective::generator()
    }

    fn g2_generator() -> G2Projective {
        G2Projective::generator()
    }

    fn g1_mul(p: &G1Projective, k: &Scalar) -> G1Projective {
        p * k
    }

    fn g2_mul(p: &G2Projective, k: &Scalar) -> G2Projective {
        p * k
    }

    fn g2_add(a: &G2Projective, b: &G2Projective) -> G2Projective {
        a + b
    }

    fn g1_is_identity(p: &G1Projective) -> bool {
        bool::from(p.is_identity())
    }

    fn gt_is_identity(p: &Gt) -> bool {
        *p == Gt::identity()
    }

    fn pairing(p: &G1Projective, q: &G2Projective) -> Gt {
        pairing(&G1Affine::from(p), &G2Affine::from(q))
    }

    fn encode_scalar(s: &Scalar) -> Vec<u8> {
        let mut bytes = s.to_bytes();
        bytes.reverse();
        bytes.to_vec()
    }

    fn decode_scalar(bytes: &[u8]) -> Result<Scalar> {
        let mut le: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::MalformedEncoding("scalars are 32 bytes"))?;
        le.reverse();
        Option::from(Scalar::from_bytes(&le))
            .ok_or(Error::MalformedEncoding("scalar not reduced modulo the group order"))
    }

    fn encode_g1(p: &G1Projective) -> Vec<u8> {
        G1Affine::from(p).to_compressed().to_vec()
    }

    fn decode_g1(bytes: &[u8]) -> Result<G1Projective> {
        let arr: [u8; 48] = bytes
            .try_into()
            .map_err(|_| Error::MalformedEncoding("compressed G1 points are 48 bytes"))?;
        Option::<G1Affine>::from(G1Affine::from_compressed(&arr))
            .map(G1Projective::from)
            .ok_or(Error::MalformedEncoding("not a G1 subgroup point"))
    }

    fn encode_g2(p: &G2Projective) -> Vec<u8> {
        G2Affine::from(p).to_compressed().to_vec()
    }

    fn decode_g2(bytes: &[u8]) -> Result<G2Projective> {
        let arr: [u8; 96] = bytes
            .try_into()
            .map_err(|_| Error::MalformedEncoding("compressed G2 points are 96 bytes"))?;
        Option::<G2Affine>::from(G2Affine::from_compressed(&arr))
            .map(G2Projective::from)
            .ok_or(Error::MalformedEncoding("not a G2 subgroup point"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_matches_scalar_field() {
        // -1 in the field is order - 1
        let minus_one = Bls12::encode_scalar(&(-Scalar::one()));
        let expected = Bls12::order() - 1u32;
        assert_eq!(BigUint::from_bytes_be(&minus_one), expected);
        assert!(Bls12::decode_scalar(&ORDER_BE).is_err());
    }

    #[test]
    fn pairing_is_non_degenerate_and_bilinear() {
        let g1 = Bls12::g1_generator();
        let g2 = Bls12::g2_generator();
        let e = Bls12::pairing(&g1, &g2);
        assert!(!Bls12::gt_is_identity(&e));
        let a = Scalar::from(12345u64);
        let b = Scalar::from(678u64);
        let lhs = Bls12::pairing(&(g1 * a), &(g2 * b));
        assert_eq!(lhs, e * (a * b));
    }
}
