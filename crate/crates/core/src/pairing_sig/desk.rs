//! Deliberately tiny pairing group for exhaustive tests.
//!
//! `G1 = G2 = Gt` is the subgroup of order `p = 1009` in `Z_q^*` with
//! `q = 10 * 1009 + 1 = 10091`. The pairing recovers discrete logarithms by
//! walking the powers of the generator, which is only possible because the
//! group is so small: `e(g^a, g^b) = g^(ab)`.

use alloc::vec::Vec;

use num_bigint::BigUint;

use super::backend::{CurveId, PairingBackend};
use crate::{Error, Result};

/// Prime order of the desk group.
pub const DESK_ORDER: u32 = 1009;
/// Modulus of the ambient multiplicative group.
pub const DESK_MODULUS: u32 = 10091;
/// `2^((q-1)/p) mod q`, a generator of the order-`p` subgroup.
pub const DESK_GENERATOR: u32 = 1024;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Desk;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeskScalar(u32);

impl DeskScalar {
    pub fn new(v: u64) -> Self {
        DeskScalar((v % u64::from(DESK_ORDER)) as u32)
    }

    pub fn value(self) -> u32 {
        self.0
    }
}

/// Element of the order-`p` subgroup, stored as its residue mod `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DeskElement(u32);

impl DeskElement {
    pub fn residue(self) -> u32 {
        self.0
    }

    /// `g^k` for the fixed generator.
    pub fn from_exponent(k: u32) -> Self {
        DeskElement(pow_mod(DESK_GENERATOR, k, DESK_MODULUS))
    }

    /// Discrete logarithm to base `g`, by exhaustive walk.
    pub fn exponent(self) -> u32 {
        let mut acc = 1u32;
        for k in 0..DESK_ORDER {
            if acc == self.0 {
                return k;
            }
            acc = mul_mod(acc, DESK_GENERATOR, DESK_MODULUS);
        }
        unreachable!("desk elements are constructed inside the subgroup")
    }

    fn in_subgroup(residue: u32) -> bool {
        residue != 0 && residue < DESK_MODULUS && pow_mod(residue, DESK_ORDER, DESK_MODULUS) == 1
    }
}

fn mul_mod(a: u32, b: u32, m: u32) -> u32 {
    ((u64::from(a) * u64::from(b)) % u64::from(m)) as u32
}

pub(crate) fn pow_mod(base: u32, mut exp: u32, m: u32) -> u32 {
    let mut result = 1u32;
    let mut b = base % m;
    while exp > 0 {
        if exp & 1 == 1 {
            result = mul_mod(result, b, m);
        }
        b = mul_mod(b, b, m);
        exp >>= 1;
    }
    result
}

fn decode_u16(bytes: &[u8]) -> Result<u32> {
    let arr: [u8; 2] = bytes
        .try_into()
        .map_err(|_| Error::MalformedEncoding("desk values are 2 bytes"))?;
    Ok(u32::from(u16::from_be_bytes(arr)))
}

impl PairingBackend for Desk {
    type Scalar = DeskScalar;
    type G1 = DeskElement;
    type G2 = DeskElement;
    type Gt = DeskElement;

    const CURVE_ID: CurveId = CurveId::DeskToy;
    const SCALAR_LEN: usize = 2;
    const G1_LEN: usize = 2;
    const G2_LEN: usize = 2;

    fn order() -> BigUint {
        BigUint::from(DESK_ORDER)
    }

    fn scalar_from_u64(v: u64) -> DeskScalar {
        DeskScalar::new(v)
    }

    fn scalar_from_wide(bytes: &[u8; 64]) -> DeskScalar {
        let mut head = [0u8; 16];
        head.copy_from_slice(&bytes[..16]);
        DeskScalar((u128::from_be_bytes(head) % u128::from(DESK_ORDER)) as u32)
    }

    fn scalar_add(a: &DeskScalar, b: &DeskScalar) -> DeskScalar {
        DeskScalar((a.0 + b.0) % DESK_ORDER)
    }

    fn scalar_mul(a: &DeskScalar, b: &DeskScalar) -> DeskScalar {
        DeskScalar(mul_mod(a.0, b.0, DESK_ORDER))
    }

    fn scalar_invert(a: &DeskScalar) -> Option<DeskScalar> {
        if a.0 == 0 {
            None
        } else {
            // Fermat: a^(p-2) for prime p.
            Some(DeskScalar(pow_mod(a.0, DESK_ORDER - 2, DESK_ORDER)))
        }
    }

    fn scalar_is_zero(a: &DeskScalar) -> bool {
        a.0 == 0
    }

    fn g1_generator() -> DeskElement {
        DeskElement(DESK_GENERATOR)
    }

    fn g2_generator() -> DeskElement {
        DeskElement(DESK_GENERATOR)
    }

    fn g1_mul(p: &DeskElement, k: &DeskScalar) -> DeskElement {
        DeskElement(pow_mod(p.0, k.0, DESK_MODULUS))
    }

    fn g2_mul(p: &DeskElement, k: &DeskScalar) -> DeskElement {
        DeskElement(pow_mod(p.0, k.0, DESK_MODULUS))
    }

    fn g2_add(a: &DeskElement, b: &DeskElement) -> DeskElement {
        DeskElement(mul_mod(a.0, b.0, DESK_MODULUS))
    }

    fn g1_is_identity(p: &DeskElement) -> bool {
        p.0 == 1
    }

    fn gt_is_identity(p: &DeskElement) -> bool {
        p.0 == 1
    }

    fn pairing(p: &DeskElement, q: &DeskElement) -> DeskElement {
        let k = mul_mod(p.exponent(), q.exponent(), DESK_ORDER);
        DeskElement::from_exponent(k)
    }

    fn encode_scalar(s: &DeskScalar) -> Vec<u8> {
        (s.0 as u16).to_be_bytes().to_vec()
    }

    fn decode_scalar(bytes: &[u8]) -> Result<DeskScalar> {
        let v = decode_u16(bytes)?;
        if v >= DESK_ORDER {
            return Err(Error::MalformedEncoding("scalar not reduced modulo the group order"));
        }
        Ok(DeskScalar(v))
    }

    fn encode_g1(p: &DeskElement) -> Vec<u8> {
        (p.0 as u16).to_be_bytes().to_vec()
    }

    fn decode_g1(bytes: &[u8]) -> Result<DeskElement> {
        let v = decode_u16(bytes)?;
        if !DeskElement::in_subgroup(v) {
            return Err(Error::MalformedEncoding("residue outside the prime-order subgroup"));
        }
        Ok(DeskElement(v))
    }

    fn encode_g2(p: &DeskElement) -> Vec<u8> {
        Self::encode_g1(p)
    }

    fn decode_g2(bytes: &[u8]) -> Result<DeskElement> {
        Self::decode_g1(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_prime(n: u32) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
    }

    #[test]
    fn parameters_are_prime_and_generator_has_order_p() {
        assert!(is_prime(DESK_ORDER));
        assert!(is_prime(DESK_MODULUS));
        assert_eq!((DESK_MODULUS - 1) % DESK_ORDER, 0);
        assert_eq!(pow_mod(2, (DESK_MODULUS - 1) / DESK_ORDER, DESK_MODULUS), DESK_GENERATOR);
        // brute-force order of g
        let mut acc = DESK_GENERATOR;
        let mut order = 1;
        while acc != 1 {
            acc = mul_mod(acc, DESK_GENERATOR, DESK_MODULUS);
            order += 1;
        }
        assert_eq!(order, DESK_ORDER);
    }

    #[test]
    fn subgroup_has_exactly_p_members() {
        let members = (1..DESK_MODULUS).filter(|&r| DeskElement::in_subgroup(r)).count();
        assert_eq!(members as u32, DESK_ORDER);
    }

    #[test]
    fn exponent_inverts_from_exponent() {
        for k in [0, 1, 2, 500, 1008] {
            assert_eq!(DeskElement::from_exponent(k).exponent(), k);
        }
    }

    #[test]
    fn pairing_is_bilinear_on_grid() {
        let g = Desk::g1_generator();
        let e_gg = Desk::pairing(&g, &g);
        assert!(!Desk::gt_is_identity(&e_gg));
        for a in (0..DESK_ORDER).step_by(37) {
            for b in (0..DESK_ORDER).step_by(53) {
                let ga = Desk::g1_mul(&g, &DeskScalar(a));
                let gb = Desk::g2_mul(&g, &DeskScalar(b));
                let lhs = Desk::pairing(&ga, &gb);
                let rhs = DeskElement(pow_mod(e_gg.0, mul_mod(a, b, DESK_ORDER), DESK_MODULUS));
                assert_eq!(lhs, rhs, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn scalar_inverse_matches_extended_euclid() {
        fn egcd_inverse(a: i64, m: i64) -> i64 {
            let (mut old_r, mut r) = (a, m);
            let (mut old_s, mut s) = (1i64, 0i64);
            while r != 0 {
                let q = old_r / r;
                (old_r, r) = (r, old_r - q * r);
                (old_s, s) = (s, old_s - q * s);
            }
            old_s.rem_euclid(m)
        }
        for a in 1..DESK_ORDER {
            let inv = Desk::scalar_invert(&DeskScalar(a)).unwrap();
            assert_eq!(i64::from(inv.0), egcd_inverse(i64::from(a), i64::from(DESK_ORDER)));
        }
        assert!(Desk::scalar_invert(&DeskScalar(0)).is_none());
    }

    #[test]
    fn decode_rejects_non_canonical() {
        assert!(Desk::decode_scalar(&1009u16.to_be_bytes()).is_err());
        assert!(Desk::decode_scalar(&[0]).is_err());
        assert!(Desk::decode_g1(&2u16.to_be_bytes()).is_err());
        assert!(Desk::decode_g1(&0u16.to_be_bytes()).is_err());
        assert_eq!(Desk::decode_g1(&1024u16.to_be_bytes()).unwrap(), Desk::g1_generator());
    }
}
