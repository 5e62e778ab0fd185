//! Hash watermarks and the Hamming-distance metrics used to check them.
//!
//! The watermark is the first `n` bits of `SHAKE-256("FEDSOV-WM-v1" || pk_con)`.
//! Bit `i` is bit `i % 8` (least significant first) of byte `i / 8`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;

use crate::{Error, Result};

pub const WATERMARK_TAG: &[u8] = b"FEDSOV-WM-v1";
pub const MIN_BITS: usize = 8;
pub const MAX_BITS: usize = 1 << 20;

/// Fixed-length bit vector, packed little-endian within each byte.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Watermark {
    n: usize,
    bytes: Vec<u8>,
}

impl Watermark {
    /// All-zero watermark of `n` bits. Lengths outside `8..=2^20` are rejected.
    pub fn zeros(n: usize) -> Result<Self> {
        check_len(n)?;
        Ok(Watermark { n, bytes: vec![0; n.div_ceil(8)] })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut wm = Watermark::zeros(bits.len())?;
        for (i, &b) in bits.iter().enumerate() {
            wm.set(i, b);
        }
        Ok(wm)
    }

    /// Rebuilds a watermark from its packed form; padding bits must be zero.
    pub fn from_packed(n: usize, bytes: &[u8]) -> Result<Self> {
        check_len(n)?;
        if bytes.len() != n.div_ceil(8) {
            return Err(Error::LengthMismatch { expected: n.div_ceil(8), actual: bytes.len() });
        }
        let wm = Watermark { n, bytes: bytes.to_vec() };
        if n % 8 != 0 && bytes[n / 8] >> (n % 8) != 0 {
            return Err(Error::MalformedEncoding("non-zero padding bits"));
        }
        Ok(wm)
    }

    pub fn random<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let mut wm = Watermark::zeros(n)?;
        rng.fill_bytes(&mut wm.bytes);
        wm.clear_padding();
        Ok(wm)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn packed(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.n, "bit index {i} out of range for {} bits", self.n);
        self.bytes[i / 8] >> (i % 8) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.n, "bit index {i} out of range for {} bits", self.n);
        let mask = 1u8 << (i % 8);
        if value {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let b = self.bit(i);
        self.set(i, !b);
    }

    pub fn complement(&self) -> Self {
        let mut out = Watermark { n: self.n, bytes: self.bytes.iter().map(|b| !b).collect() };
        out.clear_padding();
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.n).map(move |i| self.bit(i))
    }

    /// `+1.0` for a set bit, `-1.0` otherwise.
    pub fn signs(&self) -> Vec<f64> {
        self.iter().map(|b| if b { 1.0 } else { -1.0 }).collect()
    }

    fn clear_padding(&mut self) {
        if self.n % 8 != 0 {
            let last = self.bytes.len() - 1;
            self.bytes[last] &= (1u8 << (self.n % 8)) - 1;
        }
    }
}

fn check_len(n: usize) -> Result<()> {
    if !(MIN_BITS..=MAX_BITS).contains(&n) {
        return Err(Error::OutOfRange(format!("watermark length {n} outside [{MIN_BITS}, {MAX_BITS}]")));
    }
    Ok(())
}

/// In-order concatenation `pk_1 || ... || pk_K` of fixed-length key encodings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcatenatedKey {
    pk_len: usize,
    bytes: Vec<u8>,
}

impl ConcatenatedKey {
    pub fn from_encodings<T: AsRef<[u8]>>(pks: &[T]) -> Result<Self> {
        let first = pks.first().ok_or(Error::Degenerate("at least one public key is required"))?;
        let pk_len = first.as_ref().len();
        if pk_len == 0 {
            return Err(Error::Degenerate("empty public key encoding"));
        }
        let mut bytes = Vec::with_capacity(pk_len * pks.len());
        for pk in pks {
            let pk = pk.as_ref();
            if pk.len() != pk_len {
                return Err(Error::LengthMismatch { expected: pk_len, actual: pk.len() });
            }
            bytes.extend_from_slice(pk);
        }
        Ok(ConcatenatedKey { pk_len, bytes })
    }

    /// Splits a raw concatenation into `count` keys of `pk_len` bytes each.
    pub fn from_bytes(bytes: &[u8], pk_len: usize) -> Result<Self> {
        if pk_len == 0 || bytes.is_empty() || bytes.len() % pk_len != 0 {
            return Err(Error::MalformedEncoding("concatenation is not a whole number of keys"));
        }
        Ok(ConcatenatedKey { pk_len, bytes: bytes.to_vec() })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn pk_len(&self) -> usize {
        self.pk_len
    }

    pub fn count(&self) -> usize {
        self.bytes.len() / self.pk_len
    }

    /// The `i`-th key encoding, located by offset.
    pub fn key(&self, i: usize) -> Result<&[u8]> {
        if i >= self.count() {
            return Err(Error::OutOfRange(format!("key index {i} >= {}", self.count())));
        }
        Ok(&self.bytes[i * self.pk_len..(i + 1) * self.pk_len])
    }
}

pub fn generate_watermark(pk_con: &ConcatenatedKey, n: usize) -> Result<Watermark> {
    let mut wm = Watermark::zeros(n)?;
    let mut hasher = Shake256::default();
    hasher.update(WATERMARK_TAG);
    hasher.update(pk_con.as_bytes());
    hasher.finalize_xof().read(&mut wm.bytes);
    wm.clear_padding();
    Ok(wm)
}

fn check_same_len(a: &Watermark, b: &Watermark) -> Result<()> {
    if a.n != b.n {
        return Err(Error::LengthMismatch { expected: a.n, actual: b.n });
    }
    Ok(())
}

pub fn hamming_distance(a: &Watermark, b: &Watermark) -> Result<usize> {
    check_same_len(a, b)?;
    Ok(a.bytes
        .iter()
        .zip(&b.bytes)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum())
}

/// Number of bits in which the extracted watermark differs from the target.
pub fn detection_errors(h: &Watermark, h_prime: &Watermark) -> Result<usize> {
    hamming_distance(h, h_prime)
}

/// `1 - err / n`.
pub fn detection_rate(h: &Watermark, h_prime: &Watermark) -> Result<f64> {
    let err = detection_errors(h, h_prime)?;
    Ok(1.0 - err as f64 / h.n as f64)
}

/// Whether `a` and `b` are within Hamming distance `n_prime` (inclusive).
pub fn is_near_collision(a: &Watermark, b: &Watermark, n_prime: usize) -> Result<bool> {
    check_same_len(a, b)?;
    if n_prime > a.n {
        return Err(Error::OutOfRange(format!("radius {n_prime} exceeds length {}", a.n)));
    }
    Ok(hamming_distance(a, b)? <= n_prime)
}

/// Fraction of uniformly random `n`-bit strings landing within `n_prime` of a
/// fixed random target.
pub fn near_collision_frequency<R: RngCore + ?Sized>(
    n: usize,
    n_prime: usize,
    trials: u64,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::OutOfRange("trials must be positive".into()));
    }
    let target = Watermark::random(n, rng)?;
    let mut hits = 0u64;
    for _ in 0..trials {
        let candidate = Watermark::random(n, rng)?;
        if is_near_collision(&target, &candidate, n_prime)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}
