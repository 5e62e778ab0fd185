//! Ownership verification between a verifier and the clients of a federation.
//!
//! The verifier first extracts the watermark from the suspect model and
//! compares it with the hash of the federation's concatenated public keys.
//! Only if that passes does it send a random challenge to the claimed owner,
//! who must sign it with the secret key matching the public key found at the
//! claimed index inside `pk_con`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::{extract_slice, gen_embedding_matrix, EmbeddingMatrix};
use crate::fl_sim::FlConfig;
use crate::hash_watermark::{generate_watermark, hamming_distance, ConcatenatedKey, Watermark, WATERMARK_TAG};
use crate::pairing_sig::{
    self, decode_pk, decode_signature, hash_to_scalar, CurveId, GroupParams, PairingBackend,
    SecretKey, Signature,
};
use crate::security_boundary::solve_boundary;
use crate::{Error, Result};

pub const CHALLENGE_LEN: usize = 32;
pub const DEFAULT_TARGET_PA_LOG2: f64 = -128.0;

/// Where the watermark lives inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostPosition {
    pub offset: usize,
    pub len: usize,
}

impl HostPosition {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }

    pub fn slice<'a>(&self, params: &'a [f64]) -> Result<&'a [f64]> {
        params.get(self.range()).ok_or_else(|| {
            Error::ShapeMismatch(format!("host slice {:?} outside {} parameters", self.range(), params.len()))
        })
    }
}

/// Everything a verifier needs besides `pk_con`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemPublicParams {
    pub n: usize,
    pub host: HostPosition,
    pub embedding_seed: u64,
    pub curve_id: CurveId,
    /// Domain tag of the SHAKE-256 watermark hash.
    pub hash_tag: String,
    pub target_pa_log2: f64,
    pub err_n: usize,
    pub r_n: f64,
}

impl SystemPublicParams {
    pub fn new(n: usize, host: HostPosition, embedding_seed: u64, curve_id: CurveId, target_pa_log2: f64) -> Result<Self> {
        let b = solve_boundary(n, target_pa_log2)?;
        Ok(SystemPublicParams {
            n,
            host,
            embedding_seed,
            curve_id,
            hash_tag: String::from_utf8_lossy(WATERMARK_TAG).into_owned(),
            target_pa_log2,
            err_n: b.err_n,
            r_n: b.r_n,
        })
    }

    /// Parameters of a federation trained with `cfg`, at the default attacker target.
    pub fn for_config(cfg: &FlConfig, curve_id: CurveId) -> Result<Self> {
        let gamma = cfg.model_shape().gamma();
        let host = HostPosition { offset: gamma.start, len: gamma.len() };
        SystemPublicParams::new(cfg.n, host, cfg.embedding_seed(), curve_id, DEFAULT_TARGET_PA_LOG2)
    }

    /// Checks that the boundary and hash tag are the ones this build derives.
    pub fn validate(&self) -> Result<()> {
        let b = solve_boundary(self.n, self.target_pa_log2)?;
        if b.err_n != self.err_n || b.r_n != self.r_n {
            return Err(Error::InvalidConfig(format!(
                "declared err_n {} / r_n {} but the boundary gives {} / {}",
                self.err_n, self.r_n, b.err_n, b.r_n
            )));
        }
        if self.hash_tag.as_bytes() != WATERMARK_TAG {
            return Err(Error::InvalidConfig(format!("unknown watermark hash tag {:?}", self.hash_tag)));
        }
        if self.host.len == 0 {
            return Err(Error::InvalidConfig("empty host slice".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WatermarkCheck {
    pub extracted: Watermark,
    pub expected: Watermark,
    pub distance: usize,
    pub threshold: usize,
    pub passed: bool,
}

/// Accepts iff `distance < threshold`. Exactly `threshold` errors fail.
pub fn watermark_passes(distance: usize, threshold: usize) -> bool {
    distance < threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    OwnerVerified,
    WatermarkCheckFailed,
    SignatureFailed,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::OwnerVerified => "owner_verified",
            Verdict::WatermarkCheckFailed => "watermark_check_failed",
            Verdict::SignatureFailed => "signature_failed",
        }
    }

    fn decide(wm_pass: bool, sig_pass: bool) -> Self {
        match (wm_pass, sig_pass) {
            (false, _) => Verdict::WatermarkCheckFailed,
            (true, false) => Verdict::SignatureFailed,
            (true, true) => Verdict::OwnerVerified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureRecord {
    pub s_hex: String,
    pub r_hex: String,
}

impl SignatureRecord {
    pub fn from_signature<B: PairingBackend>(sig: &Signature<B>) -> Self {
        SignatureRecord { s_hex: hex::encode(B::encode_g1(&sig.s)), r_hex: hex::encode(B::encode_scalar(&sig.r)) }
    }

    pub fn to_signature<B: PairingBackend>(&self) -> Result<Signature<B>> {
        let mut bytes = decode_hex(&self.s_hex)?;
        bytes.extend_from_slice(&decode_hex(&self.r_hex)?);
        decode_signature::<B>(&bytes)
    }
}

/// One verification session. Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationTranscript {
    pub session_id: String,
    pub model_sha256: String,
    pub n: usize,
    pub err_n: usize,
    pub distance: usize,
    pub wm_pass: bool,
    /// Absent when the watermark check failed and no challenge was sent.
    pub challenge_hex: Option<String>,
    pub sig: Option<SignatureRecord>,
    pub pk_index: usize,
    pub sig_pass: bool,
    pub verdict: Verdict,
    pub ts: String,
    /// The watermark read off the suspect model, packed.
    pub extracted_hex: String,
}

/// SHA-256 over the little-endian bytes of every parameter.
pub fn model_sha256(params: &[f64]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.to_le_bytes());
    }
    h.finalize().into()
}

fn decode_hex(s: &str) -> Result<Vec<u8>> {
    hex::decode(s).map_err(|_| Error::MalformedEncoding("invalid hex"))
}

/// Fresh 32-byte challenge.
pub fn challenge<R: RngCore + ?Sized>(rng: &mut R) -> [u8; CHALLENGE_LEN] {
    let mut m = [0u8; CHALLENGE_LEN];
    rng.fill_bytes(&mut m);
    m
}

/// The owner's answer: a signature on `hash_to_scalar(m)`.
pub fn respond<B: PairingBackend, R: RngCore + ?Sized>(
    sk: &SecretKey<B>,
    group: &GroupParams<B>,
    m: &[u8],
    rng: &mut R,
) -> Signature<B> {
    pairing_sig::sign(&hash_to_scalar(m, group), sk, group, rng)
}

/// The party answering a challenge. `None` means it declined.
pub trait Signer<B: PairingBackend> {
    fn respond(&mut self, challenge: &[u8]) -> Option<Signature<B>>;
}

/// A client holding its secret key.
#[derive(Debug, Clone)]
pub struct HonestSigner<B: PairingBackend, R> {
    pub sk: SecretKey<B>,
    pub group: GroupParams<B>,
    pub rng: R,
}

impl<B: PairingBackend, R: RngCore> Signer<B> for HonestSigner<B, R> {
    fn respond(&mut self, m: &[u8]) -> Option<Signature<B>> {
        Some(respond(&self.sk, &self.group, m, &mut self.rng))
    }
}

/// An impostor with every public transcript but no secret key.
///
/// It replays the most recent signature it has seen, or sends a random
/// well-formed signature when it has seen none.
#[derive(Debug, Clone)]
pub struct TranscriptReplayer<B: PairingBackend, R> {
    pub observed: Vec<Signature<B>>,
    pub group: GroupParams<B>,
    pub rng: R,
}

impl<B: PairingBackend, R: RngCore> TranscriptReplayer<B, R> {
    /// Collects the signatures of every transcript that carries one.
    pub fn from_transcripts(transcripts: &[VerificationTranscript], group: GroupParams<B>, rng: R) -> Result<Self> {
        let observed = transcripts
            .iter()
            .filter_map(|t| t.sig.as_ref())
            .map(|s| s.to_signature::<B>())
            .collect::<Result<Vec<_>>>()?;
        Ok(TranscriptReplayer { observed, group, rng })
    }
}

impl<B: PairingBackend, R: RngCore> Signer<B> for TranscriptReplayer<B, R> {
    fn respond(&mut self, _m: &[u8]) -> Option<Signature<B>> {
        if let Some(sig) = self.observed.last() {
            return Some(*sig);
        }
        let k = B::random_nonzero_scalar(&mut self.rng);
        Some(Signature { s: B::g1_mul(&self.group.g1, &k), r: B::random_nonzero_scalar(&mut self.rng) })
    }
}

/// Session metadata supplied by the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionInfo {
    pub session_id: String,
    pub ts: String,
}

/// Verifier state: public parameters plus the regenerated embedding matrix.
#[derive(Debug, Clone)]
pub struct Verifier<B: PairingBackend> {
    pub pp: SystemPublicParams,
    pub group: GroupParams<B>,
    pub matrix: EmbeddingMatrix,
}

impl<B: PairingBackend> Verifier<B> {
    pub fn new(pp: SystemPublicParams) -> Result<Self> {
        pp.validate()?;
        if pp.curve_id != B::CURVE_ID {
            return Err(Error::InvalidConfig(format!(
                "parameters name curve {} but the verifier runs {}",
                pp.curve_id.as_str(),
                B::CURVE_ID.as_str()
            )));
        }
        let matrix = gen_embedding_matrix(pp.host.len, pp.n, pp.embedding_seed)?;
        Ok(Verifier { group: pairing_sig::setup::<B>(None), matrix, pp })
    }

    pub fn watermark_check(&self, params: &[f64], pk_con: &ConcatenatedKey) -> Result<WatermarkCheck> {
        let extracted = extract_slice(self.pp.host.slice(params)?, &self.matrix)?;
        let expected = generate_watermark(pk_con, self.pp.n)?;
        let distance = hamming_distance(&expected, &extracted)?;
        Ok(WatermarkCheck {
            extracted,
            expected,
            distance,
            threshold: self.pp.err_n,
            passed: watermark_passes(distance, self.pp.err_n),
        })
    }

    /// Runs both checks against the key at `pk_index` inside `pk_con`.
    pub fn verify_ownership<R: RngCore + ?Sized>(
        &self,
        params: &[f64],
        pk_con: &ConcatenatedKey,
        pk_index: usize,
        signer: &mut dyn Signer<B>,
        session: SessionInfo,
        rng: &mut R,
    ) -> Result<VerificationTranscript> {
        if pk_con.pk_len() != pairing_sig::pk_len::<B>() {
            return Err(Error::LengthMismatch { expected: pairing_sig::pk_len::<B>(), actual: pk_con.pk_len() });
        }
        let pk = decode_pk::<B>(pk_con.key(pk_index)?)?;
        let wm = self.watermark_check(params, pk_con)?;
        let mut challenge_hex = None;
        let mut sig = None;
        let mut sig_pass = false;
        if wm.passed {
            let m = challenge(rng);
            challenge_hex = Some(hex::encode(m));
            if let Some(s) = signer.respond(&m) {
                sig_pass = pairing_sig::verify(&hash_to_scalar(&m, &self.group), &s, &pk, &self.group);
                sig = Some(SignatureRecord::from_signature(&s));
            }
        }
        Ok(VerificationTranscript {
            session_id: session.session_id,
            model_sha256: hex::encode(model_sha256(params)),
            n: self.pp.n,
            err_n: self.pp.err_n,
            distance: wm.distance,
            wm_pass: wm.passed,
            challenge_hex,
            sig,
            pk_index,
            sig_pass,
            verdict: Verdict::decide(wm.passed, sig_pass),
            ts: session.ts,
            extracted_hex: hex::encode(wm.extracted.packed()),
        })
    }

    /// Recomputes every derived field of `t` from its stored inputs and `pk_con`.
    ///
    /// The result equals `t` exactly when the transcript is genuine.
    pub fn reverify(&self, t: &VerificationTranscript, pk_con: &ConcatenatedKey) -> Result<VerificationTranscript> {
        let extracted = Watermark::from_packed(t.n, &decode_hex(&t.extracted_hex)?)?;
        let expected = generate_watermark(pk_con, self.pp.n)?;
        let distance = hamming_distance(&expected, &extracted)?;
        let wm_pass = watermark_passes(distance, self.pp.err_n);
        let pk = decode_pk::<B>(pk_con.key(t.pk_index)?)?;
        let sig_pass = match (&t.challenge_hex, &t.sig) {
            (Some(m), Some(s)) if wm_pass => {
                let m = decode_hex(m)?;
                pairing_sig::verify(&hash_to_scalar(&m, &self.group), &s.to_signature::<B>()?, &pk, &self.group)
            }
            _ => false,
        };
        Ok(VerificationTranscript {
            n: self.pp.n,
            err_n: self.pp.err_n,
            distance,
            wm_pass,
            sig_pass,
            verdict: Verdict::decide(wm_pass, sig_pass),
            ..t.clone()
        })
    }
}
