//! Run directory layout and the file formats inside it.
//!
//! ```text
//! config.json        FlConfig
//! params.json        SystemPublicParams
//! metrics.csv        round,main_acc,detection_rate,hinge_loss
//! model.bin          little-endian f64 parameters
//! model.json         shape and sha256 of model.bin
//! keys/pk_con.bin    concatenated public keys
//! keys/pk_con.json   {count, pk_len_bytes, curve}
//! keys/client_000.json ...
//! watermark.json     {n, hex}
//! embedding.json     {omega, n, seed}
//! transcripts/       one JSON-lines file per session
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use fedsov_core::fl_sim::{ModelShape, RoundMetrics, ToyModel};
use fedsov_core::hash_watermark::{ConcatenatedKey, Watermark};
use fedsov_core::pairing_sig::{CurveId, KeyPair, PairingBackend, SecretKey};
use fedsov_core::protocol::model_sha256;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn create(&self) -> Result<()> {
        fs::create_dir_all(&self.root).with_context(|| format!("creating {}", self.root.display()))
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn params(&self) -> PathBuf {
        self.root.join("params.json")
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("model.bin")
    }

    pub fn keys(&self) -> PathBuf {
        self.root.join("keys")
    }

    pub fn pk_con(&self) -> PathBuf {
        self.keys().join("pk_con.bin")
    }

    pub fn client_key(&self, i: usize) -> PathBuf {
        self.keys().join(format!("client_{i:03}.json"))
    }

    pub fn watermark(&self) -> PathBuf {
        self.root.join("watermark.json")
    }

    pub fn embedding(&self) -> PathBuf {
        self.root.join("embedding.json")
    }

    pub fn transcripts(&self) -> PathBuf {
        self.root.join("transcripts")
    }

    pub fn attacks(&self) -> PathBuf {
        self.root.join("attacks")
    }
}

/// The JSON sidecar of a `.bin` file: `model.bin` -> `model.json`.
pub fn sidecar(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub dim: usize,
    pub width: usize,
    pub classes: usize,
    pub param_count: usize,
    pub sha256: String,
}

pub fn write_model(bin: &Path, model: &ToyModel) -> Result<()> {
    if let Some(dir) = bin.parent() {
        fs::create_dir_all(dir)?;
    }
    let bytes: Vec<u8> = model.params().iter().flat_map(|p| p.to_le_bytes()).collect();
    fs::write(bin, bytes).with_context(|| format!("writing {}", bin.display()))?;
    let s = model.shape();
    let meta = ModelMeta {
        dim: s.dim,
        width: s.width,
        classes: s.classes,
        param_count: s.param_count(),
        sha256: hex::encode(model_sha256(model.params())),
    };
    write_json(&sidecar(bin), &meta)
}

pub fn read_model(bin: &Path) -> Result<ToyModel> {
    let meta: ModelMeta = read_json(&sidecar(bin))?;
    let bytes = fs::read(bin).with_context(|| format!("reading {}", bin.display()))?;
    ensure!(bytes.len() == 8 * meta.param_count, "{} holds {} bytes, expected {}", bin.display(), bytes.len(), 8 * meta.param_count);
    let params: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    ensure!(hex::encode(model_sha256(&params)) == meta.sha256, "{} does not match its recorded sha256", bin.display());
    let shape = ModelShape { dim: meta.dim, width: meta.width, classes: meta.classes };
    Ok(ToyModel::from_params(shape, params)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PkConMeta {
    pub count: usize,
    pub pk_len_bytes: usize,
    pub curve: CurveId,
}

pub fn write_pk_con(bin: &Path, pk_con: &ConcatenatedKey, curve: CurveId) -> Result<()> {
    if let Some(dir) = bin.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(bin, pk_con.as_bytes())?;
    write_json(&sidecar(bin), &PkConMeta { count: pk_con.count(), pk_len_bytes: pk_con.pk_len(), curve })
}

pub fn read_pk_con(bin: &Path) -> Result<(ConcatenatedKey, PkConMeta)> {
    let meta: PkConMeta = read_json(&sidecar(bin))?;
    let bytes = fs::read(bin).with_context(|| format!("reading {}", bin.display()))?;
    ensure!(bytes.len() == meta.count * meta.pk_len_bytes, "{} does not hold {} keys", bin.display(), meta.count);
    Ok((ConcatenatedKey::from_bytes(&bytes, meta.pk_len_bytes)?, meta))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientKeyFile {
    pub index: usize,
    pub curve: CurveId,
    pub sk_x_hex: String,
    pub sk_y_hex: String,
    pub pk_hex: String,
}

impl ClientKeyFile {
    pub fn from_keypair<B: PairingBackend>(index: usize, kp: &KeyPair<B>) -> Self {
        ClientKeyFile {
            index,
            curve: B::CURVE_ID,
            sk_x_hex: hex::encode(B::encode_scalar(&kp.sk.x)),
            sk_y_hex: hex::encode(B::encode_scalar(&kp.sk.y)),
            pk_hex: hex::encode(fedsov_core::pairing_sig::encode_pk(&kp.pk)),
        }
    }

    pub fn secret<B: PairingBackend>(&self) -> Result<SecretKey<B>> {
        if self.curve != B::CURVE_ID {
            bail!("key {} is for curve {}", self.index, self.curve.as_str());
        }
        Ok(SecretKey { x: B::decode_scalar(&hex::decode(&self.sk_x_hex)?)?, y: B::decode_scalar(&hex::decode(&self.sk_y_hex)?)? })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatermarkFile {
    pub n: usize,
    pub hex: String,
}

impl WatermarkFile {
    pub fn new(wm: &Watermark) -> Self {
        WatermarkFile { n: wm.len(), hex: hex::encode(wm.packed()) }
    }

    pub fn watermark(&self) -> Result<Watermark> {
        Ok(Watermark::from_packed(self.n, &hex::decode(&self.hex)?)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingFile {
    pub omega: usize,
    pub n: usize,
    pub seed: u64,
}

const METRICS_HEADER: [&str; 4] = ["round", "main_acc", "detection_rate", "hinge_loss"];

pub fn write_metrics(path: &Path, metrics: &[RoundMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(METRICS_HEADER)?;
    for m in metrics {
        w.write_record([
            m.round.to_string(),
            m.main_accuracy.to_string(),
            m.detection_rate.to_string(),
            m.hinge_loss.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<RoundMetrics>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    ensure!(r.headers()?.iter().eq(METRICS_HEADER), "unexpected header in {}", path.display());
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(RoundMetrics {
                round: rec[0].parse()?,
                main_accuracy: rec[1].parse()?,
                detection_rate: rec[2].parse()?,
                hinge_loss: rec[3].parse()?,
            })
        })
        .collect()
}

/// Appends one line to a JSON-lines file, creating it if needed.
pub fn append_line(path: &Path, line: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")?;
    Ok(())
}
