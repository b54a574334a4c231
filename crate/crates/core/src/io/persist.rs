use std::path::{Path, PathBuf};
use std::sync::Arc;

use gate_diffkit::Mat;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{Activation, DecoderParams, DecoderVariant, GateConfig, GateParams, KnnSpec};
use crate::regate::RegressionHead;
use crate::rng::rng_from;
use crate::{GateError, Result};

pub const MAGIC: &[u8; 8] = b"GATEMODL";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

/// Architecture description stored at the front of a model file and in its
/// JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub format_version: u32,
    pub byte_order: String,
    pub node_count: usize,
    pub latent_dim: usize,
    pub embed_dim: usize,
    pub depth: usize,
    pub k_nn: KnnSpec,
    pub hidden: usize,
    pub decoder_variant: DecoderVariant,
    pub activations: Vec<Activation>,
    pub positive_weights: bool,
    pub supervised: bool,
}

impl ModelHeader {
    pub fn new(config: &GateConfig, node_count: usize, supervised: bool) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            byte_order: "little".into(),
            node_count,
            latent_dim: config.latent_dim,
            embed_dim: config.embed_dim,
            depth: config.depth,
            k_nn: config.k_nn.clone(),
            hidden: config.hidden,
            decoder_variant: config.decoder_variant,
            activations: config.activations.clone(),
            positive_weights: config.positive_weights,
            supervised,
        }
    }

    /// Architecture fields as a config; training fields take defaults.
    pub fn config(&self) -> GateConfig {
        GateConfig {
            latent_dim: self.latent_dim,
            embed_dim: self.embed_dim,
            depth: self.depth,
            k_nn: self.k_nn.clone(),
            hidden: self.hidden,
            decoder_variant: self.decoder_variant,
            activations: self.activations.clone(),
            positive_weights: self.positive_weights,
            ..GateConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub header: ModelHeader,
    pub params: GateParams,
    pub head: Option<RegressionHead>,
}

fn masks_of(params: &GateParams) -> Vec<Arc<Array2<bool>>> {
    match &params.decoder {
        DecoderParams::LatentSpace(d) => d.masks.clone(),
        DecoderParams::Dense(_) => Vec::new(),
    }
}

fn put_u32(out: &mut Vec<u8>, x: usize) -> Result<()> {
    let x = u32::try_from(x).map_err(|_| GateError::Format(format!("{x} does not fit in u32")))?;
    out.extend_from_slice(&x.to_le_bytes());
    Ok(())
}

/// Serialized model bytes, checksum trailer included.
pub fn encode_model(
    params: &GateParams,
    head: Option<&RegressionHead>,
    config: &GateConfig,
) -> Result<Vec<u8>> {
    let header = ModelHeader::new(config, params.node_count, head.is_some());
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let json = serde_json::to_vec(&header).map_err(|e| GateError::Format(e.to_string()))?;
    put_u32(&mut out, json.len())?;
    out.extend_from_slice(&json);

    let masks = masks_of(params);
    put_u32(&mut out, masks.len())?;
    for m in &masks {
        out.extend(m.iter().map(|&b| u8::from(b)));
    }
    let mut tensors = params.tensors();
    if let Some(h) = head {
        tensors.extend(h.tensors());
    }
    put_u32(&mut out, tensors.len())?;
    for t in tensors {
        put_u32(&mut out, t.nrows())?;
        put_u32(&mut out, t.ncols())?;
        // iter() walks logical row-major order regardless of memory layout
        for x in t.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| GateError::Format("model file ends early".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<SavedModel> {
    if bytes.len() < MAGIC.len() + 4 + DIGEST_LEN {
        return Err(GateError::Format(
            "model file checksum mismatch (file too short)".into(),
        ));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(GateError::Format("model file checksum mismatch".into()));
    }
    let mut r = Reader {
        bytes: body,
        pos: 0,
    };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(GateError::Format("not a model file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION as usize {
        return Err(GateError::Format(format!(
            "model format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let header_len = r.u32()?;
    let header: ModelHeader = serde_json::from_slice(r.take(header_len)?)
        .map_err(|e| GateError::Format(format!("model header: {e}")))?;
    let v = header.node_count;

    let mask_count = r.u32()?;
    let masks = (0..mask_count)
        .map(|_| {
            let raw = r.take(v * v)?;
            let m = Array2::from_shape_fn((v, v), |(i, j)| raw[i * v + j] != 0);
            Ok(Arc::new(m))
        })
        .collect::<Result<Vec<_>>>()?;

    let config = header.config();
    let mut params = GateParams::init_with_masks(&config, v, masks, &mut rng_from(0))?;
    let mut head = header
        .supervised
        .then(|| RegressionHead::init(config.latent_dim, &mut rng_from(0)));

    let count = r.u32()?;
    let mut targets: Vec<&mut Mat> = params.tensors_mut();
    if let Some(h) = head.as_mut() {
        targets.extend(h.tensors_mut());
    }
    if count != targets.len() {
        return Err(GateError::Format(format!(
            "model file holds {count} tensors, architecture needs {}",
            targets.len()
        )));
    }
    for (i, t) in targets.into_iter().enumerate() {
        let (rows, cols) = (r.u32()?, r.u32()?);
        if (rows, cols) != t.dim() {
            return Err(GateError::Format(format!(
                "tensor {i} is {rows}×{cols}, expected {}×{}",
                t.nrows(),
                t.ncols()
            )));
        }
        let raw = r.take(rows * cols * 8)?;
        for (x, b) in t.iter_mut().zip(raw.chunks_exact(8)) {
            *x = f64::from_le_bytes(b.try_into().expect("8 bytes"));
        }
    }
    if r.pos != body.len() {
        return Err(GateError::Format(
            "trailing bytes after model tensors".into(),
        ));
    }
    Ok(SavedModel {
        header,
        params,
        head,
    })
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the model file and its `<path>.json` header sidecar.
pub fn save_model(
    path: &Path,
    params: &GateParams,
    head: Option<&RegressionHead>,
    config: &GateConfig,
) -> Result<()> {
    let bytes = encode_model(params, head, config)?;
    std::fs::write(path, bytes).map_err(|e| GateError::io(path, e))?;
    let header = ModelHeader::new(config, params.node_count, head.is_some());
    let json =
        serde_json::to_string_pretty(&header).map_err(|e| GateError::Format(e.to_string()))?;
    let side = sidecar_path(path);
    std::fs::write(&side, json + "\n").map_err(|e| GateError::io(side, e))
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let bytes = std::fs::read(path).map_err(|e| GateError::io(path, e))?;
    decode_model(&bytes)
}
