//! Binary containers for networks and trained models.
//!
//! Network (`LAOTNET1`):
//!
//! ```text
//! offset  size  content
//! 0       8     magic b"LAOTNET1"
//! 8       8     header length H, u64 little-endian
//! 16      H     UTF-8 JSON {"seed": u64, "layers": [{"in": i, "out": o, "activation": "relu"|"linear"}, ...]}
//! 16+H    ...   for each layer: weight (o*i f64, row-major, out x in) then bias (o f64)
//! ```
//!
//! All floats are little-endian IEEE-754 doubles. The payload length is fully
//! determined by the header, so networks can be concatenated.
//!
//! Model checkpoint (`LAOTCKP1`): magic, u64 header length, a JSON header
//! `{"config": ExperimentConfig, "fitted_map": {"dim": k, "a": [k*k row-major], "b": [k]} | null,
//! "networks": ["enc_s", "dec_s", "enc_t", "dec_t"]}`, then the four networks
//! in that order, each in the network format above.

use std::fs;
use std::path::Path;

use laot_core::gaussian_ot::AffineMap;
use laot_core::laot::{ExperimentConfig, LaotModel};
use laot_core::nn::{Activation, Layer, MlpParams};
use laot_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NET_MAGIC: &[u8; 8] = b"LAOTNET1";
const CKP_MAGIC: &[u8; 8] = b"LAOTCKP1";
const NETWORK_ORDER: [&str; 4] = ["enc_s", "dec_s", "enc_t", "dec_t"];

#[derive(Serialize, Deserialize)]
struct LayerHeader {
    #[serde(rename = "in")]
    in_dim: usize,
    out: usize,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct NetHeader {
    seed: u64,
    layers: Vec<LayerHeader>,
}

#[derive(Serialize, Deserialize)]
pub struct MapBlock {
    pub dim: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    config: ExperimentConfig,
    fitted_map: Option<MapBlock>,
    networks: Vec<String>,
}

fn push_header(out: &mut Vec<u8>, magic: &[u8; 8], json: &[u8]) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(json);
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| {
            Error::invalid(format!(
                "truncated file: needed {n} bytes for {what} at offset {}",
                self.pos
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn header(&mut self, magic: &[u8; 8]) -> Result<&'a [u8]> {
        if self.take(8, "magic")? != magic {
            return Err(Error::invalid(format!(
                "bad magic at offset {}, expected {}",
                self.pos - 8,
                String::from_utf8_lossy(magic)
            )));
        }
        let len = u64::from_le_bytes(self.take(8, "header length")?.try_into().expect("8 bytes"));
        self.take(len as usize, "JSON header")
    }

    fn floats(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        Ok(self
            .take(n * 8, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn encode_params(params: &MlpParams, out: &mut Vec<u8>) {
    let header = NetHeader {
        seed: params.seed(),
        layers: params
            .layers()
            .iter()
            .map(|l| LayerHeader {
                in_dim: l.in_dim(),
                out: l.out_dim(),
                activation: l.activation,
            })
            .collect(),
    };
    push_header(out, NET_MAGIC, &serde_json::to_vec(&header).expect("plain struct"));
    for l in params.layers() {
        for v in l.weight.as_slice().iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn decode_params_at(cur: &mut Cursor<'_>) -> Result<MlpParams> {
    let header: NetHeader = serde_json::from_slice(cur.header(NET_MAGIC)?)?;
    let mut layers = Vec::with_capacity(header.layers.len());
    for (i, lh) in header.layers.iter().enumerate() {
        let w = cur.floats(lh.out * lh.in_dim, &format!("layer {i} weights"))?;
        let bias = cur.floats(lh.out, &format!("layer {i} bias"))?;
        layers.push(Layer {
            weight: Matrix::from_vec(lh.out, lh.in_dim, w)?,
            bias,
            activation: lh.activation,
        });
    }
    Ok(MlpParams::from_layers(layers, header.seed)?)
}

pub fn decode_params(bytes: &[u8]) -> Result<MlpParams> {
    let mut cur = Cursor { bytes, pos: 0 };
    let p = decode_params_at(&mut cur)?;
    if cur.pos != bytes.len() {
        return Err(Error::invalid(format!("{} trailing bytes after network", bytes.len() - cur.pos)));
    }
    Ok(p)
}

pub fn map_block(map: &AffineMap) -> MapBlock {
    MapBlock {
        dim: map.dim(),
        a: map.a.as_slice().to_vec(),
        b: map.b.clone(),
    }
}

pub fn encode_model(model: &LaotModel) -> Vec<u8> {
    let header = CheckpointHeader {
        config: model.config.clone(),
        fitted_map: model.fitted_map.as_ref().map(map_block),
        networks: NETWORK_ORDER.iter().map(|s| s.to_string()).collect(),
    };
    let mut out = Vec::new();
    push_header(&mut out, CKP_MAGIC, &serde_json::to_vec(&header).expect("plain struct"));
    for net in [&model.enc_s, &model.dec_s, &model.enc_t, &model.dec_t] {
        encode_params(net, &mut out);
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<LaotModel> {
    let mut cur = Cursor { bytes, pos: 0 };
    let header: CheckpointHeader = serde_json::from_slice(cur.header(CKP_MAGIC)?)?;
    if header.networks != NETWORK_ORDER {
        return Err(Error::invalid(format!("unexpected network list {:?}", header.networks)));
    }
    let enc_s = decode_params_at(&mut cur)?;
    let dec_s = decode_params_at(&mut cur)?;
    let enc_t = decode_params_at(&mut cur)?;
    let dec_t = decode_params_at(&mut cur)?;
    if cur.pos != bytes.len() {
        return Err(Error::invalid(format!("{} trailing bytes after checkpoint", bytes.len() - cur.pos)));
    }
    let fitted_map = header
        .fitted_map
        .map(|m| -> Result<AffineMap> {
            Ok(AffineMap::new(Matrix::from_vec(m.dim, m.dim, m.a)?, m.b)?)
        })
        .transpose()?;
    let model = LaotModel {
        enc_s,
        dec_s,
        enc_t,
        dec_t,
        fitted_map,
        config: header.config,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_model(path: &Path, model: &LaotModel) -> Result<()> {
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<LaotModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes).map_err(|e| e.in_file(path))
}
