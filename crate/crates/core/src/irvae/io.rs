use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{ArchitectureSpec, TrainConfig, VaeModel};
use crate::error::{Error, Result};
use crate::gradcore::{decode_params_le, encode_params_le, Activation, DenseLayer, Mlp};
use crate::tabular::Encoding;

const MAGIC: &[u8; 8] = b"DSBMODEL";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerHeader {
    rows: usize,
    cols: usize,
    activation: Activation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    arch: ArchitectureSpec,
    train_config: TrainConfig,
    encoding: Encoding,
    encoder: Vec<LayerHeader>,
    decoder: Vec<LayerHeader>,
    param_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    run_config: Option<serde_json::Value>,
}

/// A fitted model together with the run configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: VaeModel,
    pub run_config: Option<serde_json::Value>,
}

fn layer_headers(net: &Mlp) -> Vec<LayerHeader> {
    net.layers
        .iter()
        .map(|l| LayerHeader {
            rows: l.output_dim(),
            cols: l.input_dim(),
            activation: l.activation,
        })
        .collect()
}

/// Binary layout: the 8-byte magic `DSBMODEL`, a little-endian `u32`
/// version, a little-endian `u64` header length, the JSON header, then every
/// parameter as a little-endian `f64` (encoder layers, then decoder layers).
pub fn model_file_bytes(file: &ModelFile) -> Result<Vec<u8>> {
    let m = &file.model;
    let params = m.params();
    let header = Header {
        arch: m.arch.clone(),
        train_config: m.train_config.clone(),
        encoding: m.encoding.clone(),
        encoder: layer_headers(&m.encoder),
        decoder: layer_headers(&m.decoder),
        param_count: params.len(),
        run_config: file.run_config.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(20 + json.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&encode_params_le(&params));
    Ok(out)
}

fn build_net(headers: &[LayerHeader], params: &[f64], pos: &mut usize) -> Result<Mlp> {
    let mut layers = Vec::with_capacity(headers.len());
    for h in headers {
        let nw = h.rows * h.cols;
        let chunk = params
            .get(*pos..*pos + nw + h.rows)
            .ok_or_else(|| Error::ModelFormat("parameter block is too short".into()))?;
        let w = Array2::from_shape_vec((h.rows, h.cols), chunk[..nw].to_vec())
            .expect("length checked");
        let b = Array1::from(chunk[nw..].to_vec());
        layers.push(
            DenseLayer::new(w, b, h.activation)
                .map_err(|e| Error::ModelFormat(e.to_string()))?,
        );
        *pos += nw + h.rows;
    }
    Mlp::from_layers(layers).map_err(|e| Error::ModelFormat(e.to_string()))
}

pub fn parse_model_file(bytes: &[u8]) -> Result<ModelFile> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(Error::ModelFormat("not a model file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported model file version {version}"
        )));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = &bytes[20..];
    if body.len() < hlen {
        return Err(Error::ModelFormat("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&body[..hlen])
        .map_err(|e| Error::ModelFormat(format!("bad header: {e}")))?;
    let params = decode_params_le(&body[hlen..])?;
    if params.len() != header.param_count {
        return Err(Error::ModelFormat(format!(
            "header declares {} parameters, file holds {}",
            header.param_count,
            params.len()
        )));
    }
    let mut pos = 0;
    let encoder = build_net(&header.encoder, &params, &mut pos)?;
    let decoder = build_net(&header.decoder, &params, &mut pos)?;
    if pos != params.len() {
        return Err(Error::ModelFormat("layer shapes do not cover the parameters".into()));
    }
    let arch = header.arch;
    if encoder.input_dim() != arch.input_dim + 1
        || encoder.output_dim() != 2 * arch.latent_dim
        || decoder.input_dim() != arch.latent_dim
        || decoder.output_dim() != arch.input_dim + 1
        || header.encoding.dim() != arch.input_dim
    {
        return Err(Error::ModelFormat(
            "layer shapes disagree with the architecture".into(),
        ));
    }
    Ok(ModelFile {
        model: VaeModel {
            arch,
            encoder,
            decoder,
            train_config: header.train_config,
            encoding: header.encoding,
        },
        run_config: header.run_config,
    })
}

/// Write atomically: the bytes go to a sibling temporary file that is then
/// renamed over `path`.
pub fn write_model_file(path: &Path, file: &ModelFile) -> Result<()> {
    let bytes = model_file_bytes(file)?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = path.with_extension("tmp~");
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    if let Some(d) = dir {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn read_model_file(path: &Path) -> Result<ModelFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_model_file(&bytes)
}
