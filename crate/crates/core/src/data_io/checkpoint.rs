//! `SPHCKP01` checkpoints.
//!
//! ```text
//! b"SPHCKP01"
//! u32 section count
//! per section: 4-byte tag, u64 offset, u64 length   (offsets from file start)
//! section payloads
//! ```
//!
//! Sections, all little-endian:
//!
//! * `META`: TOML text with `version`, `with_time`, the optional data
//!   `geometry`, and the `encoder`, `model` and (if saved) `optimizer` tables.
//! * `GRID`, one per level, coarsest first. Equirect: u32 level, n_lat,
//!   n_lon, feature_dim, then f32 parameters in canonical-id order. HEALPix:
//!   u32 n_side, feature_dim, then f32 parameters in ring order.
//! * `MLP `: u32 layer count `k`, `k + 1` u32 widths, then per layer the
//!   row-major `(in, out)` f32 weight followed by the f32 bias.
//! * `OPTM` (optional): u64 step count, u32 tensor count, then per tensor a
//!   u64 length followed by the first and second moments as f64.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::baseline::BaselineEncoder;
use crate::equirect::{EquirectGrid, EquirectLevelSpec};
use crate::healpix::{HealpixGrid, HealpixSpec};
use crate::interp::{Grid, GridEncoder};
use crate::nn::{AdamW, AdamWConfig, Layer, MlpConfig, MlpModel};
use crate::tasks::{Encoder, EncoderConfig, FieldModel, Geometry};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SPHCKP01";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    version: u32,
    with_time: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    geometry: Option<Geometry>,
    encoder: EncoderConfig,
    model: MlpConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    optimizer: Option<AdamWConfig>,
}

/// Contents of a checkpoint file.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: FieldModel,
    /// Config the MLP was built from; widths are taken from the stored layers.
    pub model_config: MlpConfig,
    /// Layout of the data the model was trained on.
    pub geometry: Option<Geometry>,
    pub optimizer: Option<AdamW>,
}

struct Writer {
    sections: Vec<([u8; 4], Vec<u8>)>,
}

impl Writer {
    fn push(&mut self, tag: &[u8; 4], body: Vec<u8>) {
        self.sections.push((*tag, body));
    }

    fn finish(self) -> Vec<u8> {
        let table_len = 8 + 4 + 20 * self.sections.len();
        let total: usize = table_len + self.sections.iter().map(|s| s.1.len()).sum::<usize>();
        let mut out = Vec::with_capacity(total);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        let mut offset = table_len as u64;
        for (tag, body) in &self.sections {
            out.extend_from_slice(tag);
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(body.len() as u64).to_le_bytes());
            offset += body.len() as u64;
        }
        for (_, body) in self.sections {
            out.extend_from_slice(&body);
        }
        out
    }
}

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f32s(buf: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(
    model: &FieldModel,
    model_config: &MlpConfig,
    geometry: Option<Geometry>,
    optimizer: Option<&AdamW>,
) -> Vec<u8> {
    let meta = Meta {
        version: VERSION,
        with_time: model.with_time,
        geometry,
        encoder: model.encoder_config.clone(),
        model: model_config.clone(),
        optimizer: optimizer.map(|o| *o.config()),
    };
    let mut w = Writer { sections: Vec::new() };
    w.push(b"META", toml::to_string(&meta).expect("meta serializes").into_bytes());
    if let Encoder::Grid(g) = &model.encoder {
        for level in g.levels() {
            let mut body = Vec::new();
            match level {
                Grid::Equirect(e) => {
                    let s = e.spec();
                    for v in [s.level() as usize, s.n_lat(), s.n_lon(), e.feature_dim()] {
                        put_u32(&mut body, v);
                    }
                    put_f32s(&mut body, e.params());
                }
                Grid::Healpix(h) => {
                    put_u32(&mut body, h.spec().n_side());
                    put_u32(&mut body, h.feature_dim());
                    put_f32s(&mut body, h.params());
                }
            }
            w.push(b"GRID", body);
        }
    }
    let mut body = Vec::new();
    let dims = model.mlp.dims();
    put_u32(&mut body, dims.len() - 1);
    for d in dims {
        put_u32(&mut body, d);
    }
    for layer in model.mlp.layers() {
        put_f32s(&mut body, layer.weight.as_slice().expect("standard layout"));
        put_f32s(&mut body, layer.bias.as_slice().expect("standard layout"));
    }
    w.push(b"MLP ", body);
    if let Some(opt) = optimizer {
        let mut body = Vec::new();
        body.extend_from_slice(&opt.steps_taken().to_le_bytes());
        let (m, v) = opt.moments();
        put_u32(&mut body, m.len());
        for (mt, vt) in m.iter().zip(v) {
            body.extend_from_slice(&(mt.len() as u64).to_le_bytes());
            for x in mt.iter().chain(vt) {
                body.extend_from_slice(&x.to_le_bytes());
            }
        }
        w.push(b"OPTM", body);
    }
    w.finish()
}

/// Bounds-checked little-endian reader that reports absolute file offsets.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    end: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.end - self.pos < n {
            return Err(Error::format(
                self.pos as u64,
                format!("need {n} bytes, section has {} left", self.end - self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::format(self.pos as u64, "length overflow"))?,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::format(self.pos as u64, "length overflow"))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos != self.end {
            return Err(Error::format(
                self.pos as u64,
                format!("{} unread bytes at end of section", self.end - self.pos),
            ));
        }
        Ok(())
    }
}

/// Wraps a non-format error with the offset of the section that caused it.
fn at(offset: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Format { .. } => e,
        other => Error::format(offset as u64, other.to_string()),
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 12 {
        return Err(Error::format(
            bytes.len() as u64,
            "file too short for a checkpoint header",
        ));
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::format(0, "bad magic, expected SPHCKP01"));
    }
    let mut head = Cursor {
        bytes,
        pos: 8,
        end: bytes.len(),
    };
    let count = head.u32()?;
    let mut sections: Vec<([u8; 4], Cursor)> = Vec::with_capacity(count.min(1024));
    // sections follow the table back to back and end the file
    let mut next = 12 + 20 * count as u64;
    for _ in 0..count {
        let entry = head.pos;
        let tag: [u8; 4] = head.take(4)?.try_into().expect("4 bytes");
        let offset = head.u64()?;
        let len = head.u64()?;
        let end = offset
            .checked_add(len)
            .filter(|&e| e <= bytes.len() as u64)
            .ok_or_else(|| {
                Error::format(
                    entry as u64,
                    format!(
                        "section {} spans {offset}+{len}, file has {} bytes",
                        String::from_utf8_lossy(&tag),
                        bytes.len()
                    ),
                )
            })?;
        if offset != next {
            return Err(Error::format(
                entry as u64 + 4,
                format!(
                    "section {} starts at {offset}, expected {next}",
                    String::from_utf8_lossy(&tag)
                ),
            ));
        }
        next = end;
        sections.push((
            tag,
            Cursor {
                bytes,
                pos: offset as usize,
                end: end as usize,
            },
        ));
    }

    if next != bytes.len() as u64 {
        return Err(Error::format(
            next,
            format!("{} unreferenced trailing bytes", bytes.len() as u64 - next),
        ));
    }

    let mut meta_section = sections
        .iter()
        .position(|s| &s.0 == b"META")
        .map(|i| sections.remove(i).1)
        .ok_or_else(|| Error::format(8, "missing META section"))?;
    let meta_start = meta_section.pos;
    let len = meta_section.end - meta_section.pos;
    let text = std::str::from_utf8(meta_section.take(len)?)
        .map_err(|e| Error::format(meta_start as u64 + e.valid_up_to() as u64, "META is not UTF-8"))?;
    let meta: Meta =
        toml::from_str(text).map_err(|e| Error::format(meta_start as u64, format!("META: {}", e.message())))?;
    if meta.version != VERSION {
        return Err(Error::format(
            meta_start as u64,
            format!("unsupported version {}", meta.version),
        ));
    }

    let encoder = if meta.encoder.is_grid() {
        let mut levels = Vec::new();
        for (tag, c) in sections.iter_mut().filter(|s| &s.0 == b"GRID") {
            debug_assert_eq!(tag, b"GRID");
            let start = c.pos;
            let grid = match meta.encoder {
                EncoderConfig::Equirect { .. } => {
                    let (level, n_lat, n_lon, d) = (c.u32()?, c.u32()?, c.u32()?, c.u32()?);
                    let spec = EquirectLevelSpec::new(level as u32, n_lat, n_lon).map_err(at(start))?;
                    let params = c.f32s(spec.param_count() * d)?;
                    Grid::Equirect(EquirectGrid::from_params(spec, d, params).map_err(at(start))?)
                }
                _ => {
                    let (n_side, d) = (c.u32()?, c.u32()?);
                    let spec = HealpixSpec::from_n_side(n_side).map_err(at(start))?;
                    let params = c.f32s(spec.n_pix() * d)?;
                    Grid::Healpix(HealpixGrid::from_params(spec, d, params).map_err(at(start))?)
                }
            };
            c.expect_end()?;
            levels.push(grid);
        }
        Encoder::Grid(GridEncoder::new(levels).map_err(at(8))?)
    } else {
        let config = meta.encoder.baseline().expect("non-grid encoders are baselines");
        Encoder::Baseline(BaselineEncoder::new(config).map_err(at(meta_start))?)
    };

    let mlp_section = sections
        .iter_mut()
        .find(|s| &s.0 == b"MLP ")
        .ok_or_else(|| Error::format(8, "missing MLP section"))?;
    let c = &mut mlp_section.1;
    let start = c.pos;
    let n_layers = c.u32()?;
    if n_layers == 0 || n_layers > 1024 {
        return Err(Error::format(
            start as u64,
            format!("implausible layer count {n_layers}"),
        ));
    }
    let mut dims = Vec::with_capacity(n_layers + 1);
    for _ in 0..=n_layers {
        dims.push(c.u32()?);
    }
    let mut layers = Vec::with_capacity(n_layers);
    for k in 0..n_layers {
        let (fi, fo) = (dims[k], dims[k + 1]);
        let w = c.f32s(fi * fo)?;
        let b = c.f32s(fo)?;
        layers.push(Layer {
            weight: Array2::from_shape_vec((fi, fo), w).expect("length checked"),
            bias: Array1::from(b),
        });
    }
    c.expect_end()?;
    let mlp = MlpModel::from_layers(layers, meta.model.activation()).map_err(at(start))?;
    let model = FieldModel::from_parts(meta.encoder.clone(), encoder, mlp, meta.with_time).map_err(at(start))?;

    let optimizer = match (sections.iter_mut().find(|s| &s.0 == b"OPTM"), meta.optimizer) {
        (Some((_, c)), Some(cfg)) => {
            let start = c.pos;
            let step = c.u64()?;
            let n = c.u32()?;
            let mut m = Vec::with_capacity(n.min(1024));
            let mut v = Vec::with_capacity(n.min(1024));
            for _ in 0..n {
                let len = c.u64()? as usize;
                m.push(c.f64s(len)?);
                v.push(c.f64s(len)?);
            }
            c.expect_end()?;
            Some(AdamW::restore(cfg, step, m, v).map_err(at(start))?)
        }
        (None, None) => None,
        _ => return Err(Error::format(8, "optimizer section and META disagree")),
    };

    Ok(Checkpoint {
        model,
        model_config: meta.model,
        geometry: meta.geometry,
        optimizer,
    })
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    model: &FieldModel,
    model_config: &MlpConfig,
    geometry: Option<Geometry>,
    optimizer: Option<&AdamW>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(model, model_config, geometry, optimizer)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
