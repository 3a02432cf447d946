//! `STNW` weights container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "STNW" | version: u32 | tensor count: u32
//! per tensor: name length: u16 | UTF-8 name | rank: u8 | dims: u32 × rank | f32 × Π dims
//! ```
//!
//! The first tensor, `meta.arch`, holds `[n_heads, k_graph, scale]` where
//! scale is 0 for √K and 1 for √d. Checkpoints may append Adam moments as
//! `adam.step`, `adam.m.<name>` and `adam.v.<name>`.

use std::path::Path;

use super::params::{AttentionScale, NetConfig, NetworkParams, TensorKind};
use super::train::AdamState;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"STNW";
pub const VERSION: u32 = 1;
const META: &str = "meta.arch";

struct Record {
    name: String,
    dims: Vec<usize>,
    data: Vec<f32>,
}

fn put_record(buf: &mut Vec<u8>, name: &str, dims: &[usize], data: impl Iterator<Item = f64>) {
    let bytes = name.as_bytes();
    buf.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
    buf.extend_from_slice(bytes);
    buf.push(dims.len() as u8);
    for &d in dims {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

/// Serializes parameters, and optionally optimizer state, to bytes.
pub fn encode(params: &NetworkParams, adam: Option<&AdamState>) -> Vec<u8> {
    let store = &params.store;
    let mut count = 1 + store.len();
    let learnable: Vec<_> = store.learnable().collect();
    if adam.is_some() {
        count += 1 + 2 * learnable.len();
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(count as u32).to_le_bytes());

    let cfg = &params.config;
    let scale = match cfg.attention_scale {
        AttentionScale::PatchSize => 0.0,
        AttentionScale::HeadDim => 1.0,
    };
    put_record(
        &mut buf,
        META,
        &[3],
        [cfg.n_heads as f64, cfg.k_graph as f64, scale].into_iter(),
    );
    for id in store.ids() {
        let t = store.get(id);
        put_record(&mut buf, store.name(id), &t.shape, t.data.iter().copied());
    }
    if let Some(adam) = adam {
        put_record(&mut buf, "adam.step", &[1], std::iter::once(adam.step as f64));
        for &id in &learnable {
            let shape = &store.get(id).shape;
            let name = store.name(id);
            put_record(&mut buf, &format!("adam.m.{name}"), shape, adam.m[id.index()].iter().copied());
            put_record(&mut buf, &format!("adam.v.{name}"), shape, adam.v[id.index()].iter().copied());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Weights(format!(
                    "truncated: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

fn read_records(bytes: &[u8]) -> Result<Vec<Record>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Weights("bad magic, expected STNW".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Weights(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Weights("tensor name is not UTF-8".into()))?
            .to_owned();
        let rank = r.u8()? as usize;
        let dims = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Weights(format!("{name}: element count overflows")))?;
        let raw = r.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::Weights(format!("{name}: size overflows")))?,
        )?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        records.push(Record { name, dims, data });
    }
    if r.pos != bytes.len() {
        return Err(Error::Weights(format!(
            "{} trailing bytes after {count} tensors",
            bytes.len() - r.pos
        )));
    }
    Ok(records)
}

/// Parses a container; optimizer state is returned when present.
pub fn decode(bytes: &[u8]) -> Result<(NetworkParams, Option<AdamState>)> {
    let records = read_records(bytes)?;
    let meta = records
        .iter()
        .find(|r| r.name == META)
        .ok_or_else(|| Error::Weights(format!("missing tensor {META}")))?;
    if meta.data.len() != 3 {
        return Err(Error::Weights(format!("{META} must hold 3 values")));
    }
    let config = NetConfig {
        n_heads: meta.data[0] as usize,
        k_graph: meta.data[1] as usize,
        attention_scale: if meta.data[2] == 0.0 {
            AttentionScale::PatchSize
        } else {
            AttentionScale::HeadDim
        },
    };
    config
        .validate()
        .map_err(|e| Error::Weights(format!("bad architecture: {e}")))?;

    let mut params = NetworkParams::zeros(config);
    let mut seen = vec![false; params.store.len()];
    let mut adam: Option<AdamState> = None;
    for rec in &records {
        if rec.name == META {
            continue;
        }
        if let Some(id) = params.store.find(&rec.name) {
            let t = params.store.get_mut(id);
            if t.shape != rec.dims {
                return Err(Error::Weights(format!(
                    "{}: shape {:?}, expected {:?}",
                    rec.name, rec.dims, t.shape
                )));
            }
            t.data = rec.data.iter().map(|&v| f64::from(v)).collect();
            seen[id.index()] = true;
            continue;
        }
        let state = adam.get_or_insert_with(|| AdamState::new(&params));
        if rec.name == "adam.step" {
            state.step = rec.data.first().copied().unwrap_or(0.0) as u64;
            continue;
        }
        let (moment, target) = match (rec.name.strip_prefix("adam.m."), rec.name.strip_prefix("adam.v.")) {
            (Some(t), _) => (&mut state.m, t),
            (_, Some(t)) => (&mut state.v, t),
            _ => return Err(Error::Weights(format!("unknown tensor {}", rec.name))),
        };
        let id = params
            .store
            .find(target)
            .filter(|&id| params.store.kind(id) == TensorKind::Learnable)
            .ok_or_else(|| Error::Weights(format!("optimizer state for unknown tensor {target}")))?;
        if moment[id.index()].len() != rec.data.len() {
            return Err(Error::Weights(format!("{}: wrong element count", rec.name)));
        }
        moment[id.index()] = rec.data.iter().map(|&v| f64::from(v)).collect();
    }
    if let Some(id) = params.store.ids().find(|id| !seen[id.index()]) {
        return Err(Error::Weights(format!(
            "missing tensor {}",
            params.store.name(id)
        )));
    }
    Ok((params, adam))
}

/// Writes atomically: temp file in the same directory, then rename.
pub fn save(path: &Path, params: &NetworkParams, adam: Option<&AdamState>) -> Result<()> {
    crate::io::write_atomic(path, &encode(params, adam))
}

pub fn load(path: &Path) -> Result<(NetworkParams, Option<AdamState>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Weights(msg) => Error::Weights(format!("{}: {msg}", path.display())),
        other => other,
    })
}
