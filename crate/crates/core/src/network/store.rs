//! Named tensor store and its binary file format.
//!
//! All integers are little-endian:
//!
//! ```text
//! "WMBA"                      4 bytes
//! version                     u32 (= 1)
//! config length               u32
//! config                      canonical TOML, UTF-8
//! tensor count                u32
//! per tensor, sorted by name:
//!     name length             u16
//!     name                    UTF-8
//!     dtype                   u8 (0 = f32)
//!     rank                    u8
//!     dims                    u64 x rank
//!     values                  f32 x prod(dims)
//! crc32                       u32 over every preceding byte
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::config::ModelConfig;
use crate::error::{Error, FormatError, Result};
use crate::nn::{Init, ParamSource};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"WMBA";
pub const FORMAT_VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightStore {
    pub config: ModelConfig,
    pub tensors: BTreeMap<String, Tensor>,
}

impl WeightStore {
    pub fn new(config: ModelConfig) -> Self {
        WeightStore {
            config,
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let config = self.config.to_toml();
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(config.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(DTYPE_F32);
            out.push(t.rank() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(FormatError::Truncated(format!("{} byte file", bytes.len())).into());
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(FormatError::BadMagic(magic).into());
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(FormatError::Version(version).into());
        }
        if bytes.len() < 12 {
            return Err(FormatError::Truncated("missing header".into()).into());
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored == computed {
            return parse_body(body);
        }
        // distinguish a cut-off file from a corrupted one
        match parse_body(body) {
            Err(Error::Format(FormatError::Truncated(msg))) => {
                Err(FormatError::Truncated(msg).into())
            }
            _ => Err(FormatError::Checksum { stored, computed }.into()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(FormatError::Truncated(format!(
                "{what}: need {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            ))
            .into());
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2, what)?.try_into().expect("2"),
        ))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8"),
        ))
    }

    fn text(&mut self, n: usize, what: &str) -> Result<&'a str> {
        std::str::from_utf8(self.take(n, what)?)
            .map_err(|_| FormatError::Malformed(format!("{what} is not UTF-8")).into())
    }
}

fn malformed(msg: impl Into<String>) -> Error {
    FormatError::Malformed(msg.into()).into()
}

/// Parse everything after the version field; trailing bytes are rejected.
fn parse_body(body: &[u8]) -> Result<WeightStore> {
    let mut r = Reader { buf: body, pos: 8 };
    let cfg_len = r.u32("config length")? as usize;
    let config_text = r.text(cfg_len, "config")?;
    let config = ModelConfig::from_toml(config_text)
        .map_err(|e| malformed(format!("embedded config: {e}")))?;
    let count = r.u32("tensor count")?;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u16("name length")? as usize;
        let name = r.text(name_len, "tensor name")?.to_string();
        let dtype = r.u8("dtype")?;
        if dtype != DTYPE_F32 {
            return Err(FormatError::Dtype(dtype).into());
        }
        let rank = r.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64("dims")? as usize);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| malformed(format!("tensor `{name}` is too large")))?;
        let raw = r.take(
            numel
                .checked_mul(4)
                .ok_or_else(|| malformed("tensor too large"))?,
            "tensor values",
        )?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4")))
            .collect();
        let t =
            Tensor::new(&shape, data).map_err(|e| malformed(format!("tensor `{name}`: {e}")))?;
        if tensors.insert(name.clone(), t).is_some() {
            return Err(malformed(format!("duplicate tensor `{name}`")));
        }
    }
    if r.pos != body.len() {
        return Err(malformed(format!(
            "{} unexpected trailing bytes",
            body.len() - r.pos
        )));
    }
    Ok(WeightStore { config, tensors })
}

/// Serves declared parameters from a store, checking shapes and tracking
/// which names were consumed.
pub struct StoreSource<'a> {
    store: &'a WeightStore,
    used: BTreeSet<String>,
}

impl<'a> StoreSource<'a> {
    pub fn new(store: &'a WeightStore) -> Self {
        StoreSource {
            store,
            used: BTreeSet::new(),
        }
    }

    /// Error if the store holds tensors no layer asked for.
    pub fn finish(self) -> Result<()> {
        let extra: Vec<String> = self
            .store
            .tensors
            .keys()
            .filter(|k| !self.used.contains(*k))
            .cloned()
            .collect();
        if extra.is_empty() {
            Ok(())
        } else {
            Err(Error::UnexpectedTensors(extra))
        }
    }
}

impl ParamSource for StoreSource<'_> {
    fn fetch(&mut self, name: &str, shape: &[usize], _init: Init) -> Result<Tensor> {
        let t = self
            .store
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))?;
        if t.shape() != shape {
            return Err(Error::TensorShape {
                name: name.to_string(),
                expected: shape.to_vec(),
                found: t.shape().to_vec(),
            });
        }
        self.used.insert(name.to_string());
        Ok(t.clone())
    }
}
