//! Single-file parameter container.
//!
//! Layout: the 8 magic bytes `MRUCKPT\0`, a little-endian `u64` header
//! length, a UTF-8 JSON header, then every entry's elements as
//! little-endian `f32` in header order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TensorError};
use crate::{Shape, Tensor};

const MAGIC: &[u8; 8] = b"MRUCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    entries: Vec<EntryHeader>,
    scalars: BTreeMap<String, f64>,
    meta: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct EntryHeader {
    name: String,
    shape: [usize; 4],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub entries: Vec<(String, Tensor<f32>)>,
    pub scalars: BTreeMap<String, f64>,
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<f32>) {
        self.entries.push((name.into(), tensor));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            version: FORMAT_VERSION,
            entries: self
                .entries
                .iter()
                .map(|(name, t)| EntryHeader {
                    name: name.clone(),
                    shape: t.shape().0,
                })
                .collect(),
            scalars: self.scalars.clone(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for (_, t) in &self.entries {
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(TensorError::Checkpoint("bad magic bytes".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        if header.version != FORMAT_VERSION {
            return Err(TensorError::Checkpoint(format!(
                "unsupported format version {}",
                header.version
            )));
        }
        let mut entries = Vec::with_capacity(header.entries.len());
        for e in header.entries {
            let shape = Shape(e.shape);
            let mut bytes = vec![0u8; shape.numel() * 4];
            r.read_exact(&mut bytes).map_err(|err| {
                TensorError::Checkpoint(format!("truncated payload for '{}': {err}", e.name))
            })?;
            let data = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            entries.push((e.name, Tensor::from_vec(shape, data)?));
        }
        Ok(Checkpoint {
            entries,
            scalars: header.scalars,
            meta: header.meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_in_memory() {
        let mut ck = Checkpoint::new();
        ck.insert("a/kernel", Tensor::from_fn([2, 1, 3, 3], |[n, _, h, w]| (n * 9 + h * 3 + w) as f32 * 0.1));
        ck.insert("b", Tensor::scalar(-0.0f32));
        ck.scalars.insert("lr".into(), 1e-4);
        ck.meta.insert("config".into(), "x = 1".into());
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, ck);
        assert!(back.get("b").unwrap().data()[0].is_sign_negative());
    }

    #[test]
    fn rejects_truncation_and_bad_magic() {
        let mut ck = Checkpoint::new();
        ck.insert("w", Tensor::ones([1, 1, 4, 4]));
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        assert!(Checkpoint::read_from(&buf[..buf.len() - 3]).is_err());
        buf[0] = b'X';
        assert!(Checkpoint::read_from(buf.as_slice()).is_err());
    }
}
