//! Binary parameter checkpoints.
//!
//! Layout: the magic line, a little-endian `u64` header length, a JSON header
//! `{"meta": .., "tensors": [{"name", "shape"}, ..]}`, then every tensor's
//! values as little-endian `f64` in header order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8] = b"ENCORE-CKPT-v1\n";

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    tensors: Vec<Entry>,
}

pub fn to_bytes(store: &ParamStore, meta: &serde_json::Value) -> Result<Vec<u8>> {
    let header = Header {
        meta: meta.clone(),
        tensors: store
            .iter()
            .map(|(_, p)| Entry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(MAGIC.len() + 8 + json.len() + store.num_scalars() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, p) in store.iter() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<(ParamStore, serde_json::Value)> {
    let bad = |m: &str| Error::BadCheckpoint(m.to_string());
    let rest = bytes.strip_prefix(MAGIC).ok_or_else(|| bad("missing magic"))?;
    if rest.len() < 8 {
        return Err(bad("truncated header length"));
    }
    let hlen = u64::from_le_bytes(rest[..8].try_into().expect("8 bytes")) as usize;
    let rest = &rest[8..];
    if rest.len() < hlen {
        return Err(bad("truncated header"));
    }
    let header: Header =
        serde_json::from_slice(&rest[..hlen]).map_err(|e| bad(&format!("header: {e}")))?;
    let mut data = &rest[hlen..];
    let mut store = ParamStore::new();
    for e in header.tensors {
        let n: usize = e.shape.iter().product();
        if data.len() < n * 8 {
            return Err(bad(&format!("truncated data for `{}`", e.name)));
        }
        let values = data[..n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        data = &data[n * 8..];
        store
            .add(e.name, Tensor::new(e.shape, values)?)
            .map_err(|e| bad(&e.to_string()))?;
    }
    if !data.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok((store, header.meta))
}

pub fn save(path: &Path, store: &ParamStore, meta: &serde_json::Value) -> Result<()> {
    let bytes = to_bytes(store, meta)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(ParamStore, serde_json::Value)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("a.w", Tensor::new(vec![2, 2], vec![1.0, -2.5, 1e-300, f64::MAX]).unwrap())
            .unwrap();
        s.add("b", Tensor::scalar(std::f64::consts::PI)).unwrap();
        s
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = store();
        let bytes = to_bytes(&s, &json!({"d_model": 16})).unwrap();
        let (back, meta) = from_bytes(&bytes).unwrap();
        assert_eq!(meta["d_model"], 16);
        for ((_, a), (_, b)) in s.iter().zip(back.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.value, b.value);
        }
        assert_eq!(to_bytes(&back, &meta).unwrap(), bytes);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let bytes = to_bytes(&store(), &json!({})).unwrap();
        assert!(matches!(from_bytes(b"nope"), Err(Error::BadCheckpoint(_))));
        assert!(matches!(
            from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::BadCheckpoint(_))
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(from_bytes(&extra), Err(Error::BadCheckpoint(_))));
    }
}
