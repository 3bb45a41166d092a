//! Precomputed token stores.
//!
//! Two on-disk formats share one in-memory map:
//! - JSON Lines, one `{"key": k, "vec": [...]}` record per line;
//! - binary: `EMB1`, `u32` dim, then per record a `u16` key length, the key
//!   bytes and `dim` little-endian `f32`s.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_visual_index, Embedding, Encoder};
use crate::scene::Scene;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingStore {
    dim: Option<usize>,
    map: BTreeMap<String, Embedding>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    key: String,
    vec: Vec<f32>,
}

impl EmbeddingStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&Embedding> {
        self.map.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    /// Adds `key`; a repeated key must carry an identical vector.
    pub fn insert(&mut self, key: impl Into<String>, e: Embedding) -> Result<()> {
        let key = key.into();
        match self.dim {
            Some(d) if d != e.dim() => {
                return Err(Error::Shape(format!(
                    "store holds {d}-dim tokens, {key:?} has {}",
                    e.dim()
                )))
            }
            None => self.dim = Some(e.dim()),
            _ => {}
        }
        if let Some(old) = self.map.get(&key) {
            if *old != e {
                return Err(Error::InvalidInput(format!("conflicting vectors for key {key:?}")));
            }
            return Ok(());
        }
        self.map.insert(key, e);
        Ok(())
    }

    pub fn write_jsonl(&self, w: impl Write) -> Result<()> {
        let mut w = BufWriter::new(w);
        for (key, e) in &self.map {
            let rec = Record {
                key: key.clone(),
                vec: e.as_slice().to_vec(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n").map_err(|e| Error::io("<jsonl>", e))?;
        }
        w.flush().map_err(|e| Error::io("<jsonl>", e))
    }

    pub fn read_jsonl(r: impl Read) -> Result<Self> {
        let mut store = Self::new();
        let mut seen = std::collections::HashSet::new();
        for (n, line) in BufReader::new(r).lines().enumerate() {
            let line = line.map_err(|e| Error::io("<jsonl>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
            if !seen.insert(rec.key.clone()) {
                return Err(Error::Format(format!("line {}: duplicate key {:?}", n + 1, rec.key)));
            }
            store.insert(rec.key, Embedding::from_f32(rec.vec)?)?;
        }
        Ok(store)
    }

    pub fn write_binary(&self, w: impl Write) -> Result<()> {
        let io = |e| Error::io("<emb1>", e);
        let mut w = BufWriter::new(w);
        let dim = self.dim.unwrap_or(0);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&(dim as u32).to_le_bytes()).map_err(io)?;
        for (key, e) in &self.map {
            let len = u16::try_from(key.len())
                .map_err(|_| Error::InvalidInput(format!("key too long for binary store: {key:?}")))?;
            w.write_all(&len.to_le_bytes()).map_err(io)?;
            w.write_all(key.as_bytes()).map_err(io)?;
            for x in e.as_slice() {
                w.write_all(&x.to_le_bytes()).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::io("<emb1>", e))?;
        let truncated = || Error::Format("truncated binary embedding store".into());
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing EMB1 magic".into()));
        }
        let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let mut store = Self::new();
        let mut pos = 8;
        while pos < bytes.len() {
            let len_bytes = bytes.get(pos..pos + 2).ok_or_else(truncated)?;
            let len = u16::from_le_bytes(len_bytes.try_into().unwrap()) as usize;
            pos += 2;
            let key = bytes.get(pos..pos + len).ok_or_else(truncated)?;
            let key = String::from_utf8(key.to_vec())
                .map_err(|_| Error::Format("store key is not UTF-8".into()))?;
            pos += len;
            let raw = bytes.get(pos..pos + 4 * dim).ok_or_else(truncated)?;
            pos += 4 * dim;
            let v = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if store.contains(&key) {
                return Err(Error::Format(format!("duplicate key {key:?}")));
            }
            store.insert(key, Embedding::from_f32(v)?)?;
        }
        Ok(store)
    }

    /// Loads by extension: `.bin`/`.emb` are binary, anything else JSON Lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        if is_binary(path) {
            Self::read_binary(f)
        } else {
            Self::read_jsonl(f)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        if is_binary(path) {
            self.write_binary(f)
        } else {
            self.write_jsonl(f)
        }
    }
}

fn is_binary(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("bin" | "emb"))
}

/// Encoder answering from a store: text by the exact string, crops by crop key.
#[derive(Debug, Clone)]
pub struct StoreEncoder {
    store: EmbeddingStore,
}

impl StoreEncoder {
    pub fn new(store: EmbeddingStore) -> Self {
        Self { store }
    }

    pub fn store(&self) -> &EmbeddingStore {
        &self.store
    }

    fn lookup(&self, key: &str) -> Result<Embedding> {
        self.store
            .get(key)
            .cloned()
            .ok_or_else(|| Error::KeyNotFound(key.to_string()))
    }
}

impl Encoder for StoreEncoder {
    fn dim(&self) -> usize {
        self.store.dim().unwrap_or(0)
    }

    fn embed_text(&self, text: &str) -> Result<Embedding> {
        self.lookup(text)
    }

    fn embed_visual(&self, scene: &Scene, index: usize) -> Result<Embedding> {
        check_visual_index(scene, index)?;
        match scene.objects.get(index) {
            Some(o) => self.lookup(&o.crop_key),
            None => self.lookup(&scene.workspace_crop_key),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> EmbeddingStore {
        let mut s = EmbeddingStore::new();
        s.insert("left mug", Embedding::normalized(&[1.0, 2.0, 3.0]).unwrap()).unwrap();
        s.insert("ws", Embedding::normalized(&[0.0, 0.0, 1.0]).unwrap()).unwrap();
        s
    }

    #[test]
    fn lookup_hit_and_miss() {
        let enc = StoreEncoder::new(sample());
        let hit = enc.embed_text("left mug").unwrap();
        assert_eq!(&hit, sample().get("left mug").unwrap());
        assert!(matches!(enc.embed_text("right mug"), Err(Error::KeyNotFound(k)) if k == "right mug"));
    }

    #[test]
    fn jsonl_rejects_duplicates() {
        let text = "{\"key\":\"a\",\"vec\":[1.0,0.0]}\n{\"key\":\"a\",\"vec\":[0.0,1.0]}\n";
        assert!(matches!(EmbeddingStore::read_jsonl(text.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn binary_rejects_bad_magic_and_truncation() {
        assert!(EmbeddingStore::read_binary(&b"EMB2\0\0\0\0"[..]).is_err());
        let mut bytes = Vec::new();
        sample().write_binary(&mut bytes).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(EmbeddingStore::read_binary(&bytes[..]), Err(Error::Format(_))));
    }

    #[test]
    fn files_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["s.jsonl", "s.bin"] {
            let p = dir.path().join(name);
            sample().save(&p).unwrap();
            assert_eq!(EmbeddingStore::load(&p).unwrap(), sample());
        }
    }

    proptest! {
        #[test]
        fn both_formats_round_trip(
            entries in proptest::collection::btree_map("[a-z ]{1,12}", proptest::collection::vec(-1.0f32..1.0, 4), 1..8)
        ) {
            let mut store = EmbeddingStore::new();
            for (k, v) in entries {
                if v.iter().all(|x| x.abs() < 1e-3) { continue; }
                let v64: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
                store.insert(k, Embedding::normalized(&v64).unwrap()).unwrap();
            }
            let mut j = Vec::new();
            store.write_jsonl(&mut j).unwrap();
            prop_assert_eq!(&EmbeddingStore::read_jsonl(&j[..]).unwrap(), &store);
            let mut b = Vec::new();
            store.write_binary(&mut b).unwrap();
            prop_assert_eq!(&EmbeddingStore::read_binary(&b[..]).unwrap(), &store);
        }
    }
}
