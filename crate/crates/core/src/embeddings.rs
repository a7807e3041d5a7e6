//! Word and entity vectors living in one shared space.
//!
//! Text format: one vector per line, a key followed by exactly `dim`
//! whitespace-separated values. Keys starting with `ENTITY/` are entity
//! vectors named by the rest of the key with `_` read as a space
//! (`ENTITY/Pacific_Ocean`); all others are words. A leading word2vec-style
//! `count dim` header line is skipped.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use crate::codec::{self, Decoder, Encoder};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ENTLEMBS";
const VERSION: u32 = 1;
pub const ENTITY_PREFIX: &str = "ENTITY/";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorKind {
    Word,
    Entity,
}

impl fmt::Display for VectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VectorKind::Word => "word",
            VectorKind::Entity => "entity",
        })
    }
}

impl FromStr for VectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" => Ok(VectorKind::Word),
            "entity" => Ok(VectorKind::Entity),
            _ => Err(Error::usage(format!("unknown vector kind {s:?} (expected word or entity)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EmbeddingVector {
    pub kind: VectorKind,
    pub key: String,
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn word(key: impl Into<String>, values: Vec<f32>) -> Self {
        EmbeddingVector { kind: VectorKind::Word, key: key.into(), values }
    }

    pub fn entity(key: impl Into<String>, values: Vec<f32>) -> Self {
        EmbeddingVector { kind: VectorKind::Entity, key: key.into(), values }
    }
}

/// Dot product, accumulated in `f64`.
pub fn similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::usage(format!("dimension mismatch: {} vs {}", a.len(), b.len())));
    }
    Ok(dot(a, b))
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct EmbeddingIngestReport {
    pub accepted: usize,
    pub rejected: Vec<(usize, String)>,
    /// Keys seen more than once; the later vector wins.
    pub overwritten: Vec<(VectorKind, String)>,
}

#[derive(Debug)]
pub struct EmbeddingStore {
    dim: usize,
    index: HashMap<(VectorKind, String), usize>,
    data: Vec<f32>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::usage("embedding dimension must be positive"));
        }
        Ok(EmbeddingStore { dim, index: HashMap::new(), data: Vec::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Stores one vector. A repeated `(kind, key)` replaces the earlier
    /// values and returns `true`.
    pub fn insert(&mut self, v: EmbeddingVector) -> Result<bool> {
        if v.values.len() != self.dim {
            return Err(Error::schema(format!(
                "{} {:?}: {} values, store dimension is {}",
                v.kind,
                v.key,
                v.values.len(),
                self.dim
            )));
        }
        match self.index.get(&(v.kind, v.key.clone())) {
            Some(&slot) => {
                self.data[slot * self.dim..(slot + 1) * self.dim].copy_from_slice(&v.values);
                Ok(true)
            }
            None => {
                let slot = self.index.len();
                self.data.extend_from_slice(&v.values);
                self.index.insert((v.kind, v.key), slot);
                Ok(false)
            }
        }
    }

    pub fn ingest(&mut self, rows: impl IntoIterator<Item = Result<EmbeddingVector>>) -> EmbeddingIngestReport {
        let mut report = EmbeddingIngestReport::default();
        for (i, row) in rows.into_iter().enumerate() {
            let key = row.as_ref().ok().map(|v| (v.kind, v.key.clone()));
            match row.and_then(|v| self.insert(v)) {
                Ok(replaced) => {
                    report.accepted += 1;
                    if replaced {
                        let (kind, key) = key.expect("ok row has a key");
                        log::warn!("duplicate {kind} vector {key:?}: keeping the later one");
                        report.overwritten.push((kind, key));
                    }
                }
                Err(e) => report.rejected.push((i + 1, e.to_string())),
            }
        }
        report
    }

    pub fn get(&self, kind: VectorKind, key: &str) -> Option<&[f32]> {
        let slot = *self.index.get(&(kind, key.to_owned()))?;
        Some(&self.data[slot * self.dim..(slot + 1) * self.dim])
    }

    pub fn get_embedding(&self, kind: VectorKind, key: &str) -> Result<EmbeddingVector> {
        self.get(kind, key)
            .map(|v| EmbeddingVector { kind, key: key.to_owned(), values: v.to_vec() })
            .ok_or_else(|| Error::NotFound(format!("{kind} vector {key:?}")))
    }

    pub fn word(&self, key: &str) -> Option<&[f32]> {
        self.get(VectorKind::Word, key)
    }

    pub fn entity(&self, name: &str) -> Option<&[f32]> {
        self.get(VectorKind::Entity, name)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        codec::write_atomic(path, |enc| self.encode(enc).map_err(Error::from))
    }

    fn encode<W: Write>(&self, enc: &mut Encoder<W>) -> std::io::Result<()> {
        enc.header(MAGIC, VERSION)?;
        enc.u32(self.dim as u32)?;
        let mut entries: Vec<_> = self.index.iter().collect();
        entries.sort_by_key(|(_, &slot)| slot);
        enc.len(entries.len())?;
        for ((kind, key), &slot) in entries {
            enc.u8(match kind {
                VectorKind::Word => 0,
                VectorKind::Entity => 1,
            })?;
            enc.str(key)?;
            for &v in &self.data[slot * self.dim..(slot + 1) * self.dim] {
                enc.f32(v)?;
            }
        }
        Ok(())
    }

    pub fn open(path: &Path) -> Result<Self> {
        let buf = fs::read(path)?;
        let mut dec = Decoder::new(&buf);
        dec.header(MAGIC, VERSION)?;
        let dim = dec.u32()? as usize;
        let mut store = EmbeddingStore::new(dim).map_err(|e| Error::corrupt(e.to_string()))?;
        let n = dec.len(5 + 4 * dim)?;
        for _ in 0..n {
            let kind = match dec.u8()? {
                0 => VectorKind::Word,
                1 => VectorKind::Entity,
                t => return Err(Error::corrupt(format!("bad vector kind {t}"))),
            };
            let key = dec.str()?;
            let values = (0..dim).map(|_| dec.f32()).collect::<Result<Vec<_>>>()?;
            if store.insert(EmbeddingVector { kind, key, values })? {
                return Err(Error::corrupt("duplicate vector key"));
            }
        }
        dec.finish()?;
        Ok(store)
    }
}

/// Parses the text format for a store of dimension `dim`.
pub fn read_text<R: BufRead>(reader: R, dim: usize) -> impl Iterator<Item = Result<EmbeddingVector>> {
    reader
        .lines()
        .enumerate()
        .filter(move |(i, line)| match line {
            Ok(l) => !l.trim().is_empty() && !(*i == 0 && is_header(l, dim)),
            Err(_) => true,
        })
        .map(move |(i, line)| parse_text_row(&line?, dim).map_err(|e| Error::schema(format!("line {}: {e}", i + 1))))
}

fn is_header(line: &str, dim: usize) -> bool {
    let parts: Vec<&str> = line.split_whitespace().collect();
    parts.len() == 2 && parts[0].parse::<u64>().is_ok() && parts[1].parse::<usize>() == Ok(dim) && dim != 1
}

fn parse_text_row(line: &str, dim: usize) -> Result<EmbeddingVector> {
    let mut parts = line.split_whitespace();
    let key = parts.next().ok_or_else(|| Error::schema("empty row"))?;
    let values = parts
        .map(|s| s.parse::<f32>().map_err(|_| Error::schema(format!("bad value {s:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != dim {
        return Err(Error::schema(format!("{key:?}: expected {dim} values, found {}", values.len())));
    }
    Ok(match key.strip_prefix(ENTITY_PREFIX) {
        Some(title) => EmbeddingVector::entity(title.replace('_', " "), values),
        None => EmbeddingVector::word(key, values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ingest_and_get() {
        let mut s = EmbeddingStore::new(3).unwrap();
        let r = s.ingest(read_text("toronto -0.1497 -0.7765 -0.01\nENTITY/Montreal 1 2 3\n".as_bytes(), 3));
        assert_eq!(r.accepted, 2);
        assert_eq!(s.get_embedding(VectorKind::Word, "toronto").unwrap().values, [-0.1497, -0.7765, -0.01]);
        assert_eq!(s.entity("Montreal").unwrap(), [1.0, 2.0, 3.0]);
        assert!(s.word("Montreal").is_none());
        assert!(matches!(s.get_embedding(VectorKind::Word, "nope"), Err(Error::NotFound(_))));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut s = EmbeddingStore::new(3).unwrap();
        let r = s.ingest(read_text("short 1 2\nok 1 2 3\n".as_bytes(), 3));
        assert_eq!(r.accepted, 1);
        assert_eq!(r.rejected.len(), 1);
        assert!(s.insert(EmbeddingVector::word("x", vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn duplicates_last_write_wins() {
        let mut s = EmbeddingStore::new(2).unwrap();
        let r = s.ingest(read_text("a 1 1\na 2 2\nENTITY/a 3 3\n".as_bytes(), 2));
        assert_eq!(r.accepted, 3);
        assert_eq!(r.overwritten, [(VectorKind::Word, "a".to_owned())]);
        assert_eq!(s.word("a").unwrap(), [2.0, 2.0]);
        assert_eq!(s.entity("a").unwrap(), [3.0, 3.0]);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn entity_titles_and_header() {
        let mut s = EmbeddingStore::new(2).unwrap();
        let r = s.ingest(read_text("2 2\nENTITY/Pacific_Ocean 0.5 0.25\nnew 1 0\nlong 1 2 3\n".as_bytes(), 2));
        assert_eq!(r.accepted, 2, "{r:?}");
        assert_eq!(r.rejected.len(), 1);
        assert_eq!(s.entity("Pacific Ocean").unwrap(), [0.5, 0.25]);
        assert_eq!(s.word("new").unwrap(), [1.0, 0.0]);
    }

    #[test]
    fn dot_product() {
        assert_eq!(similarity(&[1.0, 0.0], &[2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(similarity(&[1.5, -2.0, 7.0], &[0.0; 3]).unwrap(), 0.0);
        assert!(similarity(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn related_pair_scores_higher() {
        // Toy joint space: the Montreal word and entity point the same way,
        // "green" is nearly orthogonal.
        let montreal_word = [0.9f32, 0.8, 0.1, 0.0];
        let montreal_entity = [1.0f32, 0.7, 0.2, 0.1];
        let green_word = [0.05f32, -0.1, 0.0, 0.95];
        let related = similarity(&montreal_word, &montreal_entity).unwrap();
        let unrelated = similarity(&montreal_word, &green_word).unwrap();
        assert!(related > unrelated);
    }

    #[test]
    fn persist_and_reopen() {
        let mut s = EmbeddingStore::new(2).unwrap();
        s.insert(EmbeddingVector::word("w", vec![0.1, -0.2])).unwrap();
        s.insert(EmbeddingVector::entity("E", vec![1e-8, 3.5])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.store");
        s.save(&path).unwrap();
        let back = EmbeddingStore::open(&path).unwrap();
        assert_eq!(back.dim(), 2);
        assert_eq!(back.word("w"), s.word("w"));
        assert_eq!(back.entity("E"), s.entity("E"));
    }
}
