//! Columnar link store.
//!
//! Annotations are kept as parallel column vectors, one entry per link, with
//! documents sorted by key and each document owning a contiguous row range.
//! Entity names, tags and leftover `details` objects are dictionary encoded.
//! Documents without any link are still recorded so that per-document means
//! count them.
//!
//! # File layout (version 1, little endian)
//!
//! ```text
//! magic "ENTLINKS"  u32 version
//! str collection    u8 kind (0 passage, 1 document)
//! dict names        u64 n, n × str
//! dict tags         u64 n, n × str
//! dict extras       u64 n, n × str      (JSON objects)
//! doc keys          u64 n, n × (u8 0 + u64 | u8 1 + str)
//! row offsets       (n_docs + 1) × u64
//! rows              u64 n_rows, then one block per column:
//!   field u8 | entity_id u64 | start u32 | end u32 | name u32 |
//!   tag u32 | md_score f64 | extra u32
//! ```
//!
//! `u32::MAX` marks an absent tag or extra; NaN marks an absent `md_score`.
//! Strings are `u32` byte length followed by UTF-8.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use serde_json::{Map, Number, Value};

use crate::codec::{self, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::format::{self, AnnotatedDocument, DocKey, EntityAnnotation, Field, Kind};

const MAGIC: &[u8; 8] = b"ENTLINKS";
const VERSION: u32 = 1;
const NONE: u32 = u32::MAX;

/// How ingest treats lines that fail to parse or validate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IngestPolicy {
    /// Count and skip the line.
    #[default]
    Skip,
    /// Abort on the first bad line; nothing is written.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct IngestReport {
    /// Annotations stored, summed over accepted documents.
    pub rows: u64,
    /// Documents accepted.
    pub documents: u64,
    /// Lines rejected (parse failures, error-level violations, duplicate keys).
    pub violations: u64,
    #[serde(serialize_with = "ser_secs")]
    pub wall_time: Duration,
}

fn ser_secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CollectionStats {
    pub total_links: u64,
    pub docs_with_links: u64,
    pub total_docs: u64,
    pub mean_links_per_doc: f64,
}

/// Which entity a lookup targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntitySelector {
    Id(u64),
    /// Exact, case-sensitive canonical name.
    Name(String),
}

impl From<u64> for EntitySelector {
    fn from(id: u64) -> Self {
        EntitySelector::Id(id)
    }
}

impl From<&str> for EntitySelector {
    fn from(name: &str) -> Self {
        EntitySelector::Name(name.to_owned())
    }
}

#[derive(Debug, Default)]
struct Dict {
    values: Vec<String>,
    codes: HashMap<String, u32>,
}

impl Dict {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&c) = self.codes.get(s) {
            return c;
        }
        let c = u32::try_from(self.values.len()).expect("dictionary exceeds u32 codes");
        self.values.push(s.to_owned());
        self.codes.insert(s.to_owned(), c);
        c
    }

    fn from_values(values: Vec<String>) -> Result<Self> {
        let mut codes = HashMap::with_capacity(values.len());
        for (i, v) in values.iter().enumerate() {
            if codes.insert(v.clone(), i as u32).is_some() {
                return Err(Error::corrupt(format!("duplicate dictionary entry {v:?}")));
            }
        }
        Ok(Dict { values, codes })
    }

    fn get(&self, code: u32) -> Result<&str> {
        self.values
            .get(code as usize)
            .map(String::as_str)
            .ok_or_else(|| Error::corrupt(format!("dictionary code {code} out of range")))
    }
}

#[derive(Debug, Default)]
struct Columns {
    field: Vec<u8>,
    entity_id: Vec<u64>,
    start: Vec<u32>,
    end: Vec<u32>,
    name: Vec<u32>,
    tag: Vec<u32>,
    md_score: Vec<f64>,
    extra: Vec<u32>,
}

impl Columns {
    fn len(&self) -> usize {
        self.entity_id.len()
    }
}

/// An immutable, query-ready link store.
#[derive(Debug)]
pub struct LinkStore {
    collection: String,
    kind: Kind,
    keys: Vec<DocKey>,
    offsets: Vec<u64>,
    cols: Columns,
    names: Dict,
    tags: Dict,
    extras: Dict,
    by_entity: HashMap<u64, Vec<u32>>,
    by_name: HashMap<u32, Vec<u32>>,
}

/// Accumulates documents before freezing them into a [`LinkStore`].
#[derive(Debug)]
pub struct LinkStoreBuilder {
    collection: String,
    kind: Kind,
    docs: HashMap<DocKey, AnnotatedDocument>,
}

impl LinkStoreBuilder {
    pub fn new(collection: impl Into<String>, kind: Kind) -> Self {
        LinkStoreBuilder { collection: collection.into(), kind, docs: HashMap::new() }
    }

    /// Adds one document. Rejects duplicate keys, a kind mismatch and
    /// error-level format violations.
    pub fn add(&mut self, mut doc: AnnotatedDocument) -> Result<()> {
        if doc.kind != self.kind {
            return Err(Error::schema(format!(
                "{} document in a {} store",
                doc.kind.as_str(),
                self.kind.as_str()
            )));
        }
        if let Some(v) = format::validate(&doc, None).into_iter().find(|v| v.is_error()) {
            return Err(Error::Violation(Box::new(v)));
        }
        for (_, a) in doc.annotations() {
            if u32::try_from(a.end_pos).is_err() {
                return Err(Error::schema(format!("{}: offset {} too large for the store", doc.key, a.end_pos)));
            }
        }
        if self.docs.contains_key(&doc.key) {
            return Err(Error::Duplicate(format!("document {}", doc.key)));
        }
        doc.normalize();
        self.docs.insert(doc.key.clone(), doc);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn build(self) -> LinkStore {
        let mut docs: Vec<_> = self.docs.into_values().collect();
        docs.sort_by(|a, b| a.key.cmp(&b.key));

        let mut cols = Columns::default();
        let mut names = Dict::default();
        let mut tags = Dict::default();
        let mut extras = Dict::default();
        let mut offsets = Vec::with_capacity(docs.len() + 1);
        offsets.push(0u64);
        let mut keys = Vec::with_capacity(docs.len());

        for doc in docs {
            for (field, a) in doc.annotations() {
                let mut rest = a.details.clone();
                let tag = match rest.get("tag") {
                    Some(Value::String(t)) => {
                        let c = tags.intern(t);
                        rest.remove("tag");
                        c
                    }
                    _ => NONE,
                };
                let md = match rest.get("md_score") {
                    Some(Value::Number(n)) if n.is_f64() => {
                        let v = n.as_f64().expect("is_f64");
                        rest.remove("md_score");
                        v
                    }
                    _ => f64::NAN,
                };
                let extra = if rest.is_empty() { NONE } else { extras.intern(&Value::Object(rest).to_string()) };

                cols.field.push(field.code());
                cols.entity_id.push(a.entity_id);
                cols.start.push(a.start_pos as u32);
                cols.end.push(a.end_pos as u32);
                cols.name.push(names.intern(&a.entity));
                cols.tag.push(tag);
                cols.md_score.push(md);
                cols.extra.push(extra);
            }
            offsets.push(cols.len() as u64);
            keys.push(doc.key);
        }

        let mut store = LinkStore {
            collection: self.collection,
            kind: self.kind,
            keys,
            offsets,
            cols,
            names,
            tags,
            extras,
            by_entity: HashMap::new(),
            by_name: HashMap::new(),
        };
        store.build_postings();
        store
    }
}

impl LinkStore {
    pub fn builder(collection: impl Into<String>, kind: Kind) -> LinkStoreBuilder {
        LinkStoreBuilder::new(collection, kind)
    }

    pub fn from_documents(
        collection: impl Into<String>,
        kind: Kind,
        docs: impl IntoIterator<Item = AnnotatedDocument>,
    ) -> Result<Self> {
        let mut b = LinkStoreBuilder::new(collection, kind);
        for d in docs {
            b.add(d)?;
        }
        Ok(b.build())
    }

    pub fn collection(&self) -> &str {
        &self.collection
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn doc_count(&self) -> usize {
        self.keys.len()
    }

    pub fn row_count(&self) -> usize {
        self.cols.len()
    }

    pub fn doc_keys(&self) -> &[DocKey] {
        &self.keys
    }

    pub fn contains(&self, key: &DocKey) -> bool {
        self.keys.binary_search(key).is_ok()
    }

    /// All links for `key`, grouped by field and start-sorted. An unknown key
    /// yields an empty document; use [`LinkStore::contains`] to tell the two
    /// apart.
    pub fn links_for_doc(&self, key: &DocKey) -> Result<AnnotatedDocument> {
        match self.keys.binary_search(key) {
            Ok(i) => self.document_at(i),
            Err(_) => Ok(AnnotatedDocument::empty(self.kind, key.clone())),
        }
    }

    /// Distinct keys, ascending, of documents with at least one matching link.
    pub fn docs_for_entity(&self, selector: &EntitySelector) -> Vec<DocKey> {
        let docs = match selector {
            EntitySelector::Id(id) => self.by_entity.get(id),
            EntitySelector::Name(name) => self.names.codes.get(name.as_str()).and_then(|c| self.by_name.get(c)),
        };
        docs.map(|d| d.iter().map(|&i| self.keys[i as usize].clone()).collect()).unwrap_or_default()
    }

    pub fn collection_stats(&self) -> CollectionStats {
        let total_links = self.cols.len() as u64;
        let docs_with_links = self.offsets.windows(2).filter(|w| w[1] > w[0]).count() as u64;
        let total_docs = self.keys.len() as u64;
        let mean_links_per_doc = if total_docs == 0 { 0.0 } else { total_links as f64 / total_docs as f64 };
        CollectionStats { total_links, docs_with_links, total_docs, mean_links_per_doc }
    }

    /// Every stored document in key order.
    pub fn documents(&self) -> impl Iterator<Item = Result<AnnotatedDocument>> + '_ {
        (0..self.keys.len()).map(|i| self.document_at(i))
    }

    /// Distinct `(doc_key, entity_id)` pairs in key order, entity ids ascending.
    pub fn doc_entity_pairs(&self) -> Vec<(DocKey, u64)> {
        let mut out = Vec::new();
        for (i, key) in self.keys.iter().enumerate() {
            let rows = self.offsets[i] as usize..self.offsets[i + 1] as usize;
            let ids: BTreeSet<u64> = self.cols.entity_id[rows].iter().copied().collect();
            out.extend(ids.into_iter().map(|id| (key.clone(), id)));
        }
        out
    }

    /// Canonical name recorded for an entity id, if any link carries it.
    pub fn entity_name(&self, id: u64) -> Option<&str> {
        let doc = *self.by_entity.get(&id)?.first()?;
        let rows = self.offsets[doc as usize] as usize..self.offsets[doc as usize + 1] as usize;
        rows.into_iter()
            .find(|&r| self.cols.entity_id[r] == id)
            .and_then(|r| self.names.get(self.cols.name[r]).ok())
    }

    fn document_at(&self, i: usize) -> Result<AnnotatedDocument> {
        let mut doc = AnnotatedDocument::empty(self.kind, self.keys[i].clone());
        for r in self.offsets[i] as usize..self.offsets[i + 1] as usize {
            let (field, a) = self.row(r)?;
            doc.fields.entry(field).or_default().push(a);
        }
        Ok(doc)
    }

    fn row(&self, r: usize) -> Result<(Field, EntityAnnotation)> {
        let c = &self.cols;
        let field = Field::from_code(c.field[r]).ok_or_else(|| Error::corrupt(format!("bad field code {}", c.field[r])))?;
        let mut details = match c.extra[r] {
            NONE => Map::new(),
            code => match serde_json::from_str(self.extras.get(code)?) {
                Ok(Value::Object(m)) => m,
                _ => return Err(Error::corrupt("extra details are not a JSON object")),
            },
        };
        if c.tag[r] != NONE {
            details.insert("tag".into(), Value::String(self.tags.get(c.tag[r])?.to_owned()));
        }
        if let Some(n) = Number::from_f64(c.md_score[r]) {
            details.insert("md_score".into(), Value::Number(n));
        }
        let a = EntityAnnotation {
            entity_id: c.entity_id[r],
            start_pos: c.start[r] as usize,
            end_pos: c.end[r] as usize,
            entity: self.names.get(c.name[r])?.to_owned(),
            details,
        };
        Ok((field, a))
    }

    fn build_postings(&mut self) {
        let mut by_entity: HashMap<u64, Vec<u32>> = HashMap::new();
        let mut by_name: HashMap<u32, Vec<u32>> = HashMap::new();
        for d in 0..self.keys.len() {
            for r in self.offsets[d] as usize..self.offsets[d + 1] as usize {
                // Docs are visited in key order, so lists stay sorted; only
                // consecutive duplicates need skipping.
                let list = by_entity.entry(self.cols.entity_id[r]).or_default();
                if list.last() != Some(&(d as u32)) {
                    list.push(d as u32);
                }
                let list = by_name.entry(self.cols.name[r]).or_default();
                if list.last() != Some(&(d as u32)) {
                    list.push(d as u32);
                }
            }
        }
        self.by_entity = by_entity;
        self.by_name = by_name;
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        codec::write_atomic(path, |enc| self.encode(enc).map_err(Error::from))
    }

    fn encode<W: Write>(&self, enc: &mut Encoder<W>) -> std::io::Result<()> {
        enc.header(MAGIC, VERSION)?;
        enc.str(&self.collection)?;
        enc.u8(match self.kind {
            Kind::Passage => 0,
            Kind::Document => 1,
        })?;
        for dict in [&self.names, &self.tags, &self.extras] {
            enc.len(dict.values.len())?;
            for v in &dict.values {
                enc.str(v)?;
            }
        }
        enc.len(self.keys.len())?;
        for k in &self.keys {
            match k {
                DocKey::Num(n) => {
                    enc.u8(0)?;
                    enc.u64(*n)?;
                }
                DocKey::Str(s) => {
                    enc.u8(1)?;
                    enc.str(s)?;
                }
            }
        }
        for &o in &self.offsets {
            enc.u64(o)?;
        }
        let c = &self.cols;
        enc.len(c.len())?;
        c.field.iter().try_for_each(|&v| enc.u8(v))?;
        c.entity_id.iter().try_for_each(|&v| enc.u64(v))?;
        c.start.iter().try_for_each(|&v| enc.u32(v))?;
        c.end.iter().try_for_each(|&v| enc.u32(v))?;
        c.name.iter().try_for_each(|&v| enc.u32(v))?;
        c.tag.iter().try_for_each(|&v| enc.u32(v))?;
        c.md_score.iter().try_for_each(|&v| enc.f64(v))?;
        c.extra.iter().try_for_each(|&v| enc.u32(v))?;
        Ok(())
    }

    pub fn open(path: &Path) -> Result<Self> {
        let buf = fs::read(path)?;
        Self::decode(&buf)
    }

    fn decode(buf: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(buf);
        dec.header(MAGIC, VERSION)?;
        let collection = dec.str()?;
        let kind = match dec.u8()? {
            0 => Kind::Passage,
            1 => Kind::Document,
            k => return Err(Error::corrupt(format!("bad kind {k}"))),
        };
        let mut dicts = Vec::with_capacity(3);
        for _ in 0..3 {
            let n = dec.len(4)?;
            let values = (0..n).map(|_| dec.str()).collect::<Result<Vec<_>>>()?;
            dicts.push(Dict::from_values(values)?);
        }
        let extras = dicts.pop().expect("3 dicts");
        let tags = dicts.pop().expect("3 dicts");
        let names = dicts.pop().expect("3 dicts");

        let n_docs = dec.len(9)?;
        let mut keys = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            keys.push(match dec.u8()? {
                0 => DocKey::Num(dec.u64()?),
                1 => DocKey::Str(dec.str()?),
                t => return Err(Error::corrupt(format!("bad doc key tag {t}"))),
            });
        }
        if keys.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::corrupt("document keys not strictly ascending"));
        }
        let offsets = (0..=n_docs).map(|_| dec.u64()).collect::<Result<Vec<_>>>()?;

        let n = dec.len(37)?;
        if offsets.first() != Some(&0)
            || offsets.last() != Some(&(n as u64))
            || offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::corrupt("row offsets inconsistent with row count"));
        }
        let cols = Columns {
            field: (0..n).map(|_| dec.u8()).collect::<Result<_>>()?,
            entity_id: (0..n).map(|_| dec.u64()).collect::<Result<_>>()?,
            start: (0..n).map(|_| dec.u32()).collect::<Result<_>>()?,
            end: (0..n).map(|_| dec.u32()).collect::<Result<_>>()?,
            name: (0..n).map(|_| dec.u32()).collect::<Result<_>>()?,
            tag: (0..n).map(|_| dec.u32()).collect::<Result<_>>()?,
            md_score: (0..n).map(|_| dec.f64()).collect::<Result<_>>()?,
            extra: (0..n).map(|_| dec.u32()).collect::<Result<_>>()?,
        };
        dec.finish()?;
        if cols.name.iter().any(|&c| c as usize >= names.values.len()) {
            return Err(Error::corrupt("name code out of range"));
        }

        let mut store =
            LinkStore { collection, kind, keys, offsets, cols, names, tags, extras, by_entity: HashMap::new(), by_name: HashMap::new() };
        store.build_postings();
        Ok(store)
    }
}

/// Streams JSONL into a new store and persists it at `path`.
///
/// Blank lines are ignored. Under [`IngestPolicy::Strict`] the first bad
/// line aborts the ingest and no file is written.
pub fn ingest<R: BufRead>(
    lines: R,
    kind: Kind,
    collection: &str,
    path: &Path,
    policy: IngestPolicy,
) -> Result<(LinkStore, IngestReport)> {
    let started = Instant::now();
    let (store, mut report) = ingest_in_memory(lines, kind, collection, policy)?;
    store.save(path)?;
    report.wall_time = started.elapsed();
    Ok((store, report))
}

/// Like [`ingest`] without persisting.
pub fn ingest_in_memory<R: BufRead>(
    lines: R,
    kind: Kind,
    collection: &str,
    policy: IngestPolicy,
) -> Result<(LinkStore, IngestReport)> {
    let started = Instant::now();
    let mut builder = LinkStoreBuilder::new(collection, kind);
    let mut rows = 0u64;
    let mut violations = 0u64;
    for (lineno, line) in lines.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let outcome = format::parse_line(&line, kind).and_then(|doc| {
            let n = doc.annotation_count() as u64;
            builder.add(doc).map(|()| n)
        });
        match outcome {
            Ok(n) => rows += n,
            Err(e) if policy == IngestPolicy::Strict => return Err(e),
            Err(e) => {
                log::warn!("line {}: skipped: {e}", lineno + 1);
                violations += 1;
            }
        }
    }
    let documents = builder.len() as u64;
    let store = builder.build();
    let report = IngestReport { rows, documents, violations, wall_time: started.elapsed() };
    Ok((store, report))
}
