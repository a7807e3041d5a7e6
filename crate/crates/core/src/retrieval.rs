//! Tokenizer, inverted index and BM25 ranking.
//!
//! Scoring uses the Lucene-style BM25 that Anserini ships:
//!
//! ```text
//! score(d, q) = Σ_{t ∈ q} idf(t) · tf / (tf + k1 · (1 − b + b · dl / avgdl))
//! idf(t)      = ln(1 + (N − df + 0.5) / (df + 0.5))
//! ```
//!
//! Repeated query terms count once per occurrence. Ties are broken by
//! ascending document key.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::codec::{self, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::expansion::ExpansionMode;
use crate::format::DocKey;

const MAGIC: &[u8; 8] = b"ENTLINDX";
const VERSION: u32 = 1;

/// Lucene's default English stop set.
pub const STOPWORDS: [&str; 33] = [
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it", "no", "not", "of",
    "on", "or", "such", "that", "the", "their", "then", "there", "these", "they", "this", "to", "was", "will", "with",
];

/// A token with its code-point span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Lowercased runs of alphanumeric code points, with code-point offsets.
pub fn token_spans(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut current: Option<Token> = None;
    for (i, c) in text.chars().enumerate() {
        if c.is_alphanumeric() {
            let tok = current.get_or_insert_with(|| Token { text: String::new(), start: i, end: i });
            tok.text.extend(c.to_lowercase());
            tok.end = i + 1;
        } else if let Some(tok) = current.take() {
            out.push(tok);
        }
    }
    out.extend(current);
    out
}

/// Default analysis: lowercase, split on every non-alphanumeric code point.
pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text).into_iter().map(|t| t.text).collect()
}

/// Analyzer options beyond plain tokenization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct Analyzer {
    pub stem: bool,
    pub stopwords: bool,
}

impl Analyzer {
    pub fn analyze(&self, text: &str) -> Vec<String> {
        let stop: HashSet<&str> = if self.stopwords { STOPWORDS.into_iter().collect() } else { HashSet::new() };
        tokenize(text)
            .into_iter()
            .filter(|t| !stop.contains(t.as_str()))
            .map(|t| if self.stem { porter_stemmer::stem(&t) } else { t })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.82, b: 0.68 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !(k1 >= 0.0 && k1.is_finite()) || !(0.0..=1.0).contains(&b) {
            return Err(Error::usage(format!("BM25 parameters out of range: k1={k1} (need >= 0), b={b} (need 0..=1)")));
        }
        Ok(Bm25Params { k1, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    doc: u32,
    tf: u32,
}

#[derive(Debug)]
pub struct InvertedIndex {
    analyzer: Analyzer,
    expansion: ExpansionMode,
    postings: HashMap<String, Vec<Posting>>,
    keys: Vec<DocKey>,
    lengths: Vec<u32>,
    total_length: u64,
}

impl InvertedIndex {
    /// Indexes `(doc_key, text)` pairs. Keys must be unique.
    pub fn build<I, S>(corpus: I, analyzer: Analyzer) -> Result<Self>
    where
        I: IntoIterator<Item = (DocKey, S)>,
        S: AsRef<str>,
    {
        let mut index = InvertedIndex {
            analyzer,
            expansion: ExpansionMode::None,
            postings: HashMap::new(),
            keys: Vec::new(),
            lengths: Vec::new(),
            total_length: 0,
        };
        let mut seen = HashSet::new();
        for (key, text) in corpus {
            if !seen.insert(key.clone()) {
                return Err(Error::Duplicate(format!("document {key} indexed twice")));
            }
            index.add(key, text.as_ref())?;
        }
        Ok(index)
    }

    fn add(&mut self, key: DocKey, text: &str) -> Result<()> {
        let doc = u32::try_from(self.keys.len()).map_err(|_| Error::usage("more than 2^32 documents"))?;
        let terms = self.analyzer.analyze(text);
        let mut tf: HashMap<String, u32> = HashMap::new();
        for t in &terms {
            *tf.entry(t.clone()).or_default() += 1;
        }
        for (term, tf) in tf {
            self.postings.entry(term).or_default().push(Posting { doc, tf });
        }
        let len = u32::try_from(terms.len()).map_err(|_| Error::usage(format!("document {key} too long")))?;
        self.lengths.push(len);
        self.total_length += u64::from(len);
        self.keys.push(key);
        Ok(())
    }

    /// Records which expansion the indexed texts went through, so queries
    /// can be expanded the same way.
    pub fn with_expansion(mut self, mode: ExpansionMode) -> Self {
        self.expansion = mode;
        self
    }

    pub fn expansion(&self) -> ExpansionMode {
        self.expansion
    }

    pub fn analyzer(&self) -> Analyzer {
        self.analyzer
    }

    pub fn doc_count(&self) -> usize {
        self.keys.len()
    }

    pub fn avgdl(&self) -> f64 {
        if self.keys.is_empty() {
            0.0
        } else {
            self.total_length as f64 / self.keys.len() as f64
        }
    }

    pub fn doc_len(&self, key: &DocKey) -> Option<u32> {
        self.keys.iter().position(|k| k == key).map(|i| self.lengths[i])
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// `(doc_key, tf)` for every document containing `term`.
    pub fn postings(&self, term: &str) -> Vec<(DocKey, u32)> {
        self.postings
            .get(term)
            .map(|p| p.iter().map(|p| (self.keys[p.doc as usize].clone(), p.tf)).collect())
            .unwrap_or_default()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.keys.len() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Top `k` documents by BM25 score, descending; only documents sharing
    /// at least one term with the query appear.
    pub fn search(&self, query: &str, k: usize, params: Bm25Params) -> Vec<(DocKey, f64)> {
        let terms = self.analyzer.analyze(query);
        if terms.is_empty() || self.keys.is_empty() || k == 0 {
            return Vec::new();
        }
        let avgdl = self.avgdl();
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in &terms {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = self.idf(term);
            for p in list {
                let tf = f64::from(p.tf);
                let dl = f64::from(self.lengths[p.doc as usize]);
                let norm = params.k1 * (1.0 - params.b + params.b * dl / avgdl);
                *scores.entry(p.doc).or_default() += idf * tf / (tf + norm);
            }
        }
        let mut hits: Vec<(u32, f64)> = scores.into_iter().collect();
        hits.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.keys[a.0 as usize].cmp(&self.keys[b.0 as usize]))
        });
        hits.truncate(k);
        hits.into_iter().map(|(d, s)| (self.keys[d as usize].clone(), s)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        codec::write_atomic(path, |enc| self.encode(enc).map_err(Error::from))
    }

    fn encode<W: Write>(&self, enc: &mut Encoder<W>) -> std::io::Result<()> {
        enc.header(MAGIC, VERSION)?;
        enc.u8(u8::from(self.analyzer.stem))?;
        enc.u8(u8::from(self.analyzer.stopwords))?;
        enc.str(self.expansion.as_str())?;
        enc.len(self.keys.len())?;
        for (key, &len) in self.keys.iter().zip(&self.lengths) {
            enc.str(&key.to_string())?;
            enc.u32(len)?;
        }
        let mut terms: Vec<_> = self.postings.iter().collect();
        terms.sort_by(|a, b| a.0.cmp(b.0));
        enc.len(terms.len())?;
        for (term, list) in terms {
            enc.str(term)?;
            enc.len(list.len())?;
            for p in list {
                enc.u32(p.doc)?;
                enc.u32(p.tf)?;
            }
        }
        Ok(())
    }

    pub fn open(path: &Path) -> Result<Self> {
        let buf = fs::read(path)?;
        let mut dec = Decoder::new(&buf);
        dec.header(MAGIC, VERSION)?;
        let analyzer = Analyzer { stem: dec.u8()? != 0, stopwords: dec.u8()? != 0 };
        let expansion: ExpansionMode = dec.str()?.parse().map_err(|e: Error| Error::corrupt(e.to_string()))?;
        let n = dec.len(8)?;
        let mut keys = Vec::with_capacity(n);
        let mut lengths = Vec::with_capacity(n);
        for _ in 0..n {
            keys.push(DocKey::parse(&dec.str()?));
            lengths.push(dec.u32()?);
        }
        let n_terms = dec.len(12)?;
        let mut postings = HashMap::with_capacity(n_terms);
        for _ in 0..n_terms {
            let term = dec.str()?;
            let m = dec.len(8)?;
            let mut list = Vec::with_capacity(m);
            for _ in 0..m {
                let doc = dec.u32()?;
                if doc as usize >= n {
                    return Err(Error::corrupt(format!("posting references document {doc} of {n}")));
                }
                list.push(Posting { doc, tf: dec.u32()? });
            }
            postings.insert(term, list);
        }
        dec.finish()?;
        let total_length = lengths.iter().map(|&l| u64::from(l)).sum();
        Ok(InvertedIndex { analyzer, expansion, postings, keys, lengths, total_length })
    }
}
