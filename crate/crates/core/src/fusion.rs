//! Ranked lists, TREC run files, and reciprocal rank fusion.
//!
//! RRF scores a document by summing `1 / (k + rank)` over every input
//! ranking that contains it; rankings that miss the document add nothing.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::format::DocKey;

/// Results for one query. Ranks are 1-based list positions.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    qid: String,
    entries: Vec<(DocKey, f64)>,
}

impl RankedList {
    /// Checks that keys are unique and scores non-increasing.
    pub fn new(qid: impl Into<String>, entries: Vec<(DocKey, f64)>) -> Result<Self> {
        let qid = qid.into();
        let mut seen = HashSet::with_capacity(entries.len());
        for (d, _) in &entries {
            if !seen.insert(d) {
                return Err(Error::usage(format!("query {qid}: document {d} ranked twice")));
            }
        }
        if entries.windows(2).any(|w| w[1].1 > w[0].1) {
            return Err(Error::usage(format!("query {qid}: scores must be non-increasing")));
        }
        Ok(RankedList { qid, entries })
    }

    /// A list that only carries order; scores are `n, n-1, …, 1`.
    pub fn from_order(qid: impl Into<String>, docs: impl IntoIterator<Item = DocKey>) -> Result<Self> {
        let docs: Vec<DocKey> = docs.into_iter().collect();
        let n = docs.len();
        Self::new(qid, docs.into_iter().enumerate().map(|(i, d)| (d, (n - i) as f64)).collect())
    }

    pub fn qid(&self) -> &str {
        &self.qid
    }

    pub fn entries(&self) -> &[(DocKey, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn docs(&self) -> impl Iterator<Item = &DocKey> {
        self.entries.iter().map(|(d, _)| d)
    }

    /// 1-based rank of `doc`, if present.
    pub fn rank_of(&self, doc: &DocKey) -> Option<usize> {
        self.entries.iter().position(|(d, _)| d == doc).map(|i| i + 1)
    }

    pub fn truncate(&mut self, depth: usize) {
        self.entries.truncate(depth);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrfConfig {
    pub k: f64,
}

impl Default for RrfConfig {
    fn default() -> Self {
        RrfConfig { k: 60.0 }
    }
}

impl RrfConfig {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::usage(format!("RRF k must be positive, got {k}")));
        }
        Ok(RrfConfig { k })
    }
}

/// Fuses rankings of one query. Output is by fused score descending, ties
/// by ascending document key.
pub fn rrf_fuse(rankings: &[&RankedList], config: RrfConfig) -> Result<RankedList> {
    if rankings.len() < 2 {
        return Err(Error::usage(format!("RRF needs at least two rankings, got {}", rankings.len())));
    }
    let qid = rankings[0].qid();
    if let Some(other) = rankings.iter().find(|r| r.qid() != qid) {
        return Err(Error::usage(format!("cannot fuse rankings of queries {qid} and {}", other.qid())));
    }
    let mut ranks: HashMap<&DocKey, Vec<usize>> = HashMap::new();
    for r in rankings {
        for (i, (d, _)) in r.entries.iter().enumerate() {
            ranks.entry(d).or_default().push(i + 1);
        }
    }
    // Summing in rank order makes documents with the same multiset of ranks
    // tie exactly, whichever rankings the ranks came from.
    let mut fused: Vec<(DocKey, f64)> = ranks
        .into_iter()
        .map(|(d, mut rs)| {
            rs.sort_unstable();
            (d.clone(), rs.iter().map(|&r| 1.0 / (config.k + r as f64)).sum())
        })
        .collect();
    fused.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
    Ok(RankedList { qid: qid.to_owned(), entries: fused })
}

/// A run: one ranked list per query.
pub type Run = BTreeMap<String, RankedList>;

/// Fuses whole runs query by query. A query missing from some runs is fused
/// from the runs that have it (the others contribute nothing).
pub fn fuse_runs(runs: &[&Run], config: RrfConfig) -> Result<Run> {
    if runs.len() < 2 {
        return Err(Error::usage(format!("RRF needs at least two runs, got {}", runs.len())));
    }
    let qids: BTreeSet<&String> = runs.iter().flat_map(|r| r.keys()).collect();
    let mut out = Run::new();
    for qid in qids {
        let empties: Vec<RankedList> = runs
            .iter()
            .filter(|r| !r.contains_key(qid))
            .map(|_| RankedList { qid: qid.clone(), entries: Vec::new() })
            .collect();
        let mut lists: Vec<&RankedList> = runs.iter().filter_map(|r| r.get(qid)).collect();
        lists.extend(empties.iter());
        out.insert(qid.clone(), rrf_fuse(&lists, config)?);
    }
    Ok(out)
}

/// Reads a 6-column TREC run (`qid Q0 doc rank score tag`). Lines are
/// ordered by their rank column within each query.
pub fn read_run<R: BufRead>(reader: R) -> Result<Run> {
    let mut rows: BTreeMap<String, Vec<(u64, usize, DocKey, f64)>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(Error::schema(format!("run line {}: expected 6 columns, found {}", i + 1, cols.len())));
        }
        let rank: u64 = cols[3].parse().map_err(|_| Error::schema(format!("run line {}: bad rank {:?}", i + 1, cols[3])))?;
        let score: f64 = cols[4].parse().map_err(|_| Error::schema(format!("run line {}: bad score {:?}", i + 1, cols[4])))?;
        rows.entry(cols[0].to_owned()).or_default().push((rank, i, DocKey::parse(cols[2]), score));
    }
    rows.into_iter()
        .map(|(qid, mut v)| {
            v.sort_by_key(|&(rank, line, _, _)| (rank, line));
            let list = RankedList::new(qid.clone(), v.into_iter().map(|(_, _, d, s)| (d, s)).collect())?;
            Ok((qid, list))
        })
        .collect()
}

/// Writes a run in TREC format, queries in key order. Scores use Rust's
/// shortest round-trip float formatting, so output is byte-stable.
pub fn write_run<W: Write>(out: &mut W, run: &Run, tag: &str) -> Result<()> {
    for list in run.values() {
        write_ranked_list(out, list, tag)?;
    }
    Ok(())
}

pub fn write_ranked_list<W: Write>(out: &mut W, list: &RankedList, tag: &str) -> Result<()> {
    if tag.is_empty() || tag.contains(char::is_whitespace) {
        return Err(Error::usage(format!("run tag {tag:?} must be non-empty without whitespace")));
    }
    for (i, (d, s)) in list.entries.iter().enumerate() {
        writeln!(out, "{} Q0 {} {} {} {}", list.qid, d, i + 1, s, tag)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(qid: &str, docs: &[&str]) -> RankedList {
        RankedList::from_order(qid, docs.iter().map(|&d| DocKey::from(d))).unwrap()
    }

    #[test]
    fn worked_example() {
        let r1 = list("q", &["A", "B", "C"]);
        let r2 = list("q", &["C", "A", "B"]);
        let fused = rrf_fuse(&[&r1, &r2], RrfConfig::default()).unwrap();
        let order: Vec<String> = fused.docs().map(|d| d.to_string()).collect();
        assert_eq!(order, ["A", "C", "B"]);
        let s: Vec<f64> = fused.entries().iter().map(|e| e.1).collect();
        assert!((s[0] - (1.0 / 61.0 + 1.0 / 62.0)).abs() < 1e-15);
        assert!((s[0] - 0.0325225).abs() < 1e-7);
        assert!((s[1] - 0.0322665).abs() < 1e-7);
        assert!((s[2] - 0.0320021).abs() < 1e-7);
    }

    #[test]
    fn identical_rankings_double_scores() {
        let r = list("q", &["x", "y", "z"]);
        let fused = rrf_fuse(&[&r, &r], RrfConfig::default()).unwrap();
        assert_eq!(fused.docs().collect::<Vec<_>>(), r.docs().collect::<Vec<_>>());
        for (i, (_, s)) in fused.entries().iter().enumerate() {
            assert!((s - 2.0 / (61.0 + i as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn twice_ranked_beats_single_top() {
        let r1 = list("q", &["solo", "both"]);
        let r2 = list("q", &["other", "both"]);
        let fused = rrf_fuse(&[&r1, &r2], RrfConfig::default()).unwrap();
        assert_eq!(fused.entries()[0].0, DocKey::from("both"));
        assert!((fused.entries()[0].1 - 2.0 / 62.0).abs() < 1e-15);
    }

    #[test]
    fn usage_errors() {
        let a = list("q1", &["x"]);
        let b = list("q2", &["x"]);
        assert!(rrf_fuse(&[&a, &b], RrfConfig::default()).is_err());
        assert!(rrf_fuse(&[&a], RrfConfig::default()).is_err());
        assert!(RrfConfig::new(0.0).is_err());
        assert!(RankedList::new("q", vec![(DocKey::Num(1), 1.0), (DocKey::Num(1), 0.5)]).is_err());
        assert!(RankedList::new("q", vec![(DocKey::Num(1), 1.0), (DocKey::Num(2), 1.5)]).is_err());
    }

    #[test]
    fn run_files() {
        let text = "q1 Q0 d2 2 1.5 bm25\nq1 Q0 d1 1 2.25 bm25\nq2 Q0 7 1 0.1 bm25\n";
        let run = read_run(text.as_bytes()).unwrap();
        assert_eq!(run["q1"].docs().map(|d| d.to_string()).collect::<Vec<_>>(), ["d1", "d2"]);
        let mut out = Vec::new();
        write_run(&mut out, &run, "bm25").unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "q1 Q0 d1 1 2.25 bm25\nq1 Q0 d2 2 1.5 bm25\nq2 Q0 7 1 0.1 bm25\n");
        assert!(read_run("q1 Q0 d1 1 x t\n".as_bytes()).is_err());
        assert!(read_run("q1 Q0 d1 1\n".as_bytes()).is_err());
    }

    #[test]
    fn fuse_runs_handles_missing_queries() {
        let mut a = Run::new();
        a.insert("q1".into(), list("q1", &["x", "y"]));
        let mut b = Run::new();
        b.insert("q1".into(), list("q1", &["y"]));
        b.insert("q2".into(), list("q2", &["z"]));
        let fused = fuse_runs(&[&a, &b], RrfConfig::default()).unwrap();
        assert_eq!(fused["q1"].entries()[0].0, DocKey::from("y"));
        assert_eq!(fused["q2"].len(), 1);
        assert!((fused["q2"].entries()[0].1 - 1.0 / 61.0).abs() < 1e-15);
    }
}
