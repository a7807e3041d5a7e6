//! MRR@k and Recall@k over TREC runs and qrels, plus query-subset filters.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use crate::corpus::Query;
use crate::error::{Error, Result};
use crate::format::{AnnotatedDocument, DocKey};
use crate::fusion::{RankedList, Run};

/// Relevance judgments: `(qid, doc) → grade`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: HashMap<String, HashMap<DocKey, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, qid: impl Into<String>, doc: DocKey, grade: u32) {
        self.judgments.entry(qid.into()).or_default().insert(doc, grade);
    }

    pub fn contains_query(&self, qid: &str) -> bool {
        self.judgments.contains_key(qid)
    }

    pub fn grade(&self, qid: &str, doc: &DocKey) -> u32 {
        self.judgments.get(qid).and_then(|m| m.get(doc)).copied().unwrap_or(0)
    }

    /// Documents with grade ≥ 1 for `qid`.
    pub fn relevant(&self, qid: &str) -> HashSet<&DocKey> {
        self.judgments
            .get(qid)
            .map(|m| m.iter().filter(|(_, &g)| g >= 1).map(|(d, _)| d).collect())
            .unwrap_or_default()
    }

    pub fn query_count(&self) -> usize {
        self.judgments.len()
    }

    /// Reads `qid iter doc grade` lines.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut q = Qrels::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(Error::schema(format!("qrels line {}: expected 4 columns, found {}", i + 1, cols.len())));
            }
            let grade: u32 = cols[3]
                .parse()
                .map_err(|_| Error::schema(format!("qrels line {}: grade {:?} is not a non-negative integer", i + 1, cols[3])))?;
            q.insert(cols[0], DocKey::parse(cols[2]), grade);
        }
        Ok(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mrr(usize),
    Recall(usize),
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Mrr(k) => write!(f, "mrr@{k}"),
            Metric::Recall(k) => write!(f, "recall@{k}"),
        }
    }
}

/// Parses `mrr@10`, `recall@1000` (also `r@1000`).
impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let (name, cutoff) = lower
            .split_once('@')
            .ok_or_else(|| Error::usage(format!("metric {s:?}: expected name@cutoff, e.g. mrr@10")))?;
        let cutoff: usize = cutoff
            .parse()
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| Error::usage(format!("metric {s:?}: cutoff must be a positive integer")))?;
        match name {
            "mrr" | "rr" => Ok(Metric::Mrr(cutoff)),
            "recall" | "r" => Ok(Metric::Recall(cutoff)),
            _ => Err(Error::usage(format!("unknown metric {name:?} (expected mrr or recall)"))),
        }
    }
}

/// Reciprocal rank of the first relevant document within `cutoff`, else 0.
pub fn reciprocal_rank(list: &RankedList, qrels: &Qrels, cutoff: usize) -> f64 {
    list.docs()
        .take(cutoff)
        .position(|d| qrels.grade(list.qid(), d) >= 1)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Fraction of relevant documents found within `cutoff`; `None` when the
/// query has no relevant documents.
pub fn recall(list: &RankedList, qrels: &Qrels, cutoff: usize) -> Option<f64> {
    let relevant = qrels.relevant(list.qid());
    if relevant.is_empty() {
        return None;
    }
    let found = list.docs().take(cutoff).filter(|d| relevant.contains(d)).count();
    Some(found as f64 / relevant.len() as f64)
}

/// Per-query values of `metric`, in qid order. Run queries absent from the
/// qrels are skipped, as are (for recall) queries without relevant docs.
pub fn per_query(run: &Run, qrels: &Qrels, metric: Metric) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (qid, list) in run {
        if !qrels.contains_query(qid) {
            log::warn!("query {qid} has no judgments; skipped");
            continue;
        }
        let v = match metric {
            Metric::Mrr(k) => Some(reciprocal_rank(list, qrels, k)),
            Metric::Recall(k) => {
                let v = recall(list, qrels, k);
                if v.is_none() {
                    log::warn!("query {qid} has no relevant documents; excluded from recall");
                }
                v
            }
        };
        if let Some(v) = v {
            out.insert(qid.clone(), v);
        }
    }
    out
}

pub fn evaluate(run: &Run, qrels: &Qrels, metric: Metric) -> Result<f64> {
    let values = per_query(run, qrels, metric);
    if values.is_empty() {
        return Err(Error::usage(format!("{metric}: no evaluable queries")));
    }
    Ok(values.values().sum::<f64>() / values.len() as f64)
}

pub fn mrr_at(run: &Run, qrels: &Qrels, cutoff: usize) -> Result<f64> {
    evaluate(run, qrels, Metric::Mrr(cutoff))
}

pub fn recall_at(run: &Run, qrels: &Qrels, cutoff: usize) -> Result<f64> {
    evaluate(run, qrels, Metric::Recall(cutoff))
}

/// Which queries to keep.
#[derive(Debug, Clone)]
pub enum QueryFilter<'a> {
    /// Queries with at least one entity annotation.
    Linked(&'a HashMap<String, AnnotatedDocument>),
    /// Queries listed in an external subset (e.g. a hard-query list).
    Subset(&'a HashSet<String>),
}

pub fn filter_queries(queries: &[Query], filter: &QueryFilter<'_>) -> Vec<Query> {
    queries
        .iter()
        .filter(|q| match filter {
            QueryFilter::Linked(links) => links.get(&q.qid).is_some_and(|d| d.annotation_count() > 0),
            QueryFilter::Subset(ids) => ids.contains(&q.qid),
        })
        .cloned()
        .collect()
}

/// Reads a subset file: one qid per line (extra columns ignored).
pub fn read_qid_set<R: BufRead>(reader: R) -> Result<HashSet<String>> {
    let mut out = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        if let Some(q) = line.split_whitespace().next() {
            out.insert(q.to_owned());
        }
    }
    Ok(out)
}

/// Restricts a run to the given qids.
pub fn restrict_run(run: &Run, keep: &HashSet<String>) -> Run {
    run.iter().filter(|(q, _)| keep.contains(*q)).map(|(q, l)| (q.clone(), l.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{EntityAnnotation, Field, Kind};

    fn run_with(qid: &str, docs: &[u64]) -> Run {
        let list = RankedList::from_order(qid, docs.iter().map(|&d| DocKey::Num(d))).unwrap();
        Run::from([(qid.to_owned(), list)])
    }

    #[test]
    fn mrr_hand_cases() {
        let mut qrels = Qrels::new();
        qrels.insert("q", DocKey::Num(3), 1);
        assert_eq!(mrr_at(&run_with("q", &[1, 2, 3, 4]), &qrels, 10).unwrap(), 1.0 / 3.0);

        let docs: Vec<u64> = (1..=11).collect();
        let mut qrels = Qrels::new();
        qrels.insert("q", DocKey::Num(11), 1);
        assert_eq!(mrr_at(&run_with("q", &docs), &qrels, 10).unwrap(), 0.0);
    }

    #[test]
    fn mrr_mean_over_queries() {
        let mut run = run_with("a", &[1, 2]);
        run.extend(run_with("b", &[5, 6, 7, 8, 9]));
        let mut qrels = Qrels::new();
        qrels.insert("a", DocKey::Num(1), 1);
        qrels.insert("b", DocKey::Num(9), 1);
        assert!((mrr_at(&run, &qrels, 10).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn grade_zero_is_not_relevant() {
        let mut qrels = Qrels::new();
        qrels.insert("q", DocKey::Num(1), 0);
        qrels.insert("q", DocKey::Num(2), 2);
        assert_eq!(mrr_at(&run_with("q", &[1, 2]), &qrels, 10).unwrap(), 0.5);
    }

    #[test]
    fn recall_hand_cases() {
        let docs: Vec<u64> = (1..=600).collect();
        let mut qrels = Qrels::new();
        qrels.insert("q", DocKey::Num(500), 1);
        assert_eq!(recall_at(&run_with("q", &docs), &qrels, 1000).unwrap(), 1.0);

        qrels.insert("q", DocKey::Num(5000), 1);
        assert_eq!(recall_at(&run_with("q", &docs), &qrels, 1000).unwrap(), 0.5);
    }

    #[test]
    fn unjudged_and_unanswerable_queries() {
        let mut run = run_with("judged", &[1]);
        run.extend(run_with("unjudged", &[1]));
        run.extend(run_with("norel", &[1]));
        let mut qrels = Qrels::new();
        qrels.insert("judged", DocKey::Num(1), 1);
        qrels.insert("norel", DocKey::Num(1), 0);
        assert_eq!(per_query(&run, &qrels, Metric::Recall(10)).len(), 1);
        assert_eq!(per_query(&run, &qrels, Metric::Mrr(10)).len(), 2);
        assert!(mrr_at(&Run::new(), &qrels, 10).is_err());
    }

    #[test]
    fn metric_names() {
        assert_eq!("mrr@10".parse::<Metric>().unwrap(), Metric::Mrr(10));
        assert_eq!("R@1000".parse::<Metric>().unwrap(), Metric::Recall(1000));
        assert!("ndcg@10".parse::<Metric>().is_err());
        assert!("mrr".parse::<Metric>().is_err());
        assert!("mrr@0".parse::<Metric>().is_err());
    }

    #[test]
    fn qrels_file() {
        let q = Qrels::read("1 0 7 1\n1 0 8 0\n2 0 x 2\n".as_bytes()).unwrap();
        assert_eq!(q.query_count(), 2);
        assert_eq!(q.grade("1", &DocKey::Num(7)), 1);
        assert_eq!(q.relevant("1").len(), 1);
        assert!(Qrels::read("1 0 7 -1\n".as_bytes()).is_err());
    }

    #[test]
    fn query_filters() {
        let queries: Vec<Query> =
            ["1", "2", "3"].iter().map(|q| Query { qid: (*q).into(), text: format!("query {q}") }).collect();
        let links = HashMap::from([
            (
                "2".to_owned(),
                AnnotatedDocument::empty(Kind::Passage, 2u64)
                    .with_field(Field::Passage, vec![EntityAnnotation::new(1, 0, 5, "Query")]),
            ),
            ("3".to_owned(), AnnotatedDocument::empty(Kind::Passage, 3u64)),
        ]);
        let kept = filter_queries(&queries, &QueryFilter::Linked(&links));
        assert_eq!(kept.iter().map(|q| q.qid.as_str()).collect::<Vec<_>>(), ["2"]);

        let subset = HashSet::from(["3".to_owned(), "99".to_owned()]);
        let kept = filter_queries(&queries, &QueryFilter::Subset(&subset));
        assert_eq!(kept.iter().map(|q| q.qid.as_str()).collect::<Vec<_>>(), ["3"]);
    }
}
