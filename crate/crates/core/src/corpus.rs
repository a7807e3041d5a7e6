//! Raw-text corpus and query files.
//!
//! Corpus: JSONL, one `{"doc_key": ..., "text": "..."}` object per line.
//! Queries: TSV, `qid<TAB>text` per line (the usual MS MARCO layout).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::DocKey;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDoc {
    pub doc_key: DocKey,
    pub text: String,
}

impl CorpusDoc {
    pub fn new(doc_key: impl Into<DocKey>, text: impl Into<String>) -> Self {
        CorpusDoc { doc_key: doc_key.into(), text: text.into() }
    }
}

pub fn read_corpus<R: BufRead>(reader: R) -> impl Iterator<Item = Result<CorpusDoc>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(e.into())),
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(serde_json::from_str(&line).map_err(|e| Error::Parse {
            offset: e.column().saturating_sub(1),
            message: format!("corpus line {}: {e}", i + 1),
        }))
    })
}

pub fn write_corpus_line<W: Write>(out: &mut W, doc: &CorpusDoc) -> Result<()> {
    serde_json::to_writer(&mut *out, doc).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub qid: String,
    pub text: String,
}

pub fn read_queries<R: BufRead>(reader: R) -> Result<Vec<Query>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (qid, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::schema(format!("queries line {}: expected qid<TAB>text", i + 1)))?;
        out.push(Query { qid: qid.trim().to_owned(), text: text.to_owned() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_round_trip() {
        let docs = [CorpusDoc::new(7u64, "Sacagawea, as everyone knows"), CorpusDoc::new("d-2", "ünïcode \"quoted\"")];
        let mut buf = Vec::new();
        for d in &docs {
            write_corpus_line(&mut buf, d).unwrap();
        }
        let back: Vec<_> = read_corpus(&buf[..]).collect::<Result<_>>().unwrap();
        assert_eq!(back, docs);
        assert!(String::from_utf8(buf).unwrap().starts_with(r#"{"doc_key":7,"text":"#));
    }

    #[test]
    fn bad_corpus_line() {
        let r: Vec<_> = read_corpus(&b"{\"doc_key\":1}\n"[..]).collect();
        assert!(matches!(r[0], Err(Error::Parse { .. })));
    }

    #[test]
    fn queries_tsv() {
        let q = read_queries(&b"1048585\twhat is paula deen's brother\n\n2\tsecond\r\n"[..]).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q[0].qid, "1048585");
        assert_eq!(q[1].text, "second");
        assert!(read_queries(&b"no tab here\n"[..]).is_err());
    }
}
