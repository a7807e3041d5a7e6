//! Entity expansion of queries and passages.
//!
//! The linked entities of a text are appended to it, either as their
//! canonical names or as the MD5 digest of those names. Both sides of a
//! query/passage pair that link the same entity then share a token even
//! when their surface spellings differ.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use md5::{Digest, Md5};

use crate::corpus::{self, CorpusDoc};
use crate::error::{Error, Result};
use crate::format::{AnnotatedDocument, EntityAnnotation};
use crate::store::LinkStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionMode {
    #[default]
    None,
    Text,
    Hash,
}

impl ExpansionMode {
    pub const ALL: [ExpansionMode; 3] = [ExpansionMode::None, ExpansionMode::Text, ExpansionMode::Hash];

    pub fn as_str(self) -> &'static str {
        match self {
            ExpansionMode::None => "none",
            ExpansionMode::Text => "text",
            ExpansionMode::Hash => "hash",
        }
    }
}

impl fmt::Display for ExpansionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExpansionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExpansionMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::usage(format!("unknown expansion mode {s:?} (expected none, text or hash)")))
    }
}

/// Lowercase hex MD5 of the name's UTF-8 bytes, all 32 digits.
pub fn entity_hash(name: &str) -> String {
    let digest = Md5::digest(name.as_bytes());
    let mut out = String::with_capacity(32);
    for b in digest {
        out.push(char::from_digit(u32::from(b >> 4), 16).expect("nibble"));
        out.push(char::from_digit(u32::from(b & 0xf), 16).expect("nibble"));
    }
    out
}

/// One token per distinct entity id, in first-occurrence order.
pub fn expansion_tokens<'a>(annotations: impl IntoIterator<Item = &'a EntityAnnotation>, mode: ExpansionMode) -> Vec<String> {
    if mode == ExpansionMode::None {
        return Vec::new();
    }
    let mut seen = HashSet::new();
    annotations
        .into_iter()
        .filter(|a| seen.insert(a.entity_id))
        .map(|a| match mode {
            ExpansionMode::Text => a.entity.clone(),
            _ => entity_hash(&a.entity),
        })
        .collect()
}

/// `text`, followed by a space and the expansion tokens when there are any.
pub fn expand<'a>(text: &str, annotations: impl IntoIterator<Item = &'a EntityAnnotation>, mode: ExpansionMode) -> String {
    let tokens = expansion_tokens(annotations, mode);
    if tokens.is_empty() {
        return text.to_owned();
    }
    let mut out = String::with_capacity(text.len() + 1 + tokens.iter().map(|t| t.len() + 1).sum::<usize>());
    out.push_str(text);
    out.push(' ');
    out.push_str(&tokens.join(" "));
    out
}

/// Expands with every annotation of the document, field by field.
pub fn expand_document(text: &str, doc: &AnnotatedDocument, mode: ExpansionMode) -> String {
    expand(text, doc.annotations().map(|(_, a)| a), mode)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct ExpandReport {
    pub documents: u64,
    /// Documents that gained at least one token.
    pub expanded: u64,
}

/// Streams a corpus through [`expand_document`], one line at a time.
/// Documents missing from the store pass through unchanged.
pub fn expand_corpus<R: BufRead, W: Write>(
    corpus_in: R,
    links: &LinkStore,
    mode: ExpansionMode,
    out: &mut W,
) -> Result<ExpandReport> {
    let mut report = ExpandReport::default();
    for doc in corpus::read_corpus(corpus_in) {
        let doc = doc?;
        let annotated = links.links_for_doc(&doc.doc_key)?;
        let text = expand_document(&doc.text, &annotated, mode);
        report.documents += 1;
        if text.len() != doc.text.len() {
            report.expanded += 1;
        }
        corpus::write_corpus_line(out, &CorpusDoc { doc_key: doc.doc_key, text })?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{Field, Kind};

    #[test]
    fn rfc1321_vectors() {
        let cases = [
            ("", "d41d8cd98f00b204e9800998ecf8427e"),
            ("a", "0cc175b9c0f1b6a831c399e269772661"),
            ("abc", "900150983cd24fb0d6963f7d28e17f72"),
            ("message digest", "f96b697d7cb7938d525a2f31aaf161d0"),
            ("abcdefghijklmnopqrstuvwxyz", "c3fcd3d76192e4007dfb496cca67e13b"),
            ("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789", "d174ab98d277d9f5a5611c2c9f419d9f"),
            (
                "12345678901234567890123456789012345678901234567890123456789012345678901234567890",
                "57edf4a22be3c955ac49da2e2107b67a",
            ),
        ];
        for (input, want) in cases {
            assert_eq!(entity_hash(input), want, "md5({input:?})");
        }
    }

    #[test]
    fn printed_prefixes() {
        for (name, prefix) in [
            ("Sacagawea", "860324"),
            ("Clark", "a97fed"),
            ("Pacific Ocean", "3e3b0e"),
            ("C. S. Lewis", "3fe907"),
            ("Indian Ocean", "fe6fc8"),
            ("William Clark", "7847ef"),
            ("Meriwether Lewis", "e58bef"),
        ] {
            assert!(entity_hash(name).starts_with(prefix), "{name}");
        }
        assert_eq!(entity_hash("Sacagawea"), entity_hash("Sacagawea"));
    }

    fn query_links() -> Vec<EntityAnnotation> {
        // Listed in the linker's output order.
        vec![
            EntityAnnotation::new(1, 4, 13, "Sacagawea"),
            EntityAnnotation::new(2, 54, 59, "Clark"),
            EntityAnnotation::new(3, 25, 38, "Pacific Ocean"),
            EntityAnnotation::new(4, 44, 49, "C. S. Lewis"),
        ]
    }

    const QUERY: &str = "did sacajawea cross the pacific ocean with lewis and clark";

    #[test]
    fn text_and_hash_expansion() {
        let links = query_links();
        assert_eq!(
            expand(QUERY, &links, ExpansionMode::Text),
            format!("{QUERY} Sacagawea Clark Pacific Ocean C. S. Lewis")
        );
        let hashed = expand(QUERY, &links, ExpansionMode::Hash);
        let tail: Vec<&str> = hashed[QUERY.len() + 1..].split(' ').collect();
        assert_eq!(tail.len(), 4);
        assert!(tail.iter().all(|t| t.len() == 32));
        assert!(tail[0].starts_with("860324"));
        assert_eq!(expand(QUERY, &links, ExpansionMode::None), QUERY);
    }

    #[test]
    fn no_links_is_identity() {
        for mode in ExpansionMode::ALL {
            assert_eq!(expand(QUERY, [], mode), QUERY);
        }
    }

    #[test]
    fn repeated_entity_appended_once() {
        let links = [EntityAnnotation::new(9, 0, 3, "Foo"), EntityAnnotation::new(9, 10, 13, "Foo")];
        assert_eq!(expand("foo and foo", &links, ExpansionMode::Text), "foo and foo Foo");
    }

    #[test]
    fn document_expansion_uses_all_fields() {
        let doc = AnnotatedDocument::empty(Kind::Document, "d")
            .with_field(Field::Title, vec![EntityAnnotation::new(2, 0, 1, "B")])
            .with_field(Field::Body, vec![EntityAnnotation::new(1, 0, 1, "A"), EntityAnnotation::new(2, 2, 3, "B")]);
        assert_eq!(expand_document("x", &doc, ExpansionMode::Text), "x A B");
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("hash".parse::<ExpansionMode>().unwrap(), ExpansionMode::Hash);
        assert!("md5".parse::<ExpansionMode>().is_err());
    }
}
