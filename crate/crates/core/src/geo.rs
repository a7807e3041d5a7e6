//! Geographic queries over links + KB, and N-Triples export.
//!
//! Exported vocabulary, chosen so a SPARQL engine loaded with the output
//! can answer "passages whose entities relate to country X":
//!
//! | triple                                   | when                     |
//! |------------------------------------------|--------------------------|
//! | `<passage/K> rdf:type <passage>`         | every stored document    |
//! | `<passage/K> schema:description "text"`  | corpus text supplied     |
//! | `<passage/K> <passagehas> <entity>`      | each distinct entity     |
//! | `<entity> rdfs:label "name"@en`          | every KB entity          |
//! | `<entity> wdt:P625 "POINT(lon lat)"`     | entity has coordinates   |
//! | `<entity> wdt:P17 wd:Qnnn`               | entity has a country     |
//!
//! The `passage:` prefix is `http://example.org/passage` (no trailing
//! slash), so `passage:has` expands to `http://example.org/passagehas`.
//! Entities use `http://www.wikidata.org/entity/<QID>` when the KB knows the
//! Wikidata id and `http://example.org/entity/<id>` otherwise.

use std::collections::HashMap;
use std::io::Write;

use crate::error::Result;
use crate::format::DocKey;
use crate::kb::{EntityRecord, KnowledgeBase, RegionFilter};
use crate::store::{EntitySelector, LinkStore};

pub const PASSAGE_CLASS: &str = "http://example.org/passage";
pub const PASSAGE_BASE: &str = "http://example.org/passage/";
pub const PASSAGE_HAS: &str = "http://example.org/passagehas";
pub const LOCAL_ENTITY_BASE: &str = "http://example.org/entity/";
pub const WIKIDATA_ENTITY: &str = "http://www.wikidata.org/entity/";
pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
pub const SCHEMA_DESCRIPTION: &str = "https://schema.org/description";
pub const WDT_COORDINATES: &str = "http://www.wikidata.org/prop/direct/P625";
pub const WDT_COUNTRY: &str = "http://www.wikidata.org/prop/direct/P17";
pub const WKT_LITERAL: &str = "http://www.opengis.net/ont/geosparql#wktLiteral";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct ExportReport {
    pub passage_triples: u64,
    pub entity_triples: u64,
}

impl ExportReport {
    pub fn total(&self) -> u64 {
        self.passage_triples + self.entity_triples
    }
}

/// Percent-encodes everything outside the RFC 3986 unreserved set.
fn iri_segment(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn is_qid(s: &str) -> bool {
    s.len() > 1 && s.starts_with('Q') && s[1..].bytes().all(|b| b.is_ascii_digit())
}

pub fn passage_iri(key: &DocKey) -> String {
    format!("{PASSAGE_BASE}{}", iri_segment(&key.to_string()))
}

pub fn entity_iri(entity_id: u64, record: Option<&EntityRecord>) -> String {
    match record.and_then(|r| r.wikidata_id.as_deref()).filter(|q| is_qid(q)) {
        Some(q) => format!("{WIKIDATA_ENTITY}{q}"),
        None => format!("{LOCAL_ENTITY_BASE}{entity_id}"),
    }
}

fn country_iri(country: &str) -> String {
    if is_qid(country) {
        format!("{WIKIDATA_ENTITY}{country}")
    } else {
        format!("{LOCAL_ENTITY_BASE}{}", iri_segment(country))
    }
}

/// Writes the link store and KB as N-Triples.
pub fn export_ntriples<W: Write>(
    store: &LinkStore,
    kb: &KnowledgeBase,
    texts: Option<&HashMap<DocKey, String>>,
    out: &mut W,
) -> Result<ExportReport> {
    let mut report = ExportReport::default();
    let emit = |out: &mut W, s: &str, p: &str, o: &str| -> Result<()> {
        writeln!(out, "<{s}> <{p}> {o} .")?;
        Ok(())
    };

    let pairs = store.doc_entity_pairs();
    let mut pairs = pairs.iter().peekable();
    for key in store.doc_keys() {
        let subject = passage_iri(key);
        emit(out, &subject, RDF_TYPE, &format!("<{PASSAGE_CLASS}>"))?;
        report.passage_triples += 1;
        if let Some(text) = texts.and_then(|t| t.get(key)) {
            emit(out, &subject, SCHEMA_DESCRIPTION, &literal(text))?;
            report.passage_triples += 1;
        }
        while let Some((_, id)) = pairs.next_if(|(k, _)| k == key) {
            emit(out, &subject, PASSAGE_HAS, &format!("<{}>", entity_iri(*id, kb.get(*id))))?;
            report.passage_triples += 1;
        }
    }

    let mut records: Vec<&EntityRecord> = kb.records().iter().collect();
    records.sort_by_key(|r| r.entity_id);
    for r in records {
        let subject = entity_iri(r.entity_id, Some(r));
        emit(out, &subject, RDFS_LABEL, &format!("{}@en", literal(&r.name)))?;
        report.entity_triples += 1;
        if let Some(c) = r.coord {
            emit(out, &subject, WDT_COORDINATES, &format!("{}^^<{WKT_LITERAL}>", literal(&format!("POINT({} {})", c.lon, c.lat))))?;
            report.entity_triples += 1;
        }
        if let Some(country) = &r.country {
            emit(out, &subject, WDT_COUNTRY, &format!("<{}>", country_iri(country)))?;
            report.entity_triples += 1;
        }
    }
    Ok(report)
}

/// `(doc_key, entity_id)` pairs where the document links an entity that
/// matches `filter`; distinct and sorted.
pub fn passages_in_region(store: &LinkStore, kb: &KnowledgeBase, filter: &RegionFilter) -> Vec<(DocKey, u64)> {
    let mut out: Vec<(DocKey, u64)> = kb
        .query_entities(filter)
        .into_iter()
        .flat_map(|r| {
            store.docs_for_entity(&EntitySelector::Id(r.entity_id)).into_iter().map(move |d| (d, r.entity_id))
        })
        .collect();
    out.sort();
    out.dedup();
    out
}
