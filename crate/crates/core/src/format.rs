//! The standoff annotation data model and its JSONL line format.
//!
//! One JSON object per line. The object carries the document identifier
//! (`pid` for passages, `docid` for documents) and one array of annotations
//! per linked field:
//!
//! ```json
//! {"passage":[{"entity_id":19603,"start_pos":4,"end_pos":21,"entity":"Manhattan Project","details":{"tag":"ORG","md_score":0.613243}}],"pid":1}
//! ```
//!
//! Offsets are 0-based Unicode code-point positions, end exclusive.
//! Use [`char_to_byte`] / [`byte_to_char`] to convert when slicing Rust
//! strings.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

/// Document or passage identifier.
///
/// Canonical non-negative integers (no sign, no leading zeros) are held as
/// numbers so that ordering is numeric (`2 < 10`); everything else is an
/// opaque string ordered lexicographically after all numeric keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DocKey {
    Num(u64),
    Str(String),
}

impl DocKey {
    pub fn parse(s: &str) -> DocKey {
        let canonical = !s.is_empty()
            && s.bytes().all(|b| b.is_ascii_digit())
            && (s == "0" || !s.starts_with('0'));
        match canonical.then(|| s.parse::<u64>().ok()).flatten() {
            Some(n) => DocKey::Num(n),
            None => DocKey::Str(s.to_owned()),
        }
    }

    fn from_json(v: &Value) -> Option<DocKey> {
        match v {
            Value::Number(n) => n.as_u64().map(DocKey::Num),
            Value::String(s) if !s.is_empty() => Some(DocKey::parse(s)),
            _ => None,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            DocKey::Num(n) => Value::Number((*n).into()),
            DocKey::Str(s) => Value::String(s.clone()),
        }
    }
}

impl fmt::Display for DocKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocKey::Num(n) => write!(f, "{n}"),
            DocKey::Str(s) => f.write_str(s),
        }
    }
}

impl From<u64> for DocKey {
    fn from(n: u64) -> Self {
        DocKey::Num(n)
    }
}

impl From<&str> for DocKey {
    fn from(s: &str) -> Self {
        DocKey::parse(s)
    }
}

impl FromStr for DocKey {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(DocKey::parse(s))
    }
}

impl serde::Serialize for DocKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DocKey::Num(n) => s.serialize_u64(*n),
            DocKey::Str(v) => s.serialize_str(v),
        }
    }
}

impl<'de> serde::Deserialize<'de> for DocKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        DocKey::from_json(&v)
            .ok_or_else(|| serde::de::Error::custom("doc key must be a non-negative integer or a non-empty string"))
    }
}

/// Collection kind; decides the identifier field and the allowed fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Passage,
    Document,
}

impl Kind {
    pub fn key_name(self) -> &'static str {
        match self {
            Kind::Passage => "pid",
            Kind::Document => "docid",
        }
    }

    pub fn fields(self) -> &'static [Field] {
        match self {
            Kind::Passage => &[Field::Passage],
            Kind::Document => &[Field::Body, Field::Header, Field::Title],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Passage => "passage",
            Kind::Document => "document",
        }
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "passage" => Ok(Kind::Passage),
            "document" | "doc" => Ok(Kind::Document),
            other => Err(Error::usage(format!("unknown collection kind {other:?} (expected passage or document)"))),
        }
    }
}

/// A linked section of a corpus unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Passage,
    Body,
    Header,
    Title,
}

impl Field {
    pub const ALL: [Field; 4] = [Field::Passage, Field::Body, Field::Header, Field::Title];

    pub fn as_str(self) -> &'static str {
        match self {
            Field::Passage => "passage",
            Field::Body => "body",
            Field::Header => "header",
            Field::Title => "title",
        }
    }

    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(c: u8) -> Option<Field> {
        Field::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Field::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::usage(format!("unknown field {s:?}")))
    }
}

/// One standoff entity link.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityAnnotation {
    pub entity_id: u64,
    pub start_pos: usize,
    pub end_pos: usize,
    pub entity: String,
    /// Linker details; conventionally `tag` and `md_score`. Unknown keys
    /// are carried through untouched.
    pub details: Map<String, Value>,
}

impl EntityAnnotation {
    pub fn new(entity_id: u64, start_pos: usize, end_pos: usize, entity: impl Into<String>) -> Self {
        EntityAnnotation { entity_id, start_pos, end_pos, entity: entity.into(), details: Map::new() }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.details.insert("tag".into(), Value::String(tag.into()));
        self
    }

    pub fn with_md_score(mut self, score: f64) -> Self {
        if let Some(n) = Number::from_f64(score) {
            self.details.insert("md_score".into(), Value::Number(n));
        }
        self
    }

    pub fn tag(&self) -> Option<&str> {
        self.details.get("tag").and_then(Value::as_str)
    }

    pub fn md_score(&self) -> Option<f64> {
        self.details.get("md_score").and_then(Value::as_f64)
    }

    fn from_json(v: &Value, ctx: &str) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::schema(format!("{ctx}: annotation must be an object")))?;
        let get = |name: &str| obj.get(name).ok_or_else(|| Error::schema(format!("{ctx}: missing `{name}`")));

        let entity_id = match get("entity_id")? {
            Value::Number(n) => n.as_u64(),
            Value::String(s) if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) => s.parse().ok(),
            _ => None,
        }
        .ok_or_else(|| Error::schema(format!("{ctx}: entity_id must be a non-negative integer or numeric string")))?;

        let pos = |name: &str| -> Result<usize> {
            get(name)?
                .as_u64()
                .and_then(|n| usize::try_from(n).ok())
                .ok_or_else(|| Error::schema(format!("{ctx}: `{name}` must be a non-negative integer")))
        };
        let start_pos = pos("start_pos")?;
        let end_pos = pos("end_pos")?;

        let entity = get("entity")?
            .as_str()
            .ok_or_else(|| Error::schema(format!("{ctx}: `entity` must be a string")))?
            .to_owned();

        let details = match obj.get("details") {
            None | Some(Value::Null) => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(_) => return Err(Error::schema(format!("{ctx}: `details` must be an object"))),
        };

        Ok(EntityAnnotation { entity_id, start_pos, end_pos, entity, details })
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("entity_id".into(), Value::Number(self.entity_id.into()));
        m.insert("start_pos".into(), Value::Number((self.start_pos as u64).into()));
        m.insert("end_pos".into(), Value::Number((self.end_pos as u64).into()));
        m.insert("entity".into(), Value::String(self.entity.clone()));
        m.insert("details".into(), Value::Object(self.details.clone()));
        Value::Object(m)
    }
}

/// One corpus unit with its per-field annotation lists.
///
/// Every field of the collection kind is present (possibly empty) and each
/// list is sorted by `start_pos`; [`AnnotatedDocument::normalize`] restores
/// both properties after manual edits.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedDocument {
    pub kind: Kind,
    pub key: DocKey,
    pub fields: BTreeMap<Field, Vec<EntityAnnotation>>,
}

impl AnnotatedDocument {
    /// A document with every field of `kind` present and empty.
    pub fn empty(kind: Kind, key: impl Into<DocKey>) -> Self {
        let fields = kind.fields().iter().map(|&f| (f, Vec::new())).collect();
        AnnotatedDocument { kind, key: key.into(), fields }
    }

    pub fn with_field(mut self, field: Field, annotations: Vec<EntityAnnotation>) -> Self {
        self.fields.insert(field, annotations);
        self.normalize();
        self
    }

    pub fn normalize(&mut self) {
        for &f in self.kind.fields() {
            self.fields.entry(f).or_default();
        }
        for list in self.fields.values_mut() {
            list.sort_by_key(|a| a.start_pos);
        }
    }

    pub fn annotation_count(&self) -> usize {
        self.fields.values().map(Vec::len).sum()
    }

    pub fn annotations(&self) -> impl Iterator<Item = (Field, &EntityAnnotation)> {
        self.fields.iter().flat_map(|(&f, list)| list.iter().map(move |a| (f, a)))
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        for (f, list) in &self.fields {
            m.insert(f.as_str().into(), Value::Array(list.iter().map(EntityAnnotation::to_json).collect()));
        }
        m.insert(self.kind.key_name().into(), self.key.to_json());
        Value::Object(m)
    }
}

/// Parses one JSONL line.
///
/// `entity_id` may be a JSON number or a numeric string; either way it is
/// normalized to an integer. Annotation lists come back sorted by
/// `start_pos`.
pub fn parse_line(json_text: &str, kind: Kind) -> Result<AnnotatedDocument> {
    let value: Value = serde_json::from_str(json_text).map_err(|e| Error::Parse {
        offset: json_byte_offset(json_text, &e),
        message: e.to_string(),
    })?;
    parse_value(&value, kind)
}

pub fn parse_value(value: &Value, kind: Kind) -> Result<AnnotatedDocument> {
    let obj = value.as_object().ok_or_else(|| Error::schema("line is not a JSON object"))?;
    let key_name = kind.key_name();
    let key = obj
        .get(key_name)
        .ok_or_else(|| Error::schema(format!("missing document key `{key_name}`")))?;
    let key = DocKey::from_json(key)
        .ok_or_else(|| Error::schema(format!("`{key_name}` must be a non-negative integer or a non-empty string")))?;

    let mut doc = AnnotatedDocument::empty(kind, key);
    for (name, v) in obj {
        if name == key_name {
            continue;
        }
        let field = kind
            .fields()
            .iter()
            .copied()
            .find(|f| f.as_str() == name)
            .ok_or_else(|| Error::schema(format!("unexpected key `{name}` for {} collection", kind.as_str())))?;
        let arr = v.as_array().ok_or_else(|| Error::schema(format!("`{name}` must be an array")))?;
        let list = arr
            .iter()
            .enumerate()
            .map(|(i, a)| EntityAnnotation::from_json(a, &format!("{name}[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        doc.fields.insert(field, list);
    }
    doc.normalize();
    Ok(doc)
}

/// Serializes to a single JSON line (no trailing newline).
pub fn serialize_line(doc: &AnnotatedDocument) -> String {
    doc.to_json().to_string()
}

fn json_byte_offset(text: &str, e: &serde_json::Error) -> usize {
    // serde_json reports 1-based line and column, column counted in bytes.
    let line_start: usize = text.split_inclusive('\n').take(e.line().saturating_sub(1)).map(str::len).sum();
    (line_start + e.column().saturating_sub(1)).min(text.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// Closed set of validation rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Rule {
    /// `start_pos == end_pos`.
    #[serde(rename = "SPAN_EMPTY")]
    SpanEmpty,
    /// `start_pos > end_pos`.
    #[serde(rename = "SPAN_INVERTED")]
    SpanInverted,
    /// `end_pos` exceeds the code-point length of the field text.
    #[serde(rename = "SPAN_OUT_OF_RANGE")]
    SpanOutOfRange,
    /// `md_score` is not a real number in [0, 1].
    #[serde(rename = "MD_SCORE_RANGE")]
    MdScoreRange,
    /// Field does not belong to the document's collection kind.
    #[serde(rename = "FIELD_KIND_MISMATCH")]
    FieldKindMismatch,
    /// Two annotations in one field overlap.
    #[serde(rename = "SPAN_OVERLAP")]
    SpanOverlap,
    /// Source text was supplied but lacks a field that has annotations.
    #[serde(rename = "TEXT_MISSING")]
    TextMissing,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::SpanEmpty => "SPAN_EMPTY",
            Rule::SpanInverted => "SPAN_INVERTED",
            Rule::SpanOutOfRange => "SPAN_OUT_OF_RANGE",
            Rule::MdScoreRange => "MD_SCORE_RANGE",
            Rule::FieldKindMismatch => "FIELD_KIND_MISMATCH",
            Rule::SpanOverlap => "SPAN_OVERLAP",
            Rule::TextMissing => "TEXT_MISSING",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            Rule::SpanOverlap | Rule::TextMissing => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FormatViolation {
    pub doc_key: DocKey,
    pub field: Field,
    pub rule: Rule,
    pub severity: Severity,
    pub message: String,
}

impl FormatViolation {
    fn new(doc: &AnnotatedDocument, field: Field, rule: Rule, message: String) -> Self {
        FormatViolation { doc_key: doc.key.clone(), field, rule, severity: rule.severity(), message }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// Checks type invariants, and span ranges when the field texts are given.
///
/// Overlapping spans are reported as warnings; everything else is an error.
pub fn validate(doc: &AnnotatedDocument, source_text: Option<&BTreeMap<Field, String>>) -> Vec<FormatViolation> {
    let mut out = Vec::new();
    for (&field, list) in &doc.fields {
        if !doc.kind.fields().contains(&field) {
            out.push(FormatViolation::new(
                doc,
                field,
                Rule::FieldKindMismatch,
                format!("field `{field}` is not part of a {} collection", doc.kind.as_str()),
            ));
        }

        let text_len = match source_text {
            Some(texts) => match texts.get(&field) {
                Some(t) => Some(t.chars().count()),
                None => {
                    if !list.is_empty() {
                        out.push(FormatViolation::new(
                            doc,
                            field,
                            Rule::TextMissing,
                            format!("no source text for field `{field}`"),
                        ));
                    }
                    None
                }
            },
            None => None,
        };

        for (i, a) in list.iter().enumerate() {
            match a.start_pos.cmp(&a.end_pos) {
                Ordering::Equal => out.push(FormatViolation::new(
                    doc,
                    field,
                    Rule::SpanEmpty,
                    format!("annotation {i} ({}) has empty span at {}", a.entity, a.start_pos),
                )),
                Ordering::Greater => out.push(FormatViolation::new(
                    doc,
                    field,
                    Rule::SpanInverted,
                    format!("annotation {i} ({}) has start {} > end {}", a.entity, a.start_pos, a.end_pos),
                )),
                Ordering::Less => {}
            }
            if let Some(len) = text_len {
                if a.end_pos > len || a.start_pos > len {
                    out.push(FormatViolation::new(
                        doc,
                        field,
                        Rule::SpanOutOfRange,
                        format!("annotation {i} ({}) ends at {} but text has {len} code points", a.entity, a.end_pos),
                    ));
                }
            }
            if let Some(v) = a.details.get("md_score") {
                let ok = v.as_f64().is_some_and(|s| (0.0..=1.0).contains(&s));
                if !ok {
                    out.push(FormatViolation::new(
                        doc,
                        field,
                        Rule::MdScoreRange,
                        format!("annotation {i} ({}) has md_score {v} outside [0,1]", a.entity),
                    ));
                }
            }
        }

        // Lists are start-sorted, so tracking the furthest end seen suffices.
        let mut furthest: Option<(usize, usize)> = None;
        for (i, a) in list.iter().enumerate() {
            if a.start_pos >= a.end_pos {
                continue;
            }
            if let Some((j, end)) = furthest {
                if a.start_pos < end {
                    out.push(FormatViolation::new(
                        doc,
                        field,
                        Rule::SpanOverlap,
                        format!("annotation {i} ({}) overlaps annotation {j}", a.entity),
                    ));
                }
            }
            if furthest.is_none_or(|(_, end)| a.end_pos > end) {
                furthest = Some((i, a.end_pos));
            }
        }
    }
    out
}

/// Byte offset of code point `cp` in `text`; `cp == len` maps to `text.len()`.
pub fn char_to_byte(text: &str, cp: usize) -> Option<usize> {
    text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len())).nth(cp)
}

/// Code-point offset of byte `byte`, if it lies on a character boundary.
pub fn byte_to_char(text: &str, byte: usize) -> Option<usize> {
    text.is_char_boundary(byte).then(|| text[..byte].chars().count())
}

/// The substring covered by the code-point span `[start, end)`.
pub fn slice_code_points(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let s = char_to_byte(text, start)?;
    let e = char_to_byte(text, end)?;
    Some(&text[s..e])
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"{
    "passage": [
        {
            "entity_id": 19603,
            "start_pos": 4,
            "end_pos": 21,
            "entity": "Manhattan Project",
            "details": {
                "tag": "ORG",
                "md_score": 0.613243
            }
        },
        {
            "entity_id": 32927,
            "start_pos": 65,
            "end_pos": 77,
            "entity": "World War II",
            "details": {
                "tag": "MISC",
                "md_score": 0.991474
            }
        }
    ],
    "pid": 1
}"#;

    const SAMPLE_TEXT: &str = "The Manhattan Project and its atomic bomb helped bring an end to World War II. Its legacy of peaceful uses of atomic energy continues to have an impact on history and science.";

    #[test]
    fn parses_reference_object() {
        let doc = parse_line(SAMPLE, Kind::Passage).unwrap();
        assert_eq!(doc.key, DocKey::Num(1));
        let list = &doc.fields[&Field::Passage];
        assert_eq!(list.len(), 2);
        assert_eq!((list[0].entity_id, list[0].start_pos, list[0].end_pos), (19603, 4, 21));
        assert_eq!(list[0].entity, "Manhattan Project");
        assert_eq!(list[0].tag(), Some("ORG"));
        assert_eq!(list[0].md_score(), Some(0.613243));
        assert_eq!((list[1].entity_id, list[1].start_pos, list[1].end_pos), (32927, 65, 77));
        assert_eq!(list[1].tag(), Some("MISC"));
        assert_eq!(list[1].md_score(), Some(0.991474));
    }

    #[test]
    fn empty_passage() {
        let doc = parse_line(r#"{"passage": [], "pid": 7}"#, Kind::Passage).unwrap();
        assert_eq!(doc.annotation_count(), 0);
        assert_eq!(serialize_line(&doc), r#"{"passage":[],"pid":7}"#);
    }

    #[test]
    fn string_entity_id_is_normalized() {
        let line = r#"{"passage":[{"entity_id":"7954681","start_pos":0,"end_pos":8,"entity":"Montreal","details":{}}],"pid":9}"#;
        let doc = parse_line(line, Kind::Passage).unwrap();
        assert_eq!(doc.fields[&Field::Passage][0].entity_id, 7954681);
        assert!(serialize_line(&doc).contains(r#""entity_id":7954681"#));
    }

    #[test]
    fn errors() {
        match parse_line(r#"{"passage": [}"#, Kind::Passage) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 13),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_line(r#"{"passage": []}"#, Kind::Passage), Err(Error::Schema(_))));
        let bad_id = r#"{"passage":[{"entity_id":"abc","start_pos":0,"end_pos":1,"entity":"x"}],"pid":1}"#;
        assert!(matches!(parse_line(bad_id, Kind::Passage), Err(Error::Schema(_))));
        // docid is required for document collections, pid alone is not enough.
        assert!(matches!(parse_line(r#"{"body": [], "pid": 1}"#, Kind::Document), Err(Error::Schema(_))));
    }

    #[test]
    fn unknown_details_are_preserved() {
        let line = r#"{"passage":[{"entity_id":1,"start_pos":0,"end_pos":1,"entity":"A","details":{"tag":"PER","md_score":0.5,"linker":"rel","extra":[1,2]}}],"pid":"abc"}"#;
        let doc = parse_line(line, Kind::Passage).unwrap();
        let back = parse_line(&serialize_line(&doc), Kind::Passage).unwrap();
        assert_eq!(doc, back);
        assert_eq!(back.fields[&Field::Passage][0].details["linker"], "rel");
        assert_eq!(back.key, DocKey::Str("abc".into()));
    }

    #[test]
    fn annotations_sorted_on_parse() {
        let line = r#"{"passage":[{"entity_id":2,"start_pos":10,"end_pos":12,"entity":"B"},{"entity_id":1,"start_pos":0,"end_pos":3,"entity":"A"}],"pid":3}"#;
        let doc = parse_line(line, Kind::Passage).unwrap();
        let ids: Vec<_> = doc.fields[&Field::Passage].iter().map(|a| a.entity_id).collect();
        assert_eq!(ids, [1, 2]);
    }

    #[test]
    fn multi_field_document_round_trip() {
        let doc = AnnotatedDocument::empty(Kind::Document, "msmarco_doc_00_0")
            .with_field(Field::Body, vec![EntityAnnotation::new(5, 3, 9, "Paris").with_tag("LOC").with_md_score(0.9)])
            .with_field(Field::Title, vec![EntityAnnotation::new(6, 0, 4, "Rome")]);
        let line = serialize_line(&doc);
        let v: Value = serde_json::from_str(&line).unwrap();
        assert!(v["body"].is_array() && v["title"].is_array() && v["header"].is_array());
        assert_eq!(v["docid"], "msmarco_doc_00_0");
        assert_eq!(parse_line(&line, Kind::Document).unwrap(), doc);
    }

    #[test]
    fn reference_spans_validate_against_text() {
        let doc = parse_line(SAMPLE, Kind::Passage).unwrap();
        let texts = BTreeMap::from([(Field::Passage, SAMPLE_TEXT.to_owned())]);
        assert!(validate(&doc, Some(&texts)).is_empty());
        assert_eq!(slice_code_points(SAMPLE_TEXT, 4, 21), Some("Manhattan Project"));
        assert_eq!(slice_code_points(SAMPLE_TEXT, 65, 77), Some("World War II"));
    }

    #[test]
    fn span_rules() {
        let doc = AnnotatedDocument::empty(Kind::Passage, 1u64)
            .with_field(Field::Passage, vec![EntityAnnotation::new(1, 5, 5, "X")]);
        let v = validate(&doc, None);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::SpanEmpty);

        let doc = AnnotatedDocument::empty(Kind::Passage, 1u64)
            .with_field(Field::Passage, vec![EntityAnnotation::new(1, 2, 10, "X")]);
        let texts = BTreeMap::from([(Field::Passage, "short".to_owned())]);
        let v = validate(&doc, Some(&texts));
        assert_eq!(v.iter().map(|v| v.rule).collect::<Vec<_>>(), [Rule::SpanOutOfRange]);

        let doc = AnnotatedDocument::empty(Kind::Passage, 1u64)
            .with_field(Field::Passage, vec![EntityAnnotation::new(1, 4, 2, "X")]);
        assert_eq!(validate(&doc, None)[0].rule, Rule::SpanInverted);
    }

    #[test]
    fn md_score_out_of_range() {
        let doc = AnnotatedDocument::empty(Kind::Passage, 1u64)
            .with_field(Field::Passage, vec![EntityAnnotation::new(1, 0, 2, "X").with_md_score(1.5)]);
        let v = validate(&doc, None);
        assert_eq!(v[0].rule, Rule::MdScoreRange);
        assert!(v[0].is_error());
    }

    #[test]
    fn overlap_is_a_warning() {
        let doc = AnnotatedDocument::empty(Kind::Passage, 1u64).with_field(
            Field::Passage,
            vec![EntityAnnotation::new(1, 0, 8, "New York"), EntityAnnotation::new(2, 4, 13, "York City")],
        );
        let v = validate(&doc, None);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::SpanOverlap);
        assert_eq!(v[0].severity, Severity::Warning);
    }

    #[test]
    fn field_kind_mismatch() {
        let mut doc = AnnotatedDocument::empty(Kind::Passage, 1u64);
        doc.fields.insert(Field::Title, vec![]);
        assert_eq!(validate(&doc, None)[0].rule, Rule::FieldKindMismatch);
    }

    #[test]
    fn code_point_offsets_not_bytes() {
        // "Zürich – Genève": the umlaut and en dash are multi-byte.
        let text = "Zürich – Genève is a route";
        let cp_start = 9;
        let cp_end = 15;
        assert_eq!(slice_code_points(text, cp_start, cp_end), Some("Genève"));
        let texts = BTreeMap::from([(Field::Passage, text.to_owned())]);
        let ok = AnnotatedDocument::empty(Kind::Passage, 1u64)
            .with_field(Field::Passage, vec![EntityAnnotation::new(1, cp_start, cp_end, "Geneva")]);
        assert!(validate(&ok, Some(&texts)).is_empty());

        // The same span counted in bytes runs past the end of the text.
        let b_start = text.find("Genève").unwrap();
        let b_end = b_start + "Genève".len();
        assert_eq!(byte_to_char(text, b_start), Some(cp_start));
        assert_eq!(char_to_byte(text, cp_end), Some(b_end));
        let short = "Zürich – Genève";
        let texts = BTreeMap::from([(Field::Passage, short.to_owned())]);
        let bytes = AnnotatedDocument::empty(Kind::Passage, 1u64)
            .with_field(Field::Passage, vec![EntityAnnotation::new(1, b_start, b_end, "Geneva")]);
        assert_eq!(validate(&bytes, Some(&texts))[0].rule, Rule::SpanOutOfRange);
    }

    #[test]
    fn doc_key_ordering_is_numeric_first() {
        let mut keys = vec![DocKey::parse("10"), DocKey::parse("b"), DocKey::parse("2"), DocKey::parse("007")];
        keys.sort();
        assert_eq!(keys, [DocKey::Num(2), DocKey::Num(10), DocKey::Str("007".into()), DocKey::Str("b".into())]);
    }
}
