//! Gazetteer-based entity linker.
//!
//! Three stages:
//!
//! 1. Mention detection: greedy longest match of gazetteer surface forms
//!    over lowercased tokens, left to right, never splitting a token.
//! 2. Candidate selection: the prior `P(e|m) = min(1, p_wiki + p_yago)`
//!    picks the top 4 candidates; up to 3 more come from the remaining ones
//!    ranked by the context score `eᵀ Σ_{w ∈ c} w`, where `c` is a window of
//!    at most 100 tokens around the mention.
//! 3. Disambiguation: argmax of `prior + ctx`, with `ctx` the context score
//!    min-max scaled to [0, 1] within the candidate set. This additive rule
//!    is a simple stand-in for a trained disambiguation model.
//!
//! All ties go to the smaller entity id.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::BufRead;

use crate::embeddings::{self, EmbeddingStore};
use crate::error::{Error, Result};
use crate::format::{AnnotatedDocument, DocKey, EntityAnnotation, Field, Kind};
use crate::kb::KnowledgeBase;
use crate::retrieval::{self, Token};

pub const PRIOR_SLOTS: usize = 4;
pub const CONTEXT_SLOTS: usize = 3;
pub const MAX_CANDIDATES: usize = PRIOR_SLOTS + CONTEXT_SLOTS;
pub const CONTEXT_WINDOW: usize = 100;
/// Fixed mention-detection confidence for exact gazetteer hits.
pub const GAZETTEER_MD_SCORE: f64 = 1.0;
pub const GAZETTEER_TAG: &str = "GAZ";

/// `min(1, p_wiki + p_yago)`.
pub fn prior(p_wiki: f64, p_yago: f64) -> f64 {
    (p_wiki + p_yago).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazetteerCandidate {
    pub entity_id: u64,
    pub p_wiki: f64,
    pub p_yago: f64,
}

impl GazetteerCandidate {
    pub fn prior(&self) -> f64 {
        prior(self.p_wiki, self.p_yago)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazetteerEntry {
    /// Lowercased surface form, tokens joined by single spaces.
    pub surface: String,
    pub candidates: Vec<GazetteerCandidate>,
}

#[derive(Debug, Default)]
pub struct Gazetteer {
    entries: HashMap<String, GazetteerEntry>,
    names: HashMap<u64, String>,
    max_tokens: usize,
}

fn surface_key(surface: &str) -> String {
    retrieval::tokenize(surface).join(" ")
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, surface: &str, candidate: GazetteerCandidate) -> Result<()> {
        for (label, p) in [("p_wiki", candidate.p_wiki), ("p_yago", candidate.p_yago)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::schema(format!("{surface:?}: {label} {p} outside [0, 1]")));
            }
        }
        let key = surface_key(surface);
        if key.is_empty() {
            return Err(Error::schema(format!("surface form {surface:?} has no tokens")));
        }
        let tokens = key.split(' ').count();
        let entry = self
            .entries
            .entry(key.clone())
            .or_insert_with(|| GazetteerEntry { surface: key, candidates: Vec::new() });
        if entry.candidates.iter().any(|c| c.entity_id == candidate.entity_id) {
            return Err(Error::Duplicate(format!("{surface:?} → {}", candidate.entity_id)));
        }
        entry.candidates.push(candidate);
        self.max_tokens = self.max_tokens.max(tokens);
        Ok(())
    }

    pub fn set_name(&mut self, entity_id: u64, name: impl Into<String>) {
        self.names.insert(entity_id, name.into());
    }

    /// Takes canonical names from the KB for every entity it knows.
    pub fn adopt_names(&mut self, kb: &KnowledgeBase) {
        for r in kb.records() {
            self.names.insert(r.entity_id, r.name.clone());
        }
    }

    pub fn name(&self, entity_id: u64) -> Option<&str> {
        self.names.get(&entity_id).map(String::as_str)
    }

    pub fn entry(&self, surface: &str) -> Option<&GazetteerEntry> {
        self.entries.get(&surface_key(surface))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads `surface  entity_id  p_wiki  p_yago [name]` TSV rows. Returns
    /// the rejected rows as `(line, reason)`.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<(Self, Vec<(usize, String)>)> {
        let mut g = Gazetteer::new();
        let mut rejected = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || (i == 0 && line.starts_with("surface\t")) {
                continue;
            }
            if let Err(e) = g.add_tsv_row(line) {
                rejected.push((i + 1, e.to_string()));
            }
        }
        Ok((g, rejected))
    }

    fn add_tsv_row(&mut self, line: &str) -> Result<()> {
        let cells: Vec<&str> = line.split('\t').collect();
        if !(4..=5).contains(&cells.len()) {
            return Err(Error::schema(format!("expected 4 or 5 columns, found {}", cells.len())));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::schema(format!("bad probability {s:?}")));
        let entity_id =
            cells[1].trim().parse().map_err(|_| Error::schema(format!("bad entity_id {:?}", cells[1])))?;
        self.insert(cells[0], GazetteerCandidate { entity_id, p_wiki: num(cells[2])?, p_yago: num(cells[3])? })?;
        if let Some(name) = cells.get(4).map(|s| s.trim()).filter(|s| !s.is_empty()) {
            self.names.entry(entity_id).or_insert_with(|| name.to_owned());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MentionSpan {
    /// Code-point offsets into the linked text, end exclusive.
    pub start_pos: usize,
    pub end_pos: usize,
    pub surface: String,
    pub md_score: f64,
    #[serde(skip)]
    tokens: (usize, usize),
}

impl MentionSpan {
    fn key(&self) -> String {
        surface_key(&self.surface)
    }
}

/// Greedy longest-match mention detection on token boundaries.
pub fn detect_mentions(text: &str, gazetteer: &Gazetteer) -> Vec<MentionSpan> {
    let tokens = retrieval::token_spans(text);
    detect_in_tokens(text, &tokens, gazetteer)
}

fn detect_in_tokens(text: &str, tokens: &[Token], gazetteer: &Gazetteer) -> Vec<MentionSpan> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = (1..=gazetteer.max_tokens.min(tokens.len() - i)).rev().find(|&len| {
            let key = tokens[i..i + len].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
            gazetteer.entries.get(&key).is_some_and(|e| !e.candidates.is_empty())
        });
        match longest {
            Some(len) => {
                let (start, end) = (tokens[i].start, tokens[i + len - 1].end);
                let surface = text.chars().skip(start).take(end - start).collect();
                out.push(MentionSpan {
                    start_pos: start,
                    end_pos: end,
                    surface,
                    md_score: GAZETTEER_MD_SCORE,
                    tokens: (i, i + len),
                });
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

/// Up to `size` tokens around `tokens[span.0..span.1]`, split evenly
/// between both sides; a short side leaves its share to the other.
pub fn context_window(tokens: &[Token], span: (usize, usize), size: usize) -> Vec<String> {
    let left = &tokens[..span.0];
    let right = &tokens[span.1..];
    let half = size / 2;
    let mut nl = left.len().min(half);
    let mut nr = right.len().min(size - half);
    let spare = size - nl - nr;
    let extra_l = spare.min(left.len() - nl);
    nl += extra_l;
    nr += (spare - extra_l).min(right.len() - nr);
    left[left.len() - nl..].iter().chain(&right[..nr]).map(|t| t.text.clone()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectedBy {
    Prior,
    Context,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Candidate {
    pub entity_id: u64,
    pub prior: f64,
    /// `eᵀ Σ w`; `-inf` when the entity has no embedding.
    pub context_score: f64,
    pub selected_by: SelectedBy,
}

/// Σ of the word vectors of the context tokens that have one.
fn context_vector(context: &[String], emb: &EmbeddingStore) -> Vec<f32> {
    let mut sum = vec![0f64; emb.dim()];
    for w in context {
        if let Some(v) = emb.word(w) {
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += f64::from(x);
            }
        }
    }
    sum.into_iter().map(|x| x as f32).collect()
}

fn by_desc_then_id(a: (f64, u64), b: (f64, u64)) -> Ordering {
    b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
}

/// Picks at most seven candidates: four by prior, then up to three of the
/// rest by context score.
pub fn score_candidates(
    mention: &MentionSpan,
    context: &[String],
    gazetteer: &Gazetteer,
    embeddings: Option<&EmbeddingStore>,
) -> Vec<Candidate> {
    let Some(entry) = gazetteer.entries.get(&mention.key()) else {
        return Vec::new();
    };
    let ctx = embeddings.map(|e| (e, context_vector(context, e)));
    let context_score = |id: u64| -> f64 {
        let Some((emb, ctx)) = &ctx else { return f64::NEG_INFINITY };
        let Some(vec) = gazetteer.name(id).and_then(|n| emb.entity(n)) else {
            return f64::NEG_INFINITY;
        };
        embeddings::dot(vec, ctx)
    };

    let mut pool: Vec<Candidate> = entry
        .candidates
        .iter()
        .map(|c| Candidate {
            entity_id: c.entity_id,
            prior: c.prior(),
            context_score: context_score(c.entity_id),
            selected_by: SelectedBy::Prior,
        })
        .collect();
    pool.sort_by(|a, b| by_desc_then_id((a.prior, a.entity_id), (b.prior, b.entity_id)));

    let mut rest = pool.split_off(pool.len().min(PRIOR_SLOTS));
    rest.sort_by(|a, b| by_desc_then_id((a.context_score, a.entity_id), (b.context_score, b.entity_id)));
    pool.extend(rest.into_iter().take(CONTEXT_SLOTS).map(|c| Candidate { selected_by: SelectedBy::Context, ..c }));
    pool
}

/// Winner by `prior + min-max(context_score)`; `None` for no candidates.
pub fn disambiguate(candidates: &[Candidate]) -> Option<&Candidate> {
    let finite: Vec<f64> = candidates.iter().map(|c| c.context_score).filter(|s| s.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled = |s: f64| if s.is_finite() && hi > lo { (s - lo) / (hi - lo) } else { 0.0 };
    candidates.iter().min_by(|a, b| {
        by_desc_then_id((a.prior + scaled(a.context_score), a.entity_id), (b.prior + scaled(b.context_score), b.entity_id))
    })
}

/// Links one text and returns its annotations, start-sorted.
pub fn link_annotations(text: &str, gazetteer: &Gazetteer, embeddings: Option<&EmbeddingStore>) -> Vec<EntityAnnotation> {
    let tokens = retrieval::token_spans(text);
    let mut out = Vec::new();
    for m in detect_in_tokens(text, &tokens, gazetteer) {
        let context = context_window(&tokens, m.tokens, CONTEXT_WINDOW);
        let candidates = score_candidates(&m, &context, gazetteer, embeddings);
        if let Some(best) = disambiguate(&candidates) {
            let name = gazetteer.name(best.entity_id).unwrap_or(&m.surface).to_owned();
            out.push(
                EntityAnnotation::new(best.entity_id, m.start_pos, m.end_pos, name)
                    .with_tag(GAZETTEER_TAG)
                    .with_md_score(m.md_score),
            );
        }
    }
    out
}

/// Links a passage.
pub fn link_text(
    doc_key: impl Into<DocKey>,
    text: &str,
    gazetteer: &Gazetteer,
    embeddings: Option<&EmbeddingStore>,
) -> AnnotatedDocument {
    AnnotatedDocument::empty(Kind::Passage, doc_key)
        .with_field(Field::Passage, link_annotations(text, gazetteer, embeddings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EmbeddingVector;
    use crate::format::{self, validate};
    use std::collections::BTreeMap;

    fn cand(id: u64, p_wiki: f64, p_yago: f64) -> GazetteerCandidate {
        GazetteerCandidate { entity_id: id, p_wiki, p_yago }
    }

    fn nyc_gazetteer() -> Gazetteer {
        let mut g = Gazetteer::new();
        g.insert("New York", cand(1, 0.6, 0.1)).unwrap();
        g.insert("New York City", cand(2, 0.9, 0.0)).unwrap();
        g.insert("car", cand(3, 0.5, 0.0)).unwrap();
        g.set_name(1, "New York (state)");
        g.set_name(2, "New York City");
        g
    }

    #[test]
    fn prior_cap() {
        assert_eq!(prior(0.7, 0.5), 1.0);
        assert!((prior(0.3, 0.1) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn longest_match_wins() {
        let m = detect_mentions("visit new york city today", &nyc_gazetteer());
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].start_pos, m[0].end_pos, m[0].surface.as_str()), (6, 19, "new york city"));
        assert_eq!(m[0].md_score, 1.0);
    }

    #[test]
    fn no_match_inside_words_or_in_empty_text() {
        assert!(detect_mentions("", &nyc_gazetteer()).is_empty());
        assert!(detect_mentions("a scarlet carpet", &nyc_gazetteer()).is_empty());
        assert_eq!(detect_mentions("a red car.", &nyc_gazetteer()).len(), 1);
    }

    #[test]
    fn case_insensitive_with_unicode_offsets() {
        let mut g = Gazetteer::new();
        g.insert("genève", cand(5, 1.0, 0.0)).unwrap();
        let m = detect_mentions("Über GENÈVE!", &g);
        assert_eq!((m[0].start_pos, m[0].end_pos), (5, 11));
        assert_eq!(m[0].surface, "GENÈVE");
    }

    #[test]
    fn context_window_fills_from_longer_side() {
        let tokens = retrieval::token_spans(&(0..130).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" "));
        let w = context_window(&tokens, (10, 11), 100);
        assert_eq!(w.len(), 100);
        assert_eq!(w[0], "w0");
        assert_eq!(w[10], "w11");
        assert_eq!(w[99], "w100");
        let w = context_window(&tokens, (60, 61), 100);
        assert_eq!((w[0].as_str(), w[99].as_str()), ("w10", "w110"));
        assert_eq!(context_window(&tokens[..3], (1, 2), 100), ["w0", "w2"]);
    }

    /// Six candidates for "mercury": distinct priors, 2-d embeddings.
    fn mercury() -> (Gazetteer, EmbeddingStore) {
        let mut g = Gazetteer::new();
        let rows = [(10, 0.50), (11, 0.30), (12, 0.20), (13, 0.15), (14, 0.10), (15, 0.05)];
        for (id, p) in rows {
            g.insert("mercury", cand(id, p, 0.0)).unwrap();
            g.set_name(id, format!("E{id}"));
        }
        let mut e = EmbeddingStore::new(2).unwrap();
        e.insert(EmbeddingVector::word("planet", vec![1.0, 0.0])).unwrap();
        e.insert(EmbeddingVector::word("orbit", vec![0.5, 0.5])).unwrap();
        e.insert(EmbeddingVector::entity("E14", vec![0.1, 0.9])).unwrap();
        e.insert(EmbeddingVector::entity("E15", vec![2.0, 0.0])).unwrap();
        e.insert(EmbeddingVector::entity("E10", vec![0.0, 1.0])).unwrap();
        (g, e)
    }

    #[test]
    fn four_by_prior_then_context() {
        let (g, e) = mercury();
        let text = "mercury planet orbit";
        let tokens = retrieval::token_spans(text);
        let m = &detect_mentions(text, &g)[0];
        let ctx = context_window(&tokens, m.tokens, CONTEXT_WINDOW);
        assert_eq!(ctx, ["planet", "orbit"]);
        let c = score_candidates(m, &ctx, &g, Some(&e));
        let ids: Vec<u64> = c.iter().map(|c| c.entity_id).collect();
        // Context sum is (1.5, 0.5): E15 scores 3.0, E14 scores 0.6.
        assert_eq!(ids, [10, 11, 12, 13, 15, 14]);
        assert_eq!(c[4].selected_by, SelectedBy::Context);
        assert!((c[4].context_score - 3.0).abs() < 1e-6);
        assert!((c[5].context_score - 0.6).abs() < 1e-6);
        assert!((c[0].context_score - 0.5).abs() < 1e-6);
        assert_eq!(c[1].context_score, f64::NEG_INFINITY);
    }

    #[test]
    fn equal_priors_context_breaks_tie() {
        let mut g = Gazetteer::new();
        g.insert("jaguar", cand(1, 0.4, 0.0)).unwrap();
        g.insert("jaguar", cand(2, 0.4, 0.0)).unwrap();
        g.set_name(1, "Jaguar Cars");
        g.set_name(2, "Jaguar");
        let mut e = EmbeddingStore::new(2).unwrap();
        e.insert(EmbeddingVector::word("jungle", vec![0.0, 1.0])).unwrap();
        e.insert(EmbeddingVector::entity("Jaguar Cars", vec![1.0, 0.0])).unwrap();
        e.insert(EmbeddingVector::entity("Jaguar", vec![0.0, 1.0])).unwrap();
        let doc = link_text(1u64, "the jaguar in the jungle", &g, Some(&e));
        assert_eq!(doc.fields[&Field::Passage][0].entity_id, 2);
        // Without embeddings the tie goes to the smaller id.
        let doc = link_text(1u64, "the jaguar in the jungle", &g, None);
        assert_eq!(doc.fields[&Field::Passage][0].entity_id, 1);
    }

    #[test]
    fn single_candidate_and_no_hits() {
        let g = nyc_gazetteer();
        let doc = link_text(4u64, "I love New York City!", &g, None);
        let a = &doc.fields[&Field::Passage][0];
        assert_eq!((a.entity_id, a.entity.as_str(), a.tag(), a.md_score()), (2, "New York City", Some("GAZ"), Some(1.0)));
        let texts = BTreeMap::from([(Field::Passage, "I love New York City!".to_owned())]);
        assert!(validate(&doc, Some(&texts)).is_empty());
        assert_eq!(format::slice_code_points("I love New York City!", a.start_pos, a.end_pos), Some("New York City"));

        assert_eq!(link_text(5u64, "nothing to see", &g, None).annotation_count(), 0);
    }

    #[test]
    fn tsv_rows() {
        let tsv = "surface\tentity_id\tp_wiki\tp_yago\tname\n\
                   sacajawea\t1\t0.8\t0.1\tSacagawea\n\
                   sacagawea\t1\t0.9\t0.1\n\
                   bad\t2\t1.5\t0\n\
                   short\t3\n";
        let (g, rejected) = Gazetteer::read_tsv(tsv.as_bytes()).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(rejected.len(), 2);
        assert_eq!(g.name(1), Some("Sacagawea"));
        assert_eq!(g.entry("SACAJAWEA").unwrap().candidates[0].p_wiki, 0.8);
    }
}
