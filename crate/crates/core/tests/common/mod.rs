#![allow(dead_code)]

use entlinks_core::{AnnotatedDocument, DocKey, EntityAnnotation, Field, Kind};
use rand::seq::SliceRandom;
use rand::Rng;

pub const NAMES: [&str; 12] = [
    "Manhattan Project",
    "World War II",
    "Montreal",
    "Sacagawea",
    "Pacific Ocean",
    "Zürich",
    "São Paulo",
    "東京",
    "C. S. Lewis",
    "Clark",
    "\"Quoted\" name",
    "Back\\slash",
];

const TAGS: [&str; 4] = ["ORG", "MISC", "LOC", "PER"];

/// Start-sorted, non-overlapping spans inside `[0, text_len)`.
pub fn random_annotations<R: Rng>(rng: &mut R, n: usize, id_pool: u64) -> Vec<EntityAnnotation> {
    let mut pos = 0usize;
    (0..n)
        .map(|_| {
            let start = pos + rng.gen_range(0..20);
            let end = start + rng.gen_range(1..25);
            pos = end;
            let mut a = EntityAnnotation::new(rng.gen_range(1..=id_pool), start, end, *NAMES.choose(rng).unwrap());
            if rng.gen_bool(0.9) {
                a = a.with_tag(*TAGS.choose(rng).unwrap());
            }
            if rng.gen_bool(0.9) {
                a = a.with_md_score(rng.gen::<f64>());
            }
            if rng.gen_bool(0.05) {
                a.details.insert("linker".into(), serde_json::json!({"name": "rel", "version": [1, 2]}));
            }
            a
        })
        .collect()
}

pub fn random_key<R: Rng>(rng: &mut R, i: usize) -> DocKey {
    if rng.gen_bool(0.7) {
        DocKey::Num(i as u64)
    } else {
        DocKey::Str(format!("msmarco_doc_{:02}_{i}", rng.gen_range(0..60)))
    }
}

pub fn random_document<R: Rng>(rng: &mut R, kind: Kind, key: DocKey, max_links: usize, id_pool: u64) -> AnnotatedDocument {
    let mut doc = AnnotatedDocument::empty(kind, key);
    for &field in kind.fields() {
        let n = rng.gen_range(0..=max_links);
        doc = doc.with_field(field, random_annotations(rng, n, id_pool));
    }
    doc
}

/// Dense vector with entries in quarter steps, so sums and dot products are
/// exact in both f32 and f64.
pub fn quarter_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| rng.gen_range(-8i32..=8) as f32 / 4.0).collect()
}

pub fn passage(key: u64, links: Vec<EntityAnnotation>) -> AnnotatedDocument {
    AnnotatedDocument::empty(Kind::Passage, key).with_field(Field::Passage, links)
}
