#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use entlinks_core::corpus;
use entlinks_core::format::parse_line;
use entlinks_core::kb::{self, KnowledgeBase};
use entlinks_core::linker::{self, Gazetteer};
use entlinks_core::{Kind, LinkStore};

pub const SAMPLE_LINE: &str = r#"{"passage":[{"entity_id":19603,"start_pos":4,"end_pos":21,"entity":"Manhattan Project","details":{"tag":"ORG","md_score":0.613243}},{"entity_id":32927,"start_pos":65,"end_pos":77,"entity":"World War II","details":{"tag":"MISC","md_score":0.991474}}],"pid":1}"#;

pub const SAMPLE_TEXT: &str = "The Manhattan Project and its atomic bomb helped bring an end to World War II. Its legacy of peaceful uses of atomic energy continues to have an impact on history and science.";

pub const PASSAGES: [(u64, &str); 7] = [
    (1, SAMPLE_TEXT),
    (2, "Sacagawea guided the expedition across the mountains."),
    (3, "Montreal is the largest city in Quebec."),
    (4, "The Pacific Ocean is the largest ocean on Earth."),
    (5, "Clark kept a journal during the expedition."),
    (6, "Travel tips for Paris in spring."),
    (7, "Montreal hosts a jazz festival every summer."),
];

pub const SACAJAWEA_QUERY: &str = "where did sacajawea travel";
pub const RELEVANT_PID: u64 = 2;

pub const GAZETTEER_TSV: &str = "surface\tentity_id\tp_wiki\tp_yago\tname
sacagawea\t5000\t0.9\t0.05\tSacagawea
sacajawea\t5000\t0.7\t0.1
montreal\t7954681\t0.95\t0.0\tMontreal
pacific ocean\t6000\t0.9\t0.0\tPacific Ocean
manhattan project\t19603\t0.9\t0.0\tManhattan Project
world war ii\t32927\t0.9\t0.0\tWorld War II
clark\t7000\t0.3\t0.1\tWilliam Clark
";

pub const KB_TSV: &str = "entity_id\tname\tlat\tlon\tcountry\twikidata_id
7954681\tMontreal\t45.5089\t-73.5617\tQ16\tQ340
5000\tSacagawea\t\t\tQ30\t
6000\tPacific Ocean\t0\t-160\t\t
19603\tManhattan Project\t35.93\t-84.31\tQ30\t
32927\tWorld War II\t\t\t\t
7000\tWilliam Clark\t38.63\t-90.2\tQ30\t
";

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture { dir };
        let corpus: String = PASSAGES
            .iter()
            .map(|(pid, text)| format!("{}\n", serde_json::json!({"doc_key": pid, "text": text})))
            .collect();
        fs::write(f.path("corpus.jsonl"), corpus).unwrap();
        fs::write(f.path("gazetteer.tsv"), GAZETTEER_TSV).unwrap();
        fs::write(f.path("kb.tsv"), KB_TSV).unwrap();
        fs::write(f.path("sample.jsonl"), format!("{SAMPLE_LINE}\n")).unwrap();
        fs::write(f.path("sample_text.jsonl"), format!("{}\n", serde_json::json!({"doc_key": 1, "text": SAMPLE_TEXT})))
            .unwrap();
        fs::write(f.path("queries.tsv"), format!("q1\t{SACAJAWEA_QUERY}\n")).unwrap();
        fs::write(f.path("qrels.txt"), format!("q1 0 {RELEVANT_PID} 1\n")).unwrap();
        f
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// A service store directory: Sample-record links for passage 1, gazetteer
    /// links for the rest.
    pub fn store_dir(&self) -> PathBuf {
        let out = self.path("store");
        fs::create_dir_all(&out).unwrap();
        let (kb, report) = {
            let mut kb = KnowledgeBase::new();
            let r = kb.ingest(kb::read_tsv(KB_TSV.as_bytes()));
            (kb, r)
        };
        assert!(report.rejected.is_empty(), "{report:?}");
        let (mut gaz, rejected) = Gazetteer::read_tsv(GAZETTEER_TSV.as_bytes()).unwrap();
        assert!(rejected.is_empty());
        gaz.adopt_names(&kb);

        let mut docs = vec![parse_line(SAMPLE_LINE, Kind::Passage).unwrap()];
        docs.extend(PASSAGES[1..].iter().map(|(pid, text)| linker::link_text(*pid, text, &gaz, None)));
        LinkStore::from_documents("fixture", Kind::Passage, docs).unwrap().save(&out.join("links.store")).unwrap();
        kb.save(&out.join("kb.store")).unwrap();
        fs::copy(self.path("corpus.jsonl"), out.join("corpus.jsonl")).unwrap();
        fs::copy(self.path("gazetteer.tsv"), out.join("gazetteer.tsv")).unwrap();
        // Sanity: the corpus file parses.
        let n = corpus::read_corpus(fs::read_to_string(out.join("corpus.jsonl")).unwrap().as_bytes()).count();
        assert_eq!(n, PASSAGES.len());
        out
    }
}
