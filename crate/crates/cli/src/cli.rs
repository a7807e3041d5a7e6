use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use entlinks_core::corpus::{self, CorpusDoc};
use entlinks_core::embeddings::{self, EmbeddingStore, VectorKind};
use entlinks_core::eval::{self, Metric, Qrels};
use entlinks_core::expansion::{self, ExpansionMode};
use entlinks_core::format::{self, Severity};
use entlinks_core::fusion::{self, RankedList, RrfConfig, Run};
use entlinks_core::geo;
use entlinks_core::kb::{self, BoundingBox, KnowledgeBase, RegionFilter};
use entlinks_core::linker::{self, Gazetteer};
use entlinks_core::retrieval::{Analyzer, Bm25Params, InvertedIndex};
use entlinks_core::store::{self, LinkStore};
use entlinks_core::{AnnotatedDocument, DocKey, EntitySelector, Field, IngestPolicy, Kind};
use serde_json::json;

use crate::service::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "entlinks", version, about = "Entity links for passage ranking collections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load annotation JSONL into a link store.
    Ingest(IngestArgs),
    /// Check annotation JSONL against the format rules.
    Validate(ValidateArgs),
    /// Collection statistics of a link store.
    Stats(StoreArg),
    /// Print the annotations of one document.
    Links(LinksArgs),
    /// List documents that link an entity.
    DocsForEntity(DocsForEntityArgs),
    /// Knowledge-base tools.
    #[command(subcommand)]
    Kb(KbCommand),
    /// Embedding tools.
    #[command(subcommand)]
    Emb(EmbCommand),
    /// Link raw text with a gazetteer.
    Link(LinkArgs),
    /// Build a BM25 index over a corpus, optionally entity-expanded.
    Index(IndexArgs),
    /// Append entity tokens to every corpus document.
    Expand(ExpandArgs),
    /// Run queries against an index and write a TREC run.
    Search(SearchArgs),
    /// Combine runs with reciprocal rank fusion.
    Fuse(FuseArgs),
    /// Score a run against qrels; prints one number.
    Eval(EvalArgs),
    /// Write links and KB as N-Triples.
    ExportRdf(ExportRdfArgs),
    /// Geographic queries.
    #[command(subcommand)]
    Geo(GeoCommand),
    /// Serve the read-only HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Passage,
    Document,
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Kind {
        match k {
            KindArg::Passage => Kind::Passage,
            KindArg::Document => Kind::Document,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    None,
    Text,
    Hash,
}

impl From<ModeArg> for ExpansionMode {
    fn from(m: ModeArg) -> ExpansionMode {
        match m {
            ModeArg::None => ExpansionMode::None,
            ModeArg::Text => ExpansionMode::Text,
            ModeArg::Hash => ExpansionMode::Hash,
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Annotation JSONL; `-` reads stdin.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "passage")]
    kind: KindArg,
    /// Output store file.
    #[arg(long)]
    store: PathBuf,
    /// Abort on the first invalid line instead of skipping it.
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value = "collection")]
    collection: String,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "passage")]
    kind: KindArg,
    /// Corpus JSONL with the source text; enables span-range and text checks.
    #[arg(long)]
    text: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StoreArg {
    #[arg(long)]
    store: PathBuf,
}

#[derive(Debug, Args)]
pub struct LinksArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    doc_key: String,
}

#[derive(Debug, Args)]
#[group(id = "entity", required = true, multiple = false, args = ["id", "name"])]
pub struct EntityArg {
    #[arg(long)]
    id: Option<u64>,
    #[arg(long)]
    name: Option<String>,
}

impl EntityArg {
    fn selector(&self) -> EntitySelector {
        match (&self.id, &self.name) {
            (Some(id), _) => EntitySelector::Id(*id),
            (None, Some(n)) => EntitySelector::Name(n.clone()),
            (None, None) => unreachable!("clap enforces one of --id/--name"),
        }
    }
}

#[derive(Debug, Args)]
pub struct DocsForEntityArgs {
    #[arg(long)]
    store: PathBuf,
    #[command(flatten)]
    entity: EntityArg,
}

#[derive(Debug, Args)]
#[group(id = "region", required = true, multiple = false, args = ["bbox", "country"])]
pub struct RegionArg {
    /// min_lat,min_lon,max_lat,max_lon
    #[arg(long, allow_hyphen_values = true)]
    bbox: Option<String>,
    /// Country id as stored in the KB, e.g. Q142.
    #[arg(long)]
    country: Option<String>,
}

impl RegionArg {
    fn filter(&self) -> Result<RegionFilter> {
        Ok(match (&self.bbox, &self.country) {
            (Some(b), _) => RegionFilter::BBox(b.parse::<BoundingBox>()?),
            (None, Some(c)) => RegionFilter::Country(c.clone()),
            (None, None) => unreachable!("clap enforces one of --bbox/--country"),
        })
    }
}

#[derive(Debug, Subcommand)]
pub enum KbCommand {
    /// Load entity TSV (entity_id, name, lat, lon, country[, wikidata_id]).
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print one entity record.
    Lookup {
        #[arg(long)]
        kb: PathBuf,
        #[command(flatten)]
        entity: EntityArg,
    },
    /// Entities inside a bounding box or country.
    Query {
        #[arg(long)]
        kb: PathBuf,
        #[command(flatten)]
        region: RegionArg,
    },
}

#[derive(Debug, Subcommand)]
pub enum EmbCommand {
    /// Load text-format vectors (`key v1 … vd`; entities as ENTITY/Title).
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dot product of two stored vectors.
    Sim {
        #[arg(long)]
        emb: PathBuf,
        /// `word:<w>` or `entity:<name>`; bare keys are words.
        a: String,
        b: String,
    },
}

#[derive(Debug, Args)]
pub struct LinkArgs {
    /// Corpus JSONL (`{"doc_key", "text"}`).
    #[arg(long)]
    input: PathBuf,
    /// Gazetteer TSV (surface, entity_id, p_wiki, p_yago[, name]).
    #[arg(long)]
    gazetteer: PathBuf,
    #[arg(long)]
    emb: Option<PathBuf>,
    /// KB store whose names become the annotated entity names.
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Link store used for expansion (required unless --mode none).
    #[arg(long)]
    links: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none")]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
    /// Porter stemming.
    #[arg(long)]
    stem: bool,
    /// Drop the Lucene English stopwords.
    #[arg(long)]
    stopwords: bool,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    store: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    /// Queries TSV (qid<TAB>text).
    #[arg(long)]
    queries: PathBuf,
    /// Annotation JSONL for the queries, keyed by qid.
    #[arg(long, conflicts_with = "gazetteer")]
    query_links: Option<PathBuf>,
    /// Link queries on the fly with this gazetteer.
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    /// Only run queries that have at least one entity link.
    #[arg(long)]
    linked_only: bool,
    #[arg(long, default_value_t = 1000)]
    k: usize,
    #[arg(long, default_value_t = 0.82)]
    k1: f64,
    #[arg(long, default_value_t = 0.68)]
    b: f64,
    #[arg(long, default_value = "bm25")]
    tag: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long, num_args = 2.., required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, default_value_t = 60.0)]
    k: f64,
    /// Truncate each fused list to this depth.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value = "rrf")]
    tag: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// mrr@10, recall@1000, …
    #[arg(long, default_value = "mrr@10")]
    metric: String,
    /// File listing the qids to evaluate (first column).
    #[arg(long)]
    subset: Option<PathBuf>,
    /// Print `qid value` lines before the mean.
    #[arg(long)]
    per_query: bool,
}

#[derive(Debug, Args)]
pub struct ExportRdfArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    kb: PathBuf,
    /// Corpus JSONL; adds passage descriptions.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GeoCommand {
    /// Passages linking an entity in the region, as (doc_key, entity_id).
    Passages {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        kb: PathBuf,
        #[command(flatten)]
        region: RegionArg,
    },
    /// Entities in the region.
    Entities {
        #[arg(long)]
        kb: PathBuf,
        #[command(flatten)]
        region: RegionArg,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "PORT", default_value_t = 8080)]
    port: u16,
    /// Directory with links.store, kb.store and optional corpus.jsonl,
    /// gazetteer.tsv, emb.store.
    #[arg(long, env = "STORE_DIR")]
    store_dir: PathBuf,
}

fn reader(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Box::new(BufReader::new(f)))
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        None => Box::new(BufWriter::new(io::stdout())),
        Some(p) if p == Path::new("-") => Box::new(BufWriter::new(io::stdout())),
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
    })
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn open_store(path: &Path) -> Result<LinkStore> {
    LinkStore::open(path).with_context(|| format!("opening link store {}", path.display()))
}

fn open_kb(path: &Path) -> Result<KnowledgeBase> {
    KnowledgeBase::open(path).with_context(|| format!("opening KB {}", path.display()))
}

fn read_texts(path: &Path) -> Result<Vec<CorpusDoc>> {
    corpus::read_corpus(reader(path)?).collect::<Result<Vec<_>, _>>().with_context(|| format!("reading {}", path.display()))
}

fn read_run_file(path: &Path) -> Result<Run> {
    fusion::read_run(reader(path)?).with_context(|| format!("reading run {}", path.display()))
}

/// Exit status the binary should use.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Ingest(a) => {
            let policy = if a.strict { IngestPolicy::Strict } else { IngestPolicy::Skip };
            let (_, report) = store::ingest(reader(&a.input)?, a.kind.into(), &a.collection, &a.store, policy)?;
            print_json(&json!({
                "rows": report.rows,
                "documents": report.documents,
                "violations": report.violations,
                "wall_time_ms": report.wall_time.as_secs_f64() * 1e3,
            }))?;
        }
        Command::Validate(a) => return validate(a),
        Command::Stats(a) => print_json(&serde_json::to_value(open_store(&a.store)?.collection_stats())?)?,
        Command::Links(a) => {
            let store = open_store(&a.store)?;
            let key = DocKey::parse(&a.doc_key);
            if !store.contains(&key) {
                bail!("document {key} is not in {}", a.store.display());
            }
            println!("{}", format::serialize_line(&store.links_for_doc(&key)?));
        }
        Command::DocsForEntity(a) => {
            let mut out = writer(None)?;
            for key in open_store(&a.store)?.docs_for_entity(&a.entity.selector()) {
                writeln!(out, "{key}")?;
            }
            out.flush()?;
        }
        Command::Kb(c) => kb_command(c)?,
        Command::Emb(c) => emb_command(c)?,
        Command::Link(a) => link(a)?,
        Command::Index(a) => index(a)?,
        Command::Expand(a) => {
            let store = open_store(&a.store)?;
            let mut out = writer(a.output.as_deref())?;
            let report = expansion::expand_corpus(reader(&a.corpus)?, &store, a.mode.into(), &mut out)?;
            out.flush()?;
            log::info!("expanded {} of {} documents", report.expanded, report.documents);
        }
        Command::Search(a) => search(a)?,
        Command::Fuse(a) => {
            let runs = a.runs.iter().map(|p| read_run_file(p)).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Run> = runs.iter().collect();
            let mut fused = fusion::fuse_runs(&refs, RrfConfig::new(a.k)?)?;
            if let Some(d) = a.depth {
                fused.values_mut().for_each(|l| l.truncate(d));
            }
            let mut out = writer(a.output.as_deref())?;
            fusion::write_run(&mut out, &fused, &a.tag)?;
            out.flush()?;
        }
        Command::Eval(a) => evaluate(a)?,
        Command::ExportRdf(a) => {
            let store = open_store(&a.store)?;
            let kb = open_kb(&a.kb)?;
            let texts: Option<HashMap<DocKey, String>> = match &a.corpus {
                Some(p) => Some(read_texts(p)?.into_iter().map(|d| (d.doc_key, d.text)).collect()),
                None => None,
            };
            let mut out = writer(a.output.as_deref())?;
            let report = geo::export_ntriples(&store, &kb, texts.as_ref(), &mut out)?;
            out.flush()?;
            log::info!("wrote {} triples", report.total());
        }
        Command::Geo(GeoCommand::Passages { store, kb, region }) => {
            let (store, kb) = (open_store(&store)?, open_kb(&kb)?);
            let mut out = writer(None)?;
            for (key, id) in geo::passages_in_region(&store, &kb, &region.filter()?) {
                serde_json::to_writer(&mut out, &json!({"doc_key": key, "entity_id": id}))?;
                writeln!(out)?;
            }
            out.flush()?;
        }
        Command::Geo(GeoCommand::Entities { kb, region }) => {
            let kb = open_kb(&kb)?;
            let mut out = writer(None)?;
            for r in kb.query_entities(&region.filter()?) {
                serde_json::to_writer(&mut out, r)?;
                writeln!(out)?;
            }
            out.flush()?;
        }
        Command::Serve(a) => {
            let state = AppState::load(&a.store_dir)?;
            tokio::runtime::Runtime::new()?.block_on(service::serve(state, a.port))?;
        }
    }
    Ok(0)
}

fn validate(a: ValidateArgs) -> Result<i32> {
    let kind: Kind = a.kind.into();
    let texts: HashMap<DocKey, String> = match &a.text {
        Some(p) => read_texts(p)?.into_iter().map(|d| (d.doc_key, d.text)).collect(),
        None => HashMap::new(),
    };
    let mut out = writer(None)?;
    let (mut docs, mut errors, mut warnings) = (0u64, 0u64, 0u64);
    for (i, line) in reader(&a.input)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        docs += 1;
        let doc = match format::parse_line(&line, kind) {
            Ok(d) => d,
            Err(e) => {
                errors += 1;
                serde_json::to_writer(&mut out, &json!({"line": i + 1, "severity": "error", "rule": e.code(), "message": e.to_string()}))?;
                writeln!(out)?;
                continue;
            }
        };
        // A passage corpus supplies the text for the passage field only.
        let source: Option<BTreeMap<Field, String>> = if a.text.is_some() && kind == Kind::Passage {
            Some(texts.get(&doc.key).map(|t| BTreeMap::from([(Field::Passage, t.clone())])).unwrap_or_default())
        } else {
            None
        };
        for v in format::validate(&doc, source.as_ref()) {
            match v.rule.severity() {
                Severity::Error => errors += 1,
                Severity::Warning => warnings += 1,
            }
            let mut row = serde_json::to_value(&v)?;
            row["line"] = json!(i + 1);
            serde_json::to_writer(&mut out, &row)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    eprintln!("{docs} documents: {errors} errors, {warnings} warnings");
    Ok(if errors > 0 { 1 } else { 0 })
}

fn kb_command(c: KbCommand) -> Result<()> {
    match c {
        KbCommand::Ingest { input, out } => {
            let mut kb = KnowledgeBase::new();
            let report = kb.ingest(kb::read_tsv(reader(&input)?));
            for r in &report.rejected {
                log::warn!("row {}: {}", r.row, r.reason);
            }
            kb.save(&out)?;
            print_json(&json!({"accepted": report.accepted, "rejected": report.rejected.len()}))?;
        }
        KbCommand::Lookup { kb, entity } => {
            print_json(&serde_json::to_value(open_kb(&kb)?.lookup(&entity.selector())?)?)?;
        }
        KbCommand::Query { kb, region } => {
            let kb = open_kb(&kb)?;
            let mut out = writer(None)?;
            for r in kb.query_entities(&region.filter()?) {
                serde_json::to_writer(&mut out, r)?;
                writeln!(out)?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn vector_ref(s: &str) -> (VectorKind, &str) {
    match s.split_once(':') {
        Some(("entity", k)) => (VectorKind::Entity, k),
        Some(("word", k)) => (VectorKind::Word, k),
        _ => (VectorKind::Word, s),
    }
}

fn emb_command(c: EmbCommand) -> Result<()> {
    match c {
        EmbCommand::Ingest { input, dim, out } => {
            let mut store = EmbeddingStore::new(dim)?;
            let report = store.ingest(embeddings::read_text(reader(&input)?, dim));
            for (line, reason) in &report.rejected {
                log::warn!("line {line}: {reason}");
            }
            store.save(&out)?;
            print_json(&json!({
                "accepted": report.accepted,
                "rejected": report.rejected.len(),
                "overwritten": report.overwritten.len(),
            }))?;
        }
        EmbCommand::Sim { emb, a, b } => {
            let store = EmbeddingStore::open(&emb)?;
            let (ka, a) = vector_ref(&a);
            let (kb, b) = vector_ref(&b);
            let va = store.get_embedding(ka, a)?;
            let vb = store.get_embedding(kb, b)?;
            println!("{}", embeddings::similarity(&va.values, &vb.values)?);
        }
    }
    Ok(())
}

fn load_gazetteer(path: &Path, kb: Option<&KnowledgeBase>) -> Result<Gazetteer> {
    let (mut gaz, rejected) = Gazetteer::read_tsv(reader(path)?)?;
    for (line, reason) in &rejected {
        log::warn!("{} line {line}: {reason}", path.display());
    }
    if let Some(kb) = kb {
        gaz.adopt_names(kb);
    }
    Ok(gaz)
}

fn link(a: LinkArgs) -> Result<()> {
    let kb = a.kb.as_deref().map(open_kb).transpose()?;
    let gaz = load_gazetteer(&a.gazetteer, kb.as_ref())?;
    let emb = a.emb.as_deref().map(EmbeddingStore::open).transpose()?;
    let mut out = writer(a.output.as_deref())?;
    for doc in corpus::read_corpus(reader(&a.input)?) {
        let doc = doc?;
        let linked = linker::link_text(doc.doc_key, &doc.text, &gaz, emb.as_ref());
        writeln!(out, "{}", format::serialize_line(&linked))?;
    }
    out.flush()?;
    Ok(())
}

fn index(a: IndexArgs) -> Result<()> {
    let mode: ExpansionMode = a.mode.into();
    let store = match (&a.links, mode) {
        (Some(p), _) => Some(open_store(p)?),
        (None, ExpansionMode::None) => None,
        (None, _) => bail!("--mode {} needs --links", mode.as_str()),
    };
    let mut docs = Vec::new();
    for doc in read_texts(&a.corpus)? {
        let text = match &store {
            Some(s) => expansion::expand_document(&doc.text, &s.links_for_doc(&doc.doc_key)?, mode),
            None => doc.text,
        };
        docs.push((doc.doc_key, text));
    }
    let index = InvertedIndex::build(docs, Analyzer { stem: a.stem, stopwords: a.stopwords })?.with_expansion(mode);
    index.save(&a.out)?;
    print_json(&json!({"documents": index.doc_count(), "avgdl": index.avgdl(), "mode": mode}))?;
    Ok(())
}

fn search(a: SearchArgs) -> Result<()> {
    let index = InvertedIndex::open(&a.index).with_context(|| format!("opening index {}", a.index.display()))?;
    let params = Bm25Params::new(a.k1, a.b)?;
    let mode = index.expansion();
    let queries = corpus::read_queries(reader(&a.queries)?)?;

    let mut links: HashMap<String, AnnotatedDocument> = HashMap::new();
    if let Some(p) = &a.query_links {
        for (i, line) in reader(p)?.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let doc = format::parse_line(&line, Kind::Passage).with_context(|| format!("{} line {}", p.display(), i + 1))?;
            links.insert(doc.key.to_string(), doc);
        }
    } else if let Some(p) = &a.gazetteer {
        let gaz = load_gazetteer(p, None)?;
        for q in &queries {
            links.insert(q.qid.clone(), linker::link_text(DocKey::parse(&q.qid), &q.text, &gaz, None));
        }
    }
    if mode != ExpansionMode::None && links.is_empty() {
        log::warn!("index is {}-expanded but no query links were given; queries run unexpanded", mode.as_str());
    }
    let queries = if a.linked_only { eval::filter_queries(&queries, &eval::QueryFilter::Linked(&links)) } else { queries };

    let mut out = writer(a.output.as_deref())?;
    for q in &queries {
        let text = match links.get(&q.qid) {
            Some(doc) => expansion::expand_document(&q.text, doc, mode),
            None => q.text.clone(),
        };
        let list = RankedList::new(q.qid.clone(), index.search(&text, a.k, params))?;
        fusion::write_ranked_list(&mut out, &list, &a.tag)?;
    }
    out.flush()?;
    Ok(())
}

fn evaluate(a: EvalArgs) -> Result<()> {
    let metric: Metric = a.metric.parse()?;
    let mut run = read_run_file(&a.run)?;
    let qrels = Qrels::read(reader(&a.qrels)?)?;
    if let Some(p) = &a.subset {
        let keep: HashSet<String> = eval::read_qid_set(reader(p)?)?;
        run = eval::restrict_run(&run, &keep);
    }
    if a.per_query {
        for (qid, v) in eval::per_query(&run, &qrels, metric) {
            println!("{qid}\t{v:.6}");
        }
    }
    println!("{:.6}", eval::evaluate(&run, &qrels, metric)?);
    Ok(())
}
