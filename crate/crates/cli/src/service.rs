//! Read-only JSON API over prebuilt stores.
//!
//! A store directory holds:
//!
//! | file            | required | used by                          |
//! |-----------------|----------|----------------------------------|
//! | `links.store`   | yes      | passages, geo, search hit links  |
//! | `kb.store`      | yes      | entities, geo                    |
//! | `corpus.jsonl`  | no       | `/search`, passage text          |
//! | `gazetteer.tsv` | no       | linking `/search` queries        |
//! | `emb.store`     | no       | context scores for query linking |

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use entlinks_core::corpus;
use entlinks_core::embeddings::EmbeddingStore;
use entlinks_core::expansion::{self, ExpansionMode};
use entlinks_core::fusion::{rrf_fuse, RankedList, RrfConfig};
use entlinks_core::geo;
use entlinks_core::kb::{BoundingBox, KnowledgeBase, RegionFilter};
use entlinks_core::linker::{self, Gazetteer};
use entlinks_core::retrieval::{Analyzer, Bm25Params, InvertedIndex};
use entlinks_core::{DocKey, EntitySelector, LinkStore};
use serde_json::{json, Value};

pub const LINKS_FILE: &str = "links.store";
pub const KB_FILE: &str = "kb.store";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const GAZETTEER_FILE: &str = "gazetteer.tsv";
pub const EMBEDDINGS_FILE: &str = "emb.store";

const DEFAULT_K: usize = 10;
const MAX_K: usize = 1000;

pub struct AppState {
    pub links: LinkStore,
    pub kb: KnowledgeBase,
    pub texts: HashMap<DocKey, String>,
    pub indexes: HashMap<ExpansionMode, InvertedIndex>,
    pub gazetteer: Option<Gazetteer>,
    pub embeddings: Option<EmbeddingStore>,
}

impl AppState {
    pub fn new(links: LinkStore, kb: KnowledgeBase) -> Self {
        AppState { links, kb, texts: HashMap::new(), indexes: HashMap::new(), gazetteer: None, embeddings: None }
    }

    /// Adds passage text and builds one index per expansion mode.
    pub fn with_corpus(mut self, docs: impl IntoIterator<Item = (DocKey, String)>) -> anyhow::Result<Self> {
        self.texts = docs.into_iter().collect();
        let mut keys: Vec<&DocKey> = self.texts.keys().collect();
        keys.sort();
        for mode in ExpansionMode::ALL {
            let mut expanded = Vec::with_capacity(keys.len());
            for key in &keys {
                let doc = self.links.links_for_doc(key)?;
                expanded.push(((*key).clone(), expansion::expand_document(&self.texts[*key], &doc, mode)));
            }
            let index = InvertedIndex::build(expanded, Analyzer::default())?.with_expansion(mode);
            self.indexes.insert(mode, index);
        }
        Ok(self)
    }

    pub fn with_gazetteer(mut self, gazetteer: Gazetteer) -> Self {
        self.gazetteer = Some(gazetteer);
        self
    }

    pub fn with_embeddings(mut self, embeddings: EmbeddingStore) -> Self {
        self.embeddings = Some(embeddings);
        self
    }

    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        for required in [LINKS_FILE, KB_FILE] {
            if !dir.join(required).is_file() {
                bail!("store directory {} has no {required}; build it with `entlinks ingest` / `entlinks kb ingest`", dir.display());
            }
        }
        let links = LinkStore::open(&dir.join(LINKS_FILE)).with_context(|| format!("opening {LINKS_FILE}"))?;
        let kb = KnowledgeBase::open(&dir.join(KB_FILE)).with_context(|| format!("opening {KB_FILE}"))?;
        let mut state = AppState::new(links, kb);

        let emb_path = dir.join(EMBEDDINGS_FILE);
        if emb_path.is_file() {
            state = state.with_embeddings(EmbeddingStore::open(&emb_path).with_context(|| format!("opening {EMBEDDINGS_FILE}"))?);
        }
        let gaz_path = dir.join(GAZETTEER_FILE);
        if gaz_path.is_file() {
            let (mut gaz, rejected) = Gazetteer::read_tsv(BufReader::new(File::open(&gaz_path)?))?;
            for (line, reason) in &rejected {
                log::warn!("{GAZETTEER_FILE} line {line}: {reason}");
            }
            gaz.adopt_names(&state.kb);
            state = state.with_gazetteer(gaz);
        }
        let corpus_path = dir.join(CORPUS_FILE);
        if corpus_path.is_file() {
            let docs = corpus::read_corpus(BufReader::new(File::open(&corpus_path)?))
                .map(|d| d.map(|d| (d.doc_key, d.text)))
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| format!("reading {CORPUS_FILE}"))?;
            state = state.with_corpus(docs)?;
        } else {
            log::warn!("no {CORPUS_FILE} in {}; /search is disabled", dir.display());
        }
        log::info!(
            "loaded {} documents, {} entities, {} indexed passages",
            state.links.doc_count(),
            state.kb.len(),
            state.texts.len()
        );
        Ok(state)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, code: "bad_request", message: message.into() }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::NOT_FOUND, code: "not_found", message: message.into() }
    }
}

impl From<entlinks_core::Error> for ApiError {
    fn from(e: entlinks_core::Error) -> Self {
        use entlinks_core::Error as E;
        let status = match &e {
            E::NotFound(_) => StatusCode::NOT_FOUND,
            E::Usage(_) | E::Parse { .. } | E::Schema(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError { status, code: e.code(), message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": {"code": self.code, "message": self.message}}))).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;
type Params = Query<HashMap<String, String>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/passages/{key}/links", get(passage_links))
        .route("/entities/{id}", get(entity_by_id))
        .route("/entities", get(entity_by_name))
        .route("/search", get(search))
        .route("/geo/entities", get(geo_entities))
        .route("/geo/passages", get(geo_passages))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

async fn healthz(State(s): State<Arc<AppState>>) -> ApiResult {
    Ok(Json(json!({
        "status": "ok",
        "documents": s.links.doc_count(),
        "entities": s.kb.len(),
        "search": !s.indexes.is_empty(),
    })))
}

async fn passage_links(State(s): State<Arc<AppState>>, UrlPath(key): UrlPath<String>) -> ApiResult {
    let key = DocKey::parse(&key);
    if !s.links.contains(&key) {
        return Err(ApiError::not_found(format!("no document {key} in the link store")));
    }
    Ok(Json(s.links.links_for_doc(&key)?.to_json()))
}

async fn entity_by_id(State(s): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let id: u64 = id.parse().map_err(|_| ApiError::bad_request(format!("entity id {id:?} is not a non-negative integer")))?;
    Ok(Json(serde_json::to_value(s.kb.lookup(&EntitySelector::Id(id))?).expect("record serializes")))
}

async fn entity_by_name(State(s): State<Arc<AppState>>, Query(p): Params) -> ApiResult {
    let name = p.get("name").ok_or_else(|| ApiError::bad_request("missing query parameter `name`"))?;
    Ok(Json(serde_json::to_value(s.kb.lookup(&EntitySelector::Name(name.clone()))?).expect("record serializes")))
}

fn region_filter(p: &HashMap<String, String>) -> Result<RegionFilter, ApiError> {
    match (p.get("bbox"), p.get("country")) {
        (Some(b), None) => Ok(RegionFilter::BBox(b.parse::<BoundingBox>()?)),
        (None, Some(c)) if !c.is_empty() => Ok(RegionFilter::Country(c.clone())),
        (None, Some(_)) => Err(ApiError::bad_request("`country` must not be empty")),
        (Some(_), Some(_)) => Err(ApiError::bad_request("give either `bbox` or `country`, not both")),
        (None, None) => Err(ApiError::bad_request("missing `bbox` (min_lat,min_lon,max_lat,max_lon) or `country`")),
    }
}

async fn geo_entities(State(s): State<Arc<AppState>>, Query(p): Params) -> ApiResult {
    let filter = region_filter(&p)?;
    Ok(Json(serde_json::to_value(s.kb.query_entities(&filter)).expect("records serialize")))
}

async fn geo_passages(State(s): State<Arc<AppState>>, Query(p): Params) -> ApiResult {
    let filter = region_filter(&p)?;
    let rows: Vec<Value> = geo::passages_in_region(&s.links, &s.kb, &filter)
        .into_iter()
        .map(|(key, id)| {
            let mut row = json!({"doc_key": key, "entity_id": id});
            if let Some(text) = s.texts.get(&key) {
                row["text"] = json!(text);
            }
            row
        })
        .collect();
    Ok(Json(Value::Array(rows)))
}

fn flag(p: &HashMap<String, String>, name: &str) -> Result<bool, ApiError> {
    match p.get(name).map(String::as_str) {
        None | Some("0") | Some("false") => Ok(false),
        Some("1") | Some("true") => Ok(true),
        Some(v) => Err(ApiError::bad_request(format!("`{name}` must be 0 or 1, got {v:?}"))),
    }
}

async fn search(State(s): State<Arc<AppState>>, Query(p): Params) -> ApiResult {
    if s.indexes.is_empty() {
        return Err(ApiError {
            status: StatusCode::SERVICE_UNAVAILABLE,
            code: "search_unavailable",
            message: format!("the store directory has no {CORPUS_FILE}"),
        });
    }
    let q = p.get("q").map(|q| q.trim()).filter(|q| !q.is_empty()).ok_or_else(|| ApiError::bad_request("missing or empty `q`"))?;
    let k = match p.get("k") {
        None => DEFAULT_K,
        Some(k) => k
            .parse::<usize>()
            .ok()
            .filter(|k| (1..=MAX_K).contains(k))
            .ok_or_else(|| ApiError::bad_request(format!("`k` must be an integer in 1..={MAX_K}")))?,
    };
    let mode: ExpansionMode = p.get("mode").map_or(Ok(ExpansionMode::Text), |m| m.parse())?;
    let fuse = flag(&p, "fuse")?;
    if fuse && mode == ExpansionMode::None {
        return Err(ApiError::bad_request("fuse=1 combines mode=none with an expanded mode; pick mode=text or mode=hash"));
    }

    let query_links = match &s.gazetteer {
        Some(g) => linker::link_annotations(q, g, s.embeddings.as_ref()),
        None => Vec::new(),
    };
    let expanded = expansion::expand(q, &query_links, mode);
    let params = Bm25Params::default();
    let hits = if fuse {
        let depth = MAX_K.max(k);
        let plain = RankedList::new("q", s.indexes[&ExpansionMode::None].search(q, depth, params))?;
        let rich = RankedList::new("q", s.indexes[&mode].search(&expanded, depth, params))?;
        let mut fused = rrf_fuse(&[&plain, &rich], RrfConfig::default())?;
        fused.truncate(k);
        fused.entries().to_vec()
    } else {
        s.indexes[&mode].search(&expanded, k, params)
    };

    let mut results = Vec::with_capacity(hits.len());
    for (i, (key, score)) in hits.into_iter().enumerate() {
        let links = s.links.links_for_doc(&key)?;
        let entities: Vec<Value> =
            links.annotations().map(|(_, a)| json!({"entity_id": a.entity_id, "entity": a.entity})).collect();
        results.push(json!({
            "rank": i + 1,
            "doc_key": key,
            "score": score,
            "text": s.texts.get(&key),
            "entities": entities,
        }));
    }
    Ok(Json(json!({
        "query": q,
        "expanded_query": expanded,
        "mode": mode,
        "fused": fuse,
        "query_entities": query_links.iter().map(|a| json!({"entity_id": a.entity_id, "entity": a.entity})).collect::<Vec<_>>(),
        "hits": results,
    })))
}

pub async fn serve(state: AppState, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await.with_context(|| format!("binding port {port}"))?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
