//! HTTP JSON API over a shared [`Engine`].
//!
//! Writes go through a single `RwLock` writer; reads take the read side and
//! so always see a whole ingest or none of it.

use std::collections::HashMap;
use std::fs;
use std::net::SocketAddr;
use std::sync::{Arc, PoisonError, RwLock, RwLockReadGuard, RwLockWriteGuard};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Query, Request, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use finnews_core::article::hex_digest;
use finnews_core::factcheck::{credibility_score, Checkpoint};
use finnews_core::{Article, Language};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::config::ServerConfig;
use crate::corpus::{build_translator, parse_payload, pivot, GlossaryTranslator, Translator};
use crate::engine::{Engine, EngineError, IngestReport};

pub const MAX_PAGE_SIZE: usize = 100;
pub const DEFAULT_PAGE_SIZE: usize = 20;
pub const MAX_SEARCH_LIMIT: usize = 100;
pub const DEFAULT_SEARCH_LIMIT: usize = 20;
const MAX_BODY_BYTES: usize = 32 * 1024 * 1024;

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status: status.as_u16(), code: code.to_string(), message: message.into() }
    }

    fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(&self)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Translate(t) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "translator_unavailable", t.to_string()),
            EngineError::Index(finnews_core::text::IndexError::EmptyQuery) => {
                ApiError::bad_request("empty_query", "query has no searchable terms")
            }
            EngineError::Board(b) => ApiError::bad_request("bad_paging", b.to_string()),
            other => ApiError::internal(other.to_string()),
        }
    }
}

/// A checkpoint plus the digest reported as `model_version`.
pub struct LoadedModel {
    pub checkpoint: Checkpoint,
    pub version: String,
}

impl LoadedModel {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, finnews_core::codec::DecodeError> {
        Ok(LoadedModel { checkpoint: Checkpoint::from_bytes(bytes)?, version: hex_digest(bytes) })
    }
}

#[derive(Clone)]
pub struct AppState {
    engine: Arc<RwLock<Engine>>,
    translator: Arc<dyn Translator>,
    model: Option<Arc<LoadedModel>>,
}

impl AppState {
    pub fn new(engine: Engine, translator: Arc<dyn Translator>, model: Option<LoadedModel>) -> Self {
        AppState { engine: Arc::new(RwLock::new(engine)), translator, model: model.map(Arc::new) }
    }

    /// Opens the store, translator and checkpoint named by `cfg`.
    pub fn from_config(cfg: &ServerConfig) -> anyhow::Result<Self> {
        let engine = Engine::open_dir(&cfg.store, cfg.clusterer, cfg.search)?;
        let translator: Arc<dyn Translator> = match &cfg.translator {
            Some(t) => Arc::from(build_translator(t)?),
            None => Arc::new(GlossaryTranslator::default()),
        };
        let model = match &cfg.checkpoint {
            Some(path) => {
                let bytes = fs::read(path).map_err(|e| anyhow::anyhow!("reading checkpoint {}: {e}", path.display()))?;
                Some(LoadedModel::from_bytes(&bytes).map_err(|e| anyhow::anyhow!("checkpoint {}: {e}", path.display()))?)
            }
            None => None,
        };
        Ok(AppState::new(engine, translator, model))
    }

    fn read(&self) -> RwLockReadGuard<'_, Engine> {
        self.engine.read().unwrap_or_else(PoisonError::into_inner)
    }

    fn write(&self) -> RwLockWriteGuard<'_, Engine> {
        self.engine.write().unwrap_or_else(PoisonError::into_inner)
    }
}

pub fn router(state: AppState, cors_allowlist: &[String]) -> Router {
    let origins: Vec<HeaderValue> = cors_allowlist.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::list(origins))
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([axum::http::header::CONTENT_TYPE]);
    Router::new()
        .route("/api/articles", post(post_articles))
        .route("/api/events", get(get_events))
        .route("/api/search", get(get_search))
        .route("/api/factcheck", post(post_factcheck))
        .route("/api/health", get(get_health))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed")
        })
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .layer(cors)
        .layer(middleware::from_fn(request_log))
        .with_state(state)
}

/// One JSON object per request on stderr.
async fn request_log(req: Request, next: Next) -> Response {
    let start = Instant::now();
    let method = req.method().to_string();
    let path = req.uri().path().to_string();
    let resp = next.run(req).await;
    let line = json!({
        "ts": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        "method": method,
        "path": path,
        "status": resp.status().as_u16(),
        "duration_ms": start.elapsed().as_secs_f64() * 1e3,
    });
    eprintln!("{line}");
    resp
}

pub async fn serve(listener: TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub async fn run(cfg: ServerConfig) -> anyhow::Result<()> {
    let state = AppState::from_config(&cfg)?;
    let listener = TcpListener::bind(cfg.bind).await?;
    let addr: SocketAddr = listener.local_addr()?;
    eprintln!("{}", json!({"event": "listening", "addr": addr.to_string()}));
    serve(listener, router(state, &cfg.cors_allowlist)).await?;
    Ok(())
}

fn body_bytes(body: Result<Bytes, BytesRejection>) -> Result<Bytes, ApiError> {
    body.map_err(|e| ApiError::new(e.status(), "bad_body", e.body_text()))
}

async fn post_articles(State(st): State<AppState>, body: Result<Bytes, BytesRejection>) -> Result<Json<IngestReport>, ApiError> {
    let body = body_bytes(body)?;
    let batch = parse_payload(&body).map_err(|e| ApiError::bad_request("bad_payload", e.to_string()))?;
    let report = tokio::task::spawn_blocking(move || ingest(&st, &batch))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(report))
}

/// Translation runs before the write lock so slow translators never stall
/// readers. A translator failure still stores the articles before it.
fn ingest(st: &AppState, batch: &[Article]) -> Result<IngestReport, ApiError> {
    let fresh: Vec<&Article> = {
        let engine = st.read();
        batch.iter().filter(|a| !engine.store().contains(&a.id)).collect()
    };
    let mut pivoted: HashMap<&str, Article> = HashMap::new();
    let mut failure = None;
    for a in fresh {
        match pivot(a, st.translator.as_ref()) {
            Ok(p) => {
                pivoted.insert(a.id.as_str(), p);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let ready: Vec<Article> = match failure {
        // Only the prefix before the failure is stored.
        Some(_) => batch.iter().take_while(|a| pivoted.contains_key(a.id.as_str())).map(|a| pivoted[a.id.as_str()].clone()).collect(),
        None => batch.iter().map(|a| pivoted.get(a.id.as_str()).cloned().unwrap_or_else(|| a.clone())).collect(),
    };
    let report = st.write().ingest(&ready, st.translator.as_ref())?;
    match failure {
        Some(e) => Err(EngineError::from(e).into()),
        None => Ok(report),
    }
}

type Params = Query<HashMap<String, String>>;

fn param_lang(q: &HashMap<String, String>) -> Result<Language, ApiError> {
    match q.get("lang").map(String::as_str) {
        None | Some("") | Some("en") => Ok(Language::En),
        Some("zh") => Ok(Language::Zh),
        Some(other) => Err(ApiError::bad_request("bad_lang", format!("lang must be en or zh, got {other:?}"))),
    }
}

fn param_usize(q: &HashMap<String, String>, key: &str, default: usize, max: usize) -> Result<usize, ApiError> {
    let Some(raw) = q.get(key) else { return Ok(default) };
    let code = format!("bad_{key}");
    let n: usize = raw.parse().map_err(|_| ApiError::bad_request(&code, format!("{key} must be a positive integer, got {raw:?}")))?;
    if n == 0 || n > max {
        return Err(ApiError::bad_request(&code, format!("{key} must be between 1 and {max}, got {n}")));
    }
    Ok(n)
}

fn query_map(q: Result<Params, axum::extract::rejection::QueryRejection>) -> Result<HashMap<String, String>, ApiError> {
    q.map(|Query(m)| m).map_err(|e| ApiError::bad_request("bad_query", e.body_text()))
}

async fn get_events(
    State(st): State<AppState>,
    q: Result<Params, axum::extract::rejection::QueryRejection>,
) -> Result<Response, ApiError> {
    let q = query_map(q)?;
    let lang = param_lang(&q)?;
    let page = param_usize(&q, "page", 1, usize::MAX)?;
    let page_size = param_usize(&q, "page_size", DEFAULT_PAGE_SIZE, MAX_PAGE_SIZE)?;
    let rows = st.read().board(lang, page, page_size)?;
    Ok(Json(rows).into_response())
}

async fn get_search(
    State(st): State<AppState>,
    q: Result<Params, axum::extract::rejection::QueryRejection>,
) -> Result<Response, ApiError> {
    let q = query_map(q)?;
    let query = q.get("q").map(|s| s.trim()).unwrap_or("");
    if query.is_empty() {
        return Err(ApiError::bad_request("empty_query", "q must not be empty"));
    }
    let lang = param_lang(&q)?;
    let limit = param_usize(&q, "limit", DEFAULT_SEARCH_LIMIT, MAX_SEARCH_LIMIT)?;
    let resp = st.read().search(query, lang, limit)?;
    Ok(Json(resp).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactCheckResponse {
    pub score: f64,
    pub label: String,
    pub model_version: String,
}

pub const CREDIBLE_THRESHOLD: f64 = 0.5;

async fn post_factcheck(State(st): State<AppState>, body: Result<Bytes, BytesRejection>) -> Result<Json<FactCheckResponse>, ApiError> {
    let body = body_bytes(body)?;
    #[derive(Deserialize)]
    struct Req {
        text: String,
    }
    let req: Req = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request("bad_payload", format!("expected {{\"text\": string}}: {e}")))?;
    let Some(model) = st.model.as_ref() else {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "model_unavailable", "no checkpoint loaded"));
    };
    if req.text.trim().is_empty() {
        return Err(ApiError::bad_request("empty_text", "text must not be empty"));
    }
    let score = credibility_score(&model.checkpoint.params, &model.checkpoint.vocab, &req.text)
        .map_err(|e| ApiError::bad_request("empty_text", e.to_string()))?;
    let label = if score >= CREDIBLE_THRESHOLD { "credible" } else { "doubtful" };
    Ok(Json(FactCheckResponse { score, label: label.to_string(), model_version: model.version.clone() }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub articles: usize,
    pub events: usize,
    pub model_loaded: bool,
}

async fn get_health(State(st): State<AppState>) -> Json<Health> {
    let engine = st.read();
    Json(Health {
        status: "ok".to_string(),
        articles: engine.articles().len(),
        events: engine.n_events(),
        model_loaded: st.model.is_some(),
    })
}
