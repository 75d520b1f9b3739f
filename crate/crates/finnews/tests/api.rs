mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use finnews::corpus::{ArticleStore, TranslateError, Translator};
use finnews::engine::{Engine, EngineConfig};
use finnews::server::{router, AppState, LoadedModel};
use finnews_core::events::{event_board, rebuild};
use finnews_core::{Article, ClustererConfig, Language, TokenizerConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    app: Router,
}

fn app_with(translator: Arc<dyn Translator>, model: Option<LoadedModel>, cors: &[&str]) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let engine = Engine::open(ArticleStore::open(dir.path()).unwrap(), EngineConfig::default()).unwrap();
    let cors: Vec<String> = cors.iter().map(|s| s.to_string()).collect();
    Fixture { app: router(AppState::new(engine, translator, model), &cors), _dir: dir }
}

fn app() -> Fixture {
    app_with(Arc::new(common::glossary()), None, &[])
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = serde_json::from_slice(&bytes).unwrap_or_else(|_| panic!("non-JSON body: {}", String::from_utf8_lossy(&bytes)));
    (status, v)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, uri: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    call(app, Request::post(uri).header(header::CONTENT_TYPE, "application/json").body(body.into()).unwrap()).await
}

fn assert_api_error(status: StatusCode, v: &Value, want: StatusCode) {
    assert_eq!(status, want, "{v}");
    let obj = v.as_object().unwrap();
    assert_eq!(obj.len(), 3, "{v}");
    assert_eq!(v["status"], want.as_u16());
    assert!(v["code"].as_str().is_some_and(|c| !c.is_empty()));
    assert!(v["message"].as_str().is_some());
}

fn three_docs() -> Value {
    json!([
        {"source": "reuters", "language": "en", "published_at": "2020-01-01T00:00:00Z", "title": "fed raises interest rates", "body": ""},
        {"source": "fox", "language": "en", "published_at": "2020-01-01T01:00:00Z", "title": "fed raises rates again", "body": ""},
        {"source": "reuters", "language": "en", "published_at": "2020-01-01T02:00:00Z", "title": "coffee chain accounting fraud", "body": ""},
    ])
}

#[tokio::test]
async fn health_counts_follow_ingestion() {
    let f = app();
    let (s, v) = get(&f.app, "/api/health").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({"status": "ok", "articles": 0, "events": 0, "model_loaded": false}));

    let (s, v) = post(&f.app, "/api/articles", "[]").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({"accepted": 0, "duplicates": 0, "event_assignments": []}));

    let (s, v) = post(&f.app, "/api/articles", three_docs().to_string()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((v["accepted"].as_u64(), v["duplicates"].as_u64()), (Some(3), Some(0)));
    let ev: Vec<u64> = v["event_assignments"].as_array().unwrap().iter().map(|a| a["event_id"].as_u64().unwrap()).collect();
    assert_eq!(ev, vec![0, 0, 1]);

    let (_, v) = get(&f.app, "/api/health").await;
    assert_eq!((v["articles"].as_u64(), v["events"].as_u64()), (Some(3), Some(2)));
}

#[tokio::test]
async fn resubmission_is_idempotent() {
    let f = app();
    let docs = three_docs();
    post(&f.app, "/api/articles", docs.to_string()).await;
    let first = docs[0].to_string();
    let (s, v) = post(&f.app, "/api/articles", first).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((v["accepted"].as_u64(), v["duplicates"].as_u64()), (Some(0), Some(1)));
    assert_eq!(v["event_assignments"][0]["event_id"], 0);
    let (_, h) = get(&f.app, "/api/health").await;
    assert_eq!(h["articles"], 3);
}

#[tokio::test]
async fn malformed_payload_names_the_line() {
    let f = app();
    let body = "{\"source\":\"a\",\"language\":\"en\",\"published_at\":\"2020-01-01T00:00:00Z\",\"title\":\"t\",\"body\":\"\"}\n{\"source\":\"a\"}\n";
    let (s, v) = post(&f.app, "/api/articles", body).await;
    assert_api_error(s, &v, StatusCode::BAD_REQUEST);
    assert!(v["message"].as_str().unwrap().contains("line 2"), "{v}");
    let (s, v) = post(&f.app, "/api/articles", "[1, 2").await;
    assert_api_error(s, &v, StatusCode::BAD_REQUEST);
    let (_, h) = get(&f.app, "/api/health").await;
    assert_eq!(h["articles"], 0);
}

#[tokio::test]
async fn events_paging_and_pass_through() {
    let f = app();
    let (s, v) = get(&f.app, "/api/events").await;
    assert_eq!((s, v), (StatusCode::OK, json!([])));
    post(&f.app, "/api/articles", three_docs().to_string()).await;

    for bad in ["page=0", "page_size=0", "page_size=101", "page=x", "lang=fr"] {
        let (s, v) = get(&f.app, &format!("/api/events?{bad}")).await;
        assert_api_error(s, &v, StatusCode::BAD_REQUEST);
    }
    let (s, v) = get(&f.app, "/api/events?page=9&page_size=100").await;
    assert_eq!((s, v), (StatusCode::OK, json!([])));

    let (_, v) = get(&f.app, "/api/events?lang=zh&page=1&page_size=1").await;
    let arts: Vec<Article> = finnews::corpus::parse_payload(three_docs().to_string().as_bytes()).unwrap();
    let state = rebuild(&arts, &TokenizerConfig::default(), &ClustererConfig::default()).unwrap();
    let lookup = |id: &str| arts.iter().find(|a| a.id == id);
    let want = event_board(&state.clusterer, lookup, Language::Zh, 1, 1).unwrap();
    assert_eq!(v, serde_json::to_value(&want).unwrap());
    assert_eq!(v.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn search_groups_and_errors() {
    let f = app();
    let (s, v) = get(&f.app, "/api/search").await;
    assert_api_error(s, &v, StatusCode::BAD_REQUEST);
    let (s, v) = get(&f.app, "/api/search?q=%20%20").await;
    assert_api_error(s, &v, StatusCode::BAD_REQUEST);
    let (s, v) = get(&f.app, "/api/search?q=fed&limit=0").await;
    assert_api_error(s, &v, StatusCode::BAD_REQUEST);

    let body = serde_json::to_string(&common::fixture_json("crosslingual.json")["articles"]).unwrap();
    post(&f.app, "/api/articles", body).await;
    let (s, v) = get(&f.app, "/api/search?q=nothingmatches").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["groups"], json!([]));

    let (s, v) = get(&f.app, "/api/search?q=accounting%20fraud&lang=en").await;
    assert_eq!(s, StatusCode::OK);
    let groups = v["groups"].as_array().unwrap();
    assert_eq!(groups.len(), 1, "{v}");
    let members = groups[0]["members"].as_array().unwrap();
    let langs: Vec<&str> = members.iter().map(|m| m["language"].as_str().unwrap()).collect();
    assert!(langs.contains(&"zh") && langs.contains(&"en"), "{v}");
    let zh = members.iter().find(|m| m["language"] == "zh").unwrap();
    assert!(zh["title"].as_str().unwrap().contains("瑞幸"));
    assert!(zh["pivot_title"].as_str().unwrap().contains("luckin"));
    assert_eq!(zh["display_title"], zh["pivot_title"]);
    let scores: Vec<f64> = members.iter().map(|m| m["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(groups[0]["best_score"].as_f64().unwrap(), scores[0]);
}

#[tokio::test]
async fn reads_have_no_side_effects() {
    let f = app();
    post(&f.app, "/api/articles", three_docs().to_string()).await;
    let uris = ["/api/events", "/api/search?q=fed%20rates", "/api/health", "/api/events?lang=zh", "/api/search?q=coffee"];
    let mut first = Vec::new();
    for u in uris {
        first.push(get(&f.app, u).await);
    }
    for u in uris.iter().rev() {
        get(&f.app, u).await;
    }
    for (u, want) in uris.iter().zip(first) {
        assert_eq!(get(&f.app, u).await, want, "{u}");
    }
}

#[tokio::test]
async fn factcheck_without_model_is_unavailable() {
    let f = app();
    let (s, v) = post(&f.app, "/api/factcheck", json!({"text": "good"}).to_string()).await;
    assert_api_error(s, &v, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test]
async fn factcheck_scores_and_labels() {
    let bytes = common::good_bad_checkpoint().to_bytes();
    let model = LoadedModel::from_bytes(&bytes).unwrap();
    let f = app_with(Arc::new(common::glossary()), Some(model), &[]);
    let (_, h) = get(&f.app, "/api/health").await;
    assert_eq!(h["model_loaded"], true);

    for bad in [json!({"text": ""}), json!({"text": "   "}), json!({"txt": "good"}), json!({"text": "!!"})] {
        let (s, v) = post(&f.app, "/api/factcheck", bad.to_string()).await;
        assert_api_error(s, &v, StatusCode::BAD_REQUEST);
    }
    let (s, v) = post(&f.app, "/api/factcheck", json!({"text": "good good news"}).to_string()).await;
    assert_eq!(s, StatusCode::OK);
    let want = 1.0 / (1.0 + (-2.0f64 / 3.0).exp());
    assert!((v["score"].as_f64().unwrap() - want).abs() < 1e-12, "{v}");
    assert_eq!(v["label"], "credible");
    assert_eq!(v["model_version"], finnews_core::article::hex_digest(&bytes));
    let (_, again) = post(&f.app, "/api/factcheck", json!({"text": "good good news"}).to_string()).await;
    assert_eq!(again, v);
    let (_, v) = post(&f.app, "/api/factcheck", json!({"text": "bad news"}).to_string()).await;
    assert_eq!(v["label"], "doubtful");
    // Exactly 0.5 counts as credible.
    let (_, v) = post(&f.app, "/api/factcheck", json!({"text": "neutral words"}).to_string()).await;
    assert_eq!((v["score"].as_f64(), v["label"].as_str()), (Some(0.5), Some("credible")));
}

#[tokio::test]
async fn unknown_routes_and_methods_are_api_errors() {
    let f = app();
    let (s, v) = get(&f.app, "/api/nope").await;
    assert_api_error(s, &v, StatusCode::NOT_FOUND);
    let (s, v) = post(&f.app, "/api/health", "").await;
    assert_api_error(s, &v, StatusCode::METHOD_NOT_ALLOWED);
}

#[tokio::test]
async fn cors_is_deny_by_default() {
    let f = app_with(Arc::new(common::glossary()), None, &["http://localhost:5173"]);
    for (origin, allowed) in [("http://localhost:5173", true), ("http://evil.example", false)] {
        let req = Request::get("/api/health").header(header::ORIGIN, origin).body(Body::empty()).unwrap();
        let resp = f.app.clone().oneshot(req).await.unwrap();
        let got = resp.headers().get(header::ACCESS_CONTROL_ALLOW_ORIGIN).map(|h| h.to_str().unwrap().to_string());
        assert_eq!(got.as_deref() == Some(origin), allowed, "{origin}");
        if !allowed {
            assert!(got.is_none());
        }
    }
    let closed = app();
    let req = Request::get("/api/health").header(header::ORIGIN, "http://localhost:5173").body(Body::empty()).unwrap();
    let resp = closed.app.clone().oneshot(req).await.unwrap();
    assert!(resp.headers().get(header::ACCESS_CONTROL_ALLOW_ORIGIN).is_none());
}

struct Down;

impl Translator for Down {
    fn translate(&self, _: &str, _: Language, _: Language) -> Result<String, TranslateError> {
        Err(TranslateError::Remote { status: Some(503), attempts: 3, message: "service unavailable".into() })
    }
}

#[tokio::test]
async fn translator_outage_is_503_and_keeps_earlier_articles() {
    let f = app_with(Arc::new(Down), None, &[]);
    let en = json!({"source": "a", "language": "en", "published_at": "2020-01-01T00:00:00Z", "title": "english first", "body": ""});
    let zh = json!({"source": "b", "language": "zh", "published_at": "2020-01-01T00:00:00Z", "title": "瑞幸咖啡", "body": ""});
    let (s, v) = post(&f.app, "/api/articles", json!([en, zh]).to_string()).await;
    assert_api_error(s, &v, StatusCode::SERVICE_UNAVAILABLE);
    let (_, h) = get(&f.app, "/api/health").await;
    assert_eq!(h["articles"], 1);
}
