mod common;

use finnews::corpus::ArticleStore;
use finnews::engine::{Engine, EngineConfig};
use finnews_core::text::cosine;
use finnews_core::Language;

fn engine() -> (tempfile::TempDir, Engine) {
    let dir = tempfile::tempdir().unwrap();
    let mut e = Engine::open(ArticleStore::open(dir.path()).unwrap(), EngineConfig::default()).unwrap();
    e.ingest(&common::json_articles("crosslingual.json"), &common::glossary()).unwrap();
    (dir, e)
}

#[test]
fn chinese_report_joins_the_english_event() {
    let fx = common::fixture_json("crosslingual.json");
    let (_dir, e) = engine();
    let arts = e.articles();
    for (a, want) in arts.iter().zip(fx["pivot_texts"].as_array().unwrap()) {
        assert_eq!(a.pivot_text(), want.as_str().unwrap());
    }
    let v = &e.state().vectors;
    assert!((cosine(&v[1], &v[0]) - fx["cosine_zh_en"].as_f64().unwrap()).abs() < 1e-9);
    assert!((cosine(&v[2], &v[0]) - fx["cosine_distractor_en"].as_f64().unwrap()).abs() < 1e-9);

    let events: Vec<u64> = arts.iter().map(|a| e.event_of(&a.id).unwrap() as u64).collect();
    let want: Vec<u64> = fx["assignments"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    assert_eq!(events, want);
    let hashtags: Vec<Vec<String>> = e.state().clusterer.clusters().iter().map(|c| c.hashtags.clone()).collect();
    assert_eq!(serde_json::to_value(&hashtags).unwrap(), fx["hashtags"]);
}

#[test]
fn either_language_query_finds_the_event() {
    let (_dir, e) = engine();
    let luckin = e.event_of(&e.articles()[0].id).unwrap();
    for q in ["luckin accounting fraud", "瑞幸咖啡"] {
        let r = e.search(q, Language::En, 10).unwrap();
        assert_eq!(r.groups[0].event_id, luckin, "{q}");
    }
    let r = e.search("luckin", Language::Zh, 10).unwrap();
    let langs: Vec<Language> = r.groups[0].members.iter().map(|m| m.article.language).collect();
    assert!(langs.contains(&Language::En) && langs.contains(&Language::Zh), "{langs:?}");
    let zh = r.groups[0].members.iter().find(|m| m.article.language == Language::Zh).unwrap();
    assert_eq!(zh.article.display_title, zh.article.title);
}

#[test]
fn board_shows_both_languages_in_one_row() {
    let (_dir, e) = engine();
    let rows = e.board(Language::En, 1, 10).unwrap();
    let luckin = rows.iter().find(|r| r.members.len() == 2).unwrap();
    assert_eq!(luckin.languages, vec![Language::En, Language::Zh]);
    assert_eq!(luckin.columns.len(), 2);
}
