#![allow(dead_code)]

use std::path::PathBuf;

use finnews_core::{Article, Language, Timestamp};
use serde_json::Value;

pub fn fixture(name: &str) -> Value {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect();
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

/// `YYYY-MM-DDTHH:MM:SSZ` only.
pub fn utc(s: &str) -> Timestamp {
    let n = |r: std::ops::Range<usize>| s[r].parse::<u32>().unwrap();
    Timestamp::from_ymd_hms(i64::from(n(0..4)), n(5..7), n(8..10), n(11..13), n(14..16), n(17..19))
}

pub fn article(v: &Value) -> Article {
    let lang: Language = v["language"].as_str().unwrap().parse().unwrap();
    Article::new(
        v["source"].as_str().unwrap(),
        lang,
        utc(v["published_at"].as_str().unwrap()),
        v["title"].as_str().unwrap(),
        v["body"].as_str().unwrap(),
        v.get("url").and_then(Value::as_str).map(String::from),
    )
    .unwrap()
}

pub fn f64s(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

pub fn strings(v: &Value) -> Vec<String> {
    v.as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string()).collect()
}
