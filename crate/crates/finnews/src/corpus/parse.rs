//! Line-delimited JSON article input.

use std::fmt;
use std::io::BufRead;

use chrono::{DateTime, NaiveDateTime};
use finnews_core::article::ArticleError;
use finnews_core::{Article, Language, Timestamp};
use serde_json::{Map, Value};

/// Where in the input a record came from, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Line(usize),
    Item(usize),
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Line(n) => write!(f, "line {n}"),
            Position::Item(n) => write!(f, "item {n}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("expected a JSON object")]
    NotObject,
    #[error("missing required key {0:?}")]
    MissingKey(&'static str),
    #[error("key {0:?} must be a string")]
    NotString(&'static str),
    #[error("invalid published_at {0:?}: expected an RFC 3339 timestamp")]
    BadTimestamp(String),
    #[error(transparent)]
    Article(#[from] ArticleError),
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, thiserror::Error)]
#[error("{position}: {kind}")]
pub struct ParseError {
    pub position: Position,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn at(position: Position, kind: impl Into<ParseErrorKind>) -> Self {
        ParseError { position, kind: kind.into() }
    }
}

/// One article per non-blank line, in input order.
pub fn parse_articles(reader: impl BufRead) -> Result<Vec<Article>, ParseError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let pos = Position::Line(i + 1);
        let line = line.map_err(|e| ParseError::at(pos, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| ParseError::at(pos, ParseErrorKind::Json(e.to_string())))?;
        out.push(article_from_value(&value, pos)?);
    }
    Ok(out)
}

/// Accepts either a JSON array of article objects or JSONL.
pub fn parse_payload(bytes: &[u8]) -> Result<Vec<Article>, ParseError> {
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    if first != Some(&b'[') {
        return parse_articles(bytes);
    }
    let items: Vec<Value> =
        serde_json::from_slice(bytes).map_err(|e| ParseError::at(Position::Line(e.line()), ParseErrorKind::Json(e.to_string())))?;
    items.iter().enumerate().map(|(i, v)| article_from_value(v, Position::Item(i + 1))).collect()
}

pub fn article_from_value(value: &Value, pos: Position) -> Result<Article, ParseError> {
    let obj = value.as_object().ok_or_else(|| ParseError::at(pos, ParseErrorKind::NotObject))?;
    let source = required(obj, "source", pos)?;
    let language = required(obj, "language", pos)?;
    let published_at = required(obj, "published_at", pos)?;
    let title = required(obj, "title", pos)?;
    let body = required(obj, "body", pos)?;
    let url = optional(obj, "url", pos)?;

    let language: Language = language.parse().map_err(|e: ArticleError| ParseError::at(pos, e))?;
    let published_at = parse_timestamp(published_at).ok_or_else(|| ParseError::at(pos, ParseErrorKind::BadTimestamp(published_at.into())))?;
    Article::new(source, language, published_at, title, body, url.map(String::from)).map_err(|e| ParseError::at(pos, e))
}

fn required<'a>(obj: &'a Map<String, Value>, key: &'static str, pos: Position) -> Result<&'a str, ParseError> {
    match obj.get(key) {
        None | Some(Value::Null) => Err(ParseError::at(pos, ParseErrorKind::MissingKey(key))),
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(ParseError::at(pos, ParseErrorKind::NotString(key))),
    }
}

fn optional<'a>(obj: &'a Map<String, Value>, key: &'static str, pos: Position) -> Result<Option<&'a str>, ParseError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(ParseError::at(pos, ParseErrorKind::NotString(key))),
    }
}

/// RFC 3339, normalized to UTC and truncated to seconds. A timestamp with
/// no offset is taken to be UTC already.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(Timestamp(dt.timestamp()));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Timestamp(dt.and_utc().timestamp()));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"{"source":"reuters","language":"en","published_at":"2020-01-02T10:00:00Z","title":"Fed raises rates","body":"b"}"#;

    #[test]
    fn empty_stream_is_empty() {
        assert!(parse_articles(&b""[..]).unwrap().is_empty());
        assert!(parse_payload(b"[]").unwrap().is_empty());
    }

    #[test]
    fn same_line_twice_same_id() {
        let input = format!("{LINE}\n\n{LINE}\n");
        let arts = parse_articles(input.as_bytes()).unwrap();
        assert_eq!(arts.len(), 2);
        assert_eq!(arts[0].id, arts[1].id);
        assert_eq!(arts[0].published_at.to_string(), "2020-01-02T10:00:00Z");
    }

    #[test]
    fn chinese_line_is_not_pivoted() {
        let line = r#"{"source":"sina","language":"zh","published_at":"2020-04-02T08:00:00+08:00","title":"瑞幸咖啡","body":"","url":"http://x"}"#;
        let a = &parse_articles(line.as_bytes()).unwrap()[0];
        assert_eq!(a.language, Language::Zh);
        assert!(a.pivot_title.is_none());
        assert_eq!(a.published_at.to_string(), "2020-04-02T00:00:00Z");
        assert_eq!(a.url.as_deref(), Some("http://x"));
    }

    #[test]
    fn errors_name_line_and_key() {
        let input = format!("{LINE}\nnot json\n");
        let err = parse_articles(input.as_bytes()).unwrap_err();
        assert_eq!(err.position, Position::Line(2));
        assert!(err.to_string().starts_with("line 2: malformed JSON"), "{err}");

        let missing = r#"{"source":"a","language":"en","published_at":"2020-01-02T00:00:00Z","body":""}"#;
        let err = parse_articles(missing.as_bytes()).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::MissingKey("title")), "{err}");
        assert_eq!(err.to_string(), "line 1: missing required key \"title\"");

        let lang = LINE.replace("\"en\"", "\"fr\"");
        let err = parse_articles(lang.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "line 1: unknown language code \"fr\"");

        let bad = format!("[{LINE}, 3]");
        assert_eq!(parse_payload(bad.as_bytes()).unwrap_err().to_string(), "item 2: expected a JSON object");
    }

    #[test]
    fn timestamps_without_offset_are_utc() {
        assert_eq!(parse_timestamp("2020-01-02T03:04:05"), Some(Timestamp::from_ymd_hms(2020, 1, 2, 3, 4, 5)));
        assert_eq!(parse_timestamp("2020-01-02 03:04:05.9"), Some(Timestamp::from_ymd_hms(2020, 1, 2, 3, 4, 5)));
        assert_eq!(parse_timestamp("2020-01-02T03:04:05-05:00"), Some(Timestamp::from_ymd_hms(2020, 1, 2, 8, 4, 5)));
        assert_eq!(parse_timestamp("yesterday"), None);
    }
}
