//! The per-article record and its content-derived identity.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArticleError {
    #[error("unknown language code {0:?}")]
    UnknownLanguage(String),
    #[error("title is empty after whitespace normalization")]
    EmptyTitle,
    #[error("source is empty")]
    EmptySource,
    #[error("invalid timestamp {0:?}")]
    BadTimestamp(String),
}

/// Recognized article languages. English is the pivot language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Language {
    En,
    Zh,
}

impl Language {
    pub const PIVOT: Language = Language::En;

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Zh => "zh",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = ArticleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Language::En),
            "zh" => Ok(Language::Zh),
            other => Err(ArticleError::UnknownLanguage(other.to_string())),
        }
    }
}

impl Serialize for Language {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Language {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// UTC instant with one-second resolution, stored as Unix seconds.
///
/// Serialized as `YYYY-MM-DDTHH:MM:SSZ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub i64);

const SECS_PER_DAY: i64 = 86_400;

impl Timestamp {
    pub fn from_unix(secs: i64) -> Self {
        Timestamp(secs)
    }

    pub fn unix(self) -> i64 {
        self.0
    }

    pub fn days_since_epoch(self) -> i64 {
        self.0.div_euclid(SECS_PER_DAY)
    }

    /// Calendar date as `YYYY-MM-DD`.
    pub fn date_string(self) -> String {
        let (y, m, d) = civil_from_days(self.days_since_epoch());
        format!("{y:04}-{m:02}-{d:02}")
    }

    pub fn from_ymd_hms(y: i64, mo: u32, d: u32, h: u32, mi: u32, s: u32) -> Self {
        let days = days_from_civil(y, mo, d);
        Timestamp(days * SECS_PER_DAY + i64::from(h) * 3600 + i64::from(mi) * 60 + i64::from(s))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let secs = self.0.rem_euclid(SECS_PER_DAY);
        write!(
            f,
            "{}T{:02}:{:02}:{:02}Z",
            self.date_string(),
            secs / 3600,
            (secs / 60) % 60,
            secs % 60
        )
    }
}

impl FromStr for Timestamp {
    type Err = ArticleError;

    /// Accepts only the canonical `YYYY-MM-DDTHH:MM:SSZ` form.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ArticleError::BadTimestamp(s.to_string());
        let b = s.as_bytes();
        if b.len() != 20 || b[4] != b'-' || b[7] != b'-' || b[10] != b'T' || b[13] != b':' || b[16] != b':' || b[19] != b'Z' {
            return Err(bad());
        }
        let num = |r: core::ops::Range<usize>| -> Result<u32, ArticleError> {
            s.get(r).and_then(|t| t.parse::<u32>().ok()).ok_or_else(bad)
        };
        let (y, mo, d, h, mi, sec) = (num(0..4)?, num(5..7)?, num(8..10)?, num(11..13)?, num(14..16)?, num(17..19)?);
        if !(1..=12).contains(&mo) || d == 0 || d > days_in_month(i64::from(y), mo) || h > 23 || mi > 59 || sec > 59 {
            return Err(bad());
        }
        Ok(Timestamp::from_ymd_hms(i64::from(y), mo, d, h, mi, sec))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn is_leap(y: i64) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

fn days_in_month(y: i64, m: u32) -> u32 {
    match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        _ if is_leap(y) => 29,
        _ => 28,
    }
}

// Howard Hinnant's days_from_civil / civil_from_days.
fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let m = i64::from(m);
    let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + i64::from(d) - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let y = yoe + era * 400 + i64::from(m <= 2);
    (y, m, d)
}

/// Collapse every whitespace run to a single space and trim the ends.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Hex SHA-256 of an arbitrary string.
pub fn hex_digest(s: &[u8]) -> String {
    let digest = Sha256::digest(s);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// The string hashed into an article id: source, normalized title and UTC
/// publication date separated by NUL.
pub fn canonical_identity(source: &str, title: &str, published_at: Timestamp) -> String {
    format!(
        "{}\u{0}{}\u{0}{}",
        source,
        collapse_whitespace(title).to_lowercase(),
        published_at.date_string()
    )
}

/// One news item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub source: String,
    pub language: Language,
    pub published_at: Timestamp,
    pub title: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivot_title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivot_body: Option<String>,
}

impl Article {
    /// Validates the record and derives its id.
    pub fn new(
        source: impl Into<String>,
        language: Language,
        published_at: Timestamp,
        title: impl Into<String>,
        body: impl Into<String>,
        url: Option<String>,
    ) -> Result<Self, ArticleError> {
        let source = source.into();
        let title = title.into();
        if source.trim().is_empty() {
            return Err(ArticleError::EmptySource);
        }
        if collapse_whitespace(&title).is_empty() {
            return Err(ArticleError::EmptyTitle);
        }
        let mut article = Article {
            id: String::new(),
            source,
            language,
            published_at,
            title,
            body: body.into(),
            url,
            pivot_title: None,
            pivot_body: None,
        };
        article.id = dedup_key(&article);
        Ok(article)
    }

    pub fn is_pivoted(&self) -> bool {
        self.language == Language::PIVOT || (self.pivot_title.is_some() && self.pivot_body.is_some())
    }

    /// Title in the pivot language, falling back to the original.
    pub fn pivot_title_or_original(&self) -> &str {
        self.pivot_title.as_deref().unwrap_or(&self.title)
    }

    /// Title and body in the pivot language, joined by a newline.
    pub fn pivot_text(&self) -> String {
        let title = self.pivot_title.as_deref().unwrap_or(&self.title);
        let body = self.pivot_body.as_deref().unwrap_or(&self.body);
        format!("{title}\n{body}")
    }

    pub fn original_text(&self) -> String {
        format!("{}\n{}", self.title, self.body)
    }
}

/// Content-derived identity; excludes body and url.
pub fn dedup_key(article: &Article) -> String {
    hex_digest(canonical_identity(&article.source, &article.title, article.published_at).as_bytes())
}
