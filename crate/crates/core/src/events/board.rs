use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Clusterer, EventId};
use crate::article::{Article, Language, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BoardError {
    #[error("page must be at least 1")]
    BadPage,
    #[error("page size must be at least 1")]
    BadPageSize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMember {
    pub article_id: String,
    pub source: String,
    pub language: Language,
    pub published_at: Timestamp,
    pub title: String,
    pub pivot_title: Option<String>,
    /// The title surfaced for the requested display language.
    pub display_title: String,
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardColumn {
    pub source: String,
    pub members: Vec<EventMember>,
}

/// One event with its reports grouped by source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardRow {
    pub event_id: EventId,
    pub hashtags: Vec<String>,
    pub languages: Vec<Language>,
    pub first_seen: Timestamp,
    pub last_seen: Timestamp,
    /// All members, column by column.
    pub members: Vec<EventMember>,
    pub columns: Vec<BoardColumn>,
}

fn display_title(a: &Article, lang: Language) -> String {
    match lang {
        Language::En => String::from(a.pivot_title_or_original()),
        // No reverse translation exists, so non-Chinese articles keep their own title.
        Language::Zh => a.title.clone(),
    }
}

impl EventMember {
    pub fn from_article(a: &Article, lang: Language) -> Self {
        EventMember {
            article_id: a.id.clone(),
            source: a.source.clone(),
            language: a.language,
            published_at: a.published_at,
            title: a.title.clone(),
            pivot_title: a.pivot_title.clone(),
            display_title: display_title(a, lang),
            url: a.url.clone(),
        }
    }
}

/// One page of events, most recently active first (ties by event id).
///
/// `lang` picks the title shown for each member; it never filters events.
/// Pages past the end are empty.
pub fn event_board<'a, F>(
    state: &Clusterer,
    lookup: F,
    lang: Language,
    page: usize,
    page_size: usize,
) -> Result<Vec<BoardRow>, BoardError>
where
    F: Fn(&str) -> Option<&'a Article>,
{
    if page == 0 {
        return Err(BoardError::BadPage);
    }
    if page_size == 0 {
        return Err(BoardError::BadPageSize);
    }
    let mut order: Vec<_> = state.clusters().iter().collect();
    order.sort_by(|a, b| b.last_seen.cmp(&a.last_seen).then(a.id.cmp(&b.id)));
    let skip = (page - 1).saturating_mul(page_size);
    let rows = order
        .into_iter()
        .skip(skip)
        .take(page_size)
        .map(|c| {
            let mut groups: BTreeMap<&str, Vec<&Article>> = BTreeMap::new();
            for id in &c.members {
                if let Some(a) = lookup(id) {
                    groups.entry(a.source.as_str()).or_default().push(a);
                }
            }
            let columns: Vec<BoardColumn> = groups
                .into_iter()
                .map(|(source, mut arts)| {
                    arts.sort_by_key(|a| a.published_at);
                    BoardColumn { source: String::from(source), members: arts.into_iter().map(|a| EventMember::from_article(a, lang)).collect() }
                })
                .collect();
            BoardRow {
                event_id: c.id,
                hashtags: c.hashtags.clone(),
                languages: c.languages.iter().copied().collect(),
                first_seen: c.first_seen,
                last_seen: c.last_seen,
                members: columns.iter().flat_map(|col| col.members.iter().cloned()).collect(),
                columns,
            }
        })
        .collect();
    Ok(rows)
}
