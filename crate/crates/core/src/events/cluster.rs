use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::article::{Article, Language, Timestamp};
use crate::text::{cosine, tfidf, tokenize, SparseVector, TokenizerConfig, Vocabulary};

pub type EventId = u64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClusterError {
    #[error("article {0} is already assigned")]
    AlreadyAssigned(String),
    #[error("tau must lie in (0, 1]")]
    BadTau,
    #[error("k_hashtags must be at least 1")]
    BadK,
    #[error("time window must be a positive number of days")]
    BadWindow,
    #[error("got {vectors} vectors for {articles} articles")]
    LengthMismatch { articles: usize, vectors: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClustererConfig {
    pub tau: f64,
    pub k_hashtags: usize,
    pub time_window_days: Option<u32>,
}

impl Default for ClustererConfig {
    fn default() -> Self {
        ClustererConfig { tau: 0.30, k_hashtags: 5, time_window_days: None }
    }
}

impl ClustererConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(ClusterError::BadTau);
        }
        if self.k_hashtags == 0 {
            return Err(ClusterError::BadK);
        }
        if self.time_window_days == Some(0) {
            return Err(ClusterError::BadWindow);
        }
        Ok(())
    }
}

/// Articles judged to report the same happening.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCluster {
    pub id: EventId,
    /// Normalized mean of the member vectors.
    pub centroid: SparseVector,
    /// Member article ids in assignment order.
    pub members: Vec<String>,
    pub hashtags: Vec<String>,
    pub languages: BTreeSet<Language>,
    pub first_seen: Timestamp,
    pub last_seen: Timestamp,
    /// Created for a zero-norm vector.
    pub unclusterable: bool,
    #[serde(skip)]
    sum: BTreeMap<u32, f64>,
}

impl EventCluster {
    fn eligible_for(&self, at: Timestamp, window_days: Option<u32>) -> bool {
        let Some(days) = window_days else { return true };
        let window = i64::from(days) * 86_400;
        let gap = if at < self.first_seen {
            self.first_seen.unix() - at.unix()
        } else if at > self.last_seen {
            at.unix() - self.last_seen.unix()
        } else {
            0
        };
        gap <= window
    }
}

/// Outcome of one `assign` call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub event_id: EventId,
    pub created: bool,
    pub unclusterable: bool,
}

/// Single-pass threshold clusterer.
///
/// Each article joins the most similar eligible centroid when the cosine
/// reaches `tau`, otherwise it opens a new event. Results depend on the
/// order of arrival.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Clusterer {
    clusters: Vec<EventCluster>,
    assignment: BTreeMap<String, EventId>,
}

impl Clusterer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clusters(&self) -> &[EventCluster] {
        &self.clusters
    }

    pub fn get(&self, id: EventId) -> Option<&EventCluster> {
        self.clusters.get(id as usize)
    }

    pub fn event_of(&self, article_id: &str) -> Option<EventId> {
        self.assignment.get(article_id).copied()
    }

    pub fn n_assigned(&self) -> usize {
        self.assignment.len()
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Place one article. `vec` is the TF-IDF of its pivot text and `vocab`
    /// names the term ids for hashtag extraction.
    pub fn assign(
        &mut self,
        article: &Article,
        vec: &SparseVector,
        vocab: &Vocabulary,
        cfg: &ClustererConfig,
    ) -> Result<Assignment, ClusterError> {
        cfg.validate()?;
        if self.assignment.contains_key(&article.id) {
            return Err(ClusterError::AlreadyAssigned(article.id.clone()));
        }
        let at = article.published_at;
        let unclusterable = vec.norm() == 0.0;
        let mut best: Option<(usize, f64)> = None;
        if !unclusterable {
            for (i, c) in self.clusters.iter().enumerate() {
                if !c.eligible_for(at, cfg.time_window_days) {
                    continue;
                }
                let s = cosine(vec, &c.centroid);
                if best.map_or(true, |(_, b)| s > b) {
                    best = Some((i, s));
                }
            }
        }
        let (idx, created) = match best {
            Some((i, s)) if s >= cfg.tau => (i, false),
            _ => {
                let id = self.clusters.len() as EventId;
                self.clusters.push(EventCluster {
                    id,
                    centroid: SparseVector::empty(),
                    members: Vec::new(),
                    hashtags: Vec::new(),
                    languages: BTreeSet::new(),
                    first_seen: at,
                    last_seen: at,
                    unclusterable,
                    sum: BTreeMap::new(),
                });
                (id as usize, true)
            }
        };
        let c = &mut self.clusters[idx];
        for &(term, w) in vec.entries() {
            *c.sum.entry(term).or_insert(0.0) += w;
        }
        c.centroid = SparseVector::from_pairs(c.sum.iter().map(|(&t, &w)| (t, w))).normalized();
        c.members.push(article.id.clone());
        c.languages.insert(article.language);
        c.first_seen = c.first_seen.min(at);
        c.last_seen = c.last_seen.max(at);
        c.hashtags = extract_hashtags(&c.centroid, vocab, cfg.k_hashtags);
        self.assignment.insert(article.id.clone(), c.id);
        Ok(Assignment { event_id: c.id, created, unclusterable })
    }

    /// Replay `assign` over pre-computed vectors.
    pub fn replay(
        articles: &[Article],
        vectors: &[SparseVector],
        vocab: &Vocabulary,
        cfg: &ClustererConfig,
    ) -> Result<(Self, Vec<Assignment>), ClusterError> {
        if articles.len() != vectors.len() {
            return Err(ClusterError::LengthMismatch { articles: articles.len(), vectors: vectors.len() });
        }
        let mut state = Clusterer::new();
        let mut out = Vec::with_capacity(articles.len());
        for (a, v) in articles.iter().zip(vectors) {
            out.push(state.assign(a, v, vocab, cfg)?);
        }
        Ok((state, out))
    }
}

/// The `k` highest-weight centroid terms; equal weights order by term.
pub fn extract_hashtags(centroid: &SparseVector, vocab: &Vocabulary, k: usize) -> Vec<String> {
    let mut terms: Vec<(&str, f64)> = centroid
        .entries()
        .iter()
        .filter_map(|&(id, w)| vocab.term(id).map(|t| (t, w)))
        .collect();
    terms.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    terms.into_iter().take(k).map(|(t, _)| String::from(t)).collect()
}

/// Everything `rebuild` derives from an ordered article list.
#[derive(Debug, Clone)]
pub struct Rebuilt {
    pub clusterer: Clusterer,
    pub vocab: Vocabulary,
    pub vectors: Vec<SparseVector>,
    pub assignments: Vec<Assignment>,
}

/// Vectorize the pivot text of every article against a vocabulary of the
/// whole list, then replay `assign` in list order.
pub fn rebuild(articles: &[Article], tokenizer: &TokenizerConfig, cfg: &ClustererConfig) -> Result<Rebuilt, ClusterError> {
    cfg.validate()?;
    let tokens: Vec<Vec<String>> = articles.iter().map(|a| tokenize(&a.pivot_text(), tokenizer)).collect();
    let vocab = Vocabulary::from_documents(tokens.iter());
    let vectors: Vec<SparseVector> = tokens.iter().map(|t| tfidf(t, &vocab)).collect();
    let (clusterer, assignments) = Clusterer::replay(articles, &vectors, &vocab, cfg)?;
    Ok(Rebuilt { clusterer, vocab, vectors, assignments })
}
