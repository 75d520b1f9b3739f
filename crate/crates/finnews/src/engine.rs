//! Store plus derived state: clusters, vocabulary and the search index.
//!
//! Vocabulary statistics are corpus-wide, so every ingest rebuilds the
//! derived state by replaying the whole store in insertion order. The
//! resulting assignments depend only on the stored order, which keeps CLI
//! and HTTP ingestion equivalent.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use finnews_core::events::{event_board, rebuild, BoardError, BoardRow, ClusterError, EventId, EventMember, Rebuilt};
use finnews_core::text::{search, tokenize, IndexError, InvertedIndex};
use finnews_core::{Article, ClustererConfig, Language, SearchWeights, TokenizerConfig};
use serde::{Deserialize, Serialize};

use crate::corpus::{pivot, ArticleStore, StoreError, TranslateError, Translator};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Board(#[from] BoardError),
    #[error("clusterer settings {path}: {message}")]
    Settings { path: PathBuf, message: String },
}

/// Clusterer settings saved in the store root by `cluster`.
pub const CLUSTERER_FILE: &str = "clusterer.json";

pub fn saved_clusterer(root: &Path) -> Result<Option<ClustererConfig>, EngineError> {
    let path = root.join(CLUSTERER_FILE);
    let err = |message: String| EngineError::Settings { path: path.clone(), message };
    match fs::read_to_string(&path) {
        Ok(text) => {
            let cfg: ClustererConfig = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
            cfg.validate().map_err(|e| err(e.to_string()))?;
            Ok(Some(cfg))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(err(e.to_string())),
    }
}

pub fn save_clusterer(root: &Path, cfg: &ClustererConfig) -> Result<(), EngineError> {
    let path = root.join(CLUSTERER_FILE);
    let text = serde_json::to_string_pretty(cfg).expect("clusterer config serializes");
    fs::write(&path, text + "\n").map_err(|e| EngineError::Settings { path, message: e.to_string() })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EngineConfig {
    pub tokenizer: TokenizerConfig,
    pub clusterer: ClustererConfig,
    pub weights: SearchWeights,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventAssignment {
    pub article_id: String,
    pub event_id: EventId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub duplicates: usize,
    /// One entry per submitted article, duplicates included, in input order.
    pub event_assignments: Vec<EventAssignment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchMember {
    #[serde(flatten)]
    pub article: EventMember,
    pub score: f64,
    pub matched_hashtags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGroup {
    pub event_id: EventId,
    pub hashtags: Vec<String>,
    pub best_score: f64,
    pub members: Vec<SearchMember>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: String,
    pub groups: Vec<SearchGroup>,
}

/// A ranked hit with its event, before grouping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHit {
    pub rank: usize,
    pub article_id: String,
    pub event_id: EventId,
    pub score: f64,
    pub matched_hashtags: Vec<String>,
    pub title: String,
    pub pivot_title: Option<String>,
}

pub struct Engine {
    store: ArticleStore,
    cfg: EngineConfig,
    articles: Vec<Article>,
    positions: HashMap<String, usize>,
    state: Rebuilt,
    index: InvertedIndex,
}

impl Engine {
    pub fn open(store: ArticleStore, cfg: EngineConfig) -> Result<Self, EngineError> {
        cfg.clusterer.validate()?;
        cfg.weights.validate()?;
        let articles = store.scan()?;
        let positions = articles.iter().enumerate().map(|(i, a)| (a.id.clone(), i)).collect();
        let state = rebuild(&[], &cfg.tokenizer, &cfg.clusterer)?;
        let mut engine = Engine { store, cfg, articles, positions, state, index: InvertedIndex::new() };
        engine.refresh()?;
        Ok(engine)
    }

    /// Opens the store at `root`; clusterer settings come from `clusterer`,
    /// else the store's saved settings, else the defaults.
    pub fn open_dir(root: &Path, clusterer: Option<ClustererConfig>, weights: SearchWeights) -> Result<Self, EngineError> {
        let store = ArticleStore::open(root)?;
        let clusterer = match clusterer {
            Some(c) => c,
            None => saved_clusterer(root)?.unwrap_or_default(),
        };
        Engine::open(store, EngineConfig { tokenizer: TokenizerConfig::default(), clusterer, weights })
    }

    pub fn store(&self) -> &ArticleStore {
        &self.store
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn article(&self, id: &str) -> Option<&Article> {
        self.positions.get(id).map(|&i| &self.articles[i])
    }

    pub fn state(&self) -> &Rebuilt {
        &self.state
    }

    pub fn n_events(&self) -> usize {
        self.state.clusterer.len()
    }

    pub fn event_of(&self, article_id: &str) -> Option<EventId> {
        self.state.clusterer.event_of(article_id)
    }

    /// Pivot, store and cluster each new article; already stored ids count
    /// as duplicates. Derived state is rebuilt even if a later article fails.
    pub fn ingest(&mut self, batch: &[Article], translator: &dyn Translator) -> Result<IngestReport, EngineError> {
        let mut report = IngestReport::default();
        let mut failure = None;
        for a in batch {
            if self.store.contains(&a.id) {
                report.duplicates += 1;
                continue;
            }
            let pivoted = match pivot(a, translator) {
                Ok(p) => p,
                Err(e) => {
                    failure = Some(EngineError::from(e));
                    break;
                }
            };
            if let Err(e) = self.store.append(&pivoted) {
                failure = Some(e.into());
                break;
            }
            self.positions.insert(pivoted.id.clone(), self.articles.len());
            self.articles.push(pivoted);
            report.accepted += 1;
        }
        if report.accepted > 0 {
            self.refresh()?;
        }
        if let Some(e) = failure {
            return Err(e);
        }
        report.event_assignments = batch
            .iter()
            .filter_map(|a| self.event_of(&a.id).map(|event_id| EventAssignment { article_id: a.id.clone(), event_id }))
            .collect();
        Ok(report)
    }

    /// Replaces the clusterer config and rebuilds.
    pub fn recluster(&mut self, cfg: ClustererConfig) -> Result<(), EngineError> {
        cfg.validate()?;
        self.cfg.clusterer = cfg;
        self.refresh()
    }

    pub fn set_weights(&mut self, weights: SearchWeights) -> Result<(), EngineError> {
        weights.validate()?;
        self.cfg.weights = weights;
        Ok(())
    }

    fn refresh(&mut self) -> Result<(), EngineError> {
        self.state = rebuild(&self.articles, &self.cfg.tokenizer, &self.cfg.clusterer)?;
        let mut index = InvertedIndex::new();
        for (i, a) in self.articles.iter().enumerate() {
            index.add(doc_id(i), &self.index_tokens(a), self.hashtags_of(&a.id))?;
        }
        self.index = index;
        Ok(())
    }

    /// Pivot tokens, plus the original-language tokens for non-English text
    /// so untranslated queries still match.
    fn index_tokens(&self, a: &Article) -> Vec<String> {
        let mut tokens = tokenize(&a.pivot_text(), &self.cfg.tokenizer);
        if a.language != Language::PIVOT {
            tokens.extend(tokenize(&a.original_text(), &self.cfg.tokenizer));
        }
        tokens
    }

    fn hashtags_of(&self, article_id: &str) -> Vec<String> {
        self.event_of(article_id)
            .and_then(|e| self.state.clusterer.get(e))
            .map(|c| c.hashtags.clone())
            .unwrap_or_default()
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    /// Ranked article hits, best first.
    pub fn search_hits(&self, query: &str, limit: usize) -> Result<Vec<RankedHit>, EngineError> {
        let hits = search(&self.index, query, &self.cfg.tokenizer, self.cfg.weights, limit)?;
        Ok(hits
            .into_iter()
            .enumerate()
            .map(|(rank, h)| {
                let a = &self.articles[h.doc as usize];
                RankedHit {
                    rank: rank + 1,
                    article_id: a.id.clone(),
                    event_id: self.event_of(&a.id).expect("every stored article is clustered"),
                    score: h.score,
                    matched_hashtags: h.matched_hashtags,
                    title: a.title.clone(),
                    pivot_title: a.pivot_title.clone(),
                }
            })
            .collect())
    }

    /// Hits grouped by event; groups ordered by their best member score,
    /// then event id.
    pub fn search(&self, query: &str, lang: Language, limit: usize) -> Result<SearchResponse, EngineError> {
        let hits = self.search_hits(query, limit)?;
        let mut groups: BTreeMap<EventId, SearchGroup> = BTreeMap::new();
        for h in hits {
            let a = self.article(&h.article_id).expect("hit refers to a stored article");
            let g = groups.entry(h.event_id).or_insert_with(|| SearchGroup {
                event_id: h.event_id,
                hashtags: self.hashtags_of(&h.article_id),
                best_score: h.score,
                members: Vec::new(),
            });
            g.members.push(SearchMember {
                article: EventMember::from_article(a, lang),
                score: h.score,
                matched_hashtags: h.matched_hashtags,
            });
        }
        let mut groups: Vec<SearchGroup> = groups.into_values().collect();
        groups.sort_by(|a, b| b.best_score.total_cmp(&a.best_score).then(a.event_id.cmp(&b.event_id)));
        Ok(SearchResponse { query: query.to_string(), groups })
    }

    pub fn board(&self, lang: Language, page: usize, page_size: usize) -> Result<Vec<BoardRow>, EngineError> {
        Ok(event_board(&self.state.clusterer, |id| self.article(id), lang, page, page_size)?)
    }
}

fn doc_id(position: usize) -> u32 {
    u32::try_from(position).expect("fewer than 2^32 articles")
}
