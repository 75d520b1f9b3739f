use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{tokenize, TokenizerConfig, Vocabulary};
use crate::codec::{ByteReader, ByteWriter, DecodeError};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

const SNAPSHOT_MAGIC: &str = "FFIX1";
const SNAPSHOT_VERSION: u32 = 1;

pub type DocId = u32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("document {0} is already indexed")]
    DuplicateDoc(DocId),
    #[error("unknown document {0}")]
    UnknownDoc(DocId),
    #[error("empty query")]
    EmptyQuery,
    #[error("limit must be at least 1")]
    ZeroLimit,
    #[error("search weights must be non-negative, finite and not both zero")]
    BadWeights,
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Linear combination of hashtag overlap and BM25 content score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchWeights {
    pub w_hashtag: f64,
    pub w_content: f64,
}

impl Default for SearchWeights {
    fn default() -> Self {
        SearchWeights { w_hashtag: 2.0, w_content: 1.0 }
    }
}

impl SearchWeights {
    pub fn new(w_hashtag: f64, w_content: f64) -> Result<Self, IndexError> {
        let w = SearchWeights { w_hashtag, w_content };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), IndexError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.w_hashtag) || !ok(self.w_content) || (self.w_hashtag == 0.0 && self.w_content == 0.0) {
            return Err(IndexError::BadWeights);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct DocEntry {
    len: u32,
    hashtags: BTreeSet<String>,
}

/// Term postings plus per-document length and hashtags.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvertedIndex {
    vocab: Vocabulary,
    /// Indexed by term id; each list sorted by doc id.
    postings: Vec<Vec<(DocId, u32)>>,
    docs: BTreeMap<DocId, DocEntry>,
    by_hashtag: BTreeMap<String, BTreeSet<DocId>>,
    total_len: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub doc: DocId,
    pub score: f64,
    pub matched_hashtags: Vec<String>,
}

impl InvertedIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, doc: DocId, tokens: &[String], hashtags: impl IntoIterator<Item = String>) -> Result<(), IndexError> {
        if self.docs.contains_key(&doc) {
            return Err(IndexError::DuplicateDoc(doc));
        }
        self.vocab.add_document(tokens.iter());
        self.postings.resize_with(self.vocab.len(), Vec::new);
        let mut tf: BTreeMap<u32, u32> = BTreeMap::new();
        for t in tokens {
            // Interned by add_document above.
            let id = self.vocab.id(t).expect("interned");
            *tf.entry(id).or_insert(0) += 1;
        }
        for (id, count) in tf {
            let list = &mut self.postings[id as usize];
            let at = list.partition_point(|p| p.0 < doc);
            list.insert(at, (doc, count));
        }
        let hashtags: BTreeSet<String> = hashtags.into_iter().collect();
        for h in &hashtags {
            self.by_hashtag.entry(h.clone()).or_default().insert(doc);
        }
        self.total_len += tokens.len() as u64;
        self.docs.insert(doc, DocEntry { len: tokens.len() as u32, hashtags });
        Ok(())
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn avg_len(&self) -> f64 {
        if self.docs.is_empty() {
            0.0
        } else {
            self.total_len as f64 / self.docs.len() as f64
        }
    }

    pub fn doc_len(&self, doc: DocId) -> Option<u32> {
        self.docs.get(&doc).map(|d| d.len)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = DocId> + '_ {
        self.docs.keys().copied()
    }

    pub fn hashtags(&self, doc: DocId) -> Option<&BTreeSet<String>> {
        self.docs.get(&doc).map(|d| &d.hashtags)
    }

    pub fn df(&self, term: &str) -> u64 {
        self.vocab.id(term).map_or(0, |id| self.vocab.df(id))
    }

    pub fn tf(&self, term: &str, doc: DocId) -> u32 {
        let Some(id) = self.vocab.id(term) else { return 0 };
        let list = &self.postings[id as usize];
        list.binary_search_by_key(&doc, |p| p.0).map_or(0, |i| list[i].1)
    }

    pub fn postings(&self, term: &str) -> &[(DocId, u32)] {
        self.vocab.id(term).map_or(&[], |id| &self.postings[id as usize])
    }

    /// Serialize as an `FFIX1` snapshot.
    pub fn to_snapshot(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(SNAPSHOT_MAGIC.as_bytes());
        w.u32(SNAPSHOT_VERSION);
        w.u64(self.docs.len() as u64);
        for (doc, entry) in &self.docs {
            w.u32(*doc);
            w.u32(entry.len);
            w.u64(entry.hashtags.len() as u64);
            for h in &entry.hashtags {
                w.str(h);
            }
        }
        // Terms in id order.
        w.u64(self.vocab.len() as u64);
        for (id, term) in self.vocab.terms().iter().enumerate() {
            w.str(term);
            let list = &self.postings[id];
            w.u64(list.len() as u64);
            for &(doc, tf) in list {
                w.u32(doc);
                w.u32(tf);
            }
        }
        w.finish()
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<Self, IndexError> {
        let mut r = ByteReader::new(bytes);
        r.magic(SNAPSHOT_MAGIC)?;
        r.version(SNAPSHOT_VERSION)?;
        let mut index = InvertedIndex::new();
        let n_docs = r.len(16)?;
        for _ in 0..n_docs {
            let doc = r.u32()?;
            let len = r.u32()?;
            let n_tags = r.len(8)?;
            let hashtags = (0..n_tags).map(|_| r.str()).collect::<Result<BTreeSet<_>, _>>()?;
            for h in &hashtags {
                index.by_hashtag.entry(h.clone()).or_default().insert(doc);
            }
            index.total_len += u64::from(len);
            if index.docs.insert(doc, DocEntry { len, hashtags }).is_some() {
                return Err(r.invalid("duplicate document").into());
            }
        }
        let n_terms = r.len(16)?;
        let mut terms = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            terms.push(r.str()?);
            let n_post = r.len(8)?;
            let mut list = Vec::with_capacity(n_post);
            for _ in 0..n_post {
                let doc = r.u32()?;
                let tf = r.u32()?;
                if !index.docs.contains_key(&doc) || list.last().is_some_and(|&(prev, _)| prev >= doc) || tf == 0 {
                    return Err(r.invalid("postings must be sorted, non-empty and refer to known documents").into());
                }
                list.push((doc, tf));
            }
            index.postings.push(list);
        }
        if !r.is_empty() {
            return Err(r.invalid("trailing bytes").into());
        }
        let df = index.postings.iter().map(|l| l.len() as u64).collect();
        index.vocab = Vocabulary::from_parts(terms, df, n_docs as u64)
            .ok_or_else(|| r.invalid("duplicate term"))?;
        Ok(index)
    }
}

/// Okapi BM25 with `k1 = 1.2`, `b = 0.75` and `idf = ln(1 + (N - df + 0.5)/(df + 0.5))`,
/// summed over distinct query terms.
pub fn bm25(index: &InvertedIndex, query: &[String], doc: DocId) -> Result<f64, IndexError> {
    let len = index.doc_len(doc).ok_or(IndexError::UnknownDoc(doc))? as f64;
    let n = index.n_docs() as f64;
    let avg = index.avg_len();
    let norm = if avg > 0.0 { len / avg } else { 0.0 };
    let distinct: BTreeSet<&String> = query.iter().collect();
    let mut score = 0.0;
    for term in distinct {
        let tf = index.tf(term, doc) as f64;
        if tf == 0.0 {
            continue;
        }
        let df = index.df(term) as f64;
        let idf = libm::log(1.0 + (n - df + 0.5) / (df + 0.5));
        score += idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * norm));
    }
    Ok(score)
}

/// Rank documents by `w_hashtag * |query ∩ hashtags| + w_content * bm25`.
///
/// Zero scores are dropped; ties go to the lower doc id.
pub fn search(
    index: &InvertedIndex,
    query: &str,
    tokenizer: &TokenizerConfig,
    weights: SearchWeights,
    limit: usize,
) -> Result<Vec<SearchHit>, IndexError> {
    weights.validate()?;
    if limit == 0 {
        return Err(IndexError::ZeroLimit);
    }
    let tokens = tokenize(query, tokenizer);
    if tokens.is_empty() {
        return Err(IndexError::EmptyQuery);
    }
    let query_set: BTreeSet<&String> = tokens.iter().collect();
    let mut candidates: BTreeSet<DocId> = BTreeSet::new();
    for t in &query_set {
        candidates.extend(index.postings(t).iter().map(|p| p.0));
        if let Some(docs) = index.by_hashtag.get(*t) {
            candidates.extend(docs.iter().copied());
        }
    }
    let mut hits = Vec::new();
    for doc in candidates {
        let tags = index.hashtags(doc).ok_or(IndexError::UnknownDoc(doc))?;
        let matched: Vec<String> = tags.iter().filter(|h| query_set.contains(h)).cloned().collect();
        let score = weights.w_hashtag * matched.len() as f64 + weights.w_content * bm25(index, &tokens, doc)?;
        if score > 0.0 {
            hits.push(SearchHit { doc, score, matched_hashtags: matched });
        }
    }
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.doc.cmp(&b.doc)));
    hits.truncate(limit);
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| String::from(*x)).collect()
    }

    #[test]
    fn one_doc_hand_evaluation() {
        let mut idx = InvertedIndex::new();
        idx.add(0, &s(&["rates", "rates"]), []).unwrap();
        let score = bm25(&idx, &s(&["rates"]), 0).unwrap();
        let idf = libm::log(4.0 / 3.0);
        assert!((idf - 0.2877).abs() < 1e-4);
        assert!((score - idf * 4.4 / 3.2).abs() < 1e-12);
        assert!((score - 0.3956).abs() < 1e-4);
    }

    #[test]
    fn absent_and_empty_queries_score_zero() {
        let mut idx = InvertedIndex::new();
        idx.add(3, &s(&["a", "b"]), []).unwrap();
        assert_eq!(bm25(&idx, &s(&["zz"]), 3).unwrap(), 0.0);
        assert_eq!(bm25(&idx, &[], 3).unwrap(), 0.0);
        assert_eq!(bm25(&idx, &s(&["a"]), 9), Err(IndexError::UnknownDoc(9)));
    }

    #[test]
    fn duplicate_doc_rejected() {
        let mut idx = InvertedIndex::new();
        idx.add(1, &s(&["a"]), []).unwrap();
        assert_eq!(idx.add(1, &s(&["b"]), []), Err(IndexError::DuplicateDoc(1)));
    }

    #[test]
    fn postings_stay_sorted_for_out_of_order_adds() {
        let mut idx = InvertedIndex::new();
        for d in [5, 1, 3] {
            idx.add(d, &s(&["x"]), []).unwrap();
        }
        assert_eq!(idx.postings("x"), &[(1, 1), (3, 1), (5, 1)]);
        assert!((idx.avg_len() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hashtag_only_match_scores_weight() {
        let mut idx = InvertedIndex::new();
        idx.add(0, &s(&["coffee", "fraud"]), s(&["luckin"])).unwrap();
        let hits = search(&idx, "Luckin", &TokenizerConfig::default(), SearchWeights::default(), 10).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].score, 2.0);
        assert_eq!(hits[0].matched_hashtags, s(&["luckin"]));
    }

    #[test]
    fn ties_break_by_doc_id() {
        let mut idx = InvertedIndex::new();
        idx.add(7, &s(&["merger"]), []).unwrap();
        idx.add(2, &s(&["merger"]), []).unwrap();
        idx.add(4, &s(&["other"]), []).unwrap();
        let hits = search(&idx, "merger", &TokenizerConfig::default(), SearchWeights::default(), 10).unwrap();
        assert_eq!(hits.iter().map(|h| h.doc).collect::<Vec<_>>(), vec![2, 7]);
        assert_eq!(hits[0].score, hits[1].score);
    }

    #[test]
    fn query_errors() {
        let idx = InvertedIndex::new();
        let cfg = TokenizerConfig::default();
        assert_eq!(search(&idx, " ?! ", &cfg, SearchWeights::default(), 5), Err(IndexError::EmptyQuery));
        assert_eq!(search(&idx, "x1", &cfg, SearchWeights::default(), 0), Err(IndexError::ZeroLimit));
        assert_eq!(SearchWeights::new(0.0, 0.0), Err(IndexError::BadWeights));
        assert_eq!(SearchWeights::new(-1.0, 1.0), Err(IndexError::BadWeights));
    }

    #[test]
    fn snapshot_round_trip_and_corruption() {
        let mut idx = InvertedIndex::new();
        idx.add(2, &s(&["b", "a", "b"]), s(&["a"])).unwrap();
        idx.add(0, &s(&["c", "a"]), s(&["c", "z"])).unwrap();
        let bytes = idx.to_snapshot();
        let back = InvertedIndex::from_snapshot(&bytes).unwrap();
        assert_eq!(back.to_snapshot(), bytes);
        for d in [0, 2] {
            for t in ["a", "b", "c"] {
                assert_eq!(back.tf(t, d), idx.tf(t, d));
            }
            assert_eq!(back.hashtags(d), idx.hashtags(d));
        }
        assert!(matches!(
            InvertedIndex::from_snapshot(&bytes[..bytes.len() - 3]),
            Err(IndexError::Decode(DecodeError::Truncated { .. }))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(InvertedIndex::from_snapshot(&bad), Err(IndexError::Decode(DecodeError::BadMagic { offset: 0, .. }))));
    }
}
