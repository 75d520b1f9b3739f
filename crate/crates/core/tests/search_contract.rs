mod common;

use std::collections::BTreeSet;

use common::{fixture, strings};
use finnews_core::text::{search, tokenize, InvertedIndex, BM25_B, BM25_K1};
use finnews_core::{SearchWeights, TokenizerConfig};
use finnews_core::rng::seeded;
use rand::Rng;

#[test]
fn frozen_rankings() {
    let fx = fixture("search.json");
    let tok = TokenizerConfig::default();
    let mut index = InvertedIndex::new();
    for (i, d) in fx["docs"].as_array().unwrap().iter().enumerate() {
        index.add(i as u32, &tokenize(d["text"].as_str().unwrap(), &tok), strings(&d["hashtags"])).unwrap();
    }
    let w = SearchWeights::default();
    assert_eq!((w.w_hashtag, w.w_content), (fx["w_hashtag"].as_f64().unwrap(), fx["w_content"].as_f64().unwrap()));
    for case in fx["cases"].as_array().unwrap() {
        let q = case["query"].as_str().unwrap();
        let hits = search(&index, q, &tok, w, 100).unwrap();
        let want = case["ranking"].as_array().unwrap();
        assert_eq!(hits.len(), want.len(), "{q}");
        for (h, r) in hits.iter().zip(want) {
            assert_eq!(u64::from(h.doc), r["doc"].as_u64().unwrap(), "{q}");
            assert!((h.score - r["score"].as_f64().unwrap()).abs() < 1e-12, "{q}");
            assert_eq!(h.matched_hashtags, strings(&r["matched_hashtags"]), "{q}");
        }
    }
}

#[test]
fn hashtag_match_outranks_weaker_content_match() {
    let fx = fixture("search.json");
    let ranking = fx["cases"][0]["ranking"].as_array().unwrap();
    assert_eq!(fx["cases"][0]["query"], "merger");
    let top = &ranking[0];
    assert!(!top["matched_hashtags"].as_array().unwrap().is_empty());
    let content_only: Vec<_> = ranking.iter().filter(|r| r["matched_hashtags"].as_array().unwrap().is_empty()).collect();
    assert!(!content_only.is_empty());
    for r in content_only {
        let bm25 = r["bm25"].as_f64().unwrap();
        assert!(bm25 < 2.0 && r["score"].as_f64().unwrap() < top["score"].as_f64().unwrap());
    }
}

/// Score every document directly from the definition.
fn brute_force(docs: &[(Vec<String>, Vec<String>)], query: &[String], w: SearchWeights) -> Vec<(u32, f64)> {
    let n = docs.len() as f64;
    let avg = docs.iter().map(|d| d.0.len() as f64).sum::<f64>() / n;
    let q: BTreeSet<&String> = query.iter().collect();
    let mut out = Vec::new();
    for (i, (toks, tags)) in docs.iter().enumerate() {
        let mut bm = 0.0;
        for t in &q {
            let tf = toks.iter().filter(|x| x == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = docs.iter().filter(|d| d.0.contains(t)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            bm += idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * toks.len() as f64 / avg));
        }
        let overlap = tags.iter().collect::<BTreeSet<_>>().iter().filter(|t| q.contains(**t)).count() as f64;
        let s = w.w_hashtag * overlap + w.w_content * bm;
        if s > 0.0 {
            out.push((i as u32, s));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

#[test]
fn rankings_equal_brute_force_on_random_corpora() {
    let words: Vec<String> = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"].iter().map(|s| s.to_string()).collect();
    let tok = TokenizerConfig::default();
    let mut rng = seeded(9);
    for round in 0..200 {
        let n_docs = rng.gen_range(1..=60);
        let docs: Vec<(Vec<String>, Vec<String>)> = (0..n_docs)
            .map(|_| {
                let len = rng.gen_range(1..12);
                let toks = (0..len).map(|_| words[rng.gen_range(0..words.len())].clone()).collect();
                let tags = (0..rng.gen_range(0..3)).map(|_| words[rng.gen_range(0..words.len())].clone()).collect();
                (toks, tags)
            })
            .collect();
        let mut index = InvertedIndex::new();
        for (i, (t, h)) in docs.iter().enumerate() {
            index.add(i as u32, t, h.clone()).unwrap();
        }
        let w = SearchWeights::new(rng.gen_range(0.0..3.0), rng.gen_range(0.1..3.0)).unwrap();
        let query: Vec<String> = (0..rng.gen_range(1..4)).map(|_| words[rng.gen_range(0..words.len())].clone()).collect();
        let limit = rng.gen_range(1..=100);
        let got = search(&index, &query.join(" "), &tok, w, limit).unwrap();
        let mut want = brute_force(&docs, &query, w);
        want.truncate(limit);
        assert_eq!(got.len(), want.len(), "round {round}");
        for (g, (d, s)) in got.iter().zip(&want) {
            assert_eq!(g.doc, *d, "round {round}");
            assert!((g.score - s).abs() <= 1e-12 * s.max(1.0), "round {round}");
        }
        assert!(got.windows(2).all(|p| p[0].score >= p[1].score));
    }
}

#[test]
fn equal_scores_break_ties_by_doc_id() {
    let tok = TokenizerConfig::default();
    let mut index = InvertedIndex::new();
    for i in [4u32, 1, 3] {
        index.add(i, &tokenize("same words here", &tok), Vec::new()).unwrap();
    }
    let first = search(&index, "words", &tok, SearchWeights::default(), 10).unwrap();
    assert_eq!(first.iter().map(|h| h.doc).collect::<Vec<_>>(), vec![1, 3, 4]);
    assert_eq!(search(&index, "words", &tok, SearchWeights::default(), 10).unwrap(), first);
}
