#![allow(dead_code)]

use std::path::PathBuf;

use finnews::corpus::{load_glossary, parse_articles, GlossaryTranslator};
use finnews_core::factcheck::{Checkpoint, ModelConfig, ModelParameters, ModelVocab};
use finnews_core::{Article, TokenizerConfig};

pub fn fixture_path(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect()
}

pub fn fixture_json(name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(fixture_path(name)).unwrap()).unwrap()
}

pub fn glossary() -> GlossaryTranslator {
    GlossaryTranslator::new(load_glossary(&fixture_path("glossary.tsv")).unwrap())
}

pub fn articles(name: &str) -> Vec<Article> {
    parse_articles(std::io::BufReader::new(std::fs::File::open(fixture_path(name)).unwrap())).unwrap()
}

/// Fixture articles stored as a JSON array under `articles`.
pub fn json_articles(name: &str) -> Vec<Article> {
    let fx = fixture_json(name);
    let body = serde_json::to_vec(&fx["articles"]).unwrap();
    finnews::corpus::parse_payload(&body).unwrap()
}

/// A bag-of-embeddings scorer with no attention layers: "good" pushes the
/// positive logit up and "bad" pushes it down, other words are neutral.
///
/// On `eval16.jsonl` it yields tp=6, tn=5, fp=2, fn=3.
pub fn good_bad_checkpoint() -> Checkpoint {
    let cfg = ModelConfig { vocab_size: 3, d_model: 2, n_heads: 1, n_layers: 0, d_ff: 1, max_len: 16, n_classes: 2, seed: 0 };
    let vocab = ModelVocab::from_terms(TokenizerConfig::default(), vec!["[UNK]".into(), "good".into(), "bad".into()]).unwrap();
    let mut params = ModelParameters::<f64>::zeros(cfg).unwrap();
    params.token_emb = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
    // logits = (0, pooled[0] - pooled[1])
    params.head_w = vec![0.0, 1.0, 0.0, -1.0];
    Checkpoint { params, vocab }
}
