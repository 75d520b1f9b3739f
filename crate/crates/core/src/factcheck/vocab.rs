use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::model::{forward, ModelError, ModelParameters};
use super::scalar::Real;
use crate::text::{tokenize, TokenizerConfig};

pub const UNK: &str = "[UNK]";
pub const UNK_ID: u32 = 0;

/// Token-to-id map used at training time; id 0 is the unknown token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelVocab {
    tokenizer: TokenizerConfig,
    terms: Vec<String>,
    ids: BTreeMap<String, u32>,
}

impl ModelVocab {
    pub fn new(tokenizer: TokenizerConfig) -> Self {
        let mut ids = BTreeMap::new();
        ids.insert(String::from(UNK), UNK_ID);
        ModelVocab { tokenizer, terms: vec![String::from(UNK)], ids }
    }

    /// Terms seen at least `min_count` times, in order of first appearance.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, tokenizer: TokenizerConfig, min_count: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut order = Vec::new();
        for text in texts {
            for t in tokenize(text, &tokenizer) {
                let n = counts.entry(t.clone()).or_insert(0);
                if *n == 0 {
                    order.push(t);
                }
                *n += 1;
            }
        }
        let mut v = ModelVocab::new(tokenizer);
        for t in order {
            if counts[&t] >= min_count.max(1) {
                v.push(t);
            }
        }
        v
    }

    /// Rebuild from stored terms; the first must be the unknown token.
    pub fn from_terms(tokenizer: TokenizerConfig, terms: Vec<String>) -> Option<Self> {
        if terms.first().map(String::as_str) != Some(UNK) {
            return None;
        }
        let mut v = ModelVocab::new(tokenizer);
        for t in terms.into_iter().skip(1) {
            if v.ids.contains_key(&t) {
                return None;
            }
            v.push(t);
        }
        Some(v)
    }

    fn push(&mut self, t: String) {
        let id = self.terms.len() as u32;
        self.ids.insert(t.clone(), id);
        self.terms.push(t);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        // Always holds the unknown token.
        false
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn tokenizer(&self) -> &TokenizerConfig {
        &self.tokenizer
    }

    pub fn id(&self, term: &str) -> u32 {
        self.ids.get(term).copied().unwrap_or(UNK_ID)
    }

    /// Tokenize and map to ids, keeping at most `max_len` tokens.
    pub fn encode(&self, text: &str, max_len: usize) -> Vec<u32> {
        tokenize(text, &self.tokenizer).iter().take(max_len).map(|t| self.id(t)).collect()
    }
}

/// Probability of the "credible" class for raw text.
pub fn credibility_score<T: Real>(params: &ModelParameters<T>, vocab: &ModelVocab, text: &str) -> Result<f64, ModelError> {
    let tokens = vocab.encode(text, params.config.max_len);
    if tokens.is_empty() {
        return Err(ModelError::EmptySequence);
    }
    Ok(forward(params, &tokens, None)?.0[1].to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_and_encode() {
        let v = ModelVocab::build(["deal closes", "deal fails", "x"], TokenizerConfig::default(), 1);
        assert_eq!(v.terms(), &["[UNK]", "deal", "closes", "fails"]);
        assert_eq!(v.encode("Deal fails badly", 8), vec![1, 3, 0]);
        assert_eq!(v.encode("deal deal deal", 2), vec![1, 1]);
        let rare = ModelVocab::build(["a1 b2 a1"], TokenizerConfig::default(), 2);
        assert_eq!(rare.terms(), &["[UNK]", "a1"]);
    }

    #[test]
    fn from_terms_requires_unknown_first() {
        let cfg = TokenizerConfig::default();
        assert!(ModelVocab::from_terms(cfg.clone(), vec!["x".into()]).is_none());
        let v = ModelVocab::from_terms(cfg, vec![UNK.into(), "x".into()]).unwrap();
        assert_eq!(v.id("x"), 1);
    }

    #[test]
    fn score_is_a_probability_and_rejects_empty_text() {
        use crate::factcheck::model::ModelConfig;
        let v = ModelVocab::build(["rates rise"], TokenizerConfig::default(), 1);
        let p = ModelParameters::<f64>::init(ModelConfig::new(v.len())).unwrap();
        let s = credibility_score(&p, &v, "rates rise again").unwrap();
        assert!((0.0..=1.0).contains(&s));
        assert_eq!(credibility_score(&p, &v, "  ! ").unwrap_err(), ModelError::EmptySequence);
    }
}
