//! Labeled text for training and evaluation: one `{"text", "label"}` JSON
//! object per line, label 0 or 1.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use finnews_core::factcheck::{Example, ModelVocab};
use finnews_core::rng::seeded;
use rand::seq::SliceRandom;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: {message}")]
    Line { path: String, line: usize, message: String },
    #[error("{0} contains no examples")]
    Empty(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledText {
    pub text: String,
    pub label: u8,
}

pub fn load_labeled(path: &Path) -> Result<Vec<LabeledText>, DatasetError> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|source| DatasetError::Io { path: name.clone(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| DatasetError::Io { path: name.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| DatasetError::Line { path: name.clone(), line: i + 1, message };
        let rec: LabeledText = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if rec.label > 1 {
            return Err(bad(format!("label must be 0 or 1, got {}", rec.label)));
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(DatasetError::Empty(name));
    }
    Ok(out)
}

/// Encodes every record; texts with no tokens at all are rejected by index.
pub fn encode(records: &[LabeledText], vocab: &ModelVocab, max_len: usize) -> Result<Vec<Example>, usize> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let tokens = vocab.encode(&r.text, max_len);
            if tokens.is_empty() {
                Err(i)
            } else {
                Ok(Example { tokens, label: r.label })
            }
        })
        .collect()
}

pub struct Split<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded shuffle, then 70% train, 15% validation, the rest test.
pub fn split_70_15_15<T: Clone>(items: &[T], seed: u64) -> Split<T> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut seeded(seed));
    let n = items.len();
    let n_train = n * 70 / 100;
    let n_val = n * 15 / 100;
    let pick = |r: &[usize]| r.iter().map(|&i| items[i].clone()).collect();
    Split {
        train: pick(&order[..n_train]),
        validation: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use finnews_core::TokenizerConfig;
    use std::io::Write;

    #[test]
    fn split_sizes_and_determinism() {
        let items: Vec<u32> = (0..100).collect();
        let a = split_70_15_15(&items, 3);
        assert_eq!((a.train.len(), a.validation.len(), a.test.len()), (70, 15, 15));
        let b = split_70_15_15(&items, 3);
        assert_eq!(a.train, b.train);
        let mut all: Vec<u32> = a.train.iter().chain(&a.validation).chain(&a.test).copied().collect();
        all.sort();
        assert_eq!(all, items);
        assert_ne!(split_70_15_15(&items, 4).train, a.train);
    }

    #[test]
    fn load_reports_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let mut f = File::create(&p).unwrap();
        writeln!(f, "{{\"text\": \"good\", \"label\": 1}}\n\n{{\"text\": \"bad\", \"label\": 2}}").unwrap();
        match load_labeled(&p) {
            Err(DatasetError::Line { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "\n").unwrap();
        assert!(matches!(load_labeled(&p), Err(DatasetError::Empty(_))));
    }

    #[test]
    fn encode_rejects_tokenless_text() {
        let vocab = ModelVocab::build(["deal closes"], TokenizerConfig::default(), 1);
        let recs = vec![LabeledText { text: "deal".into(), label: 1 }, LabeledText { text: "!!".into(), label: 0 }];
        assert_eq!(encode(&recs, &vocab, 8), Err(1));
    }
}
