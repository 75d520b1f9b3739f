//! Dictionary-based translation used when no remote translator is configured.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

/// Term-to-term map applied token by token.
///
/// Whitespace-separated tokens are scanned left to right with greedy
/// longest-match against the glossary keys, so unsegmented CJK text such as
/// `瑞幸咖啡` maps entry by entry. Text that matches no key is passed through
/// unchanged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Glossary {
    entries: BTreeMap<String, String>,
    longest_key: usize,
}

impl Glossary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: impl Into<String>, target: impl Into<String>) {
        let source = source.into();
        if source.is_empty() {
            return;
        }
        self.longest_key = self.longest_key.max(source.chars().count());
        self.entries.insert(source, target.into());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<&str> {
        self.entries.get(term).map(String::as_str)
    }

    pub fn translate(&self, text: &str) -> String {
        let mut pieces: Vec<String> = Vec::new();
        for token in text.split_whitespace() {
            if let Some(hit) = self.entries.get(token) {
                pieces.push(hit.clone());
                continue;
            }
            let chars: Vec<(usize, char)> = token.char_indices().collect();
            let mut pending_start: Option<usize> = None;
            let mut i = 0;
            while i < chars.len() {
                let start = chars[i].0;
                let max_len = self.longest_key.min(chars.len() - i);
                let mut matched = None;
                for len in (1..=max_len).rev() {
                    let end = chars.get(i + len).map_or(token.len(), |c| c.0);
                    if let Some(hit) = self.entries.get(&token[start..end]) {
                        matched = Some((len, hit));
                        break;
                    }
                }
                match matched {
                    Some((len, hit)) => {
                        if let Some(p) = pending_start.take() {
                            pieces.push(String::from(&token[p..start]));
                        }
                        pieces.push(hit.clone());
                        i += len;
                    }
                    None => {
                        pending_start.get_or_insert(start);
                        i += 1;
                    }
                }
            }
            if let Some(p) = pending_start {
                pieces.push(String::from(&token[p..]));
            }
        }
        pieces.join(" ")
    }
}

impl<S: Into<String>, T: Into<String>> FromIterator<(S, T)> for Glossary {
    fn from_iter<I: IntoIterator<Item = (S, T)>>(iter: I) -> Self {
        let mut g = Glossary::new();
        for (s, t) in iter {
            g.insert(s, t);
        }
        g
    }
}
