use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Dense term dictionary with document frequencies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    ids: BTreeMap<String, u32>,
    df: Vec<u64>,
    n_docs: u64,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from a corpus of tokenized documents.
    pub fn from_documents<'a, I, D>(docs: I) -> Self
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a String>,
    {
        let mut v = Vocabulary::new();
        for d in docs {
            v.add_document(d);
        }
        v
    }

    pub(crate) fn from_parts(terms: Vec<String>, df: Vec<u64>, n_docs: u64) -> Option<Self> {
        let mut ids = BTreeMap::new();
        for (i, t) in terms.iter().enumerate() {
            if ids.insert(t.clone(), i as u32).is_some() {
                return None;
            }
        }
        Some(Vocabulary { terms, ids, df, n_docs })
    }

    /// Count one document: new terms get the next ids in order of first
    /// appearance, and each distinct term's df goes up by one.
    pub fn add_document<'a>(&mut self, tokens: impl IntoIterator<Item = &'a String>) {
        self.n_docs += 1;
        let mut seen = BTreeSet::new();
        for t in tokens {
            let id = self.intern(t);
            if seen.insert(id) {
                self.df[id as usize] += 1;
            }
        }
    }

    fn intern(&mut self, term: &str) -> u32 {
        if let Some(&id) = self.ids.get(term) {
            return id;
        }
        let id = self.terms.len() as u32;
        self.terms.push(String::from(term));
        self.ids.insert(String::from(term), id);
        self.df.push(0);
        id
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.ids.get(term).copied()
    }

    pub fn term(&self, id: u32) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn df(&self, id: u32) -> u64 {
        self.df.get(id as usize).copied().unwrap_or(0)
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ids_are_dense_and_df_bounded() {
        let docs: Vec<Vec<String>> = vec![
            vec!["a".into(), "a".into(), "b".into()],
            vec!["b".into(), "c".into()],
        ];
        let v = Vocabulary::from_documents(docs.iter());
        assert_eq!(v.n_docs(), 2);
        assert_eq!(v.terms(), &["a", "b", "c"]);
        assert_eq!((v.df(0), v.df(1), v.df(2)), (1, 2, 1));
        for id in 0..v.len() as u32 {
            assert_eq!(v.id(v.term(id).unwrap()), Some(id));
            assert!(v.df(id) <= v.n_docs());
        }
    }
}
