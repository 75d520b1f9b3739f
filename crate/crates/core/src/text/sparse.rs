use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Vocabulary;

/// Sorted `(term id, weight)` pairs with their L2 norm.
///
/// Ids are strictly increasing and no stored weight is zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
    norm: f64,
}

impl SparseVector {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Duplicate ids are summed; zero results are dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (id, w) in pairs {
            *acc.entry(id).or_insert(0.0) += w;
        }
        Self::from_sorted_unchecked(acc.into_iter().filter(|&(_, w)| w != 0.0).collect())
    }

    fn from_sorted_unchecked(entries: Vec<(u32, f64)>) -> Self {
        let norm = libm::sqrt(entries.iter().map(|&(_, w)| w * w).sum::<f64>());
        SparseVector { entries, norm }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u32) -> f64 {
        self.entries.binary_search_by_key(&id, |e| e.0).map_or(0.0, |i| self.entries[i].1)
    }

    /// Unit-norm copy; the zero vector stays zero.
    pub fn normalized(&self) -> Self {
        if self.norm == 0.0 {
            return SparseVector::empty();
        }
        let entries: Vec<(u32, f64)> = self.entries.iter().map(|&(i, w)| (i, w / self.norm)).collect();
        Self::from_sorted_unchecked(entries.into_iter().filter(|&(_, w)| w != 0.0).collect())
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut sum) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    sum += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }
}

/// `dot(u, v) / (|u| |v|)`, or 0 when either vector is zero.
pub fn cosine(u: &SparseVector, v: &SparseVector) -> f64 {
    if u.norm == 0.0 || v.norm == 0.0 {
        return 0.0;
    }
    u.dot(v) / (u.norm * v.norm)
}

/// Sublinear TF times smoothed IDF, L2-normalized. Unknown terms are ignored.
///
/// `w(t) = (1 + ln tf) * ln((N + 1) / (df + 1))`
pub fn tfidf(tokens: &[String], vocab: &Vocabulary) -> SparseVector {
    let mut tf: BTreeMap<u32, u32> = BTreeMap::new();
    for t in tokens {
        if let Some(id) = vocab.id(t) {
            *tf.entry(id).or_insert(0) += 1;
        }
    }
    let n = vocab.n_docs() as f64;
    let raw: Vec<(u32, f64)> = tf
        .into_iter()
        .map(|(id, c)| {
            let df = vocab.df(id) as f64;
            (id, (1.0 + libm::log(c as f64)) * libm::log((n + 1.0) / (df + 1.0)))
        })
        .filter(|&(_, w)| w != 0.0)
        .collect();
    SparseVector::from_sorted_unchecked(raw).normalized()
}
