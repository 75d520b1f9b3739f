//! Tokenization, TF-IDF vectors and the BM25 inverted index.

mod index;
mod sparse;
mod tokenize;
mod vocab;

pub use index::{bm25, search, DocId, IndexError, InvertedIndex, SearchHit, SearchWeights, BM25_B, BM25_K1};
pub use sparse::{cosine, tfidf, SparseVector};
pub use tokenize::{is_cjk, tokenize, CjkMode, TokenizerConfig};
pub use vocab::Vocabulary;
