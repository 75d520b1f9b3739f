//! Allocation-only core of the financial news engine.
//!
//! Everything in this crate is pure computation over in-memory values:
//! article identity, glossary translation, tokenization, TF-IDF and BM25
//! scoring, online event clustering, and a small transformer classifier
//! with hand-written backpropagation and PGD adversarial training. File
//! formats, HTTP and the command line live in the `finnews` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod article;
pub mod codec;
pub mod events;
pub mod factcheck;
pub mod glossary;
pub mod rng;
pub mod text;

pub use events::{Clusterer, ClustererConfig, EventCluster};

pub use article::{Article, Language, Timestamp};

pub use text::{SearchWeights, SparseVector, TokenizerConfig, Vocabulary};
