//! Article ingestion: parsing, persistence and pivot translation.

mod parse;
mod store;
mod translate;

pub use parse::{article_from_value, parse_articles, parse_payload, parse_timestamp, ParseError, ParseErrorKind, Position};
pub use store::{Appended, ArticleStore, StoreError, INDEX_FILE, LOG_FILE};
pub use translate::{
    build_translator, cache_key, load_glossary, pivot, GlossaryTranslator, HttpTransport, RemoteTranslator, TranslateError,
    Translator, TranslatorConfig, TranslatorMode, Transport, TransportResponse, API_KEY_ENV,
};
