use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CjkMode {
    /// Overlapping character bigrams; a lone character emits itself.
    #[default]
    CharBigram,
    /// The whole contiguous run is one token.
    Passthrough,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub cjk_mode: CjkMode,
    /// Minimum length, in chars, of non-CJK tokens.
    pub min_token_len: usize,
    /// Minimum length, in chars, of CJK tokens.
    pub min_cjk_len: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig { lowercase: true, cjk_mode: CjkMode::CharBigram, min_token_len: 2, min_cjk_len: 1 }
    }
}

/// Han, kana and Hangul syllables.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xAC00..=0xD7AF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF)
}

pub fn tokenize(text: &str, cfg: &TokenizerConfig) -> Vec<String> {
    let mut out = Vec::new();
    let mut span_start = 0;
    let mut in_cjk = false;
    for (i, c) in text.char_indices() {
        let cjk = is_cjk(c);
        if cjk != in_cjk {
            emit_span(&text[span_start..i], in_cjk, cfg, &mut out);
            span_start = i;
            in_cjk = cjk;
        }
    }
    emit_span(&text[span_start..], in_cjk, cfg, &mut out);
    out
}

fn emit_span(span: &str, cjk: bool, cfg: &TokenizerConfig, out: &mut Vec<String>) {
    if span.is_empty() {
        return;
    }
    if !cjk {
        for word in span.unicode_words() {
            if word.chars().count() < cfg.min_token_len {
                continue;
            }
            out.push(if cfg.lowercase { word.to_lowercase() } else { String::from(word) });
        }
        return;
    }
    let chars: Vec<char> = span.chars().collect();
    let mut push = |t: String| {
        if t.chars().count() >= cfg.min_cjk_len {
            out.push(t);
        }
    };
    match cfg.cjk_mode {
        CjkMode::Passthrough => push(String::from(span)),
        CjkMode::CharBigram if chars.len() == 1 => push(String::from(span)),
        CjkMode::CharBigram => {
            for w in chars.windows(2) {
                push(w.iter().collect());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s, &TokenizerConfig::default())
    }

    #[test]
    fn latin_words() {
        assert_eq!(toks("Fed Raises Rates"), vec!["fed", "raises", "rates"]);
        assert_eq!(toks(""), Vec::<String>::new());
        assert_eq!(toks("A deal, at 5% -- OK?"), vec!["deal", "at", "ok"]);
    }

    #[test]
    fn cjk_bigrams() {
        assert_eq!(toks("咖啡店"), vec!["咖啡", "啡店"]);
        assert_eq!(toks("店"), vec!["店"]);
        assert_eq!(toks("瑞幸 咖啡，Luckin"), vec!["瑞幸", "咖啡", "luckin"]);
    }

    #[test]
    fn passthrough_mode() {
        let cfg = TokenizerConfig { cjk_mode: CjkMode::Passthrough, ..Default::default() };
        assert_eq!(tokenize("咖啡店 x1", &cfg), vec!["咖啡店", "x1"]);
    }

    #[test]
    fn case_preserved_when_asked() {
        let cfg = TokenizerConfig { lowercase: false, ..Default::default() };
        assert_eq!(tokenize("Fed", &cfg), vec!["Fed"]);
    }
}
