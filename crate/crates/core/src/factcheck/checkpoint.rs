//! `FFCK1` checkpoint: model config, tokenizer config, vocabulary and
//! parameter tensors, little-endian.

use alloc::string::String;
use alloc::vec::Vec;

use super::model::{tensor_shapes, ModelConfig, ModelParameters};
use super::vocab::ModelVocab;
use crate::codec::{ByteReader, ByteWriter, DecodeError};
use crate::text::{CjkMode, TokenizerConfig};

pub const CHECKPOINT_MAGIC: &str = "FFCK1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParameters<f64>,
    pub vocab: ModelVocab,
}

impl Checkpoint {
    pub fn config(&self) -> &ModelConfig {
        &self.params.config
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(CHECKPOINT_MAGIC.as_bytes());
        w.u32(CHECKPOINT_VERSION);
        let c = &self.params.config;
        for v in [c.vocab_size, c.d_model, c.n_heads, c.n_layers, c.d_ff, c.max_len, c.n_classes] {
            w.u64(v as u64);
        }
        w.u64(c.seed);
        let t = self.vocab.tokenizer();
        w.u64(u64::from(t.lowercase));
        w.u64(match t.cjk_mode {
            CjkMode::CharBigram => 0,
            CjkMode::Passthrough => 1,
        });
        w.u64(t.min_token_len as u64);
        w.u64(t.min_cjk_len as u64);
        w.u64(self.vocab.len() as u64);
        for term in self.vocab.terms() {
            w.str(term);
        }
        let tensors = self.params.tensors();
        w.u64(tensors.len() as u64);
        for t in tensors {
            w.f64s(t);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = ByteReader::new(bytes);
        r.magic(CHECKPOINT_MAGIC)?;
        r.version(CHECKPOINT_VERSION)?;
        let config_at = r.offset();
        let mut dims = [0usize; 7];
        for d in &mut dims {
            *d = usize_field(&mut r)?;
        }
        let seed = r.u64()?;
        let config = ModelConfig {
            vocab_size: dims[0],
            d_model: dims[1],
            n_heads: dims[2],
            n_layers: dims[3],
            d_ff: dims[4],
            max_len: dims[5],
            n_classes: dims[6],
            seed,
        };
        config
            .validate()
            .map_err(|e| DecodeError::Invalid { offset: config_at, reason: alloc::format!("{e}") })?;

        let lowercase = match r.u64()? {
            0 => false,
            1 => true,
            _ => return Err(invalid_before(&r, 8, "lowercase flag must be 0 or 1")),
        };
        let cjk_mode = match r.u64()? {
            0 => CjkMode::CharBigram,
            1 => CjkMode::Passthrough,
            _ => return Err(invalid_before(&r, 8, "unknown CJK mode")),
        };
        let min_token_len = usize_field(&mut r)?;
        let min_cjk_len = usize_field(&mut r)?;
        let tokenizer = TokenizerConfig { lowercase, cjk_mode, min_token_len, min_cjk_len };

        let vocab_at = r.offset();
        let n_terms = r.len(8)?;
        if n_terms != config.vocab_size {
            return Err(DecodeError::Invalid {
                offset: vocab_at,
                reason: alloc::format!("vocabulary has {n_terms} terms but the model expects {}", config.vocab_size),
            });
        }
        let terms = (0..n_terms).map(|_| r.str()).collect::<Result<Vec<String>, _>>()?;
        let vocab = ModelVocab::from_terms(tokenizer, terms).ok_or(DecodeError::Invalid {
            offset: vocab_at,
            reason: "vocabulary must start with [UNK] and hold no duplicates".into(),
        })?;

        let shapes = tensor_shapes(&config);
        let tensors_at = r.offset();
        let n_tensors = r.len(8)?;
        if n_tensors != shapes.len() {
            return Err(DecodeError::Invalid {
                offset: tensors_at,
                reason: alloc::format!("expected {} tensors, found {n_tensors}", shapes.len()),
            });
        }
        let mut tensors = Vec::with_capacity(n_tensors);
        for (i, &expected) in shapes.iter().enumerate() {
            let at = r.offset();
            let t = r.f64s()?;
            if t.len() != expected {
                return Err(DecodeError::Invalid {
                    offset: at,
                    reason: alloc::format!("tensor {i} has {} values, expected {expected}", t.len()),
                });
            }
            if let Some(j) = t.iter().position(|x| !x.is_finite()) {
                return Err(DecodeError::Invalid { offset: at + 8 + 8 * j, reason: "non-finite parameter".into() });
            }
            tensors.push(t);
        }
        if !r.is_empty() {
            return Err(r.invalid("trailing bytes after last tensor"));
        }
        let params = ModelParameters::from_tensors(config, tensors)
            .map_err(|e| DecodeError::Invalid { offset: tensors_at, reason: alloc::format!("{e}") })?;
        Ok(Checkpoint { params, vocab })
    }
}

fn usize_field(r: &mut ByteReader<'_>) -> Result<usize, DecodeError> {
    let v = r.u64()?;
    usize::try_from(v).map_err(|_| invalid_before(r, 8, "field does not fit in usize"))
}

fn invalid_before(r: &ByteReader<'_>, width: usize, reason: &str) -> DecodeError {
    DecodeError::Invalid { offset: r.offset() - width, reason: reason.into() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let vocab = ModelVocab::build(["shares fall", "下跌"], TokenizerConfig::default(), 1);
        let mut cfg = ModelConfig::new(vocab.len());
        cfg.d_model = 8;
        cfg.d_ff = 16;
        cfg.max_len = 6;
        cfg.n_layers = 1;
        Checkpoint { params: ModelParameters::init(cfg).unwrap(), vocab }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let ck = sample();
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn version_bump_is_rejected_with_message() {
        let mut bytes = sample().to_bytes();
        bytes[5..9].copy_from_slice(&2u32.to_le_bytes());
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert_eq!(err, DecodeError::UnsupportedVersion { offset: 5, found: 2, supported: 1 });
        let msg = alloc::format!("{err}");
        assert!(msg.contains("version 2") && msg.contains("offset 5"), "{msg}");
    }

    #[test]
    fn corruption_names_offset() {
        let bytes = sample().to_bytes();
        assert!(matches!(Checkpoint::from_bytes(b"FFIX1"), Err(DecodeError::BadMagic { offset: 0, .. })));
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(Checkpoint::from_bytes(cut), Err(DecodeError::Truncated { .. })));
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(
            Checkpoint::from_bytes(&extra).unwrap_err(),
            DecodeError::Invalid { offset: bytes.len(), reason: "trailing bytes after last tensor".into() }
        );
        let mut nan = bytes.clone();
        let at = nan.len() - 8;
        nan[at..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert_eq!(
            Checkpoint::from_bytes(&nan).unwrap_err(),
            DecodeError::Invalid { offset: at, reason: "non-finite parameter".into() }
        );
    }
}
