//! Token vocabularies with contiguous ids and BERT-style vocab.txt IO.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuation prefix marking non-initial subword pieces.
pub const DEFAULT_CONTINUATION_PREFIX: &str = "##";

/// The five reserved token strings, emitted in this fixed order:
/// pad, unk, cls, sep, mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialTokens {
    pub pad: String,
    pub unk: String,
    pub cls: String,
    pub sep: String,
    pub mask: String,
}

impl Default for SpecialTokens {
    fn default() -> Self {
        Self {
            pad: "[PAD]".to_string(),
            unk: "[UNK]".to_string(),
            cls: "[CLS]".to_string(),
            sep: "[SEP]".to_string(),
            mask: "[MASK]".to_string(),
        }
    }
}

impl SpecialTokens {
    pub fn in_order(&self) -> [&str; 5] {
        [&self.pad, &self.unk, &self.cls, &self.sep, &self.mask]
    }

    pub fn contains(&self, token: &str) -> bool {
        self.in_order().contains(&token)
    }

    fn validate(&self) -> Result<()> {
        let names = self.in_order();
        for (i, a) in names.iter().enumerate() {
            if a.is_empty() {
                return Err(Error::InvalidVocabulary(
                    "special token strings must be non-empty".to_string(),
                ));
            }
            for b in &names[i + 1..] {
                if a == b {
                    return Err(Error::InvalidVocabulary(format!(
                        "special token string {a:?} is used twice"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// An ordered token list with a bijective token<->id map.
///
/// Ids are contiguous `0..size()`; the id of a token is its index in the
/// list. All five special tokens must be present.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    token_to_id: HashMap<String, u32>,
    specials: SpecialTokens,
    special_ids: [u32; 5],
    continuation_prefix: String,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
            && self.specials == other.specials
            && self.continuation_prefix == other.continuation_prefix
    }
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>, specials: SpecialTokens) -> Result<Self> {
        Self::with_continuation_prefix(tokens, specials, DEFAULT_CONTINUATION_PREFIX)
    }

    pub fn with_continuation_prefix(
        tokens: Vec<String>,
        specials: SpecialTokens,
        continuation_prefix: &str,
    ) -> Result<Self> {
        specials.validate()?;
        if continuation_prefix.is_empty() {
            return Err(Error::InvalidVocabulary(
                "continuation prefix must be non-empty".to_string(),
            ));
        }
        if tokens.len() > u32::MAX as usize {
            return Err(Error::InvalidVocabulary(format!(
                "{} tokens exceed the id space",
                tokens.len()
            )));
        }
        let mut token_to_id = HashMap::with_capacity(tokens.len());
        for (id, token) in tokens.iter().enumerate() {
            if token.is_empty() {
                return Err(Error::InvalidVocabulary(format!(
                    "empty token string at id {id}"
                )));
            }
            if token.contains('\n') || token.contains('\r') {
                return Err(Error::InvalidVocabulary(format!(
                    "token at id {id} contains a line break"
                )));
            }
            if token_to_id.insert(token.clone(), id as u32).is_some() {
                return Err(Error::InvalidVocabulary(format!(
                    "duplicate token {token:?}"
                )));
            }
        }
        let mut special_ids = [0u32; 5];
        for (slot, name) in special_ids.iter_mut().zip(specials.in_order()) {
            match token_to_id.get(name) {
                Some(&id) => *slot = id,
                None => {
                    return Err(Error::InvalidVocabulary(format!(
                        "special token {name:?} is missing"
                    )))
                }
            }
        }
        Ok(Self {
            tokens,
            token_to_id,
            specials,
            special_ids,
            continuation_prefix: continuation_prefix.to_string(),
        })
    }

    /// A vocabulary holding only the five special tokens. Useful as the
    /// front end of a trainer, where no learned pieces exist yet.
    pub fn specials_only(specials: SpecialTokens) -> Result<Self> {
        let tokens = specials.in_order().map(str::to_string).to_vec();
        Self::new(tokens, specials)
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn specials(&self) -> &SpecialTokens {
        &self.specials
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.continuation_prefix
    }

    pub fn pad_id(&self) -> u32 {
        self.special_ids[0]
    }

    pub fn unk_id(&self) -> u32 {
        self.special_ids[1]
    }

    pub fn cls_id(&self) -> u32 {
        self.special_ids[2]
    }

    pub fn sep_id(&self) -> u32 {
        self.special_ids[3]
    }

    pub fn mask_id(&self) -> u32 {
        self.special_ids[4]
    }

    pub fn special_ids(&self) -> [u32; 5] {
        self.special_ids
    }

    pub fn is_special_id(&self, id: u32) -> bool {
        self.special_ids.contains(&id)
    }

    /// Non-special ids in ascending order — the pool used for random
    /// replacement during masking.
    pub fn non_special_ids(&self) -> Vec<u32> {
        (0..self.size() as u32)
            .filter(|id| !self.is_special_id(*id))
            .collect()
    }

    /// Load a vocab.txt file: UTF-8, one token per line, line number
    /// (0-based) = token id. Duplicate lines are rejected.
    pub fn load_vocab_txt(path: impl AsRef<Path>, specials: SpecialTokens) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_vocab_txt(&content, specials)
    }

    pub fn parse_vocab_txt(content: &str, specials: SpecialTokens) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (line_no, line) in content.lines().enumerate() {
            if let Some(prev) = seen.insert(line, line_no) {
                let _ = prev;
                return Err(Error::DuplicateVocabLine {
                    token: line.to_string(),
                    line: line_no,
                });
            }
            tokens.push(line.to_string());
        }
        Self::new(tokens, specials)
    }

    /// Write the vocab.txt representation: one token per line, trailing
    /// newline, byte-identical across runs.
    pub fn save_vocab_txt(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        out.write_all(self.to_vocab_txt().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn to_vocab_txt(&self) -> String {
        let mut out = String::new();
        for token in &self.tokens {
            out.push_str(token);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specials() -> SpecialTokens {
        SpecialTokens::default()
    }

    fn base_tokens(extra: &[&str]) -> Vec<String> {
        let mut tokens: Vec<String> = specials().in_order().map(str::to_string).to_vec();
        tokens.extend(extra.iter().map(|t| t.to_string()));
        tokens
    }

    #[test]
    fn bijection_and_special_ids() {
        let vocab = Vocabulary::new(base_tokens(&["halo", "##lo", "dunia"]), specials()).unwrap();
        assert_eq!(vocab.size(), 8);
        for (id, token) in vocab.tokens().iter().enumerate() {
            assert_eq!(vocab.id(token), Some(id as u32));
            assert_eq!(vocab.token(id as u32), Some(token.as_str()));
        }
        assert_eq!(vocab.pad_id(), 0);
        assert_eq!(vocab.mask_id(), 4);
        assert!(vocab.is_special_id(2));
        assert!(!vocab.is_special_id(5));
    }

    #[test]
    fn rejects_duplicates() {
        let mut tokens = base_tokens(&["halo"]);
        tokens.push("halo".to_string());
        assert!(Vocabulary::new(tokens, specials()).is_err());
    }

    #[test]
    fn rejects_missing_special() {
        let tokens = vec!["[PAD]".to_string(), "[UNK]".to_string(), "a".to_string()];
        assert!(Vocabulary::new(tokens, specials()).is_err());
    }

    #[test]
    fn rejects_empty_token_and_line_breaks() {
        let mut tokens = base_tokens(&[]);
        tokens.push(String::new());
        assert!(Vocabulary::new(tokens, specials()).is_err());

        let mut tokens = base_tokens(&[]);
        tokens.push("a\nb".to_string());
        assert!(Vocabulary::new(tokens, specials()).is_err());
    }

    #[test]
    fn vocab_txt_round_trip() {
        let vocab = Vocabulary::new(base_tokens(&["halo", "##lo"]), specials()).unwrap();
        let text = vocab.to_vocab_txt();
        let reloaded = Vocabulary::parse_vocab_txt(&text, specials()).unwrap();
        assert_eq!(vocab, reloaded);
    }

    #[test]
    fn vocab_txt_rejects_duplicate_lines() {
        let text = "[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\na\na\n";
        let err = Vocabulary::parse_vocab_txt(text, specials()).unwrap_err();
        match err {
            Error::DuplicateVocabLine { token, line } => {
                assert_eq!(token, "a");
                assert_eq!(line, 6);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn non_special_pool_skips_specials() {
        let vocab = Vocabulary::new(base_tokens(&["a", "b"]), specials()).unwrap();
        assert_eq!(vocab.non_special_ids(), vec![5, 6]);
    }
}
