//! WordPiece normalization, pre-tokenization, and greedy encoding/decoding.
//!
//! The front end applies Unicode normalization and optional lowercasing,
//! splits on whitespace, and isolates every punctuation character
//! (Unicode category P*) as its own word. Each word is then segmented by
//! greedy longest-match-first lookup: the first piece is looked up bare,
//! later pieces with the continuation prefix prepended. A word longer
//! than `max_chars_per_word`, or one where some step finds no match,
//! becomes a single UNK token.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

/// Unicode normalization applied before tokenization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationForm {
    None,
    /// NFC: canonical decomposition followed by canonical composition.
    #[default]
    CanonicalComposed,
}

pub const DEFAULT_MAX_CHARS_PER_WORD: usize = 100;

/// True for every character in Unicode general category P (punctuation).
pub fn is_punctuation(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
}

/// An immutable tokenizer: a vocabulary plus front-end settings.
/// Encoding is a pure function of (model, text), so one model can be
/// shared read-only across any number of worker threads.
#[derive(Debug, Clone)]
pub struct TokenizerModel {
    vocab: Vocabulary,
    lowercase: bool,
    normalization: NormalizationForm,
    max_chars_per_word: usize,
}

impl TokenizerModel {
    pub fn new(
        vocab: Vocabulary,
        lowercase: bool,
        normalization: NormalizationForm,
        max_chars_per_word: usize,
    ) -> Result<Self> {
        if max_chars_per_word == 0 {
            return Err(Error::InvalidArgument(
                "max_chars_per_word must be at least 1".to_string(),
            ));
        }
        Ok(Self {
            vocab,
            lowercase,
            normalization,
            max_chars_per_word,
        })
    }

    /// Lowercasing + NFC + the default word-length guard.
    pub fn with_defaults(vocab: Vocabulary) -> Self {
        Self {
            vocab,
            lowercase: true,
            normalization: NormalizationForm::CanonicalComposed,
            max_chars_per_word: DEFAULT_MAX_CHARS_PER_WORD,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn normalization(&self) -> NormalizationForm {
        self.normalization
    }

    pub fn max_chars_per_word(&self) -> usize {
        self.max_chars_per_word
    }

    /// True when the two models share every front-end setting (vocabulary
    /// contents aside).
    pub fn same_front_end(&self, other: &Self) -> bool {
        self.lowercase == other.lowercase
            && self.normalization == other.normalization
            && self.max_chars_per_word == other.max_chars_per_word
            && self.vocab.continuation_prefix() == other.vocab.continuation_prefix()
            && self.vocab.specials() == other.vocab.specials()
    }

    /// Normalize, optionally lowercase, split on whitespace, and isolate
    /// each punctuation character as its own word.
    pub fn normalize_and_pretokenize(&self, text: &str) -> Vec<String> {
        let normalized: String = match self.normalization {
            NormalizationForm::None => text.to_string(),
            NormalizationForm::CanonicalComposed => text.nfc().collect(),
        };
        let cased = if self.lowercase {
            normalized.to_lowercase()
        } else {
            normalized
        };

        let mut words = Vec::new();
        for chunk in cased.split_whitespace() {
            let mut current = String::new();
            for ch in chunk.chars() {
                if is_punctuation(ch) {
                    if !current.is_empty() {
                        words.push(std::mem::take(&mut current));
                    }
                    words.push(ch.to_string());
                } else {
                    current.push(ch);
                }
            }
            if !current.is_empty() {
                words.push(current);
            }
        }
        words
    }

    /// Greedy longest-match-first segmentation of one word.
    ///
    /// Returns `[unk]` when the word exceeds `max_chars_per_word` or any
    /// step has no vocabulary match (failure is an outcome, not an error).
    pub fn tokenize_word(&self, word: &str) -> Vec<String> {
        let chars: Vec<char> = word.chars().collect();
        if chars.is_empty() {
            return Vec::new();
        }
        let unk = || vec![self.vocab.specials().unk.clone()];
        if chars.len() > self.max_chars_per_word {
            return unk();
        }

        let prefix = self.vocab.continuation_prefix();
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut matched = None;
            while start < end {
                let mut candidate = String::new();
                if start > 0 {
                    candidate.push_str(prefix);
                }
                candidate.extend(&chars[start..end]);
                if self.vocab.contains(&candidate) {
                    matched = Some(candidate);
                    break;
                }
                end -= 1;
            }
            match matched {
                Some(piece) => {
                    pieces.push(piece);
                    start = end;
                }
                None => return unk(),
            }
        }
        pieces
    }

    /// Full pipeline: pretokenize, segment each word, look up ids.
    /// With `add_specials`, the body is framed as `[CLS] ... [SEP]`.
    pub fn encode(&self, text: &str, add_specials: bool) -> Vec<u32> {
        let mut ids = Vec::new();
        if add_specials {
            ids.push(self.vocab.cls_id());
        }
        for word in self.normalize_and_pretokenize(text) {
            for piece in self.tokenize_word(&word) {
                let id = self
                    .vocab
                    .id(&piece)
                    .expect("tokenize_word only emits vocabulary members");
                ids.push(id);
            }
        }
        if add_specials {
            ids.push(self.vocab.sep_id());
        }
        ids
    }

    /// Drop special tokens, join pieces with single spaces, and fuse
    /// continuation pieces onto their predecessor with the prefix
    /// stripped. An out-of-range id is an error naming its position.
    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let prefix = self.vocab.continuation_prefix();
        let mut words: Vec<String> = Vec::new();
        for (position, &id) in ids.iter().enumerate() {
            let token = self.vocab.token(id).ok_or(Error::TokenIdOutOfRange {
                id,
                position,
                vocab_size: self.vocab.size(),
            })?;
            if self.vocab.is_special_id(id) {
                continue;
            }
            match token.strip_prefix(prefix) {
                Some(suffix) => match words.last_mut() {
                    Some(last) => last.push_str(suffix),
                    None => words.push(suffix.to_string()),
                },
                None => words.push(token.to_string()),
            }
        }
        Ok(words.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::SpecialTokens;

    fn model_with(extra: &[&str]) -> TokenizerModel {
        let specials = SpecialTokens::default();
        let mut tokens: Vec<String> = specials.in_order().map(str::to_string).to_vec();
        tokens.extend(extra.iter().map(|t| t.to_string()));
        TokenizerModel::with_defaults(Vocabulary::new(tokens, specials).unwrap())
    }

    #[test]
    fn pretokenize_empty_is_empty() {
        let model = model_with(&[]);
        assert!(model.normalize_and_pretokenize("").is_empty());
    }

    #[test]
    fn pretokenize_lowercases_and_isolates_punctuation() {
        let model = model_with(&[]);
        assert_eq!(
            model.normalize_and_pretokenize("Halo, dunia"),
            vec!["halo", ",", "dunia"]
        );
    }

    #[test]
    fn pretokenize_collapses_whitespace_runs() {
        let model = model_with(&[]);
        assert_eq!(model.normalize_and_pretokenize("a  b"), vec!["a", "b"]);
        assert_eq!(
            model.normalize_and_pretokenize(" a\t\nb "),
            vec!["a", "b"]
        );
    }

    #[test]
    fn pretokenize_nfc_composes() {
        let model = model_with(&[]);
        // "e" + combining acute composes to a single scalar under NFC.
        let words = model.normalize_and_pretokenize("cafe\u{0301}");
        assert_eq!(words, vec!["caf\u{00e9}"]);
    }

    #[test]
    fn pretokenize_without_lowercasing() {
        let vocab = model_with(&[]).vocab().clone();
        let model =
            TokenizerModel::new(vocab, false, NormalizationForm::CanonicalComposed, 100).unwrap();
        assert_eq!(model.normalize_and_pretokenize("Halo"), vec!["Halo"]);
    }

    #[test]
    fn tokenize_whole_word_hit() {
        let model = model_with(&["halo"]);
        assert_eq!(model.tokenize_word("halo"), vec!["halo"]);
    }

    #[test]
    fn tokenize_greedy_longest_match() {
        // vocab {a, ab, ##c, ##bc}: "abc" takes "ab" first, then "##c".
        let model = model_with(&["a", "ab", "##c", "##bc"]);
        assert_eq!(model.tokenize_word("abc"), vec!["ab", "##c"]);
    }

    #[test]
    fn tokenize_unmatched_word_is_single_unk() {
        let model = model_with(&["a"]);
        assert_eq!(model.tokenize_word("xyz"), vec!["[UNK]"]);
    }

    #[test]
    fn tokenize_mid_word_failure_is_single_unk() {
        // "ax": "a" matches bare but "##x" has no entry -> whole word UNK.
        let model = model_with(&["a"]);
        assert_eq!(model.tokenize_word("ax"), vec!["[UNK]"]);
    }

    #[test]
    fn tokenize_overlong_word_is_unk() {
        let vocab = model_with(&["a", "##a"]).vocab().clone();
        let model =
            TokenizerModel::new(vocab, true, NormalizationForm::CanonicalComposed, 3).unwrap();
        assert_eq!(model.tokenize_word("aaaa"), vec!["[UNK]"]);
        assert_eq!(model.tokenize_word("aaa"), vec!["a", "##a", "##a"]);
    }

    #[test]
    fn encode_empty_with_specials_is_frame_only() {
        let model = model_with(&[]);
        assert_eq!(
            model.encode("", true),
            vec![model.vocab().cls_id(), model.vocab().sep_id()]
        );
        assert!(model.encode("", false).is_empty());
    }

    #[test]
    fn encode_framing_identity() {
        let model = model_with(&["halo", "dunia", ","]);
        for text in ["", "halo", "Halo, dunia", "xyz halo"] {
            let bare = model.encode(text, false);
            let framed = model.encode(text, true);
            let mut expected = vec![model.vocab().cls_id()];
            expected.extend_from_slice(&bare);
            expected.push(model.vocab().sep_id());
            assert_eq!(framed, expected, "framing identity for {text:?}");
        }
    }

    #[test]
    fn encode_single_word() {
        let model = model_with(&["halo"]);
        let halo = model.vocab().id("halo").unwrap();
        assert_eq!(
            model.encode("halo", true),
            vec![model.vocab().cls_id(), halo, model.vocab().sep_id()]
        );
    }

    #[test]
    fn decode_specials_only_is_empty() {
        let model = model_with(&[]);
        let ids = [model.vocab().cls_id(), model.vocab().sep_id()];
        assert_eq!(model.decode(&ids).unwrap(), "");
    }

    #[test]
    fn decode_fuses_continuations() {
        let model = model_with(&["ab", "##c"]);
        let ids = [
            model.vocab().id("ab").unwrap(),
            model.vocab().id("##c").unwrap(),
        ];
        assert_eq!(model.decode(&ids).unwrap(), "abc");
    }

    #[test]
    fn decode_orphan_continuation_strips_prefix() {
        let model = model_with(&["##c"]);
        let ids = [model.vocab().id("##c").unwrap()];
        assert_eq!(model.decode(&ids).unwrap(), "c");
    }

    #[test]
    fn decode_out_of_range_names_position() {
        let model = model_with(&[]);
        let err = model.decode(&[0, 999]).unwrap_err();
        match err {
            Error::TokenIdOutOfRange { id, position, .. } => {
                assert_eq!(id, 999);
                assert_eq!(position, 1);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn round_trip_in_vocab_text() {
        let model = model_with(&["halo", "dunia", "apa", "kabar"]);
        let text = "halo dunia  apa kabar";
        let ids = model.encode(text, true);
        assert_eq!(model.decode(&ids).unwrap(), "halo dunia apa kabar");
    }

    #[test]
    fn unicode_punctuation_is_isolated() {
        let model = model_with(&[]);
        // U+2014 em dash is category Pd.
        assert_eq!(
            model.normalize_and_pretokenize("a\u{2014}b"),
            vec!["a", "\u{2014}", "b"]
        );
        assert!(is_punctuation('\u{2014}'));
        assert!(is_punctuation(','));
        assert!(!is_punctuation('a'));
        assert!(!is_punctuation('5'));
    }
}
