//! Synthetic code-mixing: substitute a seeded sample of lexicon-covered
//! words with their L2 translations.
//!
//! Eligible words are whitespace tokens whose punctuation-stripped,
//! lowercased core is a lexicon key. Per sentence, `ceil(R * eligible)`
//! positions are replaced; leading capitalization and attached
//! punctuation are carried over, and everything else stays byte-identical.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::rng::{keyed_rng, sample_indices};
use crate::tokenizer::is_punctuation;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A source-word to target-word substitution table for one L2 language.
/// Keys and values are stored lowercase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    l2_code: String,
    entries: std::collections::BTreeMap<String, String>,
}

impl Lexicon {
    pub fn new(
        l2_code: impl Into<String>,
        pairs: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let mut entries = std::collections::BTreeMap::new();
        for (line, (source, target)) in pairs.into_iter().enumerate() {
            Self::insert(&mut entries, &source, &target, line + 1)?;
        }
        Ok(Self {
            l2_code: l2_code.into(),
            entries,
        })
    }

    /// Parse the TSV form: `source<TAB>target` per line, `#` comments and
    /// blank lines ignored.
    pub fn parse_tsv(l2_code: impl Into<String>, content: &str) -> Result<Self> {
        let mut entries = std::collections::BTreeMap::new();
        for (index, raw) in content.lines().enumerate() {
            let line = index + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = raw.split('\t');
            let source = fields.next().unwrap_or("");
            let target = fields.next().ok_or_else(|| Error::InvalidLexicon {
                line,
                reason: "expected source<TAB>target".to_string(),
            })?;
            if fields.next().is_some() {
                return Err(Error::InvalidLexicon {
                    line,
                    reason: "more than two tab-separated fields".to_string(),
                });
            }
            Self::insert(&mut entries, source, target, line)?;
        }
        Ok(Self {
            l2_code: l2_code.into(),
            entries,
        })
    }

    pub fn load_tsv(path: impl AsRef<Path>, l2_code: impl Into<String>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(l2_code, &content)
    }

    fn insert(
        entries: &mut std::collections::BTreeMap<String, String>,
        source: &str,
        target: &str,
        line: usize,
    ) -> Result<()> {
        let source = source.trim().to_lowercase();
        let target = target.trim().to_lowercase();
        if source.is_empty() || target.is_empty() {
            return Err(Error::InvalidLexicon {
                line,
                reason: "empty source or target word".to_string(),
            });
        }
        if entries.insert(source.clone(), target).is_some() {
            return Err(Error::InvalidLexicon {
                line,
                reason: format!("duplicate source word {source:?}"),
            });
        }
        Ok(())
    }

    pub fn l2_code(&self) -> &str {
        &self.l2_code
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn translate(&self, source_lowercase: &str) -> Option<&str> {
        self.entries.get(source_lowercase).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeMixConfig {
    /// Perturbation ratio R: the fraction of eligible words replaced.
    pub ratio: f64,
    pub seed: u64,
}

impl CodeMixConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::InvalidArgument(format!(
                "perturbation ratio {} is outside [0, 1]",
                self.ratio
            )));
        }
        Ok(())
    }
}

/// One substitution: which word position changed and to what.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    /// Index among the sentence's whitespace tokens.
    pub position: usize,
    /// The original word core as it appeared.
    pub source: String,
    /// The substituted word core (capitalization carried over).
    pub target: String,
}

/// Replace `ceil(R * eligible)` eligible words, seeded by the config.
pub fn perturb_sentence(
    sentence: &str,
    lexicon: &Lexicon,
    cfg: &CodeMixConfig,
) -> Result<(String, Vec<Replacement>)> {
    cfg.validate()?;
    let mut rng = keyed_rng(cfg.seed, "codemix-sentence", &[]);
    let outcome = perturb_with_rng(sentence, lexicon, cfg.ratio, &mut rng);
    Ok((outcome.text, outcome.log))
}

struct PerturbOutcome {
    text: String,
    eligible: usize,
    log: Vec<Replacement>,
}

/// `ceil(R * n)`, snapping products within float noise of an integer so
/// e.g. 0.4 * 5 counts as exactly 2.
fn replacement_count(ratio: f64, eligible: usize) -> usize {
    let product = ratio * eligible as f64;
    let nearest = product.round();
    if (product - nearest).abs() < 1e-9 {
        nearest as usize
    } else {
        product.ceil() as usize
    }
}

fn perturb_with_rng(
    sentence: &str,
    lexicon: &Lexicon,
    ratio: f64,
    rng: &mut ChaCha8Rng,
) -> PerturbOutcome {
    // Byte spans of whitespace tokens; everything between them is
    // reproduced verbatim so an unperturbed sentence stays byte-identical.
    let tokens: Vec<(usize, usize)> = token_spans(sentence);

    struct Eligible {
        token_index: usize,
        core_start: usize,
        core_end: usize,
        target: String,
    }
    let mut eligible: Vec<Eligible> = Vec::new();
    for (token_index, &(start, end)) in tokens.iter().enumerate() {
        let token = &sentence[start..end];
        let (core_offset, core) = strip_punctuation(token);
        if core.is_empty() {
            continue;
        }
        let key = core.to_lowercase();
        if let Some(target) = lexicon.translate(&key) {
            eligible.push(Eligible {
                token_index,
                core_start: start + core_offset,
                core_end: start + core_offset + core.len(),
                target: carry_capitalization(core, target),
            });
        }
    }

    let k = replacement_count(ratio, eligible.len()).min(eligible.len());
    let picked = sample_indices(rng, eligible.len(), k);

    let mut text = String::with_capacity(sentence.len());
    let mut cursor = 0;
    let mut log = Vec::with_capacity(k);
    for index in &picked {
        let chosen = &eligible[*index];
        text.push_str(&sentence[cursor..chosen.core_start]);
        text.push_str(&chosen.target);
        cursor = chosen.core_end;
        log.push(Replacement {
            position: chosen.token_index,
            source: sentence[chosen.core_start..chosen.core_end].to_string(),
            target: chosen.target.clone(),
        });
    }
    text.push_str(&sentence[cursor..]);

    PerturbOutcome {
        text,
        eligible: eligible.len(),
        log,
    }
}

fn token_spans(sentence: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    for (offset, ch) in sentence.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                spans.push((s, offset));
            }
        } else if start.is_none() {
            start = Some(offset);
        }
    }
    if let Some(s) = start {
        spans.push((s, sentence.len()));
    }
    spans
}

/// Byte offset of the core within the token, plus the core itself, after
/// trimming leading and trailing punctuation.
fn strip_punctuation(token: &str) -> (usize, &str) {
    let trimmed_start = token.trim_start_matches(is_punctuation);
    let offset = token.len() - trimmed_start.len();
    let core = trimmed_start.trim_end_matches(is_punctuation);
    (offset, core)
}

fn carry_capitalization(source_core: &str, target: &str) -> String {
    let source_upper = source_core
        .chars()
        .next()
        .is_some_and(|c| c.is_uppercase());
    if !source_upper {
        return target.to_string();
    }
    let mut chars = target.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Aggregate outcome of a dataset perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CodeMixSummary {
    pub sentences: u64,
    pub total_eligible: u64,
    pub total_replaced: u64,
    /// total_replaced / total_eligible, 0 when nothing was eligible.
    pub realized_ratio: f64,
}

/// Perturb every document, deriving an independent stream per document
/// from (seed, document id) — permuting the input permutes the outputs
/// identically.
pub fn perturb_dataset(
    documents: &[Document],
    lexicon: &Lexicon,
    cfg: &CodeMixConfig,
) -> Result<(Vec<Document>, CodeMixSummary)> {
    cfg.validate()?;
    let perturb_one = |doc: &Document| -> (Document, u64, u64) {
        let mut rng = keyed_rng(cfg.seed, "codemix-doc", doc.id.as_bytes());
        let outcome = perturb_with_rng(&doc.text, lexicon, cfg.ratio, &mut rng);
        let mut perturbed = doc.clone();
        perturbed.text = outcome.text;
        (perturbed, outcome.eligible as u64, outcome.log.len() as u64)
    };

    #[cfg(feature = "parallel")]
    let results: Vec<(Document, u64, u64)> = documents.par_iter().map(perturb_one).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<(Document, u64, u64)> = documents.iter().map(perturb_one).collect();

    Ok(summarize(results))
}

/// Sequential twin of [`perturb_dataset`] for comparison benchmarks.
pub fn perturb_dataset_seq(
    documents: &[Document],
    lexicon: &Lexicon,
    cfg: &CodeMixConfig,
) -> Result<(Vec<Document>, CodeMixSummary)> {
    cfg.validate()?;
    let results: Vec<(Document, u64, u64)> = documents
        .iter()
        .map(|doc| {
            let mut rng = keyed_rng(cfg.seed, "codemix-doc", doc.id.as_bytes());
            let outcome = perturb_with_rng(&doc.text, lexicon, cfg.ratio, &mut rng);
            let mut perturbed = doc.clone();
            perturbed.text = outcome.text;
            (perturbed, outcome.eligible as u64, outcome.log.len() as u64)
        })
        .collect();
    Ok(summarize(results))
}

fn summarize(results: Vec<(Document, u64, u64)>) -> (Vec<Document>, CodeMixSummary) {
    let mut summary = CodeMixSummary {
        sentences: results.len() as u64,
        ..CodeMixSummary::default()
    };
    let mut documents = Vec::with_capacity(results.len());
    for (doc, eligible, replaced) in results {
        summary.total_eligible += eligible;
        summary.total_replaced += replaced;
        documents.push(doc);
    }
    summary.realized_ratio = if summary.total_eligible == 0 {
        0.0
    } else {
        summary.total_replaced as f64 / summary.total_eligible as f64
    };
    (documents, summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexicon(pairs: &[(&str, &str)]) -> Lexicon {
        Lexicon::new(
            "eng",
            pairs
                .iter()
                .map(|(s, t)| (s.to_string(), t.to_string())),
        )
        .unwrap()
    }

    fn cfg(ratio: f64, seed: u64) -> CodeMixConfig {
        CodeMixConfig { ratio, seed }
    }

    #[test]
    fn ratio_zero_is_identity() {
        let lex = lexicon(&[("halo", "hello"), ("dunia", "world")]);
        let sentence = "Halo,  dunia  indah";
        let (out, log) = perturb_sentence(sentence, &lex, &cfg(0.0, 1)).unwrap();
        assert_eq!(out, sentence);
        assert!(log.is_empty());
    }

    #[test]
    fn replacement_count_snaps_float_noise() {
        assert_eq!(replacement_count(0.4, 5), 2);
        assert_eq!(replacement_count(0.0, 100), 0);
        assert_eq!(replacement_count(0.41, 5), 3);
        assert_eq!(replacement_count(1.0, 7), 7);
        assert_eq!(replacement_count(0.1, 1), 1);
    }

    #[test]
    fn five_eligible_at_point_four_replaces_two() {
        let lex = lexicon(&[
            ("a", "x"),
            ("b", "y"),
            ("c", "z"),
            ("d", "w"),
            ("e", "v"),
        ]);
        let (out, log) = perturb_sentence("a b c d e", &lex, &cfg(0.4, 9)).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(out.split_whitespace().count(), 5);
    }

    #[test]
    fn deterministic_for_same_inputs() {
        let lex = lexicon(&[("halo", "hello"), ("dunia", "world"), ("indah", "beautiful")]);
        let a = perturb_sentence("halo dunia indah", &lex, &cfg(0.5, 42)).unwrap();
        let b = perturb_sentence("halo dunia indah", &lex, &cfg(0.5, 42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn capitalization_and_punctuation_carry_over() {
        let lex = lexicon(&[("halo", "hello")]);
        let (out, log) = perturb_sentence("Halo, dunia", &lex, &cfg(1.0, 0)).unwrap();
        assert_eq!(out, "Hello, dunia");
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].position, 0);
        assert_eq!(log[0].source, "Halo");
        assert_eq!(log[0].target, "Hello");
    }

    #[test]
    fn non_eligible_words_stay_byte_identical() {
        let lex = lexicon(&[("dunia", "world")]);
        let sentence = "Halo,\tdunia  \"indah\"";
        let (out, _) = perturb_sentence(sentence, &lex, &cfg(1.0, 3)).unwrap();
        assert_eq!(out, "Halo,\tworld  \"indah\"");
    }

    #[test]
    fn word_count_is_preserved() {
        let lex = lexicon(&[("a", "xx"), ("b", "yy"), ("c", "zz")]);
        for seed in 0..20 {
            let sentence = "a b c a b c borderline";
            let (out, _) = perturb_sentence(sentence, &lex, &cfg(0.7, seed)).unwrap();
            assert_eq!(
                out.split_whitespace().count(),
                sentence.split_whitespace().count()
            );
        }
    }

    #[test]
    fn no_eligible_words_is_unchanged() {
        let lex = lexicon(&[("zzz", "qqq")]);
        let (out, log) = perturb_sentence("nothing matches here", &lex, &cfg(0.9, 1)).unwrap();
        assert_eq!(out, "nothing matches here");
        assert!(log.is_empty());
    }

    #[test]
    fn all_punctuation_token_is_not_eligible() {
        let lex = lexicon(&[("...", "dots")]);
        // The key "..." survives lexicon normalization but a token of
        // pure punctuation has an empty core, so nothing matches.
        let (out, log) = perturb_sentence("wait ... here", &lex, &cfg(1.0, 1)).unwrap();
        assert_eq!(out, "wait ... here");
        assert!(log.is_empty());
    }

    #[test]
    fn dataset_summary_and_ceiling_bound() {
        let lex = lexicon(&[("a", "x"), ("b", "y"), ("c", "z")]);
        let docs: Vec<Document> = (0..30)
            .map(|i| Document {
                id: format!("d{i}"),
                lang: "ind".to_string(),
                source: "s".to_string(),
                text: "a b c filler".to_string(),
            })
            .collect();
        let config = cfg(0.4, 17);
        let (out, summary) = perturb_dataset(&docs, &lex, &config).unwrap();
        assert_eq!(out.len(), 30);
        assert_eq!(summary.sentences, 30);
        assert_eq!(summary.total_eligible, 90);
        // ceil(0.4 * 3) = 2 per document.
        assert_eq!(summary.total_replaced, 60);
        assert!(summary.realized_ratio >= config.ratio);
        assert!(summary.realized_ratio <= config.ratio + 1.0 / 3.0);
    }

    #[test]
    fn empty_dataset_zeroed_summary() {
        let lex = lexicon(&[("a", "b")]);
        let (out, summary) = perturb_dataset(&[], &lex, &cfg(0.4, 1)).unwrap();
        assert!(out.is_empty());
        assert_eq!(summary, CodeMixSummary::default());
    }

    #[test]
    fn permuting_documents_permutes_outputs() {
        let lex = lexicon(&[("a", "x"), ("b", "y"), ("c", "z")]);
        let docs: Vec<Document> = (0..10)
            .map(|i| Document {
                id: format!("doc-{i}"),
                lang: "ind".to_string(),
                source: "s".to_string(),
                text: "a b c a b".to_string(),
            })
            .collect();
        let config = cfg(0.5, 23);
        let (forward, _) = perturb_dataset(&docs, &lex, &config).unwrap();
        let mut reversed = docs.clone();
        reversed.reverse();
        let (backward, _) = perturb_dataset(&reversed, &lex, &config).unwrap();
        let mut backward_restored = backward;
        backward_restored.reverse();
        assert_eq!(forward, backward_restored);
    }

    #[test]
    fn parallel_matches_sequential() {
        let lex = lexicon(&[("a", "x"), ("b", "y")]);
        let docs: Vec<Document> = (0..25)
            .map(|i| Document {
                id: format!("d{i}"),
                lang: "ind".to_string(),
                source: "s".to_string(),
                text: "a b a b filler".to_string(),
            })
            .collect();
        let config = cfg(0.4, 99);
        assert_eq!(
            perturb_dataset(&docs, &lex, &config).unwrap(),
            perturb_dataset_seq(&docs, &lex, &config).unwrap()
        );
    }

    #[test]
    fn tsv_parsing() {
        let content = "# comment line\nhalo\thello\n\nDunia\tWorld\n";
        let lex = Lexicon::parse_tsv("eng", content).unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.translate("halo"), Some("hello"));
        assert_eq!(lex.translate("dunia"), Some("world"));
        assert_eq!(lex.l2_code(), "eng");
    }

    #[test]
    fn tsv_rejects_bad_lines() {
        assert!(Lexicon::parse_tsv("eng", "onlyoneword\n").is_err());
        assert!(Lexicon::parse_tsv("eng", "a\tb\tc\n").is_err());
        assert!(Lexicon::parse_tsv("eng", "\tb\n").is_err());
        assert!(Lexicon::parse_tsv("eng", "a\tb\na\tc\n").is_err());
    }

    #[test]
    fn config_validates_ratio() {
        assert!(cfg(1.5, 0).validate().is_err());
        assert!(cfg(-0.1, 0).validate().is_err());
        assert!(cfg(0.4, 0).validate().is_ok());
    }
}
