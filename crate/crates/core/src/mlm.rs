//! Fixed-length sequence packing and dynamic masking.
//!
//! Packing encodes every document with [CLS]/[SEP] framing, concatenates
//! the ids in input order into one stream, and cuts non-overlapping
//! chunks of exactly L ids; the final partial chunk is discarded.
//!
//! Masking selects positions at the configured rate and corrupts them
//! mask/random/keep (default 0.8/0.1/0.1). The stream is keyed by
//! (seed, epoch, sequence index), so every epoch sees fresh masks while
//! any (seed, epoch, index) triple replays exactly — masking stays
//! reproducible without storing per-example state.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::rng::{counter_key, keyed_rng, sample_indices, uniform_f64, uniform_index};
use crate::tokenizer::TokenizerModel;
use crate::vocab::Vocabulary;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const PAK_MAGIC: &[u8; 4] = b"PAK1";

/// Label value marking unselected positions in exported examples.
pub const IGNORE_LABEL: i64 = -100;

/// A token-id sequence of exactly the packing length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedSequence {
    pub ids: Vec<u32>,
}

/// How masked positions are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// Independent per-position selection with probability `mask_fraction`.
    #[default]
    Bernoulli,
    /// Exactly `round(mask_fraction * maskable)` positions per sequence.
    ExactCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskingConfig {
    pub mask_fraction: f64,
    pub mask_prob: f64,
    pub random_prob: f64,
    pub keep_prob: f64,
    /// Special tokens ([CLS]/[SEP]/... inside packed chunks) are not
    /// maskable unless this is set to false.
    pub exclude_specials: bool,
    pub selection: SelectionMode,
}

impl Default for MaskingConfig {
    fn default() -> Self {
        Self {
            mask_fraction: 0.15,
            mask_prob: 0.8,
            random_prob: 0.1,
            keep_prob: 0.1,
            exclude_specials: true,
            selection: SelectionMode::Bernoulli,
        }
    }
}

impl MaskingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidMaskingConfig(reason));
        if !(self.mask_fraction > 0.0 && self.mask_fraction < 1.0) {
            return bad(format!(
                "mask_fraction {} is outside (0, 1)",
                self.mask_fraction
            ));
        }
        for (name, p) in [
            ("mask_prob", self.mask_prob),
            ("random_prob", self.random_prob),
            ("keep_prob", self.keep_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} is outside [0, 1]"));
            }
        }
        let sum = self.mask_prob + self.random_prob + self.keep_prob;
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!(
                "mask_prob + random_prob + keep_prob = {sum}, expected 1"
            ));
        }
        Ok(())
    }
}

/// What happened to each position of a masked example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskAction {
    Untouched,
    Masked,
    Randomized,
    Kept,
}

/// One training example: corrupted inputs plus the information needed to
/// reconstruct and score the original sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedExample {
    pub input_ids: Vec<u32>,
    /// Original id at selected positions, `None` (ignore) elsewhere.
    pub labels: Vec<Option<u32>>,
    pub actions: Vec<MaskAction>,
}

impl MaskedExample {
    /// Undo masked/randomized positions to recover the packed sequence.
    pub fn reconstruct_original(&self) -> Vec<u32> {
        self.input_ids
            .iter()
            .zip(&self.labels)
            .map(|(&input, label)| label.unwrap_or(input))
            .collect()
    }
}

/// Encode all documents with [CLS]/[SEP] framing and cut the concatenated
/// stream into chunks of exactly `length`; the remainder is discarded.
pub fn pack_sequences(
    documents: &[Document],
    model: &TokenizerModel,
    length: usize,
) -> Result<Vec<PackedSequence>> {
    let stream = encode_stream(documents, model, length)?;
    Ok(chunk_stream(&stream, length))
}

/// Sequential twin of [`pack_sequences`] for comparison benchmarks.
pub fn pack_sequences_seq(
    documents: &[Document],
    model: &TokenizerModel,
    length: usize,
) -> Result<Vec<PackedSequence>> {
    check_length(length)?;
    let mut stream = Vec::new();
    for doc in documents {
        stream.extend(model.encode(&doc.text, true));
    }
    Ok(chunk_stream(&stream, length))
}

fn check_length(length: usize) -> Result<()> {
    if length < 2 {
        return Err(Error::InvalidArgument(format!(
            "sequence length {length} must be at least 2"
        )));
    }
    Ok(())
}

fn encode_stream(
    documents: &[Document],
    model: &TokenizerModel,
    length: usize,
) -> Result<Vec<u32>> {
    check_length(length)?;
    // Per-document encoding fans out; concatenation keeps input order.
    #[cfg(feature = "parallel")]
    let encoded: Vec<Vec<u32>> = documents
        .par_iter()
        .map(|doc| model.encode(&doc.text, true))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let encoded: Vec<Vec<u32>> = documents
        .iter()
        .map(|doc| model.encode(&doc.text, true))
        .collect();
    Ok(encoded.concat())
}

fn chunk_stream(stream: &[u32], length: usize) -> Vec<PackedSequence> {
    stream
        .chunks_exact(length)
        .map(|chunk| PackedSequence {
            ids: chunk.to_vec(),
        })
        .collect()
}

/// Mask one sequence. The RNG stream is keyed by (seed, epoch,
/// sequence_index); the draw protocol is part of the contract:
/// positions ascending, one selection draw per maskable position
/// (Bernoulli mode), then per selected position one action draw and,
/// for the random branch, one pool-index draw.
pub fn apply_masking(
    sequence: &PackedSequence,
    cfg: &MaskingConfig,
    vocab: &Vocabulary,
    seed: u64,
    epoch: u64,
    sequence_index: u64,
) -> Result<MaskedExample> {
    cfg.validate()?;
    let pool = vocab.non_special_ids();
    if pool.is_empty() {
        return Err(Error::EmptyReplacementPool);
    }
    let vocab_size = vocab.size() as u32;
    if let Some(pos) = sequence.ids.iter().position(|&id| id >= vocab_size) {
        return Err(Error::TokenIdOutOfRange {
            id: sequence.ids[pos],
            position: pos,
            vocab_size: vocab.size(),
        });
    }

    let maskable: Vec<usize> = sequence
        .ids
        .iter()
        .enumerate()
        .filter(|(_, &id)| !cfg.exclude_specials || !vocab.is_special_id(id))
        .map(|(pos, _)| pos)
        .collect();

    let mut rng = keyed_rng(seed, "mlm-mask", &counter_key(&[epoch, sequence_index]));
    let selected: Vec<usize> = match cfg.selection {
        SelectionMode::Bernoulli => maskable
            .iter()
            .copied()
            .filter(|_| uniform_f64(&mut rng) < cfg.mask_fraction)
            .collect(),
        SelectionMode::ExactCount => {
            let k = (cfg.mask_fraction * maskable.len() as f64).round() as usize;
            sample_indices(&mut rng, maskable.len(), k)
                .into_iter()
                .map(|i| maskable[i])
                .collect()
        }
    };

    let mut input_ids = sequence.ids.clone();
    let mut labels = vec![None; sequence.ids.len()];
    let mut actions = vec![MaskAction::Untouched; sequence.ids.len()];
    for pos in selected {
        let original = sequence.ids[pos];
        labels[pos] = Some(original);
        let draw = uniform_f64(&mut rng);
        if draw < cfg.mask_prob {
            actions[pos] = MaskAction::Masked;
            input_ids[pos] = vocab.mask_id();
        } else if draw < cfg.mask_prob + cfg.random_prob {
            actions[pos] = MaskAction::Randomized;
            input_ids[pos] = pool[uniform_index(&mut rng, pool.len())];
        } else {
            actions[pos] = MaskAction::Kept;
        }
    }

    Ok(MaskedExample {
        input_ids,
        labels,
        actions,
    })
}

/// Mask a batch, indexing sequences by position. Embarrassingly parallel:
/// each sequence has its own keyed stream, so the output is identical
/// under any thread count.
pub fn apply_masking_batch(
    sequences: &[PackedSequence],
    cfg: &MaskingConfig,
    vocab: &Vocabulary,
    seed: u64,
    epoch: u64,
) -> Result<Vec<MaskedExample>> {
    #[cfg(feature = "parallel")]
    {
        sequences
            .par_iter()
            .enumerate()
            .map(|(index, seq)| apply_masking(seq, cfg, vocab, seed, epoch, index as u64))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        apply_masking_batch_seq(sequences, cfg, vocab, seed, epoch)
    }
}

/// Sequential twin of [`apply_masking_batch`] for comparison benchmarks.
pub fn apply_masking_batch_seq(
    sequences: &[PackedSequence],
    cfg: &MaskingConfig,
    vocab: &Vocabulary,
    seed: u64,
    epoch: u64,
) -> Result<Vec<MaskedExample>> {
    sequences
        .iter()
        .enumerate()
        .map(|(index, seq)| apply_masking(seq, cfg, vocab, seed, epoch, index as u64))
        .collect()
}

/// Empirical masking rates over a stream of examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MaskingStatsReport {
    /// Selected positions over maskable positions.
    pub selected_fraction: f64,
    /// Shares among selected positions.
    pub mask_share: f64,
    pub random_share: f64,
    pub keep_share: f64,
    /// Number of examples observed.
    pub count: u64,
}

/// Exact recount of the masking rates. Maskable positions are recovered
/// from each example's reconstructed original ids using the same
/// special-token rule the masker applied.
pub fn masking_stats(
    examples: &[MaskedExample],
    vocab: &Vocabulary,
    exclude_specials: bool,
) -> MaskingStatsReport {
    let mut maskable = 0u64;
    let mut selected = 0u64;
    let mut masked = 0u64;
    let mut randomized = 0u64;
    let mut kept = 0u64;
    for example in examples {
        let original = example.reconstruct_original();
        for (pos, &id) in original.iter().enumerate() {
            if exclude_specials && vocab.is_special_id(id) {
                continue;
            }
            maskable += 1;
            match example.actions[pos] {
                MaskAction::Untouched => {}
                MaskAction::Masked => {
                    selected += 1;
                    masked += 1;
                }
                MaskAction::Randomized => {
                    selected += 1;
                    randomized += 1;
                }
                MaskAction::Kept => {
                    selected += 1;
                    kept += 1;
                }
            }
        }
    }
    let ratio = |num: u64, denom: u64| {
        if denom == 0 {
            0.0
        } else {
            num as f64 / denom as f64
        }
    };
    MaskingStatsReport {
        selected_fraction: ratio(selected, maskable),
        mask_share: ratio(masked, selected),
        random_share: ratio(randomized, selected),
        keep_share: ratio(kept, selected),
        count: examples.len() as u64,
    }
}

/// Binary layout: magic "PAK1", u32 LE sequence length, u64 LE sequence
/// count, then ids as u32 LE.
pub fn write_packed(
    sequences: &[PackedSequence],
    length: usize,
    mut out: impl std::io::Write,
) -> Result<()> {
    for (i, seq) in sequences.iter().enumerate() {
        if seq.ids.len() != length {
            return Err(Error::InvalidArgument(format!(
                "sequence {i} has length {}, expected {length}",
                seq.ids.len()
            )));
        }
    }
    let mut buf = Vec::with_capacity(16 + sequences.len() * length * 4);
    buf.extend_from_slice(PAK_MAGIC);
    buf.extend_from_slice(&(length as u32).to_le_bytes());
    buf.extend_from_slice(&(sequences.len() as u64).to_le_bytes());
    for seq in sequences {
        for id in &seq.ids {
            buf.extend_from_slice(&id.to_le_bytes());
        }
    }
    out.write_all(&buf)
        .map_err(|e| Error::format("PAK1", format!("write failed: {e}")))
}

pub fn save_packed(
    sequences: &[PackedSequence],
    length: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    write_packed(sequences, length, &mut writer)?;
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_packed(mut input: impl std::io::Read) -> Result<(usize, Vec<PackedSequence>)> {
    let bad = |reason: &str| Error::format("PAK1", reason);
    let mut header = [0u8; 16];
    input
        .read_exact(&mut header)
        .map_err(|_| bad("file too short for header"))?;
    if &header[..4] != PAK_MAGIC {
        return Err(bad("bad magic; expected PAK1"));
    }
    let length = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    if length == 0 {
        return Err(bad("zero sequence length"));
    }
    let mut payload = Vec::new();
    input
        .read_to_end(&mut payload)
        .map_err(|_| bad("truncated payload"))?;
    if payload.len() != count * length * 4 {
        return Err(bad(&format!(
            "payload is {} bytes, expected {} for {count} sequences of {length}",
            payload.len(),
            count * length * 4
        )));
    }
    let ids: Vec<u32> = payload
        .chunks_exact(4)
        .map(|chunk| u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
        .collect();
    Ok((length, chunk_stream(&ids, length)))
}

pub fn load_packed(path: impl AsRef<Path>) -> Result<(usize, Vec<PackedSequence>)> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_packed(std::io::BufReader::new(file))
}

/// JSONL wire form of a masked example, for inspection and re-reading.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct MaskedExampleRecord {
    pub input_ids: Vec<u32>,
    /// Original ids at selected positions, -100 elsewhere.
    pub labels: Vec<i64>,
    pub actions: Vec<MaskAction>,
}

impl From<&MaskedExample> for MaskedExampleRecord {
    fn from(example: &MaskedExample) -> Self {
        Self {
            input_ids: example.input_ids.clone(),
            labels: example
                .labels
                .iter()
                .map(|label| label.map_or(IGNORE_LABEL, i64::from))
                .collect(),
            actions: example.actions.clone(),
        }
    }
}

impl TryFrom<MaskedExampleRecord> for MaskedExample {
    type Error = Error;

    fn try_from(record: MaskedExampleRecord) -> Result<MaskedExample> {
        if record.labels.len() != record.input_ids.len()
            || record.actions.len() != record.input_ids.len()
        {
            return Err(Error::format(
                "masked example",
                "input_ids, labels, and actions lengths differ",
            ));
        }
        let labels = record
            .labels
            .iter()
            .map(|&label| {
                if label == IGNORE_LABEL {
                    Ok(None)
                } else {
                    u32::try_from(label).map(Some).map_err(|_| {
                        Error::format("masked example", format!("label {label} is not a token id"))
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MaskedExample {
            input_ids: record.input_ids,
            labels,
            actions: record.actions,
        })
    }
}

pub fn write_masked_jsonl(
    examples: &[MaskedExample],
    mut out: impl std::io::Write,
) -> std::io::Result<()> {
    for example in examples {
        let record = MaskedExampleRecord::from(example);
        let line = serde_json::to_string(&record).expect("record serialization is infallible");
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_masked_jsonl(input: &str) -> Result<Vec<MaskedExample>> {
    input
        .lines()
        .filter(|line| !line.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let record: MaskedExampleRecord = serde_json::from_str(line)
                .map_err(|e| Error::format("masked example", format!("line {}: {e}", i + 1)))?;
            MaskedExample::try_from(record)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::SpecialTokens;

    fn vocab(extra: &[&str]) -> Vocabulary {
        let specials = SpecialTokens::default();
        let mut tokens: Vec<String> = specials.in_order().map(str::to_string).to_vec();
        tokens.extend(extra.iter().map(|t| t.to_string()));
        Vocabulary::new(tokens, specials).unwrap()
    }

    fn model(extra: &[&str]) -> TokenizerModel {
        TokenizerModel::with_defaults(vocab(extra))
    }

    fn doc(id: &str, text: &str) -> Document {
        Document {
            id: id.to_string(),
            lang: "ind".to_string(),
            source: "test".to_string(),
            text: text.to_string(),
        }
    }

    #[test]
    fn packing_discards_partial_chunk() {
        // Each "a" document encodes to [CLS] a [SEP] = 3 ids; 7 documents
        // give a 21-id stream; L=4 -> 5 sequences, 1 id discarded.
        let m = model(&["a"]);
        let docs: Vec<Document> = (0..7).map(|i| doc(&i.to_string(), "a")).collect();
        let packed = pack_sequences(&docs, &m, 4).unwrap();
        assert_eq!(packed.len(), 5);
        assert!(packed.iter().all(|s| s.ids.len() == 4));
    }

    #[test]
    fn packing_stream_shorter_than_length_is_empty() {
        let m = model(&["a"]);
        let packed = pack_sequences(&[doc("1", "a")], &m, 128).unwrap();
        assert!(packed.is_empty());
    }

    #[test]
    fn packing_preserves_stream_prefix() {
        let m = model(&["a", "b", "c"]);
        let docs = vec![doc("1", "a b c"), doc("2", "c b"), doc("3", "a a a a")];
        let mut stream = Vec::new();
        for d in &docs {
            stream.extend(m.encode(&d.text, true));
        }
        let length = 5;
        let packed = pack_sequences(&docs, &m, length).unwrap();
        let rebuilt: Vec<u32> = packed.iter().flat_map(|s| s.ids.clone()).collect();
        let expected = (stream.len() / length) * length;
        assert_eq!(rebuilt.len(), expected);
        assert_eq!(rebuilt, stream[..expected]);
    }

    #[test]
    fn packing_rejects_tiny_length() {
        let m = model(&["a"]);
        assert!(pack_sequences(&[doc("1", "a")], &m, 1).is_err());
    }

    #[test]
    fn parallel_and_sequential_packing_agree() {
        let m = model(&["a", "b"]);
        let docs: Vec<Document> = (0..30)
            .map(|i| doc(&i.to_string(), "a b a b a"))
            .collect();
        assert_eq!(
            pack_sequences(&docs, &m, 8).unwrap(),
            pack_sequences_seq(&docs, &m, 8).unwrap()
        );
    }

    fn packed(ids: Vec<u32>) -> PackedSequence {
        PackedSequence { ids }
    }

    #[test]
    fn masking_is_deterministic_per_key() {
        let v = vocab(&["a", "b", "c", "d"]);
        let seq = packed(vec![5, 6, 7, 8, 5, 6, 7, 8]);
        let cfg = MaskingConfig::default();
        let one = apply_masking(&seq, &cfg, &v, 9, 0, 3).unwrap();
        let two = apply_masking(&seq, &cfg, &v, 9, 0, 3).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn different_epochs_give_different_masks() {
        let v = vocab(&["a", "b", "c", "d"]);
        let ids: Vec<u32> = (0..128).map(|i| 5 + (i % 4) as u32).collect();
        let seq = packed(ids);
        let cfg = MaskingConfig::default();
        let e0 = apply_masking(&seq, &cfg, &v, 9, 0, 0).unwrap();
        let e1 = apply_masking(&seq, &cfg, &v, 9, 1, 0).unwrap();
        assert_ne!(e0, e1);
    }

    #[test]
    fn reconstruction_recovers_original() {
        let v = vocab(&["a", "b", "c", "d"]);
        let ids: Vec<u32> = (0..64).map(|i| 5 + (i % 4) as u32).collect();
        let seq = packed(ids.clone());
        let cfg = MaskingConfig::default();
        for epoch in 0..4 {
            let example = apply_masking(&seq, &cfg, &v, 1, epoch, 0).unwrap();
            assert_eq!(example.reconstruct_original(), ids);
        }
    }

    #[test]
    fn specials_never_selected_by_default() {
        let v = vocab(&["a"]);
        let cls = v.cls_id();
        let sep = v.sep_id();
        let ids = vec![cls, 5, 5, sep, cls, 5, 5, sep];
        let seq = packed(ids);
        let cfg = MaskingConfig {
            mask_fraction: 0.99,
            ..MaskingConfig::default()
        };
        for epoch in 0..8 {
            let example = apply_masking(&seq, &cfg, &v, 0, epoch, 0).unwrap();
            assert_eq!(example.actions[0], MaskAction::Untouched);
            assert_eq!(example.actions[3], MaskAction::Untouched);
            assert_eq!(example.input_ids[0], cls);
            assert_eq!(example.input_ids[3], sep);
        }
    }

    #[test]
    fn randomized_positions_avoid_specials() {
        let v = vocab(&["a", "b"]);
        let ids: Vec<u32> = vec![5; 256];
        let seq = packed(ids);
        let cfg = MaskingConfig {
            mask_fraction: 0.9,
            mask_prob: 0.0,
            random_prob: 1.0,
            keep_prob: 0.0,
            ..MaskingConfig::default()
        };
        let example = apply_masking(&seq, &cfg, &v, 5, 0, 0).unwrap();
        let mut saw_random = false;
        for (action, &input) in example.actions.iter().zip(&example.input_ids) {
            if *action == MaskAction::Randomized {
                saw_random = true;
                assert!(!v.is_special_id(input));
            }
        }
        assert!(saw_random);
    }

    #[test]
    fn masked_positions_carry_mask_id_and_kept_match_labels() {
        let v = vocab(&["a", "b", "c"]);
        let ids: Vec<u32> = (0..128).map(|i| 5 + (i % 3) as u32).collect();
        let seq = packed(ids);
        let example = apply_masking(&seq, &MaskingConfig::default(), &v, 2, 0, 0).unwrap();
        for pos in 0..example.input_ids.len() {
            match example.actions[pos] {
                MaskAction::Untouched => assert!(example.labels[pos].is_none()),
                MaskAction::Masked => {
                    assert_eq!(example.input_ids[pos], v.mask_id());
                    assert!(example.labels[pos].is_some());
                }
                MaskAction::Randomized => assert!(example.labels[pos].is_some()),
                MaskAction::Kept => {
                    assert_eq!(Some(example.input_ids[pos]), example.labels[pos]);
                }
            }
        }
    }

    #[test]
    fn exact_count_mode_selects_rounded_count() {
        let v = vocab(&["a"]);
        let ids = vec![5u32; 100];
        let seq = packed(ids);
        let cfg = MaskingConfig {
            selection: SelectionMode::ExactCount,
            ..MaskingConfig::default()
        };
        for epoch in 0..5 {
            let example = apply_masking(&seq, &cfg, &v, 11, epoch, 0).unwrap();
            let selected = example
                .actions
                .iter()
                .filter(|a| **a != MaskAction::Untouched)
                .count();
            assert_eq!(selected, 15);
        }
    }

    #[test]
    fn empty_pool_is_an_error() {
        let v = vocab(&[]);
        let seq = packed(vec![v.cls_id(), v.sep_id()]);
        assert!(matches!(
            apply_masking(&seq, &MaskingConfig::default(), &v, 0, 0, 0),
            Err(Error::EmptyReplacementPool)
        ));
    }

    #[test]
    fn out_of_range_id_is_an_error() {
        let v = vocab(&["a"]);
        let seq = packed(vec![5, 999]);
        assert!(matches!(
            apply_masking(&seq, &MaskingConfig::default(), &v, 0, 0, 0),
            Err(Error::TokenIdOutOfRange { id: 999, .. })
        ));
    }

    #[test]
    fn invalid_config_rejected() {
        let v = vocab(&["a"]);
        let seq = packed(vec![5, 5]);
        let cfg = MaskingConfig {
            mask_prob: 0.5,
            random_prob: 0.1,
            keep_prob: 0.1,
            ..MaskingConfig::default()
        };
        assert!(apply_masking(&seq, &cfg, &v, 0, 0, 0).is_err());
        let cfg = MaskingConfig {
            mask_fraction: 0.0,
            ..MaskingConfig::default()
        };
        assert!(apply_masking(&seq, &cfg, &v, 0, 0, 0).is_err());
    }

    #[test]
    fn batch_parallel_matches_sequential() {
        let v = vocab(&["a", "b", "c"]);
        let sequences: Vec<PackedSequence> = (0..40)
            .map(|i| packed((0..32).map(|j| 5 + ((i + j) % 3) as u32).collect()))
            .collect();
        let cfg = MaskingConfig::default();
        let par = apply_masking_batch(&sequences, &cfg, &v, 13, 2).unwrap();
        let seq = apply_masking_batch_seq(&sequences, &cfg, &v, 13, 2).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn stats_on_empty_stream_is_zeroed() {
        let v = vocab(&["a"]);
        let report = masking_stats(&[], &v, true);
        assert_eq!(report, MaskingStatsReport::default());
    }

    #[test]
    fn stats_single_example_ratio() {
        let v = vocab(&["a"]);
        // 4 maskable positions, 1 masked.
        let example = MaskedExample {
            input_ids: vec![v.cls_id(), v.mask_id(), 5, 5, 5, v.sep_id()],
            labels: vec![None, Some(5), None, None, None, None],
            actions: vec![
                MaskAction::Untouched,
                MaskAction::Masked,
                MaskAction::Untouched,
                MaskAction::Untouched,
                MaskAction::Untouched,
                MaskAction::Untouched,
            ],
        };
        let report = masking_stats(&[example], &v, true);
        assert_eq!(report.count, 1);
        assert!((report.selected_fraction - 0.25).abs() < 1e-12);
        assert_eq!(report.mask_share, 1.0);
    }

    #[test]
    fn pak1_round_trip() {
        let sequences = vec![packed(vec![1, 2, 3, 4]), packed(vec![5, 6, 7, 8])];
        let mut bytes = Vec::new();
        write_packed(&sequences, 4, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"PAK1");
        let (length, reread) = read_packed(bytes.as_slice()).unwrap();
        assert_eq!(length, 4);
        assert_eq!(reread, sequences);
    }

    #[test]
    fn pak1_rejects_corruption() {
        assert!(read_packed(&b"nope"[..]).is_err());
        let sequences = vec![packed(vec![1, 2, 3, 4])];
        let mut bytes = Vec::new();
        write_packed(&sequences, 4, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 2);
        assert!(read_packed(bytes.as_slice()).is_err());
    }

    #[test]
    fn masked_jsonl_round_trip() {
        let v = vocab(&["a", "b", "c", "d"]);
        let ids: Vec<u32> = (0..32).map(|i| 5 + (i % 4) as u32).collect();
        let seq = packed(ids);
        let examples =
            vec![apply_masking(&seq, &MaskingConfig::default(), &v, 4, 1, 0).unwrap()];
        let mut bytes = Vec::new();
        write_masked_jsonl(&examples, &mut bytes).unwrap();
        let reread = read_masked_jsonl(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(reread, examples);
    }
}
