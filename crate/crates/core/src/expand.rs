//! Vocabulary expansion: non-overlapping token diff, id-preserving
//! extension, mean-initialized embedding rows, and the new-token ratio.

use std::collections::HashSet;
use std::fs;
use std::io::{Read as _, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tokenizer::TokenizerModel;
use crate::vocab::Vocabulary;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const EMB_MAGIC: &[u8; 4] = b"EMB1";

/// Dense rows-by-cols matrix of 32-bit floats, row-major, aligned to a
/// vocabulary (row id = token id).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::InvalidArgument(
                "embedding matrix needs at least one column".to_string(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "embedding data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite embedding value at flat index {i}"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.data[index * self.cols..(index + 1) * self.cols]
    }

    /// Append `new_count` rows, each the column-wise arithmetic mean of
    /// the existing rows (64-bit accumulation, stored as 32-bit). The
    /// original block is preserved bit for bit.
    pub fn extend_mean(&self, new_count: usize) -> Result<EmbeddingMatrix> {
        self.extend_mean_excluding(new_count, &[])
    }

    /// Same as [`extend_mean`](Self::extend_mean) but averaging only over
    /// rows not listed in `excluded_rows` (e.g. special-token rows).
    pub fn extend_mean_excluding(
        &self,
        new_count: usize,
        excluded_rows: &[usize],
    ) -> Result<EmbeddingMatrix> {
        if self.rows == 0 {
            return Err(Error::EmptyEmbeddingMatrix);
        }
        let excluded: HashSet<usize> = excluded_rows.iter().copied().collect();
        let kept = self.rows - excluded.iter().filter(|&&r| r < self.rows).count();
        if kept == 0 {
            return Err(Error::AllRowsExcluded(self.rows));
        }

        let mut sums = vec![0f64; self.cols];
        for row in 0..self.rows {
            if excluded.contains(&row) {
                continue;
            }
            for (sum, &value) in sums.iter_mut().zip(self.row(row)) {
                *sum += f64::from(value);
            }
        }
        let mean: Vec<f32> = sums
            .iter()
            .map(|&sum| (sum / kept as f64) as f32)
            .collect();

        let mut data = Vec::with_capacity((self.rows + new_count) * self.cols);
        data.extend_from_slice(&self.data);
        for _ in 0..new_count {
            data.extend_from_slice(&mean);
        }
        EmbeddingMatrix::new(self.rows + new_count, self.cols, data)
    }

    /// Binary layout: magic "EMB1", u32 LE rows, u32 LE cols, then
    /// rows*cols f32 LE values row-major.
    pub fn write_emb1(&self, mut out: impl std::io::Write) -> std::io::Result<()> {
        out.write_all(EMB_MAGIC)?;
        out.write_all(&(self.rows as u32).to_le_bytes())?;
        out.write_all(&(self.cols as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for value in &self.data {
            buf.extend_from_slice(&value.to_le_bytes());
        }
        out.write_all(&buf)
    }

    pub fn save_emb1(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = std::io::BufWriter::new(file);
        self.write_emb1(&mut writer).map_err(|e| Error::io(path, e))?;
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_emb1(mut input: impl std::io::Read) -> Result<Self> {
        let bad = |reason: &str| Error::format("EMB1", reason);
        let mut magic = [0u8; 4];
        input
            .read_exact(&mut magic)
            .map_err(|_| bad("file too short for magic"))?;
        if &magic != EMB_MAGIC {
            return Err(bad("bad magic; expected EMB1"));
        }
        let mut u32_buf = [0u8; 4];
        input
            .read_exact(&mut u32_buf)
            .map_err(|_| bad("missing row count"))?;
        let rows = u32::from_le_bytes(u32_buf) as usize;
        input
            .read_exact(&mut u32_buf)
            .map_err(|_| bad("missing column count"))?;
        let cols = u32::from_le_bytes(u32_buf) as usize;
        let mut payload = Vec::new();
        input
            .read_to_end(&mut payload)
            .map_err(|_| bad("truncated payload"))?;
        if payload.len() != rows * cols * 4 {
            return Err(bad(&format!(
                "payload is {} bytes, expected {} for {rows}x{cols}",
                payload.len(),
                rows * cols * 4
            )));
        }
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|chunk| f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
            .collect();
        EmbeddingMatrix::new(rows, cols, data)
    }

    pub fn load_emb1(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_emb1(std::io::BufReader::new(file))
    }
}

/// What a vocabulary diff + extension did.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ExpansionReport {
    pub base_size: usize,
    pub candidate_size: usize,
    pub new_tokens: Vec<String>,
    pub extended_size: usize,
}

/// Candidate tokens absent from the base vocabulary (exact string match),
/// special tokens excluded, in candidate id order.
pub fn diff_vocabulary(base: &Vocabulary, candidate: &Vocabulary) -> Vec<String> {
    candidate
        .tokens()
        .iter()
        .filter(|token| !candidate.specials().contains(token))
        .filter(|token| !base.contains(token))
        .cloned()
        .collect()
}

/// Append `new_tokens` after the base ids. Every base id is preserved;
/// the new tokens receive ids `base_size..base_size + k` in given order.
pub fn extend_vocabulary(base: &Vocabulary, new_tokens: &[String]) -> Result<Vocabulary> {
    let mut seen: HashSet<&str> = HashSet::with_capacity(new_tokens.len());
    for token in new_tokens {
        if base.contains(token) {
            return Err(Error::TokenOverlap {
                token: token.clone(),
            });
        }
        if !seen.insert(token) {
            return Err(Error::DuplicateNewToken {
                token: token.clone(),
            });
        }
    }
    let mut tokens = base.tokens().to_vec();
    tokens.extend_from_slice(new_tokens);
    Vocabulary::with_continuation_prefix(
        tokens,
        base.specials().clone(),
        base.continuation_prefix(),
    )
}

pub fn expansion_report(
    base: &Vocabulary,
    candidate: &Vocabulary,
    extended: &Vocabulary,
    new_tokens: Vec<String>,
) -> ExpansionReport {
    ExpansionReport {
        base_size: base.size(),
        candidate_size: candidate.size(),
        new_tokens,
        extended_size: extended.size(),
    }
}

/// New-token and total-token counts over a document set, encoding with
/// the extended model (no [CLS]/[SEP] framing). A token is new when its
/// id is at or above the base vocabulary size.
pub fn new_token_counts(
    documents: &[Document],
    base_model: &TokenizerModel,
    extended_model: &TokenizerModel,
) -> Result<(u64, u64)> {
    require_extension(base_model, extended_model)?;
    let base_size = base_model.vocab().size() as u32;
    let count_one = |doc: &Document| -> (u64, u64) {
        let ids = extended_model.encode(&doc.text, false);
        let new = ids.iter().filter(|&&id| id >= base_size).count() as u64;
        (new, ids.len() as u64)
    };

    #[cfg(feature = "parallel")]
    let (new, total) = documents
        .par_iter()
        .map(count_one)
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    #[cfg(not(feature = "parallel"))]
    let (new, total) = documents
        .iter()
        .map(count_one)
        .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    Ok((new, total))
}

/// Sequential twin of [`new_token_counts`] for comparison benchmarks.
pub fn new_token_counts_seq(
    documents: &[Document],
    base_model: &TokenizerModel,
    extended_model: &TokenizerModel,
) -> Result<(u64, u64)> {
    require_extension(base_model, extended_model)?;
    let base_size = base_model.vocab().size() as u32;
    let mut new = 0u64;
    let mut total = 0u64;
    for doc in documents {
        let ids = extended_model.encode(&doc.text, false);
        new += ids.iter().filter(|&&id| id >= base_size).count() as u64;
        total += ids.len() as u64;
    }
    Ok((new, total))
}

/// Fraction of emitted tokens that are new, in [0, 1]; 0 on empty input.
pub fn proportion_new_tokens(
    documents: &[Document],
    base_model: &TokenizerModel,
    extended_model: &TokenizerModel,
) -> Result<f64> {
    let (new, total) = new_token_counts(documents, base_model, extended_model)?;
    if total == 0 {
        return Ok(0.0);
    }
    Ok(new as f64 / total as f64)
}

fn require_extension(base: &TokenizerModel, extended: &TokenizerModel) -> Result<()> {
    if !base.same_front_end(extended) {
        return Err(Error::NotAnExtension(
            "front-end settings differ".to_string(),
        ));
    }
    let base_tokens = base.vocab().tokens();
    let extended_tokens = extended.vocab().tokens();
    if extended_tokens.len() < base_tokens.len()
        || extended_tokens[..base_tokens.len()] != *base_tokens
    {
        return Err(Error::NotAnExtension(
            "extended vocabulary does not preserve the base id prefix".to_string(),
        ));
    }
    Ok(())
}
