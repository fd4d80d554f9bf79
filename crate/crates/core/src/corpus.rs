//! Corpus ingestion, exact deduplication, holdout splitting, and
//! per-language statistics.
//!
//! Input is JSONL: one document object per line with keys `id`, `lang`,
//! `source`, `text`. Malformed lines, unknown language codes, empty
//! texts, and duplicate ids go to a rejection report instead of being
//! silently dropped; an unreadable file is fatal.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{keyed_rng, shuffle};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A language-tagged text unit flowing through the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub id: String,
    pub lang: String,
    pub source: String,
    pub text: String,
}

/// ISO 639-3 codes accepted by ingestion. The default set covers the
/// twelve codes of the bundled reference corpus (Banyumasan documents
/// carry `lang = jav` with their own source tag).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageRegistry {
    codes: BTreeSet<String>,
}

pub const DEFAULT_LANGUAGE_CODES: [&str; 12] = [
    "ace", "ban", "bjn", "bug", "gor", "ind", "jav", "min", "msa", "nia", "sun", "tet",
];

impl Default for LanguageRegistry {
    fn default() -> Self {
        Self::from_codes(DEFAULT_LANGUAGE_CODES)
    }
}

impl LanguageRegistry {
    pub fn from_codes<I, S>(codes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            codes: codes.into_iter().map(Into::into).collect(),
        }
    }

    pub fn knows(&self, code: &str) -> bool {
        self.codes.contains(code)
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.codes.iter().map(String::as_str)
    }
}

/// Per (source, lang) document and character counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source: String,
    pub lang: String,
    pub documents: u64,
    pub characters: u64,
}

/// Corpus statistics, sorted by descending document count for reporting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CorpusManifest {
    pub total_documents: u64,
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn from_documents(documents: &[Document]) -> Self {
        #[cfg(feature = "parallel")]
        let counts = documents
            .par_iter()
            .fold(BTreeMap::new, fold_manifest_counts)
            .reduce(BTreeMap::new, merge_manifest_counts);
        #[cfg(not(feature = "parallel"))]
        let counts = documents.iter().fold(BTreeMap::new(), |acc, doc| {
            fold_manifest_counts(acc, doc)
        });
        Self::from_counts(counts)
    }

    /// Sequential twin of [`from_documents`](Self::from_documents).
    pub fn from_documents_seq(documents: &[Document]) -> Self {
        let counts = documents.iter().fold(BTreeMap::new(), |acc, doc| {
            fold_manifest_counts(acc, doc)
        });
        Self::from_counts(counts)
    }

    fn from_counts(counts: BTreeMap<(String, String), (u64, u64)>) -> Self {
        let total_documents = counts.values().map(|(docs, _)| docs).sum();
        let mut entries: Vec<ManifestEntry> = counts
            .into_iter()
            .map(|((source, lang), (documents, characters))| ManifestEntry {
                source,
                lang,
                documents,
                characters,
            })
            .collect();
        entries.sort_by(|a, b| {
            b.documents
                .cmp(&a.documents)
                .then_with(|| a.lang.cmp(&b.lang))
                .then_with(|| a.source.cmp(&b.source))
        });
        Self {
            total_documents,
            entries,
        }
    }
}

type ManifestCounts = BTreeMap<(String, String), (u64, u64)>;

fn fold_manifest_counts(mut acc: ManifestCounts, doc: &Document) -> ManifestCounts {
    let entry = acc
        .entry((doc.source.clone(), doc.lang.clone()))
        .or_insert((0, 0));
    entry.0 += 1;
    entry.1 += doc.text.chars().count() as u64;
    acc
}

#[cfg(feature = "parallel")]
fn merge_manifest_counts(mut left: ManifestCounts, right: ManifestCounts) -> ManifestCounts {
    for (key, (docs, chars)) in right {
        let entry = left.entry(key).or_insert((0, 0));
        entry.0 += docs;
        entry.1 += chars;
    }
    left
}

/// Per-language and per-source counts over a document stream.
pub fn language_stats(documents: &[Document]) -> CorpusManifest {
    CorpusManifest::from_documents(documents)
}

/// One rejected input line: where it came from and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub file: String,
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub documents: Vec<Document>,
    pub manifest: CorpusManifest,
    pub rejections: Vec<Rejection>,
}

/// Read JSONL corpus files in path order. Documents are yielded in file
/// order; the manifest counts every yielded document.
pub fn ingest(paths: &[impl AsRef<Path>], registry: &LanguageRegistry) -> Result<IngestOutput> {
    let contents: Vec<(String, String)> = paths
        .iter()
        .map(|path| {
            let path = path.as_ref();
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Ok((path.display().to_string(), text))
        })
        .collect::<Result<_>>()?;

    #[cfg(feature = "parallel")]
    let per_file: Vec<ParsedFile> = contents
        .par_iter()
        .map(|(name, text)| parse_jsonl_file(name, text, registry))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let per_file: Vec<ParsedFile> = contents
        .iter()
        .map(|(name, text)| parse_jsonl_file(name, text, registry))
        .collect();

    Ok(merge_ingested(per_file))
}

/// Sequential twin of [`ingest`] for comparison benchmarks.
pub fn ingest_seq(paths: &[impl AsRef<Path>], registry: &LanguageRegistry) -> Result<IngestOutput> {
    let per_file: Vec<ParsedFile> = paths
        .iter()
        .map(|path| {
            let path = path.as_ref();
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Ok(parse_jsonl_file(&path.display().to_string(), &text, registry))
        })
        .collect::<Result<_>>()?;
    Ok(merge_ingested(per_file))
}

struct ParsedFile {
    file: String,
    /// Accepted documents with their 1-based line numbers.
    documents: Vec<(Document, usize)>,
    rejections: Vec<Rejection>,
}

fn merge_ingested(per_file: Vec<ParsedFile>) -> IngestOutput {
    let mut documents = Vec::new();
    let mut rejections = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for parsed in per_file {
        rejections.extend(parsed.rejections);
        for (doc, line) in parsed.documents {
            if seen_ids.contains(&doc.id) {
                rejections.push(Rejection {
                    file: parsed.file.clone(),
                    line,
                    reason: format!("duplicate document id {:?}", doc.id),
                });
                continue;
            }
            seen_ids.insert(doc.id.clone());
            documents.push(doc);
        }
    }
    let manifest = CorpusManifest::from_documents(&documents);
    IngestOutput {
        documents,
        manifest,
        rejections,
    }
}

fn parse_jsonl_file(file: &str, content: &str, registry: &LanguageRegistry) -> ParsedFile {
    let mut documents = Vec::new();
    let mut rejections = Vec::new();
    for (index, line) in content.lines().enumerate() {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut reject = |reason: String| {
            rejections.push(Rejection {
                file: file.to_string(),
                line: line_no,
                reason,
            });
        };
        match serde_json::from_str::<Document>(line) {
            Ok(doc) => {
                if doc.text.is_empty() {
                    reject("empty text".to_string());
                } else if !registry.knows(&doc.lang) {
                    reject(format!("unknown language code {:?}", doc.lang));
                } else {
                    documents.push((doc, line_no));
                }
            }
            Err(e) => reject(format!("malformed JSON: {e}")),
        }
    }
    ParsedFile {
        file: file.to_string(),
        documents,
        rejections,
    }
}

/// Serialize documents as JSONL, one object per line.
pub fn write_jsonl(documents: &[Document], mut out: impl std::io::Write) -> std::io::Result<()> {
    for doc in documents {
        let line = serde_json::to_string(doc).expect("document serialization is infallible");
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_jsonl(documents: &[Document], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    write_jsonl(documents, &mut writer).map_err(|e| Error::io(path, e))?;
    use std::io::Write as _;
    writer.flush().map_err(|e| Error::io(path, e))
}

/// 128-bit content hash of the whitespace-collapsed text.
fn content_hash(text: &str) -> u128 {
    let mut hasher = Sha256::new();
    let mut first = true;
    for chunk in text.split_whitespace() {
        if !first {
            hasher.update(b" ");
        }
        hasher.update(chunk.as_bytes());
        first = false;
    }
    let digest = hasher.finalize();
    u128::from_le_bytes(digest[..16].try_into().expect("digest is 32 bytes"))
}

/// Drop documents whose whitespace-collapsed text hashes identically to
/// an earlier document. First occurrence wins; survivor order is
/// preserved.
pub fn deduplicate(documents: Vec<Document>) -> Vec<Document> {
    let mut seen: HashSet<u128> = HashSet::with_capacity(documents.len());
    documents
        .into_iter()
        .filter(|doc| seen.insert(content_hash(&doc.text)))
        .collect()
}

/// Seeded train/eval split at the document level. The eval side holds
/// `round(fraction * N)` documents chosen by a seeded uniform shuffle of
/// indices; both sides keep their input-relative order.
pub fn holdout_split(
    documents: Vec<Document>,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<Document>, Vec<Document>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "fraction {fraction} is outside [0, 1]"
        )));
    }
    let n = documents.len();
    let eval_size = ((fraction * n as f64).round() as usize).min(n);

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = keyed_rng(seed, "holdout-split", &[]);
    shuffle(&mut rng, &mut indices);
    let eval_set: HashSet<usize> = indices[..eval_size].iter().copied().collect();

    let mut train = Vec::with_capacity(n - eval_size);
    let mut eval = Vec::with_capacity(eval_size);
    for (index, doc) in documents.into_iter().enumerate() {
        if eval_set.contains(&index) {
            eval.push(doc);
        } else {
            train.push(doc);
        }
    }
    Ok((train, eval))
}

/// Seeded document shuffle (used before packing when requested).
pub fn shuffle_documents(documents: &mut [Document], seed: u64) {
    let mut rng = keyed_rng(seed, "document-shuffle", &[]);
    shuffle(&mut rng, documents);
}
