//! WordPiece vocabulary training.
//!
//! Words are split into symbols (first character bare, the rest carrying
//! the continuation prefix) and adjacent symbol pairs are merged greedily.
//! Each round merges the pair maximizing
//!
//! ```text
//! score(a, b) = freq(ab) / (freq(a) * freq(b))
//! ```
//!
//! among pairs with `freq(ab) >= min_pair_frequency`, until the vocabulary
//! reaches its target size or no eligible pair remains. Scores are compared
//! as exact rationals; ties break on the merged string, then on the left
//! symbol, both lexicographically ascending. Within a word, a merge
//! rewrites occurrences left to right, non-overlapping.
//!
//! Output token order: the five specials, then the initial alphabet sorted
//! lexicographically, then merged tokens in creation order. The merge loop
//! itself is sequential; only frequency collection fans out over documents.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tokenizer::TokenizerModel;
use crate::vocab::{SpecialTokens, Vocabulary, DEFAULT_CONTINUATION_PREFIX};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Word counts accumulated over a normalized, pre-tokenized corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordFrequencyTable {
    entries: BTreeMap<String, u64>,
    total_words: u64,
}

impl WordFrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, word: &str, count: u64) {
        if count == 0 {
            return;
        }
        *self.entries.entry(word.to_string()).or_insert(0) += count;
        self.total_words += count;
    }

    pub fn merge(mut self, other: WordFrequencyTable) -> WordFrequencyTable {
        for (word, count) in other.entries {
            *self.entries.entry(word).or_insert(0) += count;
        }
        self.total_words += other.total_words;
        self
    }

    pub fn entries(&self) -> &BTreeMap<String, u64> {
        &self.entries
    }

    pub fn total_words(&self) -> u64 {
        self.total_words
    }

    pub fn distinct_words(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Count normalized words over a document set. Counting is commutative,
/// so the result is independent of document order and thread schedule.
pub fn collect_word_frequencies(
    documents: &[Document],
    front_end: &TokenizerModel,
) -> WordFrequencyTable {
    #[cfg(feature = "parallel")]
    {
        documents
            .par_iter()
            .fold(WordFrequencyTable::new, |mut table, doc| {
                count_document(&mut table, doc, front_end);
                table
            })
            .reduce(WordFrequencyTable::new, WordFrequencyTable::merge)
    }
    #[cfg(not(feature = "parallel"))]
    {
        collect_word_frequencies_seq(documents, front_end)
    }
}

/// Sequential twin of [`collect_word_frequencies`]; always available for
/// comparison benchmarks.
pub fn collect_word_frequencies_seq(
    documents: &[Document],
    front_end: &TokenizerModel,
) -> WordFrequencyTable {
    let mut table = WordFrequencyTable::new();
    for doc in documents {
        count_document(&mut table, doc, front_end);
    }
    table
}

fn count_document(table: &mut WordFrequencyTable, doc: &Document, front_end: &TokenizerModel) {
    for word in front_end.normalize_and_pretokenize(&doc.text) {
        table.add(&word, 1);
    }
}

#[derive(Debug, Clone)]
pub struct TrainerConfig {
    pub target_vocab_size: usize,
    pub min_pair_frequency: u64,
    /// Cap on the number of initial-alphabet symbols, keeping the most
    /// frequent (ties lexicographic). Words containing a dropped symbol
    /// are excluded from merge counting.
    pub initial_alphabet_limit: Option<usize>,
    pub specials: SpecialTokens,
    pub continuation_prefix: String,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            target_vocab_size: 10_000,
            min_pair_frequency: 2,
            initial_alphabet_limit: None,
            specials: SpecialTokens::default(),
            continuation_prefix: DEFAULT_CONTINUATION_PREFIX.to_string(),
        }
    }
}

type SymbolId = u32;
type Pair = (SymbolId, SymbolId);

struct MergeState {
    symbols: Vec<String>,
    symbol_ids: HashMap<String, SymbolId>,
    /// (symbol sequence, word count) per retained word.
    words: Vec<(Vec<SymbolId>, u64)>,
    symbol_freq: Vec<u64>,
    pair_freq: HashMap<Pair, u64>,
    pair_words: HashMap<Pair, HashSet<usize>>,
}

impl MergeState {
    fn intern(&mut self, symbol: &str) -> SymbolId {
        if let Some(&id) = self.symbol_ids.get(symbol) {
            return id;
        }
        let id = self.symbols.len() as SymbolId;
        self.symbols.push(symbol.to_string());
        self.symbol_ids.insert(symbol.to_string(), id);
        self.symbol_freq.push(0);
        id
    }

    fn merged_string(&self, pair: Pair, prefix: &str) -> String {
        let left = &self.symbols[pair.0 as usize];
        let right = &self.symbols[pair.1 as usize];
        let tail = right.strip_prefix(prefix).unwrap_or(right);
        format!("{left}{tail}")
    }
}

/// Train a WordPiece vocabulary from word frequencies.
pub fn train_wordpiece(freqs: &WordFrequencyTable, cfg: &TrainerConfig) -> Result<Vocabulary> {
    if freqs.is_empty() {
        return Err(Error::EmptyFrequencyTable);
    }
    if cfg.target_vocab_size < 5 {
        return Err(Error::InvalidArgument(format!(
            "target_vocab_size {} cannot hold the five special tokens",
            cfg.target_vocab_size
        )));
    }
    if cfg.min_pair_frequency == 0 {
        return Err(Error::InvalidArgument(
            "min_pair_frequency must be positive".to_string(),
        ));
    }
    let prefix = cfg.continuation_prefix.as_str();

    // Split words into symbols and count symbol occurrences for the
    // alphabet ranking.
    let split_words: Vec<(Vec<String>, u64)> = freqs
        .entries()
        .iter()
        .map(|(word, &count)| (split_into_symbols(word, prefix), count))
        .collect();
    let mut alphabet_counts: BTreeMap<&str, u64> = BTreeMap::new();
    for (symbols, count) in &split_words {
        for symbol in symbols {
            *alphabet_counts.entry(symbol).or_insert(0) += count;
        }
    }

    // The alphabet never exceeds the merge budget: keeping the invariant
    // |vocab| <= target means truncating by frequency when the corpus
    // alphabet alone would overshoot.
    let budget = cfg.target_vocab_size - 5;
    let limit = cfg
        .initial_alphabet_limit
        .unwrap_or(usize::MAX)
        .min(budget);
    let alphabet: HashSet<&str> = if alphabet_counts.len() > limit {
        let mut ranked: Vec<(&str, u64)> = alphabet_counts
            .iter()
            .map(|(&symbol, &count)| (symbol, count))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.into_iter().take(limit).map(|(s, _)| s).collect()
    } else {
        alphabet_counts.keys().copied().collect()
    };
    let mut alphabet_sorted: Vec<String> = alphabet.iter().map(|s| s.to_string()).collect();
    alphabet_sorted.sort();

    let mut state = MergeState {
        symbols: Vec::new(),
        symbol_ids: HashMap::new(),
        words: Vec::new(),
        symbol_freq: Vec::new(),
        pair_freq: HashMap::new(),
        pair_words: HashMap::new(),
    };
    for symbol in &alphabet_sorted {
        state.intern(symbol);
    }

    // Retain only words fully covered by the kept alphabet.
    for (symbols, count) in &split_words {
        if !symbols.iter().all(|s| alphabet.contains(s.as_str())) {
            continue;
        }
        let ids: Vec<SymbolId> = symbols.iter().map(|s| state.symbol_ids[s]).collect();
        let word_index = state.words.len();
        for &id in &ids {
            state.symbol_freq[id as usize] += count;
        }
        for (pair, occurrences) in count_adjacent_pairs(&ids) {
            *state.pair_freq.entry(pair).or_insert(0) += occurrences * count;
            state.pair_words.entry(pair).or_default().insert(word_index);
        }
        state.words.push((ids, *count));
    }

    let mut token_set: HashSet<String> = cfg
        .specials
        .in_order()
        .iter()
        .map(|s| s.to_string())
        .collect();
    token_set.extend(alphabet_sorted.iter().cloned());
    let mut vocab_len = 5 + alphabet_sorted.len();
    let mut merges: Vec<String> = Vec::new();

    while vocab_len < cfg.target_vocab_size {
        let Some(best) = select_best_pair(&state, cfg.min_pair_frequency, prefix) else {
            break;
        };
        let merged = state.merged_string(best, prefix);
        let merged_id = state.intern(&merged);

        // Two distinct pairs can merge to the same string (e.g. a+##bc
        // and ab+##c). The rewrite still happens, but the token is only
        // added once.
        if token_set.insert(merged.clone()) {
            merges.push(merged.clone());
            vocab_len += 1;
        }

        let mut affected: Vec<usize> = state
            .pair_words
            .get(&best)
            .map(|set| set.iter().copied().collect())
            .unwrap_or_default();
        affected.sort_unstable();
        for word_index in affected {
            apply_merge_to_word(&mut state, word_index, best, merged_id);
        }
    }

    let mut tokens: Vec<String> = cfg.specials.in_order().map(str::to_string).to_vec();
    tokens.extend(alphabet_sorted);
    tokens.extend(merges);
    Vocabulary::with_continuation_prefix(tokens, cfg.specials.clone(), prefix)
}

/// First character bare, every following character with the prefix.
fn split_into_symbols(word: &str, prefix: &str) -> Vec<String> {
    word.chars()
        .enumerate()
        .map(|(i, c)| {
            if i == 0 {
                c.to_string()
            } else {
                format!("{prefix}{c}")
            }
        })
        .collect()
}

fn count_adjacent_pairs(symbols: &[SymbolId]) -> BTreeMap<Pair, u64> {
    let mut pairs = BTreeMap::new();
    for window in symbols.windows(2) {
        *pairs.entry((window[0], window[1])).or_insert(0) += 1;
    }
    pairs
}

/// Pick the highest-scoring eligible pair. Scores are compared as exact
/// rationals (u128 cross-multiplication), so the winner is independent of
/// hash-map iteration order.
fn select_best_pair(state: &MergeState, min_pair_frequency: u64, prefix: &str) -> Option<Pair> {
    let mut best: Option<(Pair, u64)> = None;
    for (&pair, &freq) in &state.pair_freq {
        if freq < min_pair_frequency {
            continue;
        }
        match best {
            None => best = Some((pair, freq)),
            Some((cur, cur_freq)) => {
                if candidate_beats(state, pair, freq, cur, cur_freq, prefix) {
                    best = Some((pair, freq));
                }
            }
        }
    }
    best.map(|(pair, _)| pair)
}

fn candidate_beats(
    state: &MergeState,
    lhs: Pair,
    lhs_freq: u64,
    rhs: Pair,
    rhs_freq: u64,
    prefix: &str,
) -> bool {
    // lhs_freq/(fa*fb) vs rhs_freq/(fc*fd), cross-multiplied.
    let lhs_denom = state.symbol_freq[lhs.0 as usize] as u128 * state.symbol_freq[lhs.1 as usize] as u128;
    let rhs_denom = state.symbol_freq[rhs.0 as usize] as u128 * state.symbol_freq[rhs.1 as usize] as u128;
    let lhs_cross = lhs_freq as u128 * rhs_denom;
    let rhs_cross = rhs_freq as u128 * lhs_denom;
    if lhs_cross != rhs_cross {
        return lhs_cross > rhs_cross;
    }
    let lhs_merged = state.merged_string(lhs, prefix);
    let rhs_merged = state.merged_string(rhs, prefix);
    if lhs_merged != rhs_merged {
        return lhs_merged < rhs_merged;
    }
    state.symbols[lhs.0 as usize] < state.symbols[rhs.0 as usize]
}

/// Rewrite one word for a merge and update symbol/pair statistics by
/// diffing the word's old and new symbol content.
fn apply_merge_to_word(state: &mut MergeState, word_index: usize, pair: Pair, merged_id: SymbolId) {
    let (old_symbols, count) = state.words[word_index].clone();
    let new_symbols = rewrite_symbols(&old_symbols, pair, merged_id);
    if new_symbols == old_symbols {
        return;
    }

    for &id in &old_symbols {
        state.symbol_freq[id as usize] -= count;
    }
    for &id in &new_symbols {
        state.symbol_freq[id as usize] += count;
    }

    let old_pairs = count_adjacent_pairs(&old_symbols);
    let new_pairs = count_adjacent_pairs(&new_symbols);
    for (&p, &occurrences) in &old_pairs {
        let freq = state
            .pair_freq
            .get_mut(&p)
            .expect("pair bookkeeping out of sync");
        *freq -= occurrences * count;
        if *freq == 0 {
            state.pair_freq.remove(&p);
        }
        if !new_pairs.contains_key(&p) {
            if let Some(words) = state.pair_words.get_mut(&p) {
                words.remove(&word_index);
                if words.is_empty() {
                    state.pair_words.remove(&p);
                }
            }
        }
    }
    for (&p, &occurrences) in &new_pairs {
        *state.pair_freq.entry(p).or_insert(0) += occurrences * count;
        if !old_pairs.contains_key(&p) {
            state.pair_words.entry(p).or_default().insert(word_index);
        }
    }

    state.words[word_index] = (new_symbols, count);
}

/// Left-to-right, non-overlapping replacement of the pair.
fn rewrite_symbols(symbols: &[SymbolId], pair: Pair, merged_id: SymbolId) -> Vec<SymbolId> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == pair.0 && symbols[i + 1] == pair.1 {
            out.push(merged_id);
            i += 2;
        } else {
            out.push(symbols[i]);
            i += 1;
        }
    }
    out
}
