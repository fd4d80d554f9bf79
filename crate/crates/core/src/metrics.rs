//! Evaluation measures: macro-averaged F1, CoNLL-style span F1 over BIO
//! tags, perplexity from mean cross-entropy, and delta accuracy.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gold/pred class labels plus the set of classes being evaluated.
/// Every gold label must belong to the label set; predictions outside it
/// simply never score a true positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationResult {
    gold: Vec<String>,
    pred: Vec<String>,
    label_set: Vec<String>,
}

impl ClassificationResult {
    pub fn new(gold: Vec<String>, pred: Vec<String>, label_set: Vec<String>) -> Result<Self> {
        if gold.len() != pred.len() {
            return Err(Error::LengthMismatch {
                gold: gold.len(),
                pred: pred.len(),
            });
        }
        if gold.is_empty() {
            return Err(Error::InvalidArgument(
                "classification result is empty".to_string(),
            ));
        }
        let mut seen = HashSet::new();
        for label in &label_set {
            if !seen.insert(label) {
                return Err(Error::InvalidArgument(format!(
                    "label set repeats {label:?}"
                )));
            }
        }
        if let Some(stray) = gold.iter().find(|g| !seen.contains(g)) {
            return Err(Error::InvalidArgument(format!(
                "gold label {stray:?} is not in the label set"
            )));
        }
        Ok(Self {
            gold,
            pred,
            label_set,
        })
    }

    /// Label set = distinct labels appearing in gold or pred, sorted.
    pub fn with_observed_labels(gold: Vec<String>, pred: Vec<String>) -> Result<Self> {
        let mut labels: Vec<String> = gold
            .iter()
            .chain(pred.iter())
            .cloned()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        labels.sort();
        Self::new(gold, pred, labels)
    }
}

/// Unweighted mean of per-class F1 over the label set. A class with a
/// zero precision/recall/F1 denominator contributes 0.
pub fn macro_f1(result: &ClassificationResult) -> f64 {
    let mut per_class = BTreeMap::new();
    for label in &result.label_set {
        per_class.insert(label.as_str(), (0u64, 0u64, 0u64)); // tp, fp, fn
    }
    for (gold, pred) in result.gold.iter().zip(&result.pred) {
        if gold == pred {
            if let Some(entry) = per_class.get_mut(gold.as_str()) {
                entry.0 += 1;
            }
        } else {
            if let Some(entry) = per_class.get_mut(pred.as_str()) {
                entry.1 += 1;
            }
            if let Some(entry) = per_class.get_mut(gold.as_str()) {
                entry.2 += 1;
            }
        }
    }
    let f1_sum: f64 = per_class.values().map(|&(tp, fp, fn_)| f1(tp, fp, fn_)).sum();
    f1_sum / result.label_set.len() as f64
}

fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let precision = zero_safe(tp, tp + fp);
    let recall = zero_safe(tp, tp + fn_);
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn zero_safe(num: u64, denom: u64) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num as f64 / denom as f64
    }
}

/// Equal-length gold/pred BIO tag sequences ("O", "B-X", "I-X").
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSequencePair {
    gold_tags: Vec<String>,
    pred_tags: Vec<String>,
}

impl LabeledSequencePair {
    pub fn new(gold_tags: Vec<String>, pred_tags: Vec<String>) -> Result<Self> {
        for tags in [&gold_tags, &pred_tags] {
            for (position, tag) in tags.iter().enumerate() {
                if !is_valid_bio(tag) {
                    return Err(Error::InvalidBioTag {
                        tag: tag.clone(),
                        position,
                    });
                }
            }
        }
        Ok(Self {
            gold_tags,
            pred_tags,
        })
    }

    pub fn gold_tags(&self) -> &[String] {
        &self.gold_tags
    }

    pub fn pred_tags(&self) -> &[String] {
        &self.pred_tags
    }
}

fn is_valid_bio(tag: &str) -> bool {
    tag == "O"
        || tag
            .strip_prefix("B-")
            .or_else(|| tag.strip_prefix("I-"))
            .is_some_and(|ty| !ty.is_empty())
}

/// A typed span with inclusive boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

/// Lenient BIO decode: B-X always opens a span; I-X continues a running
/// span of type X or, with no such span running, opens one.
pub fn bio_spans(tags: &[String]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut current: Option<(usize, String)> = None;
    for (position, tag) in tags.iter().enumerate() {
        let (opens, ty) = if let Some(ty) = tag.strip_prefix("B-") {
            (true, Some(ty))
        } else if let Some(ty) = tag.strip_prefix("I-") {
            (false, Some(ty))
        } else {
            (false, None)
        };
        match ty {
            None => {
                if let Some((start, label)) = current.take() {
                    spans.push(Span {
                        start,
                        end: position - 1,
                        label,
                    });
                }
            }
            Some(ty) => {
                let continues = !opens && current.as_ref().is_some_and(|(_, label)| label == ty);
                if !continues {
                    if let Some((start, label)) = current.take() {
                        spans.push(Span {
                            start,
                            end: position - 1,
                            label,
                        });
                    }
                    current = Some((position, ty.to_string()));
                }
            }
        }
    }
    if let Some((start, label)) = current {
        spans.push(Span {
            start,
            end: tags.len() - 1,
            label,
        });
    }
    spans
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanF1Report {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_spans: u64,
    pub predicted_spans: u64,
    pub matched_spans: u64,
    /// Set when neither side contains any span; the scores are then 0 by
    /// convention rather than meaningful.
    pub empty: bool,
}

/// Micro-averaged exact-match span F1 over all pairs. A predicted span
/// counts as a true positive only when an identical (start, end, type)
/// gold span exists in the same sequence.
pub fn conll_span_f1(pairs: &[LabeledSequencePair]) -> Result<SpanF1Report> {
    let mut gold_total = 0u64;
    let mut pred_total = 0u64;
    let mut matched = 0u64;
    for (index, pair) in pairs.iter().enumerate() {
        if pair.gold_tags.len() != pair.pred_tags.len() {
            return Err(Error::PairLengthMismatch {
                index,
                gold: pair.gold_tags.len(),
                pred: pair.pred_tags.len(),
            });
        }
        let gold: HashSet<Span> = bio_spans(&pair.gold_tags).into_iter().collect();
        let pred = bio_spans(&pair.pred_tags);
        gold_total += gold.len() as u64;
        pred_total += pred.len() as u64;
        matched += pred.iter().filter(|span| gold.contains(span)).count() as u64;
    }
    let precision = zero_safe(matched, pred_total);
    let recall = zero_safe(matched, gold_total);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(SpanF1Report {
        precision,
        recall,
        f1,
        gold_spans: gold_total,
        predicted_spans: pred_total,
        matched_spans: matched,
        empty: gold_total == 0 && pred_total == 0,
    })
}

/// e^loss for a finite, non-negative mean cross-entropy.
pub fn perplexity(loss: f64) -> Result<f64> {
    if !loss.is_finite() || loss < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "loss {loss} must be finite and non-negative"
        )));
    }
    Ok(loss.exp())
}

/// Original minus perturbed accuracy, both in percent. Lower means more
/// robust.
pub fn delta_accuracy(original_acc: f64, perturbed_acc: f64) -> Result<f64> {
    for (name, value) in [("original", original_acc), ("perturbed", perturbed_acc)] {
        if !value.is_finite() || !(0.0..=100.0).contains(&value) {
            return Err(Error::InvalidArgument(format!(
                "{name} accuracy {value} is outside [0, 100]"
            )));
        }
    }
    Ok(original_acc - perturbed_acc)
}
