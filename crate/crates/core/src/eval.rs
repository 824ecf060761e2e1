//! Precision/recall/F-measure scoring of predicted messages and relations
//! against gold annotations. Matching is exact and one-to-one over
//! multisets; no partial credit.

use crate::grid::Grid;
use crate::message::MessageInstance;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub true_pos: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl ScoreReport {
    pub fn from_counts(true_pos: usize, predicted: usize, gold: usize) -> Self {
        let precision = if predicted == 0 {
            0.0
        } else {
            true_pos as f64 / predicted as f64
        };
        let recall = if gold == 0 {
            0.0
        } else {
            true_pos as f64 / gold as f64
        };
        ScoreReport {
            precision,
            recall,
            f_measure: f_measure(precision, recall),
            true_pos,
            predicted,
            gold,
        }
    }

    pub fn table(&self, what: &str) -> String {
        format!(
            "{what:<10} P {:>7.4}  R {:>7.4}  F {:>7.4}  (tp {} / predicted {} / gold {})",
            self.precision, self.recall, self.f_measure, self.true_pos, self.predicted, self.gold
        )
    }
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    /// Match on (type, source, doc id, sentence anchor).
    TypeOnly,
    /// Match on (type, bindings, source, reference time).
    TypeAndArgs,
}

fn message_key(m: &MessageInstance, mode: MatchMode) -> String {
    match mode {
        MatchMode::TypeOnly => format!("{}|{}|{}|{:?}", m.msg_type, m.source, m.doc_id, m.sentence),
        MatchMode::TypeAndArgs => {
            let bindings: Vec<String> = m
                .bindings
                .iter()
                .map(|(k, v)| format!("{k}={v:?}"))
                .collect();
            format!(
                "{}|{}|{}|{}",
                m.msg_type,
                m.source,
                m.ref_time.minutes(),
                bindings.join(",")
            )
        }
    }
}

fn multiset<I: Iterator<Item = String>>(keys: I) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for k in keys {
        *out.entry(k).or_insert(0) += 1;
    }
    out
}

fn overlap(pred: &BTreeMap<String, usize>, gold: &BTreeMap<String, usize>) -> usize {
    pred.iter()
        .map(|(k, &n)| n.min(*gold.get(k).unwrap_or(&0)))
        .sum()
}

/// Score predicted against gold messages with 1-to-1 multiset matching.
pub fn score_messages(
    predicted: &[MessageInstance],
    gold: &[MessageInstance],
    mode: MatchMode,
) -> ScoreReport {
    let pred_keys = multiset(predicted.iter().map(|m| message_key(m, mode)));
    let gold_keys = multiset(gold.iter().map(|m| message_key(m, mode)));
    ScoreReport::from_counts(overlap(&pred_keys, &gold_keys), predicted.len(), gold.len())
}

/// Score relation edges: a predicted edge matches a gold edge when the
/// schema names agree and both endpoint messages match under TypeAndArgs.
pub fn score_relations(predicted: &Grid, gold: &Grid) -> ScoreReport {
    let edge_keys = |g: &Grid| {
        let keys: Vec<String> = g
            .relations()
            .iter()
            .map(|r| {
                let end = |id: &str| {
                    g.message(id)
                        .map(|m| message_key(m, MatchMode::TypeAndArgs))
                        .unwrap_or_else(|| format!("missing:{id}"))
                };
                format!("{}|{}|{}", r.schema_name, end(&r.first), end(&r.second))
            })
            .collect();
        multiset(keys.into_iter())
    };
    let pred = edge_keys(predicted);
    let gold_keys = edge_keys(gold);
    ScoreReport::from_counts(
        overlap(&pred, &gold_keys),
        predicted.relations().len(),
        gold.relations().len(),
    )
}
