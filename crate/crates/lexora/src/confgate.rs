//! Confidence gating: pick a per-task confidence threshold so that the
//! predictions kept by the gate still recover a target share of the gold
//! values, then report what the gate costs in coverage.
//!
//! Recall here is computed against *all* documents: a prediction the gate
//! drops turns its true positives into misses. That makes recall
//! non-increasing in the threshold, so the calibrated threshold is simply
//! the largest candidate that still meets the target.

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::evalkit::{match_fields, EvalOptions};
use crate::extraction::Extraction;
use crate::taskschema::{Task, TaskSpec};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GateOutcome {
    pub task: Task,
    pub target_recall: f64,
    /// Keep predictions with confidence >= this value.
    pub threshold: f64,
    /// False when even a threshold of zero cannot reach the target; the
    /// gate then keeps everything.
    pub attainable: bool,
    /// Retained predictions / documents.
    pub coverage: f64,
    /// Field-level precision over retained predictions.
    pub precision: Option<f64>,
    /// Field-level recall against all gold values, retained or not.
    pub recall: Option<f64>,
    /// Fully-correct retained documents / retained documents.
    pub doc_precision: Option<f64>,
    /// Fully-correct retained documents / all documents.
    pub doc_recall: f64,
}

struct DocStat {
    conf: Option<f64>,
    tp: u64,
    fp: u64,
    gold: u64,
    exact: bool,
}

fn doc_stats(
    spec: &TaskSpec,
    docs: &[Document],
    preds: &[Extraction],
    opts: &EvalOptions,
) -> Result<Vec<DocStat>> {
    let mut by_id: std::collections::BTreeMap<&str, &Extraction> = Default::default();
    for p in preds {
        if p.task != spec.task {
            return Err(Error::Invalid(format!(
                "prediction {} is for task {}, expected {}",
                p.id, p.task, spec.task
            )));
        }
        if by_id.insert(&p.id, p).is_some() {
            return Err(Error::DuplicateId { id: p.id.clone() });
        }
    }
    let empty = crate::taskschema::FieldMap::new();
    let mut stats = Vec::with_capacity(docs.len());
    for doc in docs {
        let pred = by_id.get(doc.id.as_str());
        let fields = pred.map_or(&empty, |p| &p.fields);
        let per_field = match_fields(spec, &doc.labels, fields, opts.normalize);
        let tp = per_field.values().map(|c| c.tp).sum();
        let fp = per_field.values().map(|c| c.fp).sum();
        let exact = per_field.values().all(|c| c.fp == 0 && c.r#fn == 0);
        let gold = spec
            .fields
            .iter()
            .map(|f| doc.labels.get(&f.name).map_or(0, |v| v.len() as u64))
            .sum();
        stats.push(DocStat { conf: pred.map(|p| p.confidence), tp, fp, gold, exact });
    }
    Ok(stats)
}

fn recall_at(stats: &[DocStat], threshold: f64) -> Option<f64> {
    let gold: u64 = stats.iter().map(|s| s.gold).sum();
    if gold == 0 {
        return None;
    }
    let tp: u64 = stats
        .iter()
        .filter(|s| s.conf.is_some_and(|c| c >= threshold))
        .map(|s| s.tp)
        .sum();
    Some(tp as f64 / gold as f64)
}

/// Calibrate the largest threshold whose recall still meets
/// `target_recall`, and report the gate's metrics at that threshold.
///
/// Candidate thresholds are the observed confidences plus zero. When no
/// candidate reaches the target the threshold falls back to zero with
/// `attainable = false`. Documents without any gold value make recall
/// vacuous, so any threshold qualifies.
pub fn calibrate_threshold(
    spec: &TaskSpec,
    docs: &[Document],
    preds: &[Extraction],
    target_recall: f64,
    opts: &EvalOptions,
) -> Result<GateOutcome> {
    if !(0.0..=1.0).contains(&target_recall) {
        return Err(Error::Invalid(format!(
            "target recall must be within [0, 1], got {target_recall}"
        )));
    }
    if docs.is_empty() {
        return Err(Error::Invalid("cannot calibrate on an empty document set".into()));
    }
    let stats = doc_stats(spec, docs, preds, opts)?;

    let mut candidates: Vec<f64> = stats.iter().filter_map(|s| s.conf).collect();
    candidates.push(0.0);
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup();

    let mut threshold = 0.0;
    let mut attainable = false;
    for cand in candidates {
        let ok = match recall_at(&stats, cand) {
            Some(r) => r >= target_recall,
            None => true,
        };
        if ok {
            threshold = cand;
            attainable = true;
            break;
        }
    }

    let retained: Vec<&DocStat> = stats
        .iter()
        .filter(|s| s.conf.is_some_and(|c| c >= threshold))
        .collect();
    let rtp: u64 = retained.iter().map(|s| s.tp).sum();
    let rfp: u64 = retained.iter().map(|s| s.fp).sum();
    let exact_retained = retained.iter().filter(|s| s.exact).count();
    let precision = if rtp + rfp == 0 { None } else { Some(rtp as f64 / (rtp + rfp) as f64) };
    let doc_precision = if retained.is_empty() {
        None
    } else {
        Some(exact_retained as f64 / retained.len() as f64)
    };

    Ok(GateOutcome {
        task: spec.task,
        target_recall,
        threshold,
        attainable,
        coverage: retained.len() as f64 / docs.len() as f64,
        precision,
        recall: recall_at(&stats, threshold),
        doc_precision,
        doc_recall: exact_retained as f64 / docs.len() as f64,
    })
}

/// Keep the predictions whose confidence clears the threshold.
pub fn apply_gate(preds: &[Extraction], threshold: f64) -> Vec<Extraction> {
    preds.iter().filter(|p| p.confidence >= threshold).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::Provenance;
    use crate::taskschema::{builtin_task, FieldMap};
    use proptest::prelude::*;

    fn doc(id: &str, bac: Option<&str>) -> Document {
        let mut labels = FieldMap::new();
        if let Some(v) = bac {
            labels.insert("bac".into(), vec![v.into()]);
        }
        Document {
            id: id.into(),
            category: Task::DrunkDriving,
            facts: String::new(),
            ruling: String::new(),
            year: 2020,
            labels,
        }
    }

    fn pred(id: &str, bac: &str, conf: f64) -> Extraction {
        Extraction {
            id: id.into(),
            task: Task::DrunkDriving,
            fields: FieldMap::from([("bac".to_string(), vec![bac.to_string()])]),
            confidence: conf,
            provenance: Provenance::Model,
            malformed: false,
        }
    }

    #[test]
    fn threshold_is_largest_feasible() {
        let spec = builtin_task(Task::DrunkDriving);
        let docs = vec![doc("a", Some("0.1%")), doc("b", Some("0.2%"))];
        let preds = vec![pred("a", "0.1%", 0.9), pred("b", "0.2%", 0.5)];
        // Full recall needs both docs, so 0.9 is too strict and 0.5 wins.
        let g = calibrate_threshold(&spec, &docs, &preds, 1.0, &EvalOptions::default()).unwrap();
        assert_eq!(g.threshold, 0.5);
        assert!(g.attainable);
        assert_eq!(g.recall, Some(1.0));
        assert_eq!(g.coverage, 1.0);
        // Half recall is satisfied by the single high-confidence doc.
        let g = calibrate_threshold(&spec, &docs, &preds, 0.5, &EvalOptions::default()).unwrap();
        assert_eq!(g.threshold, 0.9);
        assert_eq!(g.coverage, 0.5);
        assert_eq!(g.doc_precision, Some(1.0));
        assert_eq!(g.doc_recall, 0.5);
    }

    #[test]
    fn unattainable_target_falls_back_to_zero() {
        let spec = builtin_task(Task::DrunkDriving);
        let docs = vec![doc("a", Some("0.1%"))];
        let preds = vec![pred("a", "0.9%", 0.8)];
        let g = calibrate_threshold(&spec, &docs, &preds, 0.8, &EvalOptions::default()).unwrap();
        assert!(!g.attainable);
        assert_eq!(g.threshold, 0.0);
        assert_eq!(g.recall, Some(0.0));
        assert_eq!(g.precision, Some(0.0));
    }

    #[test]
    fn gate_retains_boundary_confidence() {
        let preds = vec![pred("a", "x", 0.5), pred("b", "x", 0.49)];
        let kept = apply_gate(&preds, 0.5);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "a");
    }

    #[test]
    fn vacuous_gold_accepts_any_threshold() {
        let spec = builtin_task(Task::DrunkDriving);
        let docs = vec![doc("a", None), doc("b", None)];
        let preds = vec![pred("a", "0.1%", 0.7), pred("b", "0.2%", 0.3)];
        let g = calibrate_threshold(&spec, &docs, &preds, 0.9, &EvalOptions::default()).unwrap();
        assert_eq!(g.threshold, 0.7);
        assert_eq!(g.recall, None);
        assert!(g.attainable);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let spec = builtin_task(Task::DrunkDriving);
        let docs = vec![doc("a", Some("0.1%"))];
        assert!(calibrate_threshold(&spec, &docs, &[], 1.5, &EvalOptions::default()).is_err());
        assert!(calibrate_threshold(&spec, &[], &[], 0.5, &EvalOptions::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        /// The calibrated threshold must itself satisfy the target, and no
        /// strictly larger observed confidence may.
        #[test]
        fn chosen_threshold_is_maximal(
            cases in proptest::collection::vec((any::<bool>(), 0u8..=10), 1..10),
            target_step in 0u8..=4,
        ) {
            let spec = builtin_task(Task::DrunkDriving);
            let target = f64::from(target_step) / 4.0;
            let mut docs = Vec::new();
            let mut preds = Vec::new();
            for (i, (correct, conf)) in cases.iter().enumerate() {
                let id = format!("d{i}");
                docs.push(doc(&id, Some("0.1%")));
                preds.push(pred(&id, if *correct { "0.1%" } else { "0.9%" }, f64::from(*conf) / 10.0));
            }
            let g = calibrate_threshold(&spec, &docs, &preds, target, &EvalOptions::default()).unwrap();
            let gold = docs.len() as f64;
            let recall_of = |t: f64| {
                cases.iter().filter(|(c, conf)| *c && f64::from(*conf) / 10.0 >= t).count() as f64 / gold
            };
            if g.attainable {
                prop_assert!(recall_of(g.threshold) >= target);
                for (_, conf) in &cases {
                    let cand = f64::from(*conf) / 10.0;
                    if cand > g.threshold {
                        prop_assert!(recall_of(cand) < target, "larger candidate {cand} also feasible");
                    }
                }
            } else {
                prop_assert_eq!(g.threshold, 0.0);
                prop_assert!(recall_of(0.0) < target);
            }
        }
    }
}
