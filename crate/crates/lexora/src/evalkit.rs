//! Field-level evaluation: confusion counts, F1, and report rendering.
//!
//! Scalar fields compare as single values; list fields compare as
//! multisets. A wrong scalar value counts one false positive (the slot was
//! filled, just badly) rather than a false positive plus a false negative,
//! so precision and recall stay interpretable per field.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::extraction::Extraction;
use crate::taskschema::{FieldKind, FieldMap, Task, TaskSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub r#fn: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.r#fn += other.r#fn;
        self.tn += other.tn;
    }

    /// F1 over this field; undefined (`None`) when the field never
    /// carried a value on either side.
    pub fn f1(&self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.r#fn;
        if denom == 0 {
            None
        } else {
            Some(2.0 * self.tp as f64 / denom as f64)
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    /// Case-fold, collapse whitespace, and drop trailing periods before
    /// comparing values.
    pub normalize: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { normalize: true }
    }
}

/// Canonical form used for value comparison. Idempotent.
pub fn normalize_value(v: &str) -> String {
    let mut cur = v.to_string();
    loop {
        let mut next: String = cur
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase();
        if let Some(stripped) = next.strip_suffix('.') {
            next = stripped.to_string();
        }
        if next == cur {
            return next;
        }
        cur = next;
    }
}

fn values_of(map: &FieldMap, field: &str, normalize: bool) -> Vec<String> {
    let raw = map.get(field).cloned().unwrap_or_default();
    if normalize {
        raw.iter().map(|v| normalize_value(v)).collect()
    } else {
        raw
    }
}

/// Confusion counts for a single document, keyed by field name.
pub fn match_fields(
    spec: &TaskSpec,
    gold: &FieldMap,
    pred: &FieldMap,
    normalize: bool,
) -> BTreeMap<String, Confusion> {
    let mut out = BTreeMap::new();
    for schema in &spec.fields {
        let gold_vals = values_of(gold, &schema.name, normalize);
        let pred_vals = values_of(pred, &schema.name, normalize);
        let mut c = Confusion::default();
        match schema.kind {
            FieldKind::Scalar => match (gold_vals.first(), pred_vals.first()) {
                (None, None) => c.tn += 1,
                (None, Some(_)) => c.fp += 1,
                (Some(_), None) => c.r#fn += 1,
                (Some(g), Some(p)) => {
                    if g == p {
                        c.tp += 1;
                    } else {
                        c.fp += 1;
                    }
                }
            },
            FieldKind::List => {
                if gold_vals.is_empty() && pred_vals.is_empty() {
                    c.tn += 1;
                } else {
                    let mut gold_counts: BTreeMap<&str, u64> = BTreeMap::new();
                    for g in &gold_vals {
                        *gold_counts.entry(g).or_default() += 1;
                    }
                    for p in &pred_vals {
                        match gold_counts.get_mut(p.as_str()) {
                            Some(n) if *n > 0 => {
                                *n -= 1;
                                c.tp += 1;
                            }
                            _ => c.fp += 1,
                        }
                    }
                    c.r#fn += gold_counts.values().sum::<u64>();
                }
            }
        }
        out.insert(schema.name.clone(), c);
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldEval {
    pub confusion: Confusion,
    pub f1: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskEval {
    pub task: Task,
    pub n_docs: usize,
    pub fields: BTreeMap<String, FieldEval>,
    /// Mean F1 over fields where F1 is defined.
    pub avg_f1: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub tasks: Vec<TaskEval>,
    /// Mean of the per-task averages that are defined.
    pub mean_avg_f1: Option<f64>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

impl EvalReport {
    pub fn from_tasks(tasks: Vec<TaskEval>) -> EvalReport {
        // The corpus aggregate weights every field equally, pooling fields
        // across tasks rather than averaging the per-task means.
        let mean_avg_f1 =
            mean_defined(tasks.iter().flat_map(|t| t.fields.values().map(|f| f.f1)));
        EvalReport { tasks, mean_avg_f1 }
    }
}

/// Score predictions against the gold labels of `docs`.
///
/// Every prediction must name a document in `docs` (same id) and carry the
/// task being evaluated; a document without a prediction scores as an
/// empty prediction. Documents must belong to the evaluated task's
/// category.
pub fn eval_dataset(
    spec: &TaskSpec,
    docs: &[Document],
    preds: &[Extraction],
    opts: &EvalOptions,
) -> Result<TaskEval> {
    let mut by_id: BTreeMap<&str, &Extraction> = BTreeMap::new();
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
    let doc_ids: std::collections::BTreeSet<&str> = docs.iter().map(|d| d.id.as_str()).collect();
    if let Some(stray) = by_id.keys().find(|id| !doc_ids.contains(**id)) {
        return Err(Error::Invalid(format!("prediction {stray} matches no document")));
    }

    let empty = FieldMap::new();
    let mut totals: BTreeMap<String, Confusion> = BTreeMap::new();
    for doc in docs {
        if doc.category != spec.task {
            return Err(Error::TaskMismatch {
                task: spec.task.to_string(),
                category: doc.category.to_string(),
            });
        }
        let pred = by_id.get(doc.id.as_str()).map_or(&empty, |p| &p.fields);
        for (field, c) in match_fields(spec, &doc.labels, pred, opts.normalize) {
            totals.entry(field).or_default().add(&c);
        }
    }

    let fields: BTreeMap<String, FieldEval> = totals
        .into_iter()
        .map(|(name, confusion)| (name, FieldEval { f1: confusion.f1(), confusion }))
        .collect();
    let avg_f1 = mean_defined(fields.values().map(|f| f.f1));
    Ok(TaskEval { task: spec.task, n_docs: docs.len(), fields, avg_f1 })
}

fn fmt_f1(f1: Option<f64>) -> String {
    match f1 {
        Some(v) => format!("{v:.4}"),
        None => "n/a".to_string(),
    }
}

/// Plain-text table of the report, one row per field plus per-task and
/// overall averages.
pub fn render_table(report: &EvalReport) -> String {
    let mut rows: Vec<[String; 7]> = vec![[
        "task".into(),
        "field".into(),
        "tp".into(),
        "fp".into(),
        "fn".into(),
        "tn".into(),
        "f1".into(),
    ]];
    for task in &report.tasks {
        for (name, fe) in &task.fields {
            let c = fe.confusion;
            rows.push([
                task.task.to_string(),
                name.clone(),
                c.tp.to_string(),
                c.fp.to_string(),
                c.r#fn.to_string(),
                c.tn.to_string(),
                fmt_f1(fe.f1),
            ]);
        }
        rows.push([
            task.task.to_string(),
            "(avg)".into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            fmt_f1(task.avg_f1),
        ]);
    }
    rows.push([
        "(all)".into(),
        "(mean avg)".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        fmt_f1(report.mean_avg_f1),
    ]);

    let mut widths = [0usize; 7];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
