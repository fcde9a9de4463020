//! Sentencing analytics over extracted fields: imprisonment means by year
//! range and prior record, an ordinary-least-squares fit of imprisonment
//! length against the magnitude of the financial loss, sentence-type
//! shares by loss bucket, and a blood-alcohol histogram.

pub mod report;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::extraction::Extraction;
use crate::rulex::{parse_duration, parse_money, DurationKind};
use crate::taskschema::{FieldMap, Task};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceType {
    Fine,
    Imprisonment,
    /// Imprisonment whose execution is suspended.
    Suspension,
}

/// One case reduced to the quantities the analyses need. Values come from
/// extractions, so any of them may be missing.
#[derive(Clone, Debug, Serialize)]
pub struct CaseRecord {
    pub id: String,
    pub task: Task,
    pub year: i32,
    /// True when a prior conviction was extracted; absence of evidence is
    /// treated as no record.
    pub prior_record: bool,
    pub bac: Option<f64>,
    pub fine: Option<u64>,
    pub imprisonment_months: Option<f64>,
    pub suspension_months: Option<f64>,
    /// Total financial loss (principal and aided amounts combined).
    pub loss: Option<u64>,
}

impl CaseRecord {
    /// The headline sentence: a suspension outranks the imprisonment it
    /// suspends, which outranks a fine.
    pub fn sentence_type(&self) -> Option<SentenceType> {
        if self.suspension_months.is_some() {
            Some(SentenceType::Suspension)
        } else if self.imprisonment_months.is_some() {
            Some(SentenceType::Imprisonment)
        } else if self.fine.is_some() {
            Some(SentenceType::Fine)
        } else {
            None
        }
    }
}

fn first_value<'a>(fields: &'a FieldMap, name: &str) -> Option<&'a str> {
    fields.get(name).and_then(|v| v.first()).map(String::as_str)
}

fn months_of(fields: &FieldMap, name: &str) -> Option<f64> {
    let raw = first_value(fields, name)?;
    parse_duration(raw).into_iter().find_map(|d| match d.value {
        DurationKind::Months(m) => Some(m),
        DurationKind::Hours(_) => None,
    })
}

fn money_of(fields: &FieldMap, name: &str) -> Option<u64> {
    let raw = first_value(fields, name)?;
    parse_money(raw).first().map(|m| m.amount)
}

/// Sum of every monetary value in the named fields; `None` when none of
/// them yields money.
fn money_sum(fields: &FieldMap, names: &[&str]) -> Option<u64> {
    let mut total = 0u64;
    let mut seen = false;
    for name in names {
        for v in fields.get(*name).into_iter().flatten() {
            for m in parse_money(v) {
                total += m.amount;
                seen = true;
            }
        }
    }
    seen.then_some(total)
}

fn percent_of(fields: &FieldMap, name: &str) -> Option<f64> {
    first_value(fields, name)?.strip_suffix('%')?.parse().ok()
}

/// Join per-category extractions with criminal-ruling extractions into
/// case records, pairing both to documents by id.
pub fn build_records(
    docs: &[Document],
    facts_preds: &[Extraction],
    ruling_preds: &[Extraction],
) -> Result<Vec<CaseRecord>> {
    let mut facts_by_id: BTreeMap<&str, &Extraction> = BTreeMap::new();
    for p in facts_preds {
        if facts_by_id.insert(&p.id, p).is_some() {
            return Err(Error::DuplicateId { id: p.id.clone() });
        }
    }
    let mut ruling_by_id: BTreeMap<&str, &Extraction> = BTreeMap::new();
    for p in ruling_preds {
        if p.task != Task::RulingCriminal {
            return Err(Error::Invalid(format!(
                "ruling extraction {} carries task {}, expected {}",
                p.id,
                p.task,
                Task::RulingCriminal
            )));
        }
        if ruling_by_id.insert(&p.id, p).is_some() {
            return Err(Error::DuplicateId { id: p.id.clone() });
        }
    }

    let empty = FieldMap::new();
    let mut records = Vec::with_capacity(docs.len());
    for doc in docs {
        let facts = match facts_by_id.get(doc.id.as_str()) {
            Some(p) if p.task != doc.category => {
                return Err(Error::TaskMismatch {
                    task: p.task.to_string(),
                    category: doc.category.to_string(),
                });
            }
            Some(p) => &p.fields,
            None => &empty,
        };
        let ruling = ruling_by_id.get(doc.id.as_str()).map_or(&empty, |p| &p.fields);

        let prior_record = first_value(facts, "criminal_record")
            .and_then(|v| v.parse::<u32>().ok())
            .is_some_and(|n| n > 0);
        let loss = match doc.category {
            Task::Fraud => money_sum(facts, &["loss", "loss_aiding"]),
            Task::Embezzlement => money_sum(facts, &["embezzled_money"]),
            _ => None,
        };
        records.push(CaseRecord {
            id: doc.id.clone(),
            task: doc.category,
            year: doc.year,
            prior_record,
            bac: percent_of(facts, "bac"),
            fine: money_of(ruling, "fine"),
            imprisonment_months: months_of(ruling, "imprisonment"),
            suspension_months: months_of(ruling, "suspension"),
            loss,
        });
    }
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeRow {
    pub year_min: i32,
    pub year_max: i32,
    pub prior_record: bool,
    pub mean_months: f64,
    pub n: usize,
}

/// Mean imprisonment length per (year range, prior record) cell, over the
/// records that carry an imprisonment term. Empty cells are omitted.
pub fn yearly_means(records: &[CaseRecord], ranges: &[(i32, i32)]) -> Vec<RegimeRow> {
    let mut rows = Vec::new();
    for &(lo, hi) in ranges {
        for prior in [false, true] {
            let months: Vec<f64> = records
                .iter()
                .filter(|r| r.year >= lo && r.year <= hi && r.prior_record == prior)
                .filter_map(|r| r.imprisonment_months)
                .collect();
            if months.is_empty() {
                continue;
            }
            rows.push(RegimeRow {
                year_min: lo,
                year_max: hi,
                prior_record: prior,
                mean_months: months.iter().sum::<f64>() / months.len() as f64,
                n: months.len(),
            });
        }
    }
    rows
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

/// The (log10 loss, imprisonment months) pairs the regression and its
/// scatter plot are built from.
pub fn loss_month_points(records: &[CaseRecord]) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter_map(|r| {
            let loss = r.loss.filter(|&l| l > 0)?;
            let months = r.imprisonment_months?;
            Some(((loss as f64).log10(), months))
        })
        .collect()
}

/// Least-squares fit of imprisonment months against log10 of the loss,
/// over records carrying both. `None` when the fit is underdetermined.
pub fn ols_months_vs_log_loss(records: &[CaseRecord]) -> Option<OlsFit> {
    let points = loss_month_points(records);
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = points.iter().map(|p| (p.1 - (slope * p.0 + intercept)).powi(2)).sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(OlsFit { slope, intercept, r2, n })
}

#[derive(Clone, Debug, Serialize)]
pub struct BucketRow {
    pub lo_log: f64,
    pub hi_log: f64,
    pub n: usize,
    pub fine_share: f64,
    pub imprisonment_share: f64,
    pub suspension_share: f64,
}

/// Sentence-type shares per log10-loss bucket. Buckets are half-open with
/// an inclusive final edge; empty buckets are omitted.
pub fn sentence_type_shares(records: &[CaseRecord], edges: &[f64]) -> Vec<BucketRow> {
    assert!(edges.len() >= 2, "need at least one bucket");
    let mut rows = Vec::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let last = hi == *edges.last().unwrap();
        let mut counts = [0usize; 3];
        for r in records {
            let Some(loss) = r.loss.filter(|&l| l > 0) else { continue };
            let x = (loss as f64).log10();
            let inside = x >= lo && (x < hi || (last && x == hi));
            if !inside {
                continue;
            }
            match r.sentence_type() {
                Some(SentenceType::Fine) => counts[0] += 1,
                Some(SentenceType::Imprisonment) => counts[1] += 1,
                Some(SentenceType::Suspension) => counts[2] += 1,
                None => {}
            }
        }
        let n: usize = counts.iter().sum();
        if n == 0 {
            continue;
        }
        rows.push(BucketRow {
            lo_log: lo,
            hi_log: hi,
            n,
            fine_share: counts[0] as f64 / n as f64,
            imprisonment_share: counts[1] as f64 / n as f64,
            suspension_share: counts[2] as f64 / n as f64,
        });
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BacBin {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

/// Histogram of blood-alcohol percentages in fixed-width bins starting at
/// `origin`. Readings below the origin are out of scope and dropped.
pub fn bac_histogram(records: &[CaseRecord], origin: f64, width: f64) -> Vec<BacBin> {
    assert!(width > 0.0, "bin width must be positive");
    let values: Vec<f64> = records.iter().filter_map(|r| r.bac).filter(|&b| b >= origin).collect();
    let Some(max) = values.iter().copied().reduce(f64::max) else { return Vec::new() };
    let n_bins = (((max - origin) / width).floor() as usize) + 1;
    let mut bins: Vec<BacBin> = (0..n_bins)
        .map(|i| BacBin { lo: origin + i as f64 * width, hi: origin + (i + 1) as f64 * width, n: 0 })
        .collect();
    for v in values {
        let idx = (((v - origin) / width).floor() as usize).min(n_bins - 1);
        bins[idx].n += 1;
    }
    bins
}
