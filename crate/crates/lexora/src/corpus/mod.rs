//! Corpus loading, saving, splitting, and synthesis.
//!
//! A corpus file is UTF-8 JSON-lines: one document object per line with
//! keys `id`, `category`, `facts`, `ruling`, `year`, and `labels`.

mod synth;

pub use synth::{generate_synthetic, PrisonRegime, SynthConfig};

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taskschema::{builtin_task, FieldMap, Task};

/// One precedent: facts and ruling text plus metadata and gold labels.
///
/// Labels are keyed by field names of the task matching `category`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub category: Task,
    #[serde(default)]
    pub facts: String,
    #[serde(default)]
    pub ruling: String,
    pub year: i32,
    #[serde(default)]
    pub labels: FieldMap,
}

impl Document {
    /// Source text for `task` extraction over this document.
    pub fn source_for(&self, task: Task) -> &str {
        if task.reads_ruling() {
            &self.ruling
        } else {
            &self.facts
        }
    }

    fn validate(&self) -> Result<()> {
        if !(1990..=2100).contains(&self.year) {
            return Err(Error::Invalid(format!(
                "document {}: year {} outside 1990..=2100",
                self.id, self.year
            )));
        }
        let spec = builtin_task(self.category);
        for name in self.labels.keys() {
            if spec.field(name).is_none() {
                return Err(Error::UnknownField {
                    task: self.category.to_string(),
                    field: name.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Load a JSON-lines corpus. Order is preserved; ids must be unique.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        doc.validate().map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId { id: doc.id });
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Write a corpus as JSON-lines. `load_corpus(save_corpus(docs))` is the
/// identity, field for field.
pub fn save_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for doc in docs {
        serde_json::to_writer(&mut out, doc).expect("document serializes");
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, Default)]
pub struct DatasetSplit {
    pub train: Vec<Document>,
    pub valid: Vec<Document>,
    pub test: Vec<Document>,
}

impl DatasetSplit {
    pub fn from_train(train: Vec<Document>) -> DatasetSplit {
        DatasetSplit { train, valid: Vec::new(), test: Vec::new() }
    }
}

/// Shuffle deterministically and carve out train/valid/test. 20% of the
/// `n_train` pool (rounded) becomes the validation set.
pub fn split_dataset(
    docs: &[Document],
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<DatasetSplit> {
    if n_train + n_test > docs.len() {
        return Err(Error::InsufficientDocs { required: n_train + n_test, available: docs.len() });
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n_valid = (n_train as f64 * 0.2).round() as usize;
    let take = |range: std::ops::Range<usize>| range.map(|i| docs[order[i]].clone()).collect();
    Ok(DatasetSplit {
        train: take(0..n_train - n_valid),
        valid: take(n_train - n_valid..n_train),
        test: take(n_train..n_train + n_test),
    })
}
