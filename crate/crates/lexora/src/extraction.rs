//! The common output type of both extraction engines, plus JSON-lines
//! persistence for prediction files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taskschema::{FieldMap, Task};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Rule,
    Model,
}

/// Structured output of one extractor run over one document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub id: String,
    pub task: Task,
    pub fields: FieldMap,
    /// Mean generated-token probability for model output; 1.0 for rules.
    pub confidence: f64,
    pub provenance: Provenance,
    /// Set when the model output did not parse cleanly.
    #[serde(default)]
    pub malformed: bool,
}

/// Write predictions as JSON-lines.
pub fn save_extractions(path: impl AsRef<Path>, preds: &[Extraction]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for p in preds {
        serde_json::to_writer(&mut out, p).expect("extraction serializes");
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Load predictions from JSON-lines, reporting the offending line on parse
/// failure.
pub fn load_extractions(path: impl AsRef<Path>) -> Result<Vec<Extraction>> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut preds = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: Extraction = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        preds.push(p);
    }
    Ok(preds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extraction_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preds.jsonl");
        let preds = vec![Extraction {
            id: "c-1".to_string(),
            task: Task::Fraud,
            fields: FieldMap::from([("loss".to_string(), vec!["42 won".to_string()])]),
            confidence: 0.875,
            provenance: Provenance::Model,
            malformed: false,
        }];
        save_extractions(&path, &preds).unwrap();
        assert_eq!(load_extractions(&path).unwrap(), preds);
    }
}
