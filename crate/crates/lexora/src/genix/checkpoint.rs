//! Model checkpoints: versioned JSON with exact f64 round-tripping.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::ModelParams;
use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    params: ModelParams,
}

pub fn save_model(path: &Path, params: &ModelParams) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let ckpt = Checkpoint { format_version: FORMAT_VERSION, params: params.clone() };
    serde_json::to_writer(BufWriter::new(file), &ckpt)
        .map_err(|e| Error::Config(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
    if ckpt.format_version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "checkpoint {} has format version {}, expected {FORMAT_VERSION}",
            path.display(),
            ckpt.format_version
        )));
    }
    let params = ckpt.params;
    params.hyper.validate().map_err(Error::Config)?;
    let d = params.hyper.d_model;
    for (name, t) in params.tensors() {
        let ok = match name.as_str() {
            "embed" | "out_proj" => t.rows == params.hyper.vocab_size && t.cols == d,
            n if n.starts_with("prompt.") => t.rows == params.hyper.n_prompt && t.cols == d,
            n if n.ends_with(".w1") => t.rows == params.hyper.d_ff && t.cols == d,
            n if n.ends_with(".w2") => t.rows == d && t.cols == params.hyper.d_ff,
            _ => t.rows == d && t.cols == d,
        };
        if !ok {
            return Err(Error::Config(format!(
                "checkpoint tensor {name} has shape [{}, {}], inconsistent with its hyperparameters",
                t.rows, t.cols
            )));
        }
    }
    if params.base.enc.len() != params.hyper.n_enc_layers
        || params.base.dec.len() != params.hyper.n_dec_layers
    {
        return Err(Error::Config("checkpoint layer count mismatch".into()));
    }
    Ok(params)
}
