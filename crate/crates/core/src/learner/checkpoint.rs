//! Model checkpoint files.
//!
//! A checkpoint is a JSON object:
//!
//! ```text
//! {
//!   "format": "tritrain-checkpoint",
//!   "version": 1,
//!   "config": { "input_dim": d, "hidden": [h1, ...], "num_classes": C, "seed": s },
//!   "train_seed": t | null,
//!   "layers": [ { "in_dim": i, "out_dim": o, "weights": [i*o floats, row-major], "bias": [o floats] }, ... ]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form and parse back bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Layer, Model, ModelConfig};
use crate::{Error, Result};

const FORMAT: &str = "tritrain-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub train_seed: Option<u64>,
    pub layers: Vec<Layer>,
}

impl Checkpoint {
    pub fn new(model: &Model, train_seed: Option<u64>) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            config: model.config().clone(),
            train_seed,
            layers: model.layers().to_vec(),
        }
    }

    pub fn into_model(self) -> Result<Model> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        Model::from_layers(self.config, self.layers)
    }
}

pub fn save_checkpoint(model: &Model, train_seed: Option<u64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &Checkpoint::new(model, train_seed)).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model, Option<u64>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    let seed = ckpt.train_seed;
    Ok((ckpt.into_model()?, seed))
}
