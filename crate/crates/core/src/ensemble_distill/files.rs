//! Ensemble manifests and cached teacher logits.
//!
//! A manifest is JSON `{"members": ["a.json", ...]}` listing checkpoint
//! paths, resolved relative to the manifest's directory.
//!
//! A teacher-logit cache is CSV with header `id,z:<class0>,z:<class1>,...`,
//! one row per labeled example, keyed by example id.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Ensemble;
use crate::data::LabeledDataset;
use crate::learner::load_checkpoint;
use crate::{Error, Result};

const LOGIT_PREFIX: &str = "z:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub members: Vec<PathBuf>,
}

pub fn save_ensemble_manifest(members: &[PathBuf], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let manifest = EnsembleManifest {
        members: members.to_vec(),
    };
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<Ensemble> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let manifest: EnsembleManifest = serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let members = manifest
        .members
        .iter()
        .map(|m| load_checkpoint(base.join(m)).map(|(model, _)| model))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(members)
}

pub fn save_teacher_logits(data: &LabeledDataset, logits: &[Vec<f64>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if logits.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            actual: logits.len(),
        });
    }
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["id".to_string()];
    header.extend(data.class_names().iter().map(|c| format!("{LOGIT_PREFIX}{c}")));
    w.write_record(&header).map_err(csv_err)?;
    let mut seen = HashMap::new();
    for (row, z) in data.examples().iter().zip(logits) {
        if seen.insert(row.example.id.as_str(), ()).is_some() {
            continue;
        }
        let mut rec = vec![row.example.id.clone()];
        rec.extend(z.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a logit cache and returns the rows aligned with `data`. Every
/// example id in `data` must be present and the class columns must match.
pub fn load_teacher_logits(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| Error::format(path, 1, "missing header"))?
        .map_err(csv_err)?;
    let expected: Vec<String> = std::iter::once("id".to_string())
        .chain(data.class_names().iter().map(|c| format!("{LOGIT_PREFIX}{c}")))
        .collect();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::format(path, 1, format!("expected header {}", expected.join(","))));
    }
    let mut by_id = HashMap::new();
    for (k, rec) in records.enumerate() {
        let line = k as u64 + 2;
        let rec = rec.map_err(csv_err)?;
        if rec.len() != expected.len() {
            return Err(Error::format(
                path,
                line,
                format!("expected {} fields, found {}", expected.len(), rec.len()),
            ));
        }
        let z = rec
            .iter()
            .skip(1)
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path, line, e.to_string()))?;
        if by_id.insert(rec[0].to_string(), z).is_some() {
            return Err(Error::format(path, line, format!("duplicate id `{}`", &rec[0])));
        }
    }
    data.examples()
        .iter()
        .map(|row| {
            by_id
                .get(&row.example.id)
                .cloned()
                .ok_or_else(|| Error::format(path, 0, format!("no logits for id `{}`", row.example.id)))
        })
        .collect()
}
