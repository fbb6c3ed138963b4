//! Dataset files.
//!
//! Comma-separated text with one header row:
//!
//! ```text
//! id[,replica],f0,f1,...,f{d-1}[,y:<class0>,y:<class1>,...]
//! ```
//!
//! The `f*` columns declare the feature width `d` and the `y:*` columns the
//! event set (their count is `C`, their suffixes the class names). A file
//! without `y:` columns is an unlabeled pool. Label fields are `0` or `1`.
//! The optional `replica` column is only written for bootstrap samples.
//! Features are written in shortest round-trip decimal form.

use std::collections::HashSet;
use std::path::Path;

use super::{Example, LabeledDataset, LabeledExample, MultiHotLabel, UnlabeledPool};
use crate::{Error, Result};

const LABEL_PREFIX: &str = "y:";

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetFile {
    Labeled(LabeledDataset),
    Pool(UnlabeledPool),
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn header(dim: usize, has_replica: bool, class_names: &[String]) -> Vec<String> {
    let mut cols = vec!["id".to_string()];
    if has_replica {
        cols.push("replica".into());
    }
    cols.extend((0..dim).map(|k| format!("f{k}")));
    cols.extend(class_names.iter().map(|n| format!("{LABEL_PREFIX}{n}")));
    cols
}

pub fn save_dataset(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let has_replica = data.examples().iter().any(|r| r.replica > 0);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header(data.dim(), has_replica, data.class_names()))
        .map_err(|e| csv_err(path, e))?;
    for row in data.examples() {
        let mut rec = vec![row.example.id.clone()];
        if has_replica {
            rec.push(row.replica.to_string());
        }
        rec.extend(row.example.features.iter().map(|v| v.to_string()));
        rec.extend(row.label.bits().iter().map(|&b| if b { "1" } else { "0" }.to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_pool(pool: &UnlabeledPool, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header(pool.dim(), false, &[]))
        .map_err(|e| csv_err(path, e))?;
    for ex in pool.examples() {
        let mut rec = vec![ex.id.clone()];
        rec.extend(ex.features.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes pool examples together with their ground-truth labels, in the
/// labeled file format. Used for diagnostics only.
pub fn save_labels(
    pool: &UnlabeledPool,
    truth: &[MultiHotLabel],
    class_names: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let rows = pool
        .examples()
        .iter()
        .zip(truth)
        .map(|(ex, label)| LabeledExample {
            example: ex.clone(),
            label: label.clone(),
            replica: 0,
        })
        .collect();
    let ds = LabeledDataset::new(pool.dim(), class_names.to_vec(), rows)?;
    save_dataset(&ds, path)
}

struct Layout {
    has_replica: bool,
    dim: usize,
    class_names: Vec<String>,
}

fn parse_header(path: &Path, cols: &csv::StringRecord) -> Result<Layout> {
    let bad = |msg: String| Error::format(path, 1, msg);
    let mut it = cols.iter().peekable();
    if it.next() != Some("id") {
        return Err(bad("first column must be `id`".into()));
    }
    let has_replica = it.peek() == Some(&"replica");
    if has_replica {
        it.next();
    }
    let mut dim = 0;
    while let Some(&name) = it.peek() {
        if name.starts_with(LABEL_PREFIX) {
            break;
        }
        if name != format!("f{dim}") {
            return Err(bad(format!("expected column `f{dim}`, found `{name}`")));
        }
        dim += 1;
        it.next();
    }
    if dim == 0 {
        return Err(bad("no feature columns".into()));
    }
    let mut class_names = Vec::new();
    for name in it {
        match name.strip_prefix(LABEL_PREFIX) {
            Some(n) if !n.is_empty() => class_names.push(n.to_string()),
            _ => return Err(bad(format!("unexpected column `{name}` after label columns"))),
        }
    }
    Ok(Layout {
        has_replica,
        dim,
        class_names,
    })
}

/// Loads a dataset file, dispatching on the presence of label columns.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetFile> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let head = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let layout = parse_header(path, &head)?;
    let c_total = layout.class_names.len();
    let width = 1 + usize::from(layout.has_replica) + layout.dim + c_total;

    let mut labeled = Vec::new();
    let mut pool = Vec::new();
    let mut seen = HashSet::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |msg: String| Error::format(path, line, msg);
        if rec.len() != width {
            return Err(bad(format!("expected {width} fields, found {}", rec.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(bad("empty id".into()));
        }
        let mut col = 1;
        let replica = if layout.has_replica {
            col += 1;
            rec[1]
                .parse::<u32>()
                .map_err(|_| bad(format!("invalid replica `{}`", &rec[1])))?
        } else {
            0
        };
        if !seen.insert((id.clone(), replica)) {
            return Err(bad(format!("duplicate id `{id}`")));
        }
        let features = (col..col + layout.dim)
            .map(|k| match rec[k].parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(bad(format!("invalid feature `{}` in column {k}", &rec[k]))),
            })
            .collect::<Result<Vec<f64>>>()?;
        col += layout.dim;
        let example = Example { id, features };
        if c_total == 0 {
            pool.push(example);
            continue;
        }
        let bits = (col..col + c_total)
            .map(|k| match &rec[k] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(bad(format!("invalid label `{other}`"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        labeled.push(LabeledExample {
            example,
            label: MultiHotLabel::new(bits),
            replica,
        });
    }
    if c_total == 0 {
        Ok(DatasetFile::Pool(UnlabeledPool::new(layout.dim, pool)?))
    } else {
        Ok(DatasetFile::Labeled(LabeledDataset::new(
            layout.dim,
            layout.class_names,
            labeled,
        )?))
    }
}

impl DatasetFile {
    pub fn into_labeled(self, path: &Path) -> Result<LabeledDataset> {
        match self {
            DatasetFile::Labeled(d) => Ok(d),
            DatasetFile::Pool(_) => Err(Error::format(path, 1, "expected label columns")),
        }
    }

    /// A labeled file is accepted as a pool by dropping its labels.
    pub fn into_pool(self) -> Result<UnlabeledPool> {
        match self {
            DatasetFile::Pool(p) => Ok(p),
            DatasetFile::Labeled(d) => {
                let dim = d.dim();
                UnlabeledPool::new(dim, d.into_examples().into_iter().map(|r| r.example).collect())
            }
        }
    }
}
