//! Candidate log: the audit trail of every pseudo-labeled selection.
//!
//! Comma-separated with header
//! `iteration,target_model,example_id,class,score,label`. `target_model` is
//! empty for self-training, `label` is the assigned multi-hot vector as a
//! string of `0`/`1` characters (class 0 first). Records are appended in
//! selection order: iteration, then target model, then class, then rank.

use std::fs::OpenOptions;
use std::path::Path;

use super::PseudoLabelCandidate;
use crate::data::MultiHotLabel;
use crate::{Error, Result};

const HEADER: [&str; 6] = ["iteration", "target_model", "example_id", "class", "score", "label"];

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Appends records to `path`, writing the header first if the file is new.
pub fn save_candidate_log(candidates: &[PseudoLabelCandidate], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let fresh = !path.exists();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(HEADER).map_err(|e| csv_err(path, e))?;
    }
    for c in candidates {
        let label: String = c.assigned_label.bits().iter().map(|&b| if b { '1' } else { '0' }).collect();
        w.write_record([
            c.iteration.to_string(),
            c.target_model.map_or(String::new(), |m| m.to_string()),
            c.example_id.clone(),
            c.class.to_string(),
            c.score.to_string(),
            label,
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_candidate_log(path: impl AsRef<Path>) -> Result<Vec<PseudoLabelCandidate>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let head = r.headers().map_err(|e| csv_err(path, e))?;
    if head.iter().ne(HEADER) {
        return Err(Error::format(path, 1, "unexpected candidate log header"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |field: &str| Error::format(path, line, format!("invalid {field}"));
        let bits = rec[5]
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(bad("label")),
            })
            .collect::<Result<Vec<bool>>>()?;
        out.push(PseudoLabelCandidate {
            iteration: rec[0].parse().map_err(|_| bad("iteration"))?,
            target_model: match &rec[1] {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("target_model"))?),
            },
            example_id: rec[2].to_string(),
            class: rec[3].parse().map_err(|_| bad("class"))?,
            score: rec[4].parse().map_err(|_| bad("score"))?,
            assigned_label: MultiHotLabel::new(bits),
        });
    }
    Ok(out)
}
