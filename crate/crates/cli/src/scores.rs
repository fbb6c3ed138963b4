//! Precomputed score files for `evaluate`.
//!
//! CSV with header `id,s:<class0>,s:<class1>,...` and one row per test
//! example id; any finite real works as a score.

use std::collections::HashMap;
use std::path::Path;

use tritrain::data::LabeledDataset;

use crate::CliError;

const PREFIX: &str = "s:";

fn bad(path: &Path, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}: line {line}: {msg}", path.display()))
}

/// Scores aligned with the rows of `test`.
pub fn load_scores(test: &LabeledDataset, path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(path, 1, "missing header"))?;
    let expected: Vec<String> = std::iter::once("id".to_string())
        .chain(test.class_names().iter().map(|c| format!("{PREFIX}{c}")))
        .collect();
    if header.split(',').map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(bad(path, 1, format!("expected header {}", expected.join(","))));
    }
    let mut by_id = HashMap::new();
    for (k, line) in lines.enumerate() {
        let n = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != expected.len() {
            return Err(bad(path, n, format!("expected {} fields, found {}", expected.len(), fields.len())));
        }
        let scores = fields[1..]
            .iter()
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(bad(path, n, format!("invalid score `{f}`"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if by_id.insert(fields[0].to_string(), scores).is_some() {
            return Err(bad(path, n, format!("duplicate id `{}`", fields[0])));
        }
    }
    test.examples()
        .iter()
        .map(|r| {
            by_id
                .get(&r.example.id)
                .cloned()
                .ok_or_else(|| CliError::Validation(format!("{}: no scores for id `{}`", path.display(), r.example.id)))
        })
        .collect()
}

/// Writes scores for the rows of `test`.
pub fn save_scores(test: &LabeledDataset, scores: &[Vec<f64>], path: &Path) -> Result<(), CliError> {
    let mut text = String::from("id");
    for c in test.class_names() {
        text.push_str(&format!(",{PREFIX}{c}"));
    }
    text.push('\n');
    for (r, s) in test.examples().iter().zip(scores) {
        text.push_str(&r.example.id);
        for v in s {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tritrain::data::{Example, LabeledExample, MultiHotLabel};

    #[test]
    fn round_trip_and_errors() {
        let rows = (0..3)
            .map(|i| LabeledExample::new(Example::new(format!("t{i}"), vec![0.0]), MultiHotLabel::new(vec![i == 1])))
            .collect();
        let test = LabeledDataset::new(1, vec!["dog".into()], rows).unwrap();
        let p = std::env::temp_dir().join(format!("tritrain-scores-{}.csv", std::process::id()));
        let s = vec![vec![0.1], vec![0.9], vec![-3.5]];
        save_scores(&test, &s, &p).unwrap();
        assert_eq!(load_scores(&test, &p).unwrap(), s);
        std::fs::write(&p, "id,s:dog\nt0,0.1\nt1,x\n").unwrap();
        let msg = load_scores(&test, &p).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
        std::fs::write(&p, "id,s:dog\nt0,0.1\nt1,0.2\n").unwrap();
        assert!(load_scores(&test, &p).is_err());
        std::fs::remove_file(p).ok();
    }
}
