use std::collections::BTreeSet;
use std::fs::File;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

fn read_records(path: &Path) -> Result<Vec<(u64, csv::StringRecord)>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(file);
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push((line, rec));
    }
    Ok(rows)
}

fn parse_value<T: Real>(path: &Path, line: u64, field: &str) -> Result<T> {
    field
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .and_then(T::from_f64)
        .ok_or_else(|| Error::Data(format!("{}: line {line}: '{field}' is not a finite number", path.display())))
}

/// Iris in the usual layout: four numeric columns then the species name.
/// A header row is detected and skipped. Species are numbered alphabetically.
pub fn load_iris<T: Real>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let mut rows = read_records(path)?;
    if let Some((_, first)) = rows.first() {
        if first.get(0).is_none_or(|f| f.parse::<f64>().is_err()) {
            rows.remove(0);
        }
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no samples", path.display())));
    }
    let mut features = Vec::with_capacity(rows.len() * 4);
    let mut names = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        if rec.len() != 5 {
            return Err(Error::Data(format!("{}: line {line}: expected 5 fields, found {}", path.display(), rec.len())));
        }
        for f in rec.iter().take(4) {
            features.push(parse_value(path, *line, f)?);
        }
        let name = &rec[4];
        if name.is_empty() {
            return Err(Error::Data(format!("{}: line {line}: missing class name", path.display())));
        }
        names.push(name.to_string());
    }
    let classes: Vec<String> = names.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let labels = names.iter().map(|n| classes.binary_search(n).expect("name collected above")).collect();
    Dataset::new(features, 4, labels, classes)
}

/// Precomputed features: header `f0,…,f{k-1},label`, integer labels.
pub fn load_feature_csv<T: Real>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let rows = read_records(path)?;
    let Some(((_, header), body)) = rows.split_first() else {
        return Err(Error::Data(format!("{}: empty file", path.display())));
    };
    let k = header.len().saturating_sub(1);
    let expected: Vec<String> = (0..k).map(|i| format!("f{i}")).chain(["label".to_string()]).collect();
    if k == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Data(format!(
            "{}: header must be f0,…,f{{k-1}},label, found '{}'",
            path.display(),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    if body.is_empty() {
        return Err(Error::Data(format!("{}: no samples", path.display())));
    }
    let mut features = Vec::with_capacity(body.len() * k);
    let mut labels = Vec::with_capacity(body.len());
    for (line, rec) in body {
        if rec.len() != k + 1 {
            return Err(Error::Data(format!("{}: line {line}: expected {} fields, found {}", path.display(), k + 1, rec.len())));
        }
        for f in rec.iter().take(k) {
            features.push(parse_value(path, *line, f)?);
        }
        let label: usize = rec[k]
            .parse()
            .map_err(|_| Error::Data(format!("{}: line {line}: label '{}' is not a class index", path.display(), &rec[k])))?;
        labels.push(label);
    }
    let count = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(features, k, labels, (0..count).map(|c| c.to_string()).collect())
}

/// Writes `f0,…,f{k-1},label` rows.
pub fn write_feature_csv<T: Real>(path: impl AsRef<Path>, data: &Dataset<T>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let k = data.num_features();
    let header: Vec<String> = (0..k).map(|i| format!("f{i}")).chain(["label".to_string()]).collect();
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for i in 0..data.len() {
        let row: Vec<String> =
            data.sample(i).iter().map(|x| format!("{x:e}")).chain([data.label(i).to_string()]).collect();
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
