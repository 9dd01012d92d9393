//! Public benchmark matrices (SMD, MSL, SMAP layout): headerless comma-separated
//! rows, one timestamp per row, with a one-column label file for the test rows.

use std::path::{Path, PathBuf};

use super::Profile;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Benchmark {
    pub train: Profile,
    /// Carries per-row labels in `point_labels`.
    pub test: Profile,
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Data(format!("{}: row {}: {e}", path.display(), line + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Data(format!(
                    "{}: row {} has {} columns, expected {}",
                    path.display(),
                    line + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::Data(format!("{}: fewer than 2 rows", path.display())));
    }
    Ok(rows)
}

fn to_profile(id: &str, rows: &[Vec<f64>]) -> Profile {
    let width = rows[0].len();
    Profile {
        id: id.to_string(),
        start_ms: 0.0,
        channels: (0..width).map(|c| format!("c{c}")).collect(),
        data: (0..width).map(|c| rows.iter().map(|r| r[c]).collect()).collect(),
        label: None,
        point_labels: None,
    }
}

pub fn load_benchmark(train: &Path, test: &Path, labels: &Path) -> Result<Benchmark> {
    let train_rows = read_matrix(train)?;
    let test_rows = read_matrix(test)?;
    if train_rows[0].len() != test_rows[0].len() {
        return Err(Error::Data(format!(
            "train has {} columns but test has {}",
            train_rows[0].len(),
            test_rows[0].len()
        )));
    }
    let label_rows = read_matrix(labels)?;
    if label_rows.len() != test_rows.len() || label_rows[0].len() != 1 {
        return Err(Error::Data(format!(
            "{}: expected one label per test row ({}), got {} rows of {} columns",
            labels.display(),
            test_rows.len(),
            label_rows.len(),
            label_rows[0].len()
        )));
    }
    let point_labels = label_rows
        .iter()
        .map(|r| match r[0] {
            v if v == 0.0 => Ok(false),
            v if v == 1.0 => Ok(true),
            v => Err(Error::Data(format!("{}: label {v} is not 0 or 1", labels.display()))),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut test = to_profile("test", &test_rows);
    test.point_labels = Some(point_labels);
    Ok(Benchmark {
        train: to_profile("train", &train_rows),
        test,
    })
}

/// `(train, test, labels)` paths of an SMD machine under the usual
/// `train/`, `test/`, `test_label/` directories.
pub fn smd_paths(root: &Path, machine: &str) -> (PathBuf, PathBuf, PathBuf) {
    let file = format!("{machine}.txt");
    (
        root.join("train").join(&file),
        root.join("test").join(&file),
        root.join("test_label").join(&file),
    )
}

/// Spreads window scores over the timestamps they cover, keeping the maximum
/// where windows overlap. Timestamps no window covers take the score of the
/// nearest covered one.
pub fn point_scores(len: usize, width: usize, windows: &[(usize, f64)]) -> Result<Vec<f64>> {
    if windows.is_empty() {
        return Err(Error::InvalidArgument("no window scores to spread".into()));
    }
    let mut out = vec![f64::NEG_INFINITY; len];
    for &(start, score) in windows {
        if start + width > len {
            return Err(Error::InvalidArgument(format!("window at {start} overruns length {len}")));
        }
        for v in &mut out[start..start + width] {
            *v = v.max(score);
        }
    }
    let covered: Vec<usize> = (0..len).filter(|&i| out[i] != f64::NEG_INFINITY).collect();
    for i in 0..len {
        if out[i] == f64::NEG_INFINITY {
            let nearest = covered
                .iter()
                .min_by_key(|&&c| c.abs_diff(i))
                .expect("at least one window");
            out[i] = out[*nearest];
        }
    }
    Ok(out)
}
