//! CSV drives and the on-disk profile corpus.
//!
//! A corpus directory holds `profiles/<id>.csv` (header `t_ms,<channels>`)
//! and `labels.csv` with header `profile_id,label`, label 1 = anomalous.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Profile, RawDrive, Signal, SAMPLE_MS};
use crate::error::{Error, Result};

pub const DRIVE_HEADER: [&str; 6] = [
    "t_ms",
    "accel_pedal_pct",
    "brake_pedal_pct",
    "speed_kph",
    "lat_acc_g",
    "long_acc_g",
];

pub const LABELS_FILE: &str = "labels.csv";
pub const PROFILES_DIR: &str = "profiles";

fn with_path(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Data(format!("{}: {e}", path.display()))
}

fn parse_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::Reader::from_path(path).map_err(with_path(path))?;
    let header: Vec<String> = reader.headers().map_err(with_path(path))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(with_path(path))?;
        let row = record
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    Error::Data(format!("{}: row {}: cannot parse {f:?} as a number", path.display(), line + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn columns(rows: &[Vec<f64>], width: usize) -> Vec<Vec<f64>> {
    (0..width).map(|c| rows.iter().map(|r| r[c]).collect()).collect()
}

/// Drive id from a file name: the stem.
fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn read_drive_csv(path: &Path) -> Result<RawDrive> {
    let (header, rows) = parse_rows(path)?;
    if header != DRIVE_HEADER {
        return Err(Error::Data(format!(
            "{}: header {header:?}, expected {}",
            path.display(),
            DRIVE_HEADER.join(",")
        )));
    }
    let mut cols = columns(&rows, DRIVE_HEADER.len());
    let t = cols.remove(0);
    let signals: [Vec<f64>; 5] = cols.try_into().expect("five signal columns");
    RawDrive::new(stem(path), t, signals)
}

fn write_rows(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(with_path(path))?;
    w.write_record(header).map_err(with_path(path))?;
    let len = columns.first().map_or(0, |c| c.len());
    let mut record = Vec::with_capacity(columns.len());
    for i in 0..len {
        record.clear();
        record.extend(columns.iter().map(|c| c[i].to_string()));
        w.write_record(&record).map_err(with_path(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_drive_csv(path: &Path, drive: &RawDrive) -> Result<()> {
    let mut cols: Vec<&[f64]> = vec![&drive.t_ms];
    cols.extend(Signal::ALL.iter().map(|&s| drive.signal(s)));
    write_rows(path, &DRIVE_HEADER, &cols)
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Every `*.csv` drive in `dir`, ordered by file name.
pub fn read_drives_dir(dir: &Path) -> Result<Vec<RawDrive>> {
    csv_files(dir)?.iter().map(|p| read_drive_csv(p)).collect()
}

pub fn read_labels(path: &Path) -> Result<BTreeMap<String, bool>> {
    let mut reader = csv::Reader::from_path(path).map_err(with_path(path))?;
    let header: Vec<String> = reader.headers().map_err(with_path(path))?.iter().map(str::to_string).collect();
    if header != ["profile_id", "label"] {
        return Err(Error::Data(format!("{}: header {header:?}, expected profile_id,label", path.display())));
    }
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(with_path(path))?;
        let label = match record[1].trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::Data(format!("{}: label {other:?} is not 0 or 1", path.display()))),
        };
        out.insert(record[0].to_string(), label);
    }
    Ok(out)
}

pub fn write_labels<'a>(path: &Path, labels: impl IntoIterator<Item = (&'a str, bool)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(with_path(path))?;
    w.write_record(["profile_id", "label"]).map_err(with_path(path))?;
    for (id, label) in labels {
        w.write_record([id, if label { "1" } else { "0" }]).map_err(with_path(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_profile_csv(path: &Path) -> Result<Profile> {
    let (header, rows) = parse_rows(path)?;
    if header.first().map(String::as_str) != Some("t_ms") || header.len() < 2 {
        return Err(Error::Data(format!("{}: profile header must be t_ms followed by channels", path.display())));
    }
    if rows.len() < 2 {
        return Err(Error::Data(format!("{}: profile has fewer than 2 samples", path.display())));
    }
    let mut cols = columns(&rows, header.len());
    let t = cols.remove(0);
    if t.windows(2).any(|p| ((p[1] - p[0]) - SAMPLE_MS).abs() > 1e-6) {
        return Err(Error::Data(format!("{}: samples are not on the 10 ms grid", path.display())));
    }
    Ok(Profile {
        id: stem(path),
        start_ms: t[0],
        channels: header[1..].to_vec(),
        data: cols,
        label: None,
        point_labels: None,
    })
}

pub fn write_profile_csv(path: &Path, profile: &Profile) -> Result<()> {
    let t: Vec<f64> = (0..profile.len()).map(|i| profile.start_ms + i as f64 * SAMPLE_MS).collect();
    let mut header = vec!["t_ms"];
    header.extend(profile.channels.iter().map(String::as_str));
    let mut cols: Vec<&[f64]> = vec![&t];
    cols.extend(profile.data.iter().map(Vec::as_slice));
    write_rows(path, &header, &cols)
}

/// Writes `profiles/<id>.csv` for every profile and `labels.csv` for the labelled ones.
pub fn write_corpus(dir: &Path, profiles: &[Profile]) -> Result<()> {
    let pdir = dir.join(PROFILES_DIR);
    fs::create_dir_all(&pdir).map_err(|e| Error::io(&pdir, e))?;
    for p in profiles {
        write_profile_csv(&pdir.join(format!("{}.csv", p.id)), p)?;
    }
    write_labels(
        &dir.join(LABELS_FILE),
        profiles.iter().filter_map(|p| p.label.map(|l| (p.id.as_str(), l))),
    )
}

/// Reads a corpus, ordered by profile id; labels are attached when `labels.csv` exists.
pub fn read_corpus(dir: &Path) -> Result<Vec<Profile>> {
    let pdir = dir.join(PROFILES_DIR);
    if !pdir.is_dir() {
        return Err(Error::Data(format!("{} is not a profile corpus (no {PROFILES_DIR}/)", dir.display())));
    }
    let mut profiles = csv_files(&pdir)?
        .iter()
        .map(|p| read_profile_csv(p))
        .collect::<Result<Vec<_>>>()?;
    let labels_path = dir.join(LABELS_FILE);
    if labels_path.exists() {
        let labels = read_labels(&labels_path)?;
        for p in &mut profiles {
            p.label = labels.get(&p.id).copied();
        }
    }
    profiles.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(profiles)
}
