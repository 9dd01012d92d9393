//! End-to-end steps shared by the command line and the integration tests:
//! corpus generation, preprocessing, fitting, scoring and evaluation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::data::anomaly::inject_anomalies;
use crate::data::io::{read_drives_dir, read_labels, write_drive_csv, write_labels, LABELS_FILE};
use crate::data::normalize::normalize;
use crate::data::preprocess::{extract_profiles, profile_ranges, resample_10ms};
use crate::data::split::split_profiles;
use crate::data::synth::generate_drives;
use crate::data::window::{make_windows, shortest_length, window_label};
use crate::data::{Profile, RawDrive};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, Metrics};
use crate::data::benchmark::{point_scores, Benchmark};
use crate::encoder::EncoderShape;
use crate::model::{Model, ModelSpec};
use crate::objective::{classify, quantile, Decision, ScoreRecord};
use crate::tensor::seeded_rng;
use crate::train::{score_windows, train, TrainOutcome, TrainSettings, Validation};

pub const DRIVES_DIR: &str = "drives";
pub const SCORES_HEADER: [&str; 5] = ["window_id", "profile_id", "start", "score", "decision"];

// Offsets that give each pipeline stage its own random stream under one seed.
const INJECT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const BATCH_STREAM: u64 = 0xd1b5_4a32_d192_ed03;

/// Synthetic drives with anomalies written back into their braking episodes,
/// and the label of each episode's profile id.
pub struct GeneratedCorpus {
    pub drives: Vec<RawDrive>,
    pub labels: BTreeMap<String, bool>,
}

pub fn generate_corpus(cfg: &RunConfig) -> Result<GeneratedCorpus> {
    if cfg.drives == 0 {
        return Err(Error::Config("drives must be positive".into()));
    }
    let mut drives = generate_drives(cfg.drives, cfg.seed)?;
    let mut profiles = Vec::new();
    let mut origin = Vec::new();
    for (d, drive) in drives.iter().enumerate() {
        for (p, range) in extract_profiles(drive).into_iter().zip(profile_ranges(drive)) {
            profiles.push(p);
            origin.push((d, range.0));
        }
    }
    let (labelled, _) = inject_anomalies(
        &profiles,
        cfg.anomaly_ratio,
        &cfg.anomaly_kinds,
        cfg.seed.wrapping_add(INJECT_STREAM),
    )?;
    let mut labels = BTreeMap::new();
    for (p, &(d, start)) in labelled.iter().zip(&origin) {
        let drive = &mut drives[d];
        for (name, col) in p.channels.iter().zip(&p.data) {
            let sig = crate::data::Signal::from_name(name).expect("profiles carry drive signals");
            drive.signals[sig.index()][start..start + col.len()].copy_from_slice(col);
        }
        labels.insert(p.id.clone(), p.label == Some(true));
    }
    Ok(GeneratedCorpus { drives, labels })
}

/// `drives/<id>.csv` per drive plus `labels.csv`.
pub fn write_generated(dir: &Path, corpus: &GeneratedCorpus) -> Result<()> {
    let ddir = dir.join(DRIVES_DIR);
    fs::create_dir_all(&ddir).map_err(|e| Error::io(&ddir, e))?;
    for d in &corpus.drives {
        write_drive_csv(&ddir.join(format!("{}.csv", d.id)), d)?;
    }
    write_labels(&dir.join(LABELS_FILE), corpus.labels.iter().map(|(k, &v)| (k.as_str(), v)))
}

/// Resamples and extracts every drive under `dir` (or `dir/drives`), attaching
/// labels from `dir/labels.csv` when present.
pub fn preprocess_dir(dir: &Path) -> Result<Vec<Profile>> {
    let ddir = dir.join(DRIVES_DIR);
    let drives = read_drives_dir(if ddir.is_dir() { &ddir } else { dir })?;
    let mut profiles = Vec::new();
    for d in &drives {
        profiles.extend(extract_profiles(&resample_10ms(d)?));
    }
    let labels_path = dir.join(LABELS_FILE);
    if labels_path.exists() {
        let labels = read_labels(&labels_path)?;
        for p in &mut profiles {
            p.label = labels.get(&p.id).copied();
        }
    }
    log::info!("{} drives -> {} profiles", drives.len(), profiles.len());
    Ok(profiles)
}

pub struct FittedRun {
    pub checkpoint: Checkpoint,
    pub outcome: TrainOutcome,
    /// Number of training windows per epoch.
    pub train_windows: usize,
}

fn select(profiles: &[Profile], channels: &[String]) -> Result<Vec<Profile>> {
    profiles.iter().map(|p| p.select(channels)).collect()
}

/// Splits, normalizes, windows and trains under `cfg`.
pub fn fit(cfg: &RunConfig, profiles: &[Profile]) -> Result<FittedRun> {
    cfg.validate()?;
    let profiles = select(profiles, &cfg.channels)?;
    let split = split_profiles(&profiles, cfg.train_split, cfg.seed)?;
    let train_raw: Vec<Profile> = split.train.iter().map(|&i| profiles[i].clone()).collect();
    let test_raw: Vec<Profile> = split.test.iter().map(|&i| profiles[i].clone()).collect();
    if train_raw.is_empty() {
        return Err(Error::Data("no normal profiles available for training".into()));
    }
    let (train_set, stats) = normalize(&train_raw, None)?;
    let (test_set, _) = normalize(&test_raw, Some(&stats))?;

    let window = match cfg.window {
        Some(w) => w,
        None => shortest_length(&train_set).expect("nonempty training set"),
    };
    if window < 2 {
        return Err(Error::Data(format!("window {window} is shorter than 2 samples")));
    }
    let train_windows = make_windows(&train_set, window, cfg.stride)?;
    if train_windows.is_empty() {
        return Err(Error::Data(format!("no training profile is at least {window} samples long")));
    }

    let labelled_test: Vec<Profile> = test_set.into_iter().filter(|p| p.label.is_some()).collect();
    let val_windows = make_windows(&labelled_test, window, cfg.stride)?;
    let validation = Validation {
        profiles: &labelled_test,
        windows: &val_windows,
        labels: val_windows
            .windows
            .iter()
            .map(|r| window_label(&labelled_test[r.profile], r.start, window).expect("labelled"))
            .collect(),
    };

    let mut model = Model::init(cfg.model_spec(), &mut seeded_rng(cfg.seed))?;
    let settings = TrainSettings {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        optimizer: cfg.optimizer(),
        seed: cfg.seed.wrapping_add(BATCH_STREAM),
    };
    log::info!(
        "training on {} windows (w = {window}, {} profiles), validating on {}",
        train_windows.len(),
        train_set.len(),
        val_windows.len()
    );
    let outcome = train(&mut model, &settings, &train_set, &train_windows, Some(&validation))?;

    let tau = match &outcome.best {
        Some(m) => m.tau,
        None => {
            let (scores, _) = score_windows(&model, &train_set, &train_windows)?;
            quantile(&scores, 1.0 - cfg.expected_anomaly_rate)?
        }
    };
    let checkpoint = Checkpoint {
        config: RunConfig {
            window: Some(window),
            ..cfg.clone()
        },
        stats,
        window,
        tau,
        best_epoch: outcome.best_epoch,
        best_f1: outcome.best.map(|m| m.f1_pa),
        test_ids: test_raw.iter().map(|p| p.id.clone()).collect(),
        model,
    };
    Ok(FittedRun {
        checkpoint,
        outcome,
        train_windows: train_windows.len(),
    })
}

/// Scores every window of `profiles` with the checkpoint, deciding at `tau`.
pub fn score_profiles(ckpt: &Checkpoint, profiles: &[Profile], tau: f64) -> Result<Vec<ScoreRecord>> {
    let selected = select(profiles, &ckpt.stats.channels)?;
    let (normalized, _) = normalize(&selected, Some(&ckpt.stats))?;
    let set = make_windows(&normalized, ckpt.window, ckpt.config.stride)?;
    if set.is_empty() {
        return Ok(Vec::new());
    }
    let (scores, lls) = score_windows(&ckpt.model, &normalized, &set)?;
    Ok(set
        .windows
        .iter()
        .zip(scores)
        .zip(lls)
        .enumerate()
        .map(|(i, ((r, score), sensor_lls))| ScoreRecord {
            window_id: i,
            profile_id: normalized[r.profile].id.clone(),
            start: r.start,
            score,
            sensor_lls,
            decision: classify(score, tau),
        })
        .collect())
}

pub fn write_scores(path: &Path, records: &[ScoreRecord]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(SCORES_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.window_id.to_string(),
            r.profile_id.clone(),
            r.start.to_string(),
            r.score.to_string(),
            u8::from(r.decision.is_anomalous()).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Score file rows; per-sensor log-likelihoods are not stored and come back empty.
pub fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    let csv_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    if reader.headers().map_err(csv_err)?.iter().ne(SCORES_HEADER) {
        return Err(Error::Data(format!("{}: header must be {}", path.display(), SCORES_HEADER.join(","))));
    }
    let field = |v: &str, what: &str| Error::Data(format!("{}: bad {what} {v:?}", path.display()));
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(ScoreRecord {
                window_id: rec[0].parse().map_err(|_| field(&rec[0], "window_id"))?,
                profile_id: rec[1].to_string(),
                start: rec[2].parse().map_err(|_| field(&rec[2], "start"))?,
                score: rec[3].parse().map_err(|_| field(&rec[3], "score"))?,
                sensor_lls: Vec::new(),
                decision: match &rec[4] {
                    "0" => Decision::Normal,
                    "1" => Decision::Anomalous,
                    v => return Err(field(v, "decision")),
                },
            })
        })
        .collect()
}

/// Window-level metrics; every window inherits its profile's label.
pub fn evaluate_records(records: &[ScoreRecord], labels: &BTreeMap<String, bool>) -> Result<Metrics> {
    let truth = records
        .iter()
        .map(|r| {
            labels
                .get(&r.profile_id)
                .copied()
                .ok_or_else(|| Error::Data(format!("no label for profile {}", r.profile_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
    evaluate(&scores, &truth)
}

pub fn metrics_report(m: &Metrics, windows: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "f1_pa = {}", m.f1_pa);
    let _ = writeln!(out, "tau = {}", m.tau);
    let _ = writeln!(out, "auroc = {}", m.auroc);
    let _ = writeln!(out, "auprc = {}", m.auprc);
    let _ = writeln!(out, "windows = {windows}");
    let _ = writeln!(
        out,
        "metrics f1_pa={} tau={} auroc={} auprc={} windows={windows}",
        m.f1_pa, m.tau, m.auroc, m.auprc
    );
    out
}

/// Only the profiles whose ids are listed, in corpus order.
pub fn restrict(profiles: &[Profile], ids: &[String]) -> Vec<Profile> {
    profiles.iter().filter(|p| ids.contains(&p.id)).cloned().collect()
}


/// Trains on a benchmark's training matrix and returns point-level metrics
/// on its test matrix. All matrix columns are used; `cfg.window` must be set.
/// No checkpoint selection happens, the last epoch is evaluated.
pub fn fit_benchmark(cfg: &RunConfig, bench: &Benchmark) -> Result<Metrics> {
    cfg.validate()?;
    let window = cfg
        .window
        .ok_or_else(|| Error::Config("benchmarks need an explicit window".into()))?;
    let (train_set, stats) = normalize(std::slice::from_ref(&bench.train), None)?;
    let (test_set, _) = normalize(std::slice::from_ref(&bench.test), Some(&stats))?;
    let train_windows = make_windows(&train_set, window, cfg.stride)?;
    let test_windows = make_windows(&test_set, window, cfg.stride)?;
    if train_windows.is_empty() || test_windows.is_empty() {
        return Err(Error::Data(format!("benchmark series are shorter than window {window}")));
    }
    let spec = ModelSpec {
        shape: EncoderShape {
            sensors: bench.train.channels.len(),
            ..cfg.model_spec().shape
        },
        ..cfg.model_spec()
    };
    let mut model = Model::init(spec, &mut seeded_rng(cfg.seed))?;
    let settings = TrainSettings {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        optimizer: cfg.optimizer(),
        seed: cfg.seed.wrapping_add(BATCH_STREAM),
    };
    train(&mut model, &settings, &train_set, &train_windows, None)?;
    let (scores, _) = score_windows(&model, &test_set, &test_windows)?;
    let starts: Vec<(usize, f64)> = test_windows.windows.iter().map(|r| r.start).zip(scores).collect();
    let points = point_scores(bench.test.len(), window, &starts)?;
    let labels = bench
        .test
        .point_labels
        .as_ref()
        .ok_or_else(|| Error::Data("benchmark test series has no labels".into()))?;
    evaluate(&points, labels)
}
