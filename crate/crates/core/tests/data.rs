use gdflow::data::anomaly::{anomaly_count, inject_anomalies, AnomalyKind};
use gdflow::data::benchmark::{load_benchmark, point_scores};
use gdflow::data::io::{read_corpus, read_drive_csv, write_corpus, write_drive_csv};
use gdflow::data::normalize::{normalize, NormStats};
use gdflow::data::preprocess::{extract_profiles, profile_ranges, resample_10ms};
use gdflow::data::split::split_profiles;
use gdflow::data::synth::{generate_drives, synthesize_drive, CtgParams, DriveSpec, DriverStyle, G};
use gdflow::data::window::{make_windows, window_label, window_starts};
use gdflow::data::{Profile, RawDrive, Signal};
use gdflow::tensor::seeded_rng;
use gdflow::Error;
use proptest::prelude::*;
use rand::Rng;

fn drive(t: Vec<f64>, cols: [Vec<f64>; 5]) -> RawDrive {
    RawDrive::new("d", t, cols).unwrap()
}

/// Interpolates at `t` by locating the bracketing pair with a binary search.
fn interp_oracle(ts: &[f64], vs: &[f64], t: f64) -> f64 {
    let j = ts.partition_point(|&x| x <= t);
    if j == 0 {
        return vs[0];
    }
    if j == ts.len() {
        return vs[ts.len() - 1];
    }
    let (t0, t1, v0, v1) = (ts[j - 1], ts[j], vs[j - 1], vs[j]);
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

#[test]
fn resample_midpoint() {
    let raw = drive(vec![0.0, 20.0], std::array::from_fn(|_| vec![0.0, 2.0]));
    let out = resample_10ms(&raw).unwrap();
    assert_eq!(out.t_ms, vec![0.0, 10.0, 20.0]);
    for c in &out.signals {
        assert_eq!(c, &vec![0.0, 1.0, 2.0]);
    }
}

#[test]
fn resample_uniform_is_identity() {
    let t: Vec<f64> = (0..30).map(|k| 1000.0 + 10.0 * k as f64).collect();
    let cols = std::array::from_fn(|c| (0..30).map(|k| ((k * (c + 1)) as f64).sin()).collect());
    let raw = drive(t, cols);
    assert_eq!(resample_10ms(&raw).unwrap(), raw);
}

#[test]
fn resample_rejects_single_sample() {
    let raw = drive(vec![5.0], std::array::from_fn(|_| vec![1.0]));
    assert!(matches!(resample_10ms(&raw), Err(Error::Data(_))));
}

proptest! {
    #[test]
    fn resample_matches_piecewise_linear(seed in any::<u64>(), n in 2usize..40) {
        let mut rng = seeded_rng(seed);
        let mut t = vec![rng.gen_range(0.0..50.0)];
        for _ in 1..n {
            let last = *t.last().unwrap();
            t.push(last + rng.gen_range(0.5..37.0));
        }
        let cols: [Vec<f64>; 5] = std::array::from_fn(|_| (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect());
        let raw = drive(t.clone(), cols.clone());
        let out = resample_10ms(&raw).unwrap();
        prop_assert_eq!(out.t_ms[0], t[0]);
        prop_assert!(*out.t_ms.last().unwrap() <= t[n - 1] + 1e-9);
        prop_assert!(*out.t_ms.last().unwrap() > t[n - 1] - 10.0);
        for (k, &g) in out.t_ms.iter().enumerate() {
            prop_assert!((g - (t[0] + 10.0 * k as f64)).abs() < 1e-9);
            for c in 0..5 {
                let expect = interp_oracle(&t, &cols[c], g);
                prop_assert!((out.signals[c][k] - expect).abs() < 1e-9);
            }
        }
    }
}

/// Segments of (length, accel %, speed kph, brake %, lat g) laid end to end.
fn fixture() -> RawDrive {
    let segments: [(usize, f64, f64, f64, f64); 12] = [
        (5, 20.0, 40.0, 0.0, 0.0),    // pressed
        (8, 0.0, 40.0, 10.0, 0.01),   // A: qualifies
        (3, 20.0, 40.0, 0.0, 0.0),    // pressed
        (6, 0.2, 10.0, 10.0, 0.0),    // B: speed never above 15
        (2, 20.0, 40.0, 0.0, 0.0),    // pressed
        (6, 0.0, 50.0, 10.0, 0.0),    // C: one lateral sample at 0.1
        (2, 20.0, 40.0, 0.0, 0.0),    // pressed
        (5, 0.0, 50.0, 1.5, 0.0),     // D: brake never above 2
        (1, 20.0, 40.0, 0.0, 0.0),    // pressed
        (1, 0.0, 50.0, 10.0, 0.0),    // single released sample
        (2, 0.5, 40.0, 0.0, 0.0),     // exactly at the threshold counts as pressed
        (4, 0.49, 30.0, 5.0, -0.069), // E: qualifies, runs to the end
    ];
    let mut t = Vec::new();
    let mut cols: [Vec<f64>; 5] = Default::default();
    for (len, accel, speed, brake, lat) in segments {
        for i in 0..len {
            t.push(10.0 * t.len() as f64);
            cols[Signal::AccelPedal.index()].push(accel);
            // speed falls inside a segment but its first sample is the stated peak
            cols[Signal::Speed.index()].push(speed - i as f64);
            cols[Signal::BrakePedal.index()].push(brake);
            cols[Signal::LatAcc.index()].push(lat);
            cols[Signal::LongAcc.index()].push(-0.1);
        }
    }
    let c_start = 5 + 8 + 3 + 6 + 2;
    cols[Signal::LatAcc.index()][c_start + 3] = 0.1;
    RawDrive::new("fx", t, cols).unwrap()
}

#[test]
fn gate_fixture_yields_exact_profiles() {
    let d = fixture();
    assert_eq!(profile_ranges(&d), vec![(5, 13), (41, 45)]);
    let profiles = extract_profiles(&d);
    assert_eq!(profiles.len(), 2);
    assert_eq!(profiles[0].id, "fx_0");
    assert_eq!(profiles[0].start_ms, 50.0);
    assert_eq!(profiles[1].id, "fx_1");
    assert_eq!(profiles[1].start_ms, 410.0);
    for (p, (s, e)) in profiles.iter().zip([(5, 13), (41, 45)]) {
        assert_eq!(p.len(), e - s);
        for sig in Signal::ALL {
            assert_eq!(p.channel(sig.name()).unwrap(), &d.signal(sig)[s..e]);
        }
        assert!(p.label.is_none());
    }
}

#[test]
fn gates_reject_individually() {
    let base = |speed: f64, brake: f64, lat: f64| {
        let mut cols: [Vec<f64>; 5] = Default::default();
        for k in 0..6 {
            let pressed = k == 0 || k == 5;
            cols[Signal::AccelPedal.index()].push(if pressed { 30.0 } else { 0.0 });
            cols[Signal::Speed.index()].push(speed);
            cols[Signal::BrakePedal.index()].push(brake);
            cols[Signal::LatAcc.index()].push(if k == 2 { lat } else { 0.0 });
            cols[Signal::LongAcc.index()].push(0.0);
        }
        drive((0..6).map(|k| 10.0 * k as f64).collect(), cols)
    };
    assert_eq!(extract_profiles(&base(30.0, 5.0, 0.0)).len(), 1);
    assert!(extract_profiles(&base(10.0, 5.0, 0.0)).is_empty());
    assert!(extract_profiles(&base(15.0, 5.0, 0.0)).is_empty());
    assert!(extract_profiles(&base(30.0, 2.0, 0.0)).is_empty());
    assert!(extract_profiles(&base(30.0, 5.0, 0.1)).is_empty());
    assert!(extract_profiles(&base(30.0, 5.0, -0.07)).is_empty());
}

proptest! {
    #[test]
    fn extracted_segments_satisfy_gates(seed in any::<u64>(), n in 2usize..200) {
        let mut rng = seeded_rng(seed);
        let mut cols: [Vec<f64>; 5] = Default::default();
        for _ in 0..n {
            cols[0].push(if rng.gen_bool(0.3) { rng.gen_range(0.5..40.0) } else { rng.gen_range(0.0..0.5) });
            cols[1].push(rng.gen_range(0.0..4.0));
            cols[2].push(rng.gen_range(0.0..30.0));
            cols[3].push(rng.gen_range(-0.08..0.08));
            cols[4].push(rng.gen_range(-0.5..0.1));
        }
        let d = drive((0..n).map(|k| 10.0 * k as f64).collect(), cols);
        let ranges = profile_ranges(&d);
        let mut prev_end = 0;
        for &(s, e) in &ranges {
            prop_assert!(s >= prev_end && e > s + 1);
            prev_end = e;
            let accel = d.signal(Signal::AccelPedal);
            prop_assert!(accel[s..e].iter().all(|&a| a < 0.5));
            prop_assert!(s == 0 || accel[s - 1] >= 0.5);
            prop_assert!(e == n || accel[e] >= 0.5);
            prop_assert!(d.signal(Signal::Speed)[s..e].iter().any(|&v| v > 15.0));
            prop_assert!(d.signal(Signal::BrakePedal)[s..e].iter().any(|&v| v > 2.0));
            prop_assert!(d.signal(Signal::LatAcc)[s..e].iter().all(|v| v.abs() < 0.07));
        }
        prop_assert_eq!(extract_profiles(&d), extract_profiles(&d));
    }
}

fn profile(id: &str, data: Vec<Vec<f64>>, label: Option<bool>) -> Profile {
    Profile {
        id: id.into(),
        start_ms: 0.0,
        channels: (0..data.len()).map(|c| format!("c{c}")).collect(),
        data,
        label,
        point_labels: None,
    }
}

fn random_profiles(seed: u64, count: usize, channels: usize) -> Vec<Profile> {
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|i| {
            let len = rng.gen_range(2..40);
            let data = (0..channels)
                .map(|c| (0..len).map(|_| rng.gen_range(-3.0..3.0) * (c + 1) as f64 + c as f64).collect())
                .collect();
            profile(&format!("p{i:02}"), data, None)
        })
        .collect()
}

proptest! {
    #[test]
    fn normalize_moments(seed in any::<u64>()) {
        let profiles = random_profiles(seed, 6, 3);
        let (out, _) = normalize(&profiles, None).unwrap();
        for c in 0..3 {
            let all: Vec<f64> = out.iter().flat_map(|p| p.data[c].iter().copied()).collect();
            let n = all.len() as f64;
            let mean = all.iter().sum::<f64>() / n;
            let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn normalize_constant_channel_is_zero() {
    let p = profile("a", vec![vec![4.0; 10], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]], None);
    let (out, stats) = normalize(&[p], None).unwrap();
    assert_eq!(stats.std[0], 1e-6);
    assert!(out[0].data[0].iter().all(|&v| v == 0.0));
}

#[test]
fn normalize_uses_only_training_stats() {
    let train = random_profiles(1, 4, 2);
    let stats = NormStats::fit(&train).unwrap();
    let test_a = random_profiles(2, 3, 2);
    let test_b = random_profiles(3, 3, 2);
    let (_, sa) = normalize(&test_a, Some(&stats)).unwrap();
    let (_, sb) = normalize(&test_b, Some(&stats)).unwrap();
    assert_eq!(sa, stats);
    assert_eq!(sb, stats);
    assert!(NormStats::fit(&[]).is_err());
}

#[test]
fn window_examples() {
    assert_eq!(window_starts(5, 3, 1).unwrap(), vec![0, 1, 2]);
    assert_eq!(window_starts(12, 4, 4).unwrap(), vec![0, 4, 8]);
    assert!(window_starts(3, 4, 1).unwrap().is_empty());
    assert!(window_starts(5, 1, 1).is_err());
    assert!(window_starts(5, 2, 0).is_err());
}

proptest! {
    #[test]
    fn window_count_oracle(lens in prop::collection::vec(1usize..50, 1..8), w in 2usize..20, s in 1usize..6) {
        let profiles: Vec<Profile> = lens.iter().enumerate()
            .map(|(i, &l)| profile(&format!("p{i}"), vec![(0..l).map(|k| k as f64).collect()], Some(i % 2 == 0)))
            .collect();
        let set = make_windows(&profiles, w, s).unwrap();
        let expect: usize = lens.iter().map(|&l| if l >= w { (l - w) / s + 1 } else { 0 }).sum();
        prop_assert_eq!(set.len(), expect);
        prop_assert_eq!(set.skipped, lens.iter().filter(|&&l| l < w).count());
        for r in &set.windows {
            prop_assert!(r.start % s == 0 && r.start + w <= lens[r.profile]);
            prop_assert_eq!(window_label(&profiles[r.profile], r.start, w), Some(r.profile % 2 == 0));
        }
    }
}

#[test]
fn window_batch_layout() {
    let a = profile("a", vec![vec![0.0, 1.0, 2.0, 3.0], vec![10.0, 11.0, 12.0, 13.0]], None);
    let b = profile("b", vec![vec![5.0, 6.0, 7.0], vec![15.0, 16.0, 17.0]], None);
    let profiles = [a, b];
    let set = make_windows(&profiles, 3, 1).unwrap();
    assert_eq!(set.len(), 3);
    let batch = set.batch(&profiles, &[1, 2]).unwrap();
    assert_eq!(batch.tensor.shape(), &[2, 2, 3]);
    assert_eq!(batch.tensor.data(), &[1.0, 2.0, 3.0, 11.0, 12.0, 13.0, 5.0, 6.0, 7.0, 15.0, 16.0, 17.0]);
    assert_eq!(batch.refs[1].profile, 1);
}

#[test]
fn point_labels_mark_windows_covering_anomalies() {
    let mut p = profile("p", vec![(0..10).map(|k| k as f64).collect()], None);
    let mut labels = vec![false; 10];
    labels[6] = true;
    p.point_labels = Some(labels);
    let got: Vec<bool> = (0..=6).map(|s| window_label(&p, s, 4).unwrap()).collect();
    assert_eq!(got, vec![false, false, false, true, true, true, true]);
}

#[test]
fn split_is_stratified_and_trains_on_normals() {
    let profiles: Vec<Profile> = (0..50)
        .map(|i| profile(&format!("p{i:02}"), vec![vec![0.0; 3]], Some(i < 30)))
        .collect();
    let split = split_profiles(&profiles, 0.8, 3).unwrap();
    assert_eq!(split.train.len(), 16);
    assert_eq!(split.test.len(), 6 + 4);
    assert_eq!(split.test.iter().filter(|&&i| profiles[i].label == Some(true)).count(), 6);
    assert!(split.train.iter().all(|&i| profiles[i].label == Some(false)));
    assert!(split.train.iter().all(|i| !split.test.contains(i)));
    assert_eq!(split, split_profiles(&profiles, 0.8, 3).unwrap());
    assert_ne!(split, split_profiles(&profiles, 0.8, 4).unwrap());
    assert!(split_profiles(&profiles, 0.0, 3).is_err());
}

fn equilibrium(v: f64) -> CtgParams {
    CtgParams {
        h_gap: 0.4,
        lambda: 0.5,
        eps: 0.4 * v + 2.0,
        delta: 0.0,
        v_front: v,
        v_ego: v,
    }
}

#[test]
fn control_laws_at_equilibrium() {
    let p = equilibrium(15.0);
    assert_eq!(p.a_ctg(), 0.0);
    assert_eq!(p.a_uam(), 0.0);
    assert_eq!(p.commanded(), 0.0);
    // hand evaluation away from equilibrium
    let q = CtgParams {
        v_front: 13.0,
        delta: 1.0,
        ..p
    };
    assert!((q.a_ctg() - (-(2.0 + 0.5) / 0.4)).abs() < 1e-12);
    assert!((q.a_uam() - (169.0 - 225.0) / (2.0 * 8.0)).abs() < 1e-12);
    assert_eq!(q.commanded(), -6.0);
    assert!(CtgParams { h_gap: 0.0, ..p }.validate().is_err());
    assert!(CtgParams { eps: -1.0, ..p }.validate().is_err());
}

fn quiet_spec(seed: u64) -> DriveSpec {
    DriveSpec {
        noise: 0.0,
        ..DriveSpec::sample(&DriverStyle::sample(&mut seeded_rng(seed)), &mut seeded_rng(seed + 1))
    }
}

#[test]
fn equal_speeds_without_noise_never_brake() {
    let spec = DriveSpec {
        ctg: equilibrium(15.0),
        standstill_gap: 2.0,
        front_decel: 0.0,
        ..quiet_spec(1)
    };
    let d = synthesize_drive("eq", &spec, 9).unwrap();
    assert!(d.signal(Signal::BrakePedal).iter().all(|&b| b == 0.0));
    assert!(extract_profiles(&d).is_empty());
}

#[test]
fn lead_braking_gives_monotone_deceleration() {
    for seed in 0..20 {
        let spec = quiet_spec(seed);
        let d = synthesize_drive("lead", &spec, seed).unwrap();
        let profiles = extract_profiles(&d);
        assert_eq!(profiles.len(), 1, "seed {seed}");
        let p = &profiles[0];
        let speed = p.channel("speed_kph").unwrap();
        assert!(speed.windows(2).all(|w| w[1] < w[0]), "seed {seed}");
        assert!(p.channel("long_acc_g").unwrap().iter().all(|&a| a < 0.0), "seed {seed}");
        assert!(p.channel("accel_pedal_pct").unwrap().iter().all(|&a| a < 0.5));
        // the model of speed: consecutive differences equal the logged acceleration
        let acc = p.channel("long_acc_g").unwrap();
        for k in 1..p.len() {
            let dv = (speed[k] - speed[k - 1]) / 3.6;
            assert!((dv - acc[k - 1] * G * 0.01).abs() < 1e-9);
        }
    }
}

#[test]
fn generated_drives_each_yield_one_profile() {
    let drives = generate_drives(30, 11).unwrap();
    assert_eq!(drives, generate_drives(30, 11).unwrap());
    for d in &drives {
        let resampled = resample_10ms(d).unwrap();
        assert_eq!(extract_profiles(&resampled).len(), 1, "{}", d.id);
    }
}

#[test]
fn injection_counts() {
    assert_eq!(anomaly_count(0.67, 75), 51);
    assert_eq!(anomaly_count(0.6, 50), 30);
    assert_eq!(anomaly_count(0.6, 60), 36);
    assert_eq!(anomaly_count(0.0, 10), 0);
    assert_eq!(anomaly_count(1.0, 10), 10);
}

fn synthetic_profiles(count: usize, seed: u64) -> Vec<Profile> {
    generate_drives(count, seed).unwrap().iter().flat_map(extract_profiles).collect()
}

#[test]
fn injection_ratio_zero_is_untouched() {
    let profiles = synthetic_profiles(8, 2);
    let (out, kinds) = inject_anomalies(&profiles, 0.0, &AnomalyKind::ALL, 5).unwrap();
    assert!(kinds.iter().all(Option::is_none));
    for (a, b) in profiles.iter().zip(&out) {
        assert_eq!(a.data, b.data);
        assert_eq!(b.label, Some(false));
    }
}

#[test]
fn injection_marks_and_perturbs() {
    let profiles = synthetic_profiles(75, 4);
    let (out, kinds) = inject_anomalies(&profiles, 0.67, &AnomalyKind::ALL, 5).unwrap();
    assert_eq!(out.iter().filter(|p| p.label == Some(true)).count(), 51);
    let again = inject_anomalies(&profiles, 0.67, &AnomalyKind::ALL, 5).unwrap();
    assert_eq!(out, again.0);
    assert_ne!(out, inject_anomalies(&profiles, 0.67, &AnomalyKind::ALL, 6).unwrap().0);
    for kind in AnomalyKind::ALL {
        assert!(kinds.iter().filter(|k| **k == Some(kind)).count() == 17);
    }
    for ((orig, p), kind) in profiles.iter().zip(&out).zip(&kinds) {
        assert_eq!(kind.is_some(), p.label == Some(true));
        assert_eq!(p.channel("accel_pedal_pct"), orig.channel("accel_pedal_pct"));
        assert_eq!(p.channel("lat_acc_g"), orig.channel("lat_acc_g"));
        if kind.is_some() {
            assert_ne!(p.channel("long_acc_g"), orig.channel("long_acc_g"));
            // the perturbed profile still passes every gate as a drive of its own
            let as_drive = RawDrive::new(
                "x",
                (0..p.len()).map(|k| 10.0 * k as f64).collect(),
                std::array::from_fn(|i| p.channel(Signal::ALL[i].name()).unwrap().to_vec()),
            )
            .unwrap();
            assert_eq!(profile_ranges(&as_drive), vec![(0, p.len())]);
        } else {
            assert_eq!(p.data, orig.data);
        }
    }
}

#[test]
fn injection_errors() {
    assert!(matches!(inject_anomalies(&[], 0.5, &AnomalyKind::ALL, 0), Err(Error::Data(_))));
    let profiles = synthetic_profiles(3, 1);
    assert!(inject_anomalies(&profiles, 1.5, &AnomalyKind::ALL, 0).is_err());
    assert!(inject_anomalies(&profiles, 0.5, &[], 0).is_err());
}

#[test]
fn drive_csv_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let d = generate_drives(1, 3).unwrap().remove(0);
    let path = dir.path().join(format!("{}.csv", d.id));
    write_drive_csv(&path, &d).unwrap();
    assert_eq!(read_drive_csv(&path).unwrap(), d);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t_ms,accel_pedal_pct,brake_pedal_pct,speed_kph,lat_acc_g,long_acc_g\n"));
}

#[test]
fn drive_csv_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad_header = dir.path().join("a.csv");
    std::fs::write(&bad_header, "t,accel\n0,1\n").unwrap();
    assert!(matches!(read_drive_csv(&bad_header), Err(Error::Data(_))));
    let bad_value = dir.path().join("b.csv");
    std::fs::write(
        &bad_value,
        "t_ms,accel_pedal_pct,brake_pedal_pct,speed_kph,lat_acc_g,long_acc_g\n0,1,2,3,4,x\n",
    )
    .unwrap();
    assert!(matches!(read_drive_csv(&bad_value), Err(Error::Data(_))));
    let unordered = dir.path().join("c.csv");
    std::fs::write(
        &unordered,
        "t_ms,accel_pedal_pct,brake_pedal_pct,speed_kph,lat_acc_g,long_acc_g\n10,1,2,3,4,5\n0,1,2,3,4,5\n",
    )
    .unwrap();
    assert!(read_drive_csv(&unordered).is_err());
    assert!(read_drive_csv(&dir.path().join("missing.csv")).is_err());
}

#[test]
fn corpus_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let profiles = synthetic_profiles(6, 8);
    let (labelled, _) = inject_anomalies(&profiles, 0.5, &AnomalyKind::ALL, 1).unwrap();
    write_corpus(dir.path(), &labelled).unwrap();
    let back = read_corpus(dir.path()).unwrap();
    assert_eq!(back, labelled);
    let labels = std::fs::read_to_string(dir.path().join("labels.csv")).unwrap();
    assert!(labels.starts_with("profile_id,label\n"));
    assert_eq!(labels.lines().filter(|l| l.ends_with(",1")).count(), 3);
}

#[test]
fn benchmark_loading_and_point_scores() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test, labels) = (dir.path().join("tr"), dir.path().join("te"), dir.path().join("la"));
    std::fs::write(&train, "1,2\n3,4\n5,6\n").unwrap();
    std::fs::write(&test, "1,2\n3,4\n5,6\n7,8\n").unwrap();
    std::fs::write(&labels, "0\n1\n1\n0\n").unwrap();
    let b = load_benchmark(&train, &test, &labels).unwrap();
    assert_eq!(b.train.data, vec![vec![1.0, 3.0, 5.0], vec![2.0, 4.0, 6.0]]);
    assert_eq!(b.test.point_labels, Some(vec![false, true, true, false]));
    std::fs::write(&labels, "0\n1\n").unwrap();
    assert!(load_benchmark(&train, &test, &labels).is_err());

    let scores = point_scores(9, 3, &[(0, 1.0), (2, 5.0), (4, 2.0)]).unwrap();
    assert_eq!(scores, vec![1.0, 1.0, 5.0, 5.0, 5.0, 2.0, 2.0, 2.0, 2.0]);
    assert!(point_scores(5, 3, &[(3, 1.0)]).is_err());
}
