use gdflow::data::window::make_windows;
use gdflow::data::Profile;
use gdflow::encoder::{EncoderKind, EncoderShape};
use gdflow::model::{Model, ModelSpec, ModelVars};
use gdflow::objective::Reduction;
use gdflow::tensor::gradcheck::check_gradients;
use gdflow::tensor::{seeded_rng, AdamWConfig, Tensor};
use gdflow::train::{score_windows, train, TrainSettings, Validation};
use gdflow::Error;
use rand::Rng;

fn spec(sensors: usize, hidden: usize, reduction: Reduction) -> ModelSpec {
    ModelSpec {
        shape: EncoderShape {
            sensors,
            hidden,
            order: 2,
            embed_dim: 3,
        },
        flow_blocks: 1,
        encoder: EncoderKind::Ncde,
        reduction,
        substeps: 1,
    }
}

fn random(shape: &[usize], seed: u64, scale: f64) -> Tensor {
    let mut rng = seeded_rng(seed);
    Tensor::from_fn(shape, |_| rng.gen_range(-scale..scale))
}

/// Noisy phase-shifted sines, one profile per id.
fn smooth_profiles(count: usize, len: usize, seed: u64) -> Vec<Profile> {
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|i| {
            let phase: f64 = rng.gen_range(0.0..6.0);
            let data = (0..2)
                .map(|c| {
                    (0..len)
                        .map(|t| (0.2 * t as f64 + phase + c as f64).sin() + rng.gen_range(-0.05..0.05))
                        .collect()
                })
                .collect();
            Profile {
                id: format!("p{i:02}"),
                start_ms: 0.0,
                channels: vec!["a".into(), "b".into()],
                data,
                label: Some(false),
                point_labels: None,
            }
        })
        .collect()
}

fn settings(epochs: usize, lr: f64) -> TrainSettings {
    TrainSettings {
        epochs,
        batch_size: 16,
        optimizer: AdamWConfig {
            lr,
            ..AdamWConfig::default()
        },
        seed: 7,
    }
}

fn tensors(m: &Model) -> Vec<Tensor> {
    m.named_tensors().into_iter().map(|(_, t)| t.clone()).collect()
}

#[test]
fn full_chain_gradients_match_finite_differences() {
    let model = Model::seeded(spec(3, 4, Reduction::Quantile(0.3)), 1).unwrap();
    let windows = random(&[2, 3, 6], 2, 1.0);
    let inputs = tensors(&model);
    let check = check_gradients(&inputs, 1e-5, |tape, v| {
        let vars = ModelVars::from_slice(v, 1)?;
        Ok(model.loss(tape, &vars, &windows)?.0)
    })
    .unwrap();
    let names: Vec<String> = model.named_tensors().into_iter().map(|(n, _)| n).collect();
    for (name, err) in names.iter().zip(&check.per_input) {
        assert!(*err < 1e-4, "{name}: {err}");
    }
}

#[test]
fn model_vars_reject_a_wrong_count() {
    let model = Model::seeded(spec(2, 3, Reduction::Mean), 0).unwrap();
    let tape = gdflow::tensor::Tape::new();
    let vars = model.leaves(&tape).all();
    assert!(ModelVars::from_slice(&vars, 1).is_ok());
    assert!(ModelVars::from_slice(&vars[1..], 1).is_err());
    assert!(ModelVars::from_slice(&vars, 2).is_err());
}

#[test]
fn window_score_is_the_negated_sensor_quantile() {
    let model = Model::seeded(spec(3, 4, Reduction::Quantile(0.5)), 3).unwrap();
    let windows = random(&[4, 3, 5], 4, 1.0);
    let (scores, lls) = model.score(&windows).unwrap();
    for (b, s) in scores.iter().enumerate() {
        let mut row: Vec<f64> = (0..3).map(|i| lls.at(&[b, i])).collect();
        row.sort_by(f64::total_cmp);
        assert!((s + row[1]).abs() < 1e-12);
    }
}

#[test]
fn zero_epochs_leave_the_initialization() {
    let profiles = smooth_profiles(4, 12, 5);
    let set = make_windows(&profiles, 8, 1).unwrap();
    let init = Model::seeded(spec(2, 3, Reduction::Quantile(0.05)), 6).unwrap();
    let mut model = init.clone();
    let out = train(&mut model, &settings(0, 1e-2), &profiles, &set, None).unwrap();
    assert!(out.epochs.is_empty());
    assert_eq!(out.best_epoch, None);
    assert_eq!(tensors(&model), tensors(&init));
}

#[test]
fn training_is_deterministic() {
    let profiles = smooth_profiles(4, 12, 8);
    let set = make_windows(&profiles, 8, 1).unwrap();
    let run = || {
        let mut m = Model::seeded(spec(2, 3, Reduction::Quantile(0.05)), 9).unwrap();
        let out = train(&mut m, &settings(2, 1e-2), &profiles, &set, None).unwrap();
        (tensors(&m), out)
    };
    let (a, out_a) = run();
    let (b, out_b) = run();
    assert_eq!(a, b);
    assert_eq!(out_a, out_b);
    assert_ne!(a, tensors(&Model::seeded(spec(2, 3, Reduction::Quantile(0.05)), 9).unwrap()));
}

#[test]
fn training_lowers_the_loss() {
    let profiles = smooth_profiles(8, 16, 10);
    let set = make_windows(&profiles, 8, 1).unwrap();
    let mut m = Model::seeded(spec(2, 4, Reduction::Quantile(0.05)), 11).unwrap();
    let out = train(&mut m, &settings(15, 1e-2), &profiles, &set, None).unwrap();
    assert!(out.epochs.last().unwrap().loss < out.epochs[0].loss);
}

#[test]
fn divergence_reports_epoch_and_step() {
    let profiles = smooth_profiles(4, 12, 12);
    let set = make_windows(&profiles, 8, 1).unwrap();
    let mut m = Model::seeded(spec(2, 3, Reduction::Quantile(0.05)), 13).unwrap();
    let err = train(&mut m, &settings(3, 1e300), &profiles, &set, None).unwrap_err();
    assert!(matches!(err, Error::Divergence { epoch: 1, .. }), "{err:?}");
    assert!(err.is_numerical());
}

#[test]
fn empty_training_set_is_a_data_error() {
    let profiles = smooth_profiles(2, 5, 14);
    let set = make_windows(&profiles, 8, 1).unwrap();
    let mut m = Model::seeded(spec(2, 3, Reduction::Mean), 15).unwrap();
    assert!(matches!(
        train(&mut m, &settings(1, 1e-3), &profiles, &set, None),
        Err(Error::Data(_))
    ));
}

#[test]
fn trained_model_scores_a_far_outlier_above_normal_windows() {
    let profiles = smooth_profiles(8, 16, 16);
    let set = make_windows(&profiles, 8, 1).unwrap();
    let mut m = Model::seeded(spec(2, 4, Reduction::Quantile(0.05)), 17).unwrap();
    train(&mut m, &settings(10, 1e-2), &profiles, &set, None).unwrap();
    let (normal, _) = score_windows(&m, &profiles, &set).unwrap();

    let mut outlier = profiles[0].clone();
    for col in &mut outlier.data {
        for (t, v) in col.iter_mut().enumerate() {
            *v = if t % 2 == 0 { 6.0 } else { -6.0 };
        }
    }
    let oset = make_windows(std::slice::from_ref(&outlier), 8, 1).unwrap();
    let (far, _) = score_windows(&m, std::slice::from_ref(&outlier), &oset).unwrap();
    let worst_normal = normal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(far.iter().all(|&s| s > worst_normal), "{far:?} vs {worst_normal}");
}

#[test]
fn best_validation_epoch_is_restored() {
    let train_profiles = smooth_profiles(6, 14, 18);
    let set = make_windows(&train_profiles, 8, 1).unwrap();
    let mut val_profiles = smooth_profiles(4, 14, 19);
    for p in &mut val_profiles[2..] {
        p.label = Some(true);
        for v in &mut p.data[0] {
            *v += 3.0;
        }
    }
    let val_set = make_windows(&val_profiles, 8, 1).unwrap();
    let labels = val_set.windows.iter().map(|r| val_profiles[r.profile].label.unwrap()).collect();
    let validation = Validation {
        profiles: &val_profiles,
        windows: &val_set,
        labels,
    };
    let mut m = Model::seeded(spec(2, 3, Reduction::Quantile(0.05)), 20).unwrap();
    let out = train(&mut m, &settings(6, 1e-2), &train_profiles, &set, Some(&validation)).unwrap();

    let f1s: Vec<f64> = out.epochs.iter().map(|e| e.validation.unwrap().f1_pa).collect();
    let best = f1s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // ties go to the later epoch
    let want = f1s.iter().rposition(|&f| f == best).unwrap() + 1;
    assert_eq!(out.best_epoch, Some(want));

    let (scores, _) = score_windows(&m, &val_profiles, &val_set).unwrap();
    let again = gdflow::evaluation::evaluate(&scores, &validation.labels).unwrap();
    assert_eq!(Some(again), out.best);
}
