use gdflow::evaluation::{auprc, auroc, best_f1_search, evaluate, f1_pa_at, point_adjust};
use gdflow::tensor::seeded_rng;
use proptest::prelude::*;
use rand::Rng;

/// Fills a segment when any point inside is flagged, found by walking
/// outward from each flagged anomalous point.
fn fill_oracle(preds: &[bool], labels: &[bool]) -> Vec<bool> {
    let mut out = preds.to_vec();
    for i in 0..labels.len() {
        if labels[i] && preds[i] {
            let mut l = i;
            while l > 0 && labels[l - 1] {
                l -= 1;
            }
            let mut r = i;
            while r + 1 < labels.len() && labels[r + 1] {
                r += 1;
            }
            out[l..=r].iter_mut().for_each(|p| *p = true);
        }
    }
    out
}

fn f1_oracle(preds: &[bool], labels: &[bool]) -> f64 {
    let tp = preds.iter().zip(labels).filter(|(&p, &l)| p && l).count() as f64;
    let fp = preds.iter().zip(labels).filter(|(&p, &l)| p && !l).count() as f64;
    let fn_ = preds.iter().zip(labels).filter(|(&p, &l)| !p && l).count() as f64;
    // 2PR/(P+R) written over counts so equal scores compare equal exactly
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

/// Every candidate τ, each evaluated from scratch.
fn brute_best_f1(scores: &[f64], labels: &[bool]) -> (f64, f64) {
    let mut candidates = vec![f64::NEG_INFINITY, f64::INFINITY];
    candidates.extend_from_slice(scores);
    let mut best = (f64::INFINITY, -1.0);
    for &tau in &candidates {
        let preds: Vec<bool> = scores.iter().map(|&s| s > tau).collect();
        let f1 = f1_oracle(&fill_oracle(&preds, labels), labels);
        if f1 > best.1 || (f1 == best.1 && tau < best.0) {
            best = (tau, f1);
        }
    }
    best
}

fn pairwise_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn random_instance(m: usize, seed: u64, coarse: bool) -> (Vec<f64>, Vec<bool>) {
    let mut rng = seeded_rng(seed);
    let mut labels = Vec::with_capacity(m);
    let mut state = false;
    for _ in 0..m {
        if rng.gen_bool(0.12) {
            state = !state;
        }
        labels.push(state);
    }
    labels[0] = false;
    labels[m - 1] = true;
    let scores = labels
        .iter()
        .map(|&l| {
            let s: f64 = rng.gen_range(0.0..1.0) + if l { 0.4 } else { 0.0 };
            if coarse {
                (s * 8.0).round() / 8.0
            } else {
                s
            }
        })
        .collect();
    (scores, labels)
}

#[test]
fn point_adjust_examples() {
    let labels = [false, true, true, false];
    assert_eq!(point_adjust(&[false, false, true, false], &labels).unwrap(), vec![false, true, true, false]);
    let preds = [true, false, true, false];
    assert_eq!(point_adjust(&preds, &[false; 4]).unwrap(), preds.to_vec());
    let full = [false, true, true, false];
    assert_eq!(point_adjust(&full, &labels).unwrap(), full.to_vec());
    assert!(point_adjust(&[true], &labels).is_err());
}

#[test]
fn point_adjust_matches_oracle_on_random_instances() {
    for seed in 0..50 {
        let (scores, labels) = random_instance(200, seed, false);
        let preds: Vec<bool> = scores.iter().map(|&s| s > 0.9).collect();
        assert_eq!(point_adjust(&preds, &labels).unwrap(), fill_oracle(&preds, &labels));
    }
}

#[test]
fn best_f1_matches_brute_force_sweep() {
    for seed in 0..40 {
        let (scores, labels) = random_instance(200, 100 + seed, seed % 2 == 0);
        let best = best_f1_search(&scores, &labels).unwrap();
        let (tau, f1) = brute_best_f1(&scores, &labels);
        assert_eq!(best.f1, f1, "seed {seed}");
        assert_eq!(best.tau, tau, "seed {seed}");
    }
}

#[test]
fn best_f1_simple_cases() {
    let labels = [false, false, true, true, false, true];
    let separated = [0.1, 0.2, 0.9, 0.8, 0.3, 0.95];
    assert_eq!(best_f1_search(&separated, &labels).unwrap().f1, 1.0);
    // constant scores: only τ = −∞ flags anything, so all points are predicted anomalous
    let constant = [0.5; 6];
    let best = best_f1_search(&constant, &labels).unwrap();
    let (tp, fp) = (3.0, 3.0);
    assert_eq!(best.f1, 2.0 * tp / (2.0 * tp + fp));
    assert_eq!(best.tau, f64::NEG_INFINITY);
}

#[test]
fn auroc_matches_pairwise_oracle() {
    for seed in 0..30 {
        let (scores, labels) = random_instance(150, 200 + seed, seed % 3 == 0);
        let got = auroc(&scores, &labels).unwrap();
        assert!((got - pairwise_auroc(&scores, &labels)).abs() < 1e-9);
    }
    assert_eq!(auroc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
    assert_eq!(auroc(&[0.4; 5], &[false, true, false, true, true]).unwrap(), 0.5);
}

#[test]
fn auprc_examples() {
    assert_eq!(auprc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
    assert_eq!(auprc(&[0.9, 0.1, 0.3, 0.2], &[true, false, false, false]).unwrap(), 1.0);
    // ranks: + - + => AP = 1/2·1 + 1/2·2/3
    let ap = auprc(&[0.9, 0.5, 0.3], &[true, false, true]).unwrap();
    assert!((ap - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
}

#[test]
fn auprc_of_random_scores_is_near_the_positive_rate() {
    let mut total = 0.0;
    let runs = 40;
    for seed in 0..runs {
        let mut rng = seeded_rng(300 + seed);
        let labels: Vec<bool> = (0..2000).map(|_| rng.gen_bool(0.3)).collect();
        let scores: Vec<f64> = (0..2000).map(|_| rng.gen_range(0.0..1.0)).collect();
        total += auprc(&scores, &labels).unwrap();
    }
    assert!((total / runs as f64 - 0.3).abs() < 0.05);
}

#[test]
fn evaluate_bundles_the_three_metrics() {
    let (scores, labels) = random_instance(100, 400, false);
    let m = evaluate(&scores, &labels).unwrap();
    assert_eq!(m.auroc, auroc(&scores, &labels).unwrap());
    assert_eq!(m.auprc, auprc(&scores, &labels).unwrap());
    assert_eq!(m.f1_pa, best_f1_search(&scores, &labels).unwrap().f1);
}

proptest! {
    #[test]
    fn point_adjust_is_idempotent_and_monotone(
        labels in prop::collection::vec(any::<bool>(), 1..80),
        seed in any::<u64>(),
    ) {
        let mut rng = seeded_rng(seed);
        let preds: Vec<bool> = labels.iter().map(|_| rng.gen_bool(0.2)).collect();
        let once = point_adjust(&preds, &labels).unwrap();
        prop_assert_eq!(point_adjust(&once, &labels).unwrap(), once.clone());
        let k = rng.gen_range(0..preds.len());
        let mut more = preds.clone();
        more[k] = true;
        let adjusted_more = point_adjust(&more, &labels).unwrap();
        prop_assert!(once.iter().zip(&adjusted_more).all(|(&a, &b)| !a || b));
    }

    #[test]
    fn auroc_is_invariant_under_increasing_maps(seed in any::<u64>()) {
        let (scores, labels) = random_instance(60, seed, seed % 2 == 0);
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        prop_assert!((auroc(&scores, &labels).unwrap() - auroc(&mapped, &labels).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn best_f1_dominates_random_thresholds(seed in any::<u64>()) {
        let (scores, labels) = random_instance(80, seed, false);
        let best = best_f1_search(&scores, &labels).unwrap();
        let mut rng = seeded_rng(seed ^ 0x5eed);
        for _ in 0..100 {
            let tau = rng.gen_range(-0.5..1.5);
            prop_assert!(best.f1 >= f1_pa_at(&scores, &labels, tau).unwrap());
        }
    }
}
