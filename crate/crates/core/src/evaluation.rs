//! Point-adjusted F1, AUROC and AUPRC over anomaly scores.
//!
//! Labels are booleans (`true` = anomalous) and higher scores are more
//! anomalous.

use std::ops::Range;

use crate::error::{Error, Result};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidArgument(format!("{a} scores/predictions for {b} labels")));
    }
    Ok(())
}

fn check_finite(scores: &[f64]) -> Result<()> {
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN anomaly score".into()));
    }
    Ok(())
}

/// Maximal runs of `true` labels.
pub fn segments(labels: &[bool]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &l) in labels.iter().enumerate() {
        match (l, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..labels.len());
    }
    out
}

/// Marks a whole anomalous segment as detected when any point in it is.
pub fn point_adjust(preds: &[bool], labels: &[bool]) -> Result<Vec<bool>> {
    check_lengths(preds.len(), labels.len())?;
    let mut out = preds.to_vec();
    for seg in segments(labels) {
        if preds[seg.clone()].iter().any(|&p| p) {
            out[seg].iter_mut().for_each(|p| *p = true);
        }
    }
    Ok(out)
}

/// F1 of binary predictions; 0 when there are no true positives.
pub fn f1_score(preds: &[bool], labels: &[bool]) -> Result<f64> {
    check_lengths(preds.len(), labels.len())?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &l) in preds.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    Ok(f1_from_counts(tp, fp, fn_))
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

fn count_classes(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

fn require_both_classes(labels: &[bool]) -> Result<(usize, usize)> {
    let (pos, neg) = count_classes(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument(
            "metric needs both normal and anomalous labels".into(),
        ));
    }
    Ok((pos, neg))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BestF1 {
    pub tau: f64,
    pub f1: f64,
}

/// Threshold maximizing point-adjusted F1 over `−∞`, every distinct score
/// and `+∞`; ties go to the smallest threshold.
///
/// A segment counts as fully detected at `τ` iff its maximum score exceeds
/// `τ`, so one sorted sweep over the thresholds suffices.
pub fn best_f1_search(scores: &[f64], labels: &[bool]) -> Result<BestF1> {
    check_lengths(scores.len(), labels.len())?;
    check_finite(scores)?;
    let (positives, _) = require_both_classes(labels)?;

    // (score, tp contribution, fp contribution) events, detected while score > τ
    let mut events: Vec<(f64, usize, usize)> = segments(labels)
        .into_iter()
        .map(|seg| {
            let top = scores[seg.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (top, seg.len(), 0)
        })
        .collect();
    events.extend(scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| (s, 0, 1)));
    events.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    // τ = +∞ predicts nothing
    let mut best = BestF1 {
        tau: f64::INFINITY,
        f1: 0.0,
    };
    let (mut tp, mut fp) = (0, 0);
    let mut next = 0;
    let consider = |tau: f64, tp: usize, fp: usize, best: &mut BestF1| {
        let f1 = f1_from_counts(tp, fp, positives - tp);
        // descending sweep: a later τ is smaller, so ties move to it
        if f1 >= best.f1 {
            *best = BestF1 { tau, f1 };
        }
    };
    for &tau in &thresholds {
        while next < events.len() && events[next].0 > tau {
            tp += events[next].1;
            fp += events[next].2;
            next += 1;
        }
        consider(tau, tp, fp, &mut best);
    }
    for e in &events[next..] {
        tp += e.1;
        fp += e.2;
    }
    consider(f64::NEG_INFINITY, tp, fp, &mut best);
    Ok(best)
}

/// Point-adjusted F1 at a given threshold.
pub fn f1_pa_at(scores: &[f64], labels: &[bool], tau: f64) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    let preds: Vec<bool> = scores.iter().map(|&s| s > tau).collect();
    f1_score(&point_adjust(&preds, labels)?, labels)
}

/// Mann–Whitney AUROC with midranks for ties.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    check_finite(scores)?;
    let (pos, neg) = require_both_classes(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Average precision: `Σ (R_k − R_{k−1})·P_k` over thresholds at each
/// distinct score, highest first.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    check_finite(scores)?;
    let (pos, _) = count_classes(labels);
    if pos == 0 {
        return Err(Error::InvalidArgument("AUPRC needs at least one anomalous label".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let new_tp = order[i..=j].iter().filter(|&&k| labels[k]).count();
        tp += new_tp;
        seen += j - i + 1;
        area += new_tp as f64 / pos as f64 * (tp as f64 / seen as f64);
        i = j + 1;
    }
    Ok(area)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub f1_pa: f64,
    pub tau: f64,
    pub auroc: f64,
    pub auprc: f64,
}

pub fn evaluate(scores: &[f64], labels: &[bool]) -> Result<Metrics> {
    let best = best_f1_search(scores, labels)?;
    Ok(Metrics {
        f1_pa: best.f1,
        tau: best.tau,
        auroc: auroc(scores, labels)?,
        auprc: auprc(scores, labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_cover_edges() {
        assert_eq!(segments(&[true, false, true, true]), vec![0..1, 2..4]);
        assert!(segments(&[false; 3]).is_empty());
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(auroc(&[1.0, 2.0], &[true, true]).is_err());
        assert!(best_f1_search(&[1.0, 2.0], &[false, false]).is_err());
        assert!(auprc(&[1.0], &[false]).is_err());
        assert!(auroc(&[1.0], &[true, false]).is_err());
    }
}
