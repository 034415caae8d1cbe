//! Metrics and benchmarking: ROC-AUC with bootstrap uncertainty, ROC curve
//! export, threshold accuracy, and inference latency measurement.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::RoundBatch;
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::tensor::{sigmoid, SeededRng};

/// One exported ROC point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub false_positive_rate: f64,
    pub true_positive_rate: f64,
}

/// Latency summary for one benchmark batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub std_ms: f64,
    pub repetitions: usize,
    pub batch_size: usize,
    pub max_len: usize,
    pub progression: f64,
}

/// Point AUC with a bootstrap percentile interval and resample std.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AucInterval {
    pub auc: f64,
    pub lo: f64,
    pub hi: f64,
    pub std: f64,
}

/// Per-fold block of the metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub auc: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub accuracy: f64,
}

/// The JSON metrics report shared by the train, eval, and bench commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub progression: f64,
    pub folds: Vec<FoldMetrics>,
    pub latency: Option<LatencyStats>,
}

fn check_scores(scores: &[f64], labels: &[f64]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores against {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".to_string()));
    }
    let mut pos = 0usize;
    let mut neg = 0usize;
    for &y in labels {
        if y == 1.0 {
            pos += 1;
        } else if y == 0.0 {
            neg += 1;
        } else {
            return Err(Error::Label(format!("labels must be 0 or 1, got {y}")));
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::MetricUndefined(
            "ROC-AUC needs both classes present".to_string(),
        ));
    }
    Ok((pos, neg))
}

/// ROC-AUC as the Mann-Whitney statistic:
/// (correctly ordered positive/negative pairs + ½·ties) / (pos·neg).
///
/// Computed by one sort, but the pair counting is done in exact
/// half-unit integer arithmetic, so the result equals the O(n²) pairwise
/// definition bit for bit.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    let (pos, neg) = check_scores(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("no NaN scores"));

    // numerator in half-units: a win counts 2, a tie counts 1.
    let mut numerator_half = 0u64;
    let mut neg_below = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let group = &order[i..j];
        let pos_here = group.iter().filter(|&&idx| labels[idx] == 1.0).count() as u64;
        let neg_here = group.len() as u64 - pos_here;
        numerator_half += pos_here * (2 * neg_below + neg_here);
        neg_below += neg_here;
        i = j;
    }
    Ok(numerator_half as f64 / (2.0 * pos as f64 * neg as f64))
}

/// The O(n²) pairwise definition, kept as the reference oracle for the
/// sort-based implementation. Uses the identical half-unit arithmetic so
/// agreement is exact, not approximate.
pub fn roc_auc_pairwise(scores: &[f64], labels: &[f64]) -> Result<f64> {
    let (pos, neg) = check_scores(scores, labels)?;
    let mut numerator_half = 0u64;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1.0 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0.0 {
                continue;
            }
            if si > sj {
                numerator_half += 2;
            } else if si == sj {
                numerator_half += 1;
            }
        }
    }
    Ok(numerator_half as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Stratified bootstrap over samples: resamples within each class so both
/// classes stay present, reports the percentile interval and resample std.
pub fn roc_auc_ci(
    scores: &[f64],
    labels: &[f64],
    resamples: usize,
    rng: &mut SeededRng,
) -> Result<AucInterval> {
    let auc = roc_auc(scores, labels)?;
    if resamples < 2 {
        return Err(Error::Parameter(format!(
            "bootstrap needs at least 2 resamples, got {resamples}"
        )));
    }
    let pos_idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1.0).collect();
    let neg_idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0.0).collect();

    let mut resampled = Vec::with_capacity(resamples);
    let mut s = Vec::with_capacity(labels.len());
    let mut y = Vec::with_capacity(labels.len());
    for _ in 0..resamples {
        s.clear();
        y.clear();
        for _ in 0..pos_idx.len() {
            s.push(scores[pos_idx[rng.next_below(pos_idx.len())]]);
            y.push(1.0);
        }
        for _ in 0..neg_idx.len() {
            s.push(scores[neg_idx[rng.next_below(neg_idx.len())]]);
            y.push(0.0);
        }
        resampled.push(roc_auc(&s, &y)?);
    }
    resampled.sort_by(|a, b| a.partial_cmp(b).expect("AUC values are finite"));
    let lo = resampled[(0.025 * resamples as f64).floor() as usize];
    let hi = resampled[((0.975 * resamples as f64).ceil() as usize - 1).min(resamples - 1)];
    let mean = resampled.iter().sum::<f64>() / resamples as f64;
    let var = resampled.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
        / (resamples - 1) as f64;
    Ok(AucInterval {
        auc,
        lo,
        hi,
        std: var.sqrt(),
    })
}

/// ROC curve points: the (0,0) endpoint at threshold +inf, then one point
/// per distinct score descending; the final point is always (1,1).
pub fn roc_curve(scores: &[f64], labels: &[f64]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = check_scores(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("no NaN scores"));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        false_positive_rate: 0.0,
        true_positive_rate: 0.0,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let mut j = i;
        while j < order.len() && scores[order[j]] == threshold {
            if labels[order[j]] == 1.0 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        points.push(RocPoint {
            threshold,
            false_positive_rate: fp as f64 / neg as f64,
            true_positive_rate: tp as f64 / pos as f64,
        });
        i = j;
    }
    Ok(points)
}

/// Trapezoidal area under an exported curve; used to cross-check roc_auc.
pub fn roc_curve_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| {
            (w[1].false_positive_rate - w[0].false_positive_rate)
                * (w[0].true_positive_rate + w[1].true_positive_rate)
                / 2.0
        })
        .sum()
}

/// Writes the `threshold,fpr,tpr` CSV export of a ROC curve.
pub fn write_roc_csv(path: &Path, points: &[RocPoint]) -> Result<()> {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.threshold, p.false_positive_rate, p.true_positive_rate
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Fraction of samples where (score ≥ threshold) matches the label.
pub fn accuracy_at(scores: &[f64], labels: &[f64], threshold: f64) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores against {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::MetricUndefined(
            "accuracy over an empty set".to_string(),
        ));
    }
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|&(&s, &y)| (s >= threshold) == (y == 1.0))
        .count();
    Ok(correct as f64 / scores.len() as f64)
}

/// Times inference-mode forward passes on one fixed batch with a monotonic
/// clock: `warmup` unrecorded passes, then `repetitions` timed ones.
pub fn bench_inference(
    model: &mut Model,
    batch: &RoundBatch,
    progression: f64,
    repetitions: usize,
    warmup: usize,
) -> Result<LatencyStats> {
    if repetitions < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 repetitions, got {repetitions}"
        )));
    }
    for _ in 0..warmup {
        model.forward(&batch.features, &batch.mask, None)?;
    }
    let mut samples_ms = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let logits = model.forward(&batch.features, &batch.mask, None)?;
        let elapsed = start.elapsed();
        std::hint::black_box(&logits);
        samples_ms.push(elapsed.as_secs_f64() * 1e3);
    }
    let mean = samples_ms.iter().sum::<f64>() / repetitions as f64;
    let var = samples_ms
        .iter()
        .map(|s| (s - mean) * (s - mean))
        .sum::<f64>()
        / (repetitions - 1) as f64;
    Ok(LatencyStats {
        mean_ms: mean,
        std_ms: var.sqrt(),
        repetitions,
        batch_size: batch.lengths.len(),
        max_len: batch.mask.shape()[1],
        progression,
    })
}

/// Win probability from a logit.
pub fn logit_to_probability(logit: f64) -> f64 {
    sigmoid(logit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_perfect_ranking() {
        let auc = roc_auc(&[0.9, 0.1], &[1.0, 0.0]).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn auc_all_ties_is_half() {
        let auc = roc_auc(&[0.5, 0.5, 0.5, 0.5], &[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(auc, 0.5);
    }

    #[test]
    fn auc_hand_computed_four_pairs() {
        // pairs: (0.8 vs 0.6) win, (0.8 vs 0.7) win, (0.2 vs 0.6) loss,
        // (0.2 vs 0.7) loss -> 2 of 4.
        let auc = roc_auc(&[0.8, 0.6, 0.7, 0.2], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(auc, 0.5);
    }

    #[test]
    fn auc_single_class_is_undefined() {
        assert!(matches!(
            roc_auc(&[0.1, 0.9], &[1.0, 1.0]),
            Err(Error::MetricUndefined(_))
        ));
    }

    #[test]
    fn auc_matches_pairwise_oracle_exactly() {
        let mut rng = SeededRng::new(31);
        for trial in 0..100 {
            let n = 2 + rng.next_below(199);
            // Quantized scores force plenty of ties.
            let scores: Vec<f64> = (0..n).map(|_| rng.next_below(20) as f64 / 20.0).collect();
            let mut labels: Vec<f64> = (0..n).map(|_| rng.next_below(2) as f64).collect();
            labels[0] = 0.0;
            labels[1] = 1.0;
            let fast = roc_auc(&scores, &labels).unwrap();
            let slow = roc_auc_pairwise(&scores, &labels).unwrap();
            assert_eq!(fast.to_bits(), slow.to_bits(), "trial {trial}");
        }
    }

    #[test]
    fn auc_complement_identity() {
        let mut rng = SeededRng::new(77);
        let scores: Vec<f64> = (0..60).map(|_| rng.next_f64()).collect();
        let mut labels: Vec<f64> = (0..60).map(|_| rng.next_below(2) as f64).collect();
        labels[0] = 0.0;
        labels[1] = 1.0;
        let flipped: Vec<f64> = labels.iter().map(|y| 1.0 - y).collect();
        let a = roc_auc(&scores, &labels).unwrap();
        let b = roc_auc(&scores, &flipped).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_invariant_under_sigmoid() {
        let logits = [-3.0, -1.0, 0.0, 0.5, 2.0, 4.0];
        let labels = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let probs: Vec<f64> = logits.iter().map(|&z| crate::tensor::sigmoid(z)).collect();
        let a = roc_auc(&logits, &labels).unwrap();
        let b = roc_auc(&probs, &labels).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn curve_has_endpoints_and_matching_area() {
        let mut rng = SeededRng::new(5);
        let scores: Vec<f64> = (0..50).map(|_| rng.next_below(10) as f64 / 10.0).collect();
        let mut labels: Vec<f64> = (0..50).map(|_| rng.next_below(2) as f64).collect();
        labels[0] = 0.0;
        labels[1] = 1.0;
        let points = roc_curve(&scores, &labels).unwrap();
        let first = points.first().unwrap();
        let last = points.last().unwrap();
        assert_eq!(
            (first.false_positive_rate, first.true_positive_rate),
            (0.0, 0.0)
        );
        assert_eq!(
            (last.false_positive_rate, last.true_positive_rate),
            (1.0, 1.0)
        );
        let auc = roc_auc(&scores, &labels).unwrap();
        assert!((roc_curve_area(&points) - auc).abs() < 1e-12);
    }

    #[test]
    fn perfect_classifier_curve_passes_through_corner() {
        let points = roc_curve(&[0.9, 0.8, 0.2, 0.1], &[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(points
            .iter()
            .any(|p| p.false_positive_rate == 0.0 && p.true_positive_rate == 1.0));
    }

    #[test]
    fn bootstrap_is_deterministic_and_covers_point() {
        let mut rng = SeededRng::new(9);
        let scores: Vec<f64> = (0..40).map(|i| i as f64 / 40.0 + if i % 3 == 0 { 0.3 } else { 0.0 }).collect();
        let labels: Vec<f64> = (0..40).map(|i| ((i % 3 == 0) as u8) as f64).collect();
        let a = roc_auc_ci(&scores, &labels, 200, &mut SeededRng::new(4)).unwrap();
        let b = roc_auc_ci(&scores, &labels, 200, &mut SeededRng::new(4)).unwrap();
        assert_eq!(a, b);
        assert!(a.lo <= a.auc && a.auc <= a.hi);
        let _ = &mut rng;
    }

    #[test]
    fn bootstrap_tight_on_separated_scores() {
        let n = 200;
        let scores: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { 0.9 + (i as f64) * 1e-4 } else { 0.1 - (i as f64) * 1e-4 })
            .collect();
        let labels: Vec<f64> = (0..n).map(|i| ((i % 2 == 0) as u8) as f64).collect();
        let ci = roc_auc_ci(&scores, &labels, 500, &mut SeededRng::new(2)).unwrap();
        assert_eq!(ci.auc, 1.0);
        assert!(ci.std < 0.01);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy_at(&[0.9, 0.1], &[1.0, 0.0], 0.5).unwrap(), 1.0);
        // Threshold 0 predicts everything positive.
        let labels = [1.0, 0.0, 1.0, 0.0, 0.0];
        let acc = accuracy_at(&[0.2; 5], &labels, 0.0).unwrap();
        assert_eq!(acc, 0.4);
        // Complementing labels complements accuracy.
        let scores = [0.9, 0.4, 0.6, 0.2];
        let ys = [1.0, 1.0, 0.0, 0.0];
        let flipped: Vec<f64> = ys.iter().map(|y| 1.0 - y).collect();
        let a = accuracy_at(&scores, &ys, 0.5).unwrap();
        let b = accuracy_at(&scores, &flipped, 0.5).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bench_rejects_single_repetition() {
        let mut rng = SeededRng::new(1);
        let mut model = Model::lstm(&mut rng, 0.3).unwrap();
        let round = crate::data::Round {
            sheet_id: "s".to_string(),
            round_index: 0,
            features: vec![(1.0, 2.0); 5],
            winner: 1,
        };
        let batch = crate::data::pad_batch(&[&round], 0.0).unwrap();
        assert!(matches!(
            bench_inference(&mut model, &batch, 0.75, 1, 0),
            Err(Error::Parameter(_))
        ));
        let stats = bench_inference(&mut model, &batch, 0.75, 5, 1).unwrap();
        assert!(stats.mean_ms > 0.0);
        assert!(stats.std_ms >= 0.0);
        assert_eq!(stats.repetitions, 5);
    }
}
