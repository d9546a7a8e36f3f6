use crate::task::Metric;

/// Fraction of positions where `predictions` and `gold` agree.
pub fn accuracy(predictions: &[usize], gold: &[usize]) -> f64 {
    debug_assert_eq!(predictions.len(), gold.len());
    if gold.is_empty() {
        return 0.0;
    }
    let correct = predictions.iter().zip(gold).filter(|(p, g)| p == g).count();
    correct as f64 / gold.len() as f64
}

/// F1 of class 1. Returns 1.0 when neither side contains a positive, i.e.
/// when predictions agree with gold on every instance.
pub fn binary_f1(predictions: &[usize], gold: &[usize]) -> f64 {
    debug_assert_eq!(predictions.len(), gold.len());
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &g) in predictions.iter().zip(gold) {
        match (p == 1, g == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fneg;
    if denom == 0 {
        return 1.0;
    }
    (2 * tp) as f64 / denom as f64
}

pub fn score(metric: Metric, predictions: &[usize], gold: &[usize]) -> f64 {
    match metric {
        Metric::Accuracy => accuracy(predictions, gold),
        Metric::BinaryF1 => binary_f1(predictions, gold),
    }
}
