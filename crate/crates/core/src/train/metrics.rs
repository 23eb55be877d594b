//! Classification metrics.

use serde::{Deserialize, Serialize};

/// Accuracy with macro-averaged precision, recall and F1. Classes never
/// predicted (or never present) contribute zero to the respective average.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub macro_f1: f64,
}

pub fn scores(predictions: &[usize], labels: &[usize], classes: usize) -> Scores {
    assert_eq!(predictions.len(), labels.len());
    if labels.is_empty() {
        return Scores::default();
    }
    let mut tp = vec![0usize; classes];
    let mut predicted = vec![0usize; classes];
    let mut actual = vec![0usize; classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        predicted[p] += 1;
        actual[y] += 1;
        if p == y {
            tp[p] += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (mut prec, mut rec, mut f1) = (0.0, 0.0, 0.0);
    for c in 0..classes {
        let p = ratio(tp[c], predicted[c]);
        let r = ratio(tp[c], actual[c]);
        prec += p;
        rec += r;
        if p + r > 0.0 {
            f1 += 2.0 * p * r / (p + r);
        }
    }
    let k = classes as f64;
    Scores {
        accuracy: ratio(tp.iter().sum(), labels.len()),
        precision: prec / k,
        recall: rec / k,
        macro_f1: f1 / k,
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_inverted() {
        let y = [0, 1, 1, 0];
        let s = scores(&y, &y, 2);
        assert_eq!((s.accuracy, s.precision, s.recall, s.macro_f1), (1.0, 1.0, 1.0, 1.0));
        let s = scores(&[1, 0, 0, 1], &y, 2);
        assert_eq!((s.accuracy, s.macro_f1), (0.0, 0.0));
    }

    #[test]
    fn hand_computed_case() {
        // class 0: tp 2, predicted 3, actual 2; class 1: tp 1, predicted 1, actual 2
        let s = scores(&[0, 0, 0, 1], &[0, 0, 1, 1], 2);
        assert_eq!(s.accuracy, 0.75);
        assert!((s.precision - (2.0 / 3.0 + 1.0) / 2.0).abs() < 1e-15);
        assert!((s.recall - (1.0 + 0.5) / 2.0).abs() < 1e-15);
        let f0 = 2.0 * (2.0 / 3.0) / (2.0 / 3.0 + 1.0);
        let f1 = 2.0 * 0.5 / 1.5;
        assert!((s.macro_f1 - (f0 + f1) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_predictor() {
        let s = scores(&[0, 0, 0, 0], &[0, 0, 0, 1], 2);
        assert_eq!(s.accuracy, 0.75);
        assert_eq!(s.recall, 0.5);
    }

    #[test]
    fn argmax_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
