//! 2×2 confusion matrix and the metrics derived from it.

use serde::{Deserialize, Serialize};

use crate::data::LesionLabel;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// TP/FP/FN/TN counts relative to a chosen positive class.
///
/// The clinically positive finding (malignant) is the default positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub positive_class: LesionLabel,
}

/// Count a prediction list into a confusion matrix. Indices must be 0 or 1.
pub fn confusion_matrix(
    pairs: &[(usize, usize)],
    positive_class: LesionLabel,
) -> Result<ConfusionMatrix> {
    let pos = positive_class.class_index();
    let mut cm = ConfusionMatrix {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
        positive_class,
    };
    for &(truth, pred) in pairs {
        if truth > 1 {
            return Err(Error::ClassIndex { index: truth });
        }
        if pred > 1 {
            return Err(Error::ClassIndex { index: pred });
        }
        match (truth == pos, pred == pos) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (true, false) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64, positive_class: LesionLabel) -> Self {
        ConfusionMatrix {
            tp,
            fp,
            fn_,
            tn,
            positive_class,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// View with the other class as positive: (tp,fp,fn,tn) → (tn,fn,fp,tp).
    pub fn swap_positive(&self) -> ConfusionMatrix {
        let swapped = match self.positive_class {
            LesionLabel::Benign => LesionLabel::Malignant,
            LesionLabel::Malignant => LesionLabel::Benign,
        };
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
            positive_class: swapped,
        }
    }

    /// (tp + tn) / total.
    pub fn accuracy<S: Real>(&self) -> Result<S> {
        let total = self.total();
        if total == 0 {
            return Err(Error::UndefinedMetric {
                metric: "accuracy",
                reason: "empty confusion matrix".to_string(),
            });
        }
        Ok(ratio((self.tp + self.tn) as f64, total as f64))
    }

    /// tp / (tp + fp).
    pub fn precision<S: Real>(&self) -> Result<S> {
        let denom = self.tp + self.fp;
        if denom == 0 {
            return Err(Error::UndefinedMetric {
                metric: "precision",
                reason: "no positive predictions (tp + fp = 0)".to_string(),
            });
        }
        Ok(ratio(self.tp as f64, denom as f64))
    }

    /// tp / (tp + fn).
    pub fn recall<S: Real>(&self) -> Result<S> {
        let denom = self.tp + self.fn_;
        if denom == 0 {
            return Err(Error::UndefinedMetric {
                metric: "recall",
                reason: "no positive ground truth (tp + fn = 0)".to_string(),
            });
        }
        Ok(ratio(self.tp as f64, denom as f64))
    }

    /// 2 · precision · recall / (precision + recall).
    pub fn f1_score<S: Real>(&self) -> Result<S> {
        let p: f64 = self.precision()?;
        let r: f64 = self.recall()?;
        if p + r == 0.0 {
            return Err(Error::UndefinedMetric {
                metric: "f1",
                reason: "precision + recall = 0".to_string(),
            });
        }
        Ok(S::from_f64_c(2.0 * p * r / (p + r)))
    }
}

fn ratio<S: Real>(num: f64, denom: f64) -> S {
    S::from_f64_c(num / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hand_cm() -> ConfusionMatrix {
        ConfusionMatrix::new(3, 1, 2, 4, LesionLabel::Malignant)
    }

    #[test]
    fn hand_fixture_matches_equations() {
        let cm = hand_cm();
        assert_eq!(cm.accuracy::<f64>().unwrap(), 0.7);
        assert_eq!(cm.precision::<f64>().unwrap(), 0.75);
        assert_eq!(cm.recall::<f64>().unwrap(), 0.6);
        let f1: f64 = cm.f1_score().unwrap();
        assert!((f1 - 2.0 * (0.6 * 0.75) / 1.35).abs() < 1e-12);
        assert!((f1 - 0.6667).abs() < 1e-4);
    }

    #[test]
    fn counting_from_pairs() {
        // 10 pairs chosen to give (tp=3, fp=1, fn=2, tn=4) with malignant=1 positive
        let pairs = [
            (1, 1),
            (1, 1),
            (1, 1),
            (0, 1),
            (1, 0),
            (1, 0),
            (0, 0),
            (0, 0),
            (0, 0),
            (0, 0),
        ];
        let cm = confusion_matrix(&pairs, LesionLabel::Malignant).unwrap();
        assert_eq!((cm.tp, cm.fp, cm.fn_, cm.tn), (3, 1, 2, 4));
    }

    #[test]
    fn perfect_classifier() {
        let pairs: Vec<(usize, usize)> = (0..3)
            .map(|_| (1, 1))
            .chain((0..4).map(|_| (0, 0)))
            .collect();
        let cm = confusion_matrix(&pairs, LesionLabel::Malignant).unwrap();
        assert_eq!((cm.tp, cm.fp, cm.fn_, cm.tn), (3, 0, 0, 4));
        assert_eq!(cm.accuracy::<f64>().unwrap(), 1.0);
        assert_eq!(cm.precision::<f64>().unwrap(), 1.0);
        assert_eq!(cm.recall::<f64>().unwrap(), 1.0);
    }

    #[test]
    fn empty_input_yields_undefined_metrics() {
        let cm = confusion_matrix(&[], LesionLabel::Malignant).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(matches!(
            cm.accuracy::<f64>(),
            Err(Error::UndefinedMetric { metric: "accuracy", .. })
        ));
        assert!(cm.precision::<f64>().is_err());
        assert!(cm.recall::<f64>().is_err());
        assert!(cm.f1_score::<f64>().is_err());
    }

    #[test]
    fn zero_denominators_never_return_zero() {
        // predictions all negative: precision undefined, recall defined
        let cm = ConfusionMatrix::new(0, 0, 5, 5, LesionLabel::Malignant);
        assert!(cm.precision::<f64>().is_err());
        assert_eq!(cm.recall::<f64>().unwrap(), 0.0);
        // no positive ground truth: recall undefined
        let cm = ConfusionMatrix::new(0, 2, 0, 8, LesionLabel::Malignant);
        assert!(cm.recall::<f64>().is_err());
        // tp=0 with both denominators nonzero: f1 denominator 0
        let cm = ConfusionMatrix::new(0, 2, 3, 5, LesionLabel::Malignant);
        assert!(matches!(
            cm.f1_score::<f64>(),
            Err(Error::UndefinedMetric { metric: "f1", .. })
        ));
    }

    #[test]
    fn out_of_range_index_rejected() {
        assert!(matches!(
            confusion_matrix(&[(2, 0)], LesionLabel::Malignant),
            Err(Error::ClassIndex { index: 2 })
        ));
        assert!(confusion_matrix(&[(0, 3)], LesionLabel::Malignant).is_err());
    }

    #[test]
    fn swap_maps_counts_and_is_involutive() {
        let cm = hand_cm();
        let sw = cm.swap_positive();
        assert_eq!((sw.tp, sw.fp, sw.fn_, sw.tn), (4, 2, 1, 3));
        assert_eq!(sw.positive_class, LesionLabel::Benign);
        assert_eq!(sw.swap_positive(), cm);
        // accuracy invariant under swap
        assert_eq!(
            cm.accuracy::<f64>().unwrap(),
            sw.accuracy::<f64>().unwrap()
        );
    }

    proptest! {
        /// Brute-force counting oracle over random prediction vectors.
        #[test]
        fn metrics_match_brute_force(pairs in proptest::collection::vec((0usize..2, 0usize..2), 1..50)) {
            let cm = confusion_matrix(&pairs, LesionLabel::Malignant).unwrap();
            let n = pairs.len() as f64;
            let correct = pairs.iter().filter(|(t, p)| t == p).count() as f64;
            let pred_pos = pairs.iter().filter(|&&(_, p)| p == 1).count() as f64;
            let true_pos = pairs.iter().filter(|&&(t, _)| t == 1).count() as f64;
            let tp = pairs.iter().filter(|&&(t, p)| t == 1 && p == 1).count() as f64;

            prop_assert!((cm.accuracy::<f64>().unwrap() - correct / n).abs() < 1e-12);
            match cm.precision::<f64>() {
                Ok(p) => prop_assert!((p - tp / pred_pos).abs() < 1e-12),
                Err(_) => prop_assert_eq!(pred_pos, 0.0),
            }
            match cm.recall::<f64>() {
                Ok(r) => prop_assert!((r - tp / true_pos).abs() < 1e-12),
                Err(_) => prop_assert_eq!(true_pos, 0.0),
            }
            if let Ok(f1) = cm.f1_score::<f64>() {
                let p = tp / pred_pos;
                let r = tp / true_pos;
                prop_assert!((f1 - 2.0 * p * r / (p + r)).abs() < 1e-12);
                // f1 lies between min and max of (p, r)
                prop_assert!(f1 >= p.min(r) - 1e-12 && f1 <= p.max(r) + 1e-12);
            }
        }

        /// Class-swap symmetry: benign-as-positive metrics equal the swapped matrix's.
        #[test]
        fn swap_symmetry(pairs in proptest::collection::vec((0usize..2, 0usize..2), 1..50)) {
            let malig = confusion_matrix(&pairs, LesionLabel::Malignant).unwrap();
            let benign = confusion_matrix(&pairs, LesionLabel::Benign).unwrap();
            prop_assert_eq!(malig.swap_positive(), benign);
        }
    }
}
