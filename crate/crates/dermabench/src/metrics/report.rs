//! Per-class precision/recall/F1 report (the two-row-per-model table).

use serde::{Deserialize, Serialize};

use crate::data::LesionLabel;
use crate::error::{Error, Result};
use crate::metrics::confusion::{confusion_matrix, ConfusionMatrix};

/// One class's row. `None` marks an undefined metric (zero denominator);
/// rendered as "—", never as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub support: u64,
}

impl ClassReport {
    fn from_matrix(cm: &ConfusionMatrix) -> Self {
        ClassReport {
            precision: cm.precision::<f64>().ok(),
            recall: cm.recall::<f64>().ok(),
            f1: cm.f1_score::<f64>().ok(),
            support: cm.tp + cm.fn_,
        }
    }
}

/// Full-precision metrics for one evaluation; rounding happens only when a
/// table is rendered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub benign: ClassReport,
    pub malignant: ClassReport,
    /// Counts with malignant as the positive class.
    pub confusion: ConfusionMatrix,
}

/// Compute the per-class report from (true_index, predicted_index) pairs.
pub fn classification_report(pairs: &[(usize, usize)]) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::UndefinedMetric {
            metric: "accuracy",
            reason: "empty prediction list".to_string(),
        });
    }
    let malignant_cm = confusion_matrix(pairs, LesionLabel::Malignant)?;
    let benign_cm = malignant_cm.swap_positive();
    Ok(MetricsReport {
        accuracy: malignant_cm.accuracy()?,
        benign: ClassReport::from_matrix(&benign_cm),
        malignant: ClassReport::from_matrix(&malignant_cm),
        confusion: malignant_cm,
    })
}

fn cell2(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.2}"),
        None => "—".to_string(),
    }
}

impl MetricsReport {
    /// Render the per-class table at two decimals (undefined cells as "—").
    pub fn render_text(&self, model: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:<10} {:>9} {:>7} {:>9} {:>8}\n",
            "Model", "Class", "Precision", "Recall", "F1 Score", "Support"
        ));
        for (label, row) in [("Benign", &self.benign), ("Malignant", &self.malignant)] {
            out.push_str(&format!(
                "{:<14} {:<10} {:>9} {:>7} {:>9} {:>8}\n",
                model,
                label,
                cell2(row.precision),
                cell2(row.recall),
                cell2(row.f1),
                row.support
            ));
        }
        out.push_str(&format!("accuracy: {:.4}\n", self.accuracy));
        out
    }

    /// JSON document written per run.
    pub fn to_json(&self, model: &str) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            model: &'a str,
            accuracy: f64,
            per_class: PerClass<'a>,
            confusion: &'a ConfusionMatrix,
        }
        #[derive(Serialize)]
        struct PerClass<'a> {
            benign: &'a ClassReport,
            malignant: &'a ClassReport,
        }
        let doc = Doc {
            model,
            accuracy: self.accuracy,
            per_class: PerClass {
                benign: &self.benign,
                malignant: &self.malignant,
            },
            confusion: &self.confusion,
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_are_all_ones() {
        let pairs: Vec<(usize, usize)> = (0..5)
            .map(|_| (0, 0))
            .chain((0..5).map(|_| (1, 1)))
            .collect();
        let report = classification_report(&pairs).unwrap();
        assert_eq!(report.accuracy, 1.0);
        for row in [report.benign, report.malignant] {
            assert_eq!(row.precision, Some(1.0));
            assert_eq!(row.recall, Some(1.0));
            assert_eq!(row.f1, Some(1.0));
            assert_eq!(row.support, 5);
        }
        let text = report.render_text("ResNet101");
        assert!(text.contains("1.00"));
    }

    #[test]
    fn benign_row_comes_from_swapped_matrix() {
        // same 10-pair fixture as the confusion tests: (tp=3,fp=1,fn=2,tn=4)
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
        let report = classification_report(&pairs).unwrap();
        // benign-as-positive: (tp=4, fp=2, fn=1, tn=3)
        assert_eq!(report.benign.precision, Some(4.0 / 6.0));
        assert_eq!(report.benign.recall, Some(4.0 / 5.0));
        assert_eq!(report.benign.support, 5);
        assert_eq!(report.malignant.precision, Some(0.75));
        assert_eq!(report.malignant.recall, Some(0.6));
        assert_eq!(report.accuracy, 0.7);
    }

    #[test]
    fn undefined_cells_render_as_dash() {
        // model predicts benign always: malignant precision undefined
        let pairs = [(0, 0), (0, 0), (1, 0)];
        let report = classification_report(&pairs).unwrap();
        assert_eq!(report.malignant.precision, None);
        let text = report.render_text("m");
        assert!(text.contains('—'));
        let json = report.to_json("m").unwrap();
        assert!(json.contains("null"));
        assert!(json.contains("\"fn\""));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(classification_report(&[]).is_err());
    }
}
