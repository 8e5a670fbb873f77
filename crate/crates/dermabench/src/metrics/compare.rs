//! Cross-model comparison tables, with an optional fixed set of literature
//! results appended for context.

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Headline numbers for one completed run; values are copied from the run
/// record, never recomputed from curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: String,
    pub seed: u64,
    pub val_accuracy: f64,
    pub val_loss: f64,
    pub test_accuracy: f64,
}

/// One literature row. These ship as read-only data and are clearly labeled;
/// they are never recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriorWorkRow {
    pub source: &'static str,
    pub architecture: &'static str,
    pub accuracy: f64,
}

/// Reported accuracies from earlier melanoma-classification studies.
pub fn literature_fixture() -> &'static [PriorWorkRow] {
    const ROWS: &[PriorWorkRow] = &[
        PriorWorkRow { source: "In study [13]", architecture: "ResNet 50", accuracy: 0.785 },
        PriorWorkRow { source: "In study [13]", architecture: "ResNet 40", accuracy: 0.835 },
        PriorWorkRow { source: "In study [13]", architecture: "ResNet 25", accuracy: 0.807 },
        PriorWorkRow { source: "In study [13]", architecture: "ResNet 10", accuracy: 0.822 },
        PriorWorkRow { source: "In study [13]", architecture: "ResNet 7", accuracy: 0.824 },
        PriorWorkRow { source: "In study [14]", architecture: "AlexNet", accuracy: 0.735 },
        PriorWorkRow { source: "In study [15]", architecture: "VGG16", accuracy: 0.726 },
        PriorWorkRow { source: "In study [16]", architecture: "ResNet 101", accuracy: 0.890 },
        PriorWorkRow { source: "In study [16]", architecture: "InceptionV3", accuracy: 0.900 },
        PriorWorkRow { source: "In study [17]", architecture: "ResNet 50", accuracy: 0.933 },
        PriorWorkRow { source: "In study [17]", architecture: "Xception", accuracy: 0.952 },
        PriorWorkRow { source: "In study [17]", architecture: "VGG16", accuracy: 0.931 },
        PriorWorkRow { source: "In study [17]", architecture: "Inception V3", accuracy: 0.941 },
    ];
    ROWS
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<RunSummary>,
    pub prior_work: Vec<PriorWorkRow>,
}

/// Build the comparison table from run summaries. Duplicate model names are
/// disambiguated with the run seed.
pub fn comparison_table(
    summaries: &[RunSummary],
    with_literature: bool,
) -> Result<ComparisonTable> {
    let mut rows: Vec<RunSummary> = summaries.to_vec();
    let duplicated: Vec<String> = rows
        .iter()
        .filter(|r| rows.iter().filter(|o| o.model == r.model).count() > 1)
        .map(|r| r.model.clone())
        .collect();
    for row in rows.iter_mut() {
        if duplicated.contains(&row.model) {
            log::warn!(
                "duplicate model name `{}`; disambiguating with seed",
                row.model
            );
            row.model = format!("{} (seed {})", row.model, row.seed);
        }
    }
    Ok(ComparisonTable {
        rows,
        prior_work: if with_literature {
            literature_fixture().to_vec()
        } else {
            Vec::new()
        },
    })
}

impl ComparisonTable {
    /// Aligned plain-text rendering at four decimals.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>19} {:>15} {:>17}\n",
            "Model", "Validation Accuracy", "Validation Loss", "Test Set Accuracy"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<24} {:>19.4} {:>15.4} {:>17.4}\n",
                row.model, row.val_accuracy, row.val_loss, row.test_accuracy
            ));
        }
        if !self.prior_work.is_empty() {
            out.push_str("\nLiterature results (reported values, not recomputed):\n");
            out.push_str(&format!(
                "{:<16} {:<16} {:>13}\n",
                "Reference", "Architecture", "Accuracy"
            ));
            for row in &self.prior_work {
                out.push_str(&format!(
                    "{:<16} {:<16} {:>13.3}\n",
                    row.source, row.architecture, row.accuracy
                ));
            }
        }
        out
    }

    pub fn render_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "val_accuracy", "val_loss", "test_accuracy", "source"])?;
        for row in &self.rows {
            w.write_record([
                row.model.as_str(),
                &format!("{:.4}", row.val_accuracy),
                &format!("{:.4}", row.val_loss),
                &format!("{:.4}", row.test_accuracy),
                "this harness",
            ])?;
        }
        for row in &self.prior_work {
            w.write_record([
                row.architecture,
                "",
                "",
                &format!("{:.3}", row.accuracy),
                row.source,
            ])?;
        }
        let bytes = w.into_inner().expect("csv flush");
        Ok(String::from_utf8(bytes).expect("csv utf8"))
    }
}
