//! Confusion matrix, the four derived metrics (accuracy, precision, recall,
//! F1), per-class reports, comparison tables and plot rendering.
//!
//! Every metric with a zero denominator is an explicit undefined marker,
//! never a silent zero.

mod compare;
mod confusion;
mod render;
mod report;

pub use compare::{
    comparison_table, literature_fixture, ComparisonTable, PriorWorkRow, RunSummary,
};
pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use render::{render_confusion, render_curves};
pub use report::{classification_report, ClassReport, MetricsReport};
