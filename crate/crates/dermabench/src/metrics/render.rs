//! Plot rendering: training curves and the 2×2 confusion heatmap.
//!
//! Plots are written as self-contained SVG with a fixed style, so identical
//! inputs yield byte-identical files. The underlying history CSV is emitted
//! next to the curves so that any plot can be regenerated.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::confusion::ConfusionMatrix;
use crate::training::HistoryRow;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 60.0;

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    points: Vec<(f64, f64)>,
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    let ys: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).collect();
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         font-family=\"monospace\" font-size=\"13\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        title
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B
    ));
    // ticks
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let xv = x_min + t * (x_max - x_min);
        let yv = y_min + t * (y_max - y_min);
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            sx(xv),
            HEIGHT - MARGIN_B + 20.0,
            fmt(xv)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 8.0,
            sy(yv) + 4.0,
            fmt(yv)
        ));
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
            sy(yv),
            WIDTH - MARGIN_R,
            sy(yv)
        ));
    }
    // axis labels
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 15.0,
        x_label
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        y_label
    ));
    // series + legend
    for (i, s) in series.iter().enumerate() {
        if s.points.len() == 1 {
            let (x, y) = s.points[0];
            svg.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{}\"/>\n",
                sx(x),
                sy(y),
                s.color
            ));
        } else {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                pts.join(" "),
                s.color
            ));
        }
        let ly = MARGIN_T + 8.0 + i as f64 * 20.0;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            WIDTH - 190.0,
            ly,
            WIDTH - 160.0,
            ly,
            s.color
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            WIDTH - 152.0,
            ly + 4.0,
            s.label
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() || !max.is_finite() {
        return (0.0, 1.0);
    }
    if (max - min).abs() < 1e-12 {
        (min - 0.5, max + 0.5)
    } else {
        let pad = (max - min) * 0.05;
        (min - pad, max + pad)
    }
}

/// Files produced by [`render_curves`].
#[derive(Debug, Clone)]
pub struct CurveFiles {
    pub accuracy_svg: PathBuf,
    pub loss_svg: PathBuf,
    pub history_csv: PathBuf,
}

/// Write accuracy-vs-epoch and loss-vs-epoch plots plus the history CSV.
pub fn render_curves(
    history: &[HistoryRow],
    model: &str,
    out_dir: &Path,
) -> Result<CurveFiles> {
    if history.is_empty() {
        return Err(Error::EmptyRender("history has no epochs".to_string()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let epochs: Vec<f64> = history.iter().map(|r| (r.epoch + 1) as f64).collect();
    let acc_series = [
        Series {
            label: "train",
            color: "#1f77b4",
            points: epochs.iter().copied().zip(history.iter().map(|r| r.train_accuracy)).collect(),
        },
        Series {
            label: "validation",
            color: "#ff7f0e",
            points: epochs.iter().copied().zip(history.iter().map(|r| r.val_accuracy)).collect(),
        },
    ];
    let loss_series = [
        Series {
            label: "train",
            color: "#1f77b4",
            points: epochs.iter().copied().zip(history.iter().map(|r| r.train_loss)).collect(),
        },
        Series {
            label: "validation",
            color: "#ff7f0e",
            points: epochs.iter().copied().zip(history.iter().map(|r| r.val_loss)).collect(),
        },
    ];

    let accuracy_svg = out_dir.join(format!("{model}-accuracy.svg"));
    let loss_svg = out_dir.join(format!("{model}-loss.svg"));
    let history_csv = out_dir.join(format!("{model}-history.csv"));

    fs::write(
        &accuracy_svg,
        line_chart(&format!("Model accuracy of {model}"), "epoch", "accuracy", &acc_series),
    )
    .map_err(|e| Error::io(&accuracy_svg, e))?;
    fs::write(
        &loss_svg,
        line_chart(&format!("Model loss of {model}"), "epoch", "loss", &loss_series),
    )
    .map_err(|e| Error::io(&loss_svg, e))?;
    fs::write(&history_csv, crate::training::history_csv(history)?)
        .map_err(|e| Error::io(&history_csv, e))?;

    Ok(CurveFiles {
        accuracy_svg,
        loss_svg,
        history_csv,
    })
}

/// Annotated 2×2 confusion heatmap.
pub fn render_confusion(cm: &ConfusionMatrix, path: &Path) -> Result<()> {
    if cm.total() == 0 {
        return Err(Error::EmptyRender("confusion matrix is empty".to_string()));
    }
    let pos = cm.positive_class.to_string();
    let neg = cm.swap_positive().positive_class.to_string();
    // grid rows: actual class, columns: predicted class; order (neg, pos)
    let cells = [
        [(cm.tn, &neg, &neg), (cm.fp, &neg, &pos)],
        [(cm.fn_, &pos, &neg), (cm.tp, &pos, &pos)],
    ];
    let max = cm.tn.max(cm.fp).max(cm.fn_).max(cm.tp).max(1);
    let (cell, ox, oy) = (160.0, 120.0, 80.0);
    let mut svg = String::new();
    svg.push_str(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"520\" height=\"480\" \
         font-family=\"monospace\" font-size=\"14\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
    );
    svg.push_str("<text x=\"260\" y=\"32\" text-anchor=\"middle\" font-size=\"16\">Confusion matrix</text>\n");
    for (r, row) in cells.iter().enumerate() {
        for (c, (count, _, _)) in row.iter().enumerate() {
            let x = ox + c as f64 * cell;
            let y = oy + r as f64 * cell;
            let shade = 255 - ((*count as f64 / max as f64) * 170.0) as u32;
            svg.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" \
                 fill=\"rgb({shade},{shade},255)\" stroke=\"black\"/>\n"
            ));
            let text_fill = if shade < 150 { "white" } else { "black" };
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"22\" fill=\"{text_fill}\">{count}</text>\n",
                x + cell / 2.0,
                y + cell / 2.0 + 7.0
            ));
        }
    }
    for (i, name) in [&neg, &pos].iter().enumerate() {
        // column headers (predicted)
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{name}</text>\n",
            ox + i as f64 * cell + cell / 2.0,
            oy - 12.0
        ));
        // row headers (actual)
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{name}</text>\n",
            ox - 12.0,
            oy + i as f64 * cell + cell / 2.0 + 5.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">Predicted label</text>\n",
        ox + cell,
        oy + 2.0 * cell + 44.0
    ));
    svg.push_str(&format!(
        "<text x=\"30\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 30 {})\">True label</text>\n",
        oy + cell,
        oy + cell
    ));
    svg.push_str("</svg>\n");
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LesionLabel;

    fn history(n: usize) -> Vec<HistoryRow> {
        (0..n)
            .map(|e| HistoryRow {
                epoch: e,
                train_loss: 0.5 / (e + 1) as f64,
                train_accuracy: 0.6 + 0.01 * e as f64,
                val_loss: 0.6 / (e + 1) as f64,
                val_accuracy: 0.55 + 0.01 * e as f64,
                wall_clock_secs: 1.0,
            })
            .collect()
    }

    #[test]
    fn curve_files_exist_and_csv_has_rows() {
        let dir = tempfile::tempdir().unwrap();
        let files = render_curves(&history(20), "DenseNet169", dir.path()).unwrap();
        for f in [&files.accuracy_svg, &files.loss_svg, &files.history_csv] {
            assert!(f.exists());
            assert!(fs::metadata(f).unwrap().len() > 0);
        }
        let csv = fs::read_to_string(&files.history_csv).unwrap();
        assert!(csv.starts_with("epoch,train_loss,train_acc,val_loss,val_acc"));
        assert_eq!(csv.lines().count(), 21);
    }

    #[test]
    fn single_epoch_renders() {
        let dir = tempfile::tempdir().unwrap();
        render_curves(&history(1), "ResNet101", dir.path()).unwrap();
    }

    #[test]
    fn empty_history_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(render_curves(&[], "m", dir.path()).is_err());
    }

    #[test]
    fn rendering_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = render_curves(&history(5), "a", dir.path()).unwrap();
        let bytes_a = fs::read(&a.accuracy_svg).unwrap();
        let b = render_curves(&history(5), "a", dir.path()).unwrap();
        assert_eq!(bytes_a, fs::read(&b.accuracy_svg).unwrap());
    }

    #[test]
    fn confusion_heatmap_contains_counts_and_swap_transposes() {
        let dir = tempfile::tempdir().unwrap();
        let cm = ConfusionMatrix::new(3, 1, 2, 4, LesionLabel::Malignant);
        let path = dir.path().join("cm.svg");
        render_confusion(&cm, &path).unwrap();
        let svg = fs::read_to_string(&path).unwrap();
        for count in ["\">3<", "\">1<", "\">2<", "\">4<"] {
            assert!(svg.contains(count), "missing {count}");
        }
        assert!(svg.contains("benign") && svg.contains("malignant"));

        let swapped_path = dir.path().join("cm_swapped.svg");
        render_confusion(&cm.swap_positive(), &swapped_path).unwrap();
        let swapped = fs::read_to_string(&swapped_path).unwrap();
        assert_ne!(svg, swapped);

        let empty = ConfusionMatrix::new(0, 0, 0, 0, LesionLabel::Malignant);
        assert!(render_confusion(&empty, &dir.path().join("e.svg")).is_err());
    }
}
