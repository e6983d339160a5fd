//! Report tree written after a run:
//!
//! ```text
//! <out>/ledger.json-lines          one cell per line
//! <out>/tables/folds.csv           per-fold metrics of every cell
//! <out>/tables/summary_<fs>.csv    one table per feature selector
//! <out>/tables/tuning_comparison.csv
//! <out>/tables/overfitting.csv
//! <out>/figures/f1_by_selector.svg
//! <out>/figures/accuracy_by_tuner.svg
//! <out>/figures/train_vs_test.svg
//! ```
//!
//! Columns ending in `_s` hold wall-clock seconds; every other column is a
//! deterministic function of the configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{CellRecord, CellStatus, PipelineError, RunLedger};
use crate::feature_selection::SelectorKind;
use crate::search::TunerKind;

/// Pixel height of a bar with value 1.0.
pub const PLOT_HEIGHT: f64 = 300.0;

pub const FOLD_COLUMNS: [&str; 15] = [
    "dataset",
    "model",
    "selector",
    "tuner",
    "fold",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "train_accuracy",
    "train_s",
    "test_s",
    "tune_s",
    "params",
    "features",
];

fn io(path: &Path) -> impl Fn(String) -> PipelineError + '_ {
    move |e| PipelineError::Io(format!("{}: {e}", path.display()))
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn secs(v: f64) -> String {
    format!("{v:.4}")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path)(e.to_string()))?;
    w.write_record(header)
        .map_err(|e| io(path)(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| io(path)(e.to_string()))?;
    }
    w.flush().map_err(|e| io(path)(e.to_string()))
}

fn ok_cells(ledger: &RunLedger) -> impl Iterator<Item = &CellRecord> {
    ledger
        .cells
        .iter()
        .filter(|c| c.status == CellStatus::Ok && c.report.is_some())
}

fn fold_rows(ledger: &RunLedger) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for c in ok_cells(ledger) {
        let report = c.report.as_ref().expect("ok cell has a report");
        for (rec, m) in c.folds.iter().zip(&report.folds) {
            rows.push(vec![
                c.key.dataset.clone(),
                c.key.model.to_string(),
                c.key.selector.to_string(),
                c.key.tuner.to_string(),
                rec.fold.to_string(),
                f6(m.accuracy),
                f6(m.precision),
                f6(m.recall),
                f6(m.f1),
                m.train_accuracy.map(f6).unwrap_or_default(),
                secs(m.train_seconds),
                secs(m.test_seconds),
                secs(m.tune_seconds),
                rec.params.clone(),
                rec.features.join(" "),
            ]);
        }
    }
    rows
}

pub const SUMMARY_COLUMNS: [&str; 14] = [
    "dataset",
    "model",
    "tuner",
    "status",
    "accuracy_mean",
    "accuracy_std",
    "precision_mean",
    "recall_mean",
    "f1_mean",
    "f1_std",
    "train_s",
    "test_s",
    "tune_s",
    "error",
];

fn summary_rows(ledger: &RunLedger, selector: SelectorKind) -> Vec<Vec<String>> {
    ledger
        .cells
        .iter()
        .filter(|c| c.key.selector == selector)
        .map(|c| {
            let head = vec![
                c.key.dataset.clone(),
                c.key.model.to_string(),
                c.key.tuner.to_string(),
                match c.status {
                    CellStatus::Ok => "ok".to_string(),
                    CellStatus::Failed => "failed".to_string(),
                },
            ];
            let body = match &c.report {
                Some(r) => vec![
                    f6(r.accuracy.mean),
                    f6(r.accuracy.std),
                    f6(r.precision.mean),
                    f6(r.recall.mean),
                    f6(r.f1.mean),
                    f6(r.f1.std),
                    secs(r.train_seconds),
                    secs(r.test_seconds),
                    secs(r.tune_seconds),
                ],
                None => vec![String::new(); 9],
            };
            let mut row = head;
            row.extend(body);
            row.push(c.error.clone().unwrap_or_default());
            row
        })
        .collect()
}

fn mean_accuracy(c: &CellRecord) -> Option<f64> {
    c.report.as_ref().map(|r| r.accuracy.mean)
}

/// The untuned reference for a tuned cell: the no-selection baseline of the
/// same model if present, otherwise the untuned cell of the same selector.
fn untuned_reference<'a>(ledger: &'a RunLedger, c: &CellRecord) -> Option<&'a CellRecord> {
    ledger
        .get(
            &c.key.dataset,
            SelectorKind::None,
            c.key.model,
            TunerKind::None,
        )
        .or_else(|| ledger.get(&c.key.dataset, c.key.selector, c.key.model, TunerKind::None))
        .filter(|b| b.status == CellStatus::Ok)
}

fn tuning_rows(ledger: &RunLedger) -> Vec<Vec<String>> {
    ok_cells(ledger)
        .filter(|c| c.key.tuner != TunerKind::None)
        .map(|c| {
            let tuned = mean_accuracy(c).expect("ok cell");
            let base = untuned_reference(ledger, c);
            let base_acc = base.and_then(mean_accuracy);
            vec![
                c.key.dataset.clone(),
                c.key.selector.to_string(),
                c.key.model.to_string(),
                c.key.tuner.to_string(),
                base.map(|b| b.key.selector.to_string()).unwrap_or_default(),
                base_acc.map(f6).unwrap_or_default(),
                f6(tuned),
                base_acc
                    .map(|b| format!("{:.4}", 100.0 * (tuned - b)))
                    .unwrap_or_default(),
            ]
        })
        .collect()
}

fn overfitting_rows(ledger: &RunLedger) -> Vec<Vec<String>> {
    ok_cells(ledger)
        .filter_map(|c| {
            let r = c.report.as_ref()?;
            let train = r.train_accuracy?.mean;
            Some(vec![
                c.key.dataset.clone(),
                c.key.selector.to_string(),
                c.key.model.to_string(),
                c.key.tuner.to_string(),
                f6(train),
                f6(r.accuracy.mean),
                format!("{:.4}", 100.0 * (train - r.accuracy.mean)),
                (c.key.selector == SelectorKind::None && c.key.tuner == TunerKind::None)
                    .to_string(),
            ])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarGroup {
    pub label: String,
    /// `(series label, value in [0, 1])`.
    pub bars: Vec<(String, f64)>,
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const BAR_WIDTH: f64 = 18.0;
const GROUP_GAP: f64 = 24.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 40.0;

/// Grouped bar chart. Each bar is a `rect` with `class="bar"` and a
/// `data-value` attribute; its height is `value * PLOT_HEIGHT` pixels.
pub fn grouped_bar_svg(title: &str, y_label: &str, groups: &[BarGroup]) -> String {
    let inner: f64 = groups
        .iter()
        .map(|g| g.bars.len().max(1) as f64 * BAR_WIDTH + GROUP_GAP)
        .sum::<f64>()
        + GROUP_GAP;
    let width = LEFT + inner + 20.0;
    let base = TOP + PLOT_HEIGHT;
    let height = base + 140.0;
    let palette = [
        "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
        "#9c755f",
    ];
    let mut series: Vec<String> = Vec::new();
    for g in groups {
        for (s, _) in &g.bars {
            if !series.contains(s) {
                series.push(s.clone());
            }
        }
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<title>{}</title>"#, xml_escape(title));
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" font-size="14">{}</text>"#,
        LEFT,
        xml_escape(title)
    );
    for t in 0..=4 {
        let v = t as f64 / 4.0;
        let y = base - v * PLOT_HEIGHT;
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            width - 20.0,
            LEFT - 4.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">{}</text>"#,
        TOP + PLOT_HEIGHT / 2.0,
        TOP + PLOT_HEIGHT / 2.0,
        xml_escape(y_label)
    );
    let mut x = LEFT + GROUP_GAP;
    for g in groups {
        let _ = writeln!(
            out,
            r#"<g class="group" data-label="{}">"#,
            xml_escape(&g.label)
        );
        let start = x;
        for (s, v) in &g.bars {
            let h = v.clamp(0.0, 1.0) * PLOT_HEIGHT;
            let color = palette[series.iter().position(|t| t == s).unwrap_or(0) % palette.len()];
            let _ = writeln!(
                out,
                r#"<rect class="bar" x="{x:.3}" y="{:.3}" width="{BAR_WIDTH:.3}" height="{h:.3}" fill="{color}" data-series="{}" data-value="{v:.6}"><title>{}: {v:.4}</title></rect>"#,
                base - h,
                xml_escape(s),
                xml_escape(s)
            );
            x += BAR_WIDTH;
        }
        if g.bars.is_empty() {
            x += BAR_WIDTH;
        }
        let mid = (start + x) / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="{mid:.1}" y="{:.1}" text-anchor="end" transform="rotate(-35 {mid:.1} {:.1})">{}</text>"#,
            base + 14.0,
            base + 14.0,
            xml_escape(&g.label)
        );
        let _ = writeln!(out, "</g>");
        x += GROUP_GAP;
    }
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT:.1}" y1="{base:.1}" x2="{:.1}" y2="{base:.1}" stroke="black"/>"#,
        width - 20.0
    );
    let _ = writeln!(out, "</svg>");
    out
}

fn multi_dataset(ledger: &RunLedger) -> bool {
    ledger
        .cells
        .iter()
        .any(|c| c.key.dataset != ledger.cells[0].key.dataset)
}

fn group_by<K: PartialEq + Clone>(
    ledger: &RunLedger,
    key: impl Fn(&CellRecord) -> K,
    label: impl Fn(&CellRecord) -> String,
    bar: impl Fn(&CellRecord) -> (String, f64),
) -> Vec<BarGroup> {
    let mut keys: Vec<(K, String)> = Vec::new();
    let mut groups: Vec<BarGroup> = Vec::new();
    for c in ok_cells(ledger) {
        let k = key(c);
        let pos = match keys.iter().position(|(e, _)| *e == k) {
            Some(p) => p,
            None => {
                keys.push((k, label(c)));
                groups.push(BarGroup {
                    label: label(c),
                    bars: Vec::new(),
                });
                groups.len() - 1
            }
        };
        groups[pos].bars.push(bar(c));
    }
    groups
}

pub fn f1_by_selector(ledger: &RunLedger) -> Vec<BarGroup> {
    let multi = multi_dataset(ledger);
    group_by(
        ledger,
        |c| (c.key.dataset.clone(), c.key.selector),
        |c| {
            if multi {
                format!("{} {}", c.key.dataset, c.key.selector)
            } else {
                c.key.selector.to_string()
            }
        },
        |c| {
            (
                format!("{}/{}", c.key.model, c.key.tuner),
                c.report.as_ref().expect("ok").f1.mean,
            )
        },
    )
}

pub fn accuracy_by_tuner(ledger: &RunLedger) -> Vec<BarGroup> {
    let multi = multi_dataset(ledger);
    group_by(
        ledger,
        |c| (c.key.dataset.clone(), c.key.tuner),
        |c| {
            if multi {
                format!("{} {}", c.key.dataset, c.key.tuner)
            } else {
                c.key.tuner.to_string()
            }
        },
        |c| {
            (
                format!("{}/{}", c.key.model, c.key.selector),
                c.report.as_ref().expect("ok").accuracy.mean,
            )
        },
    )
}

/// Train against test accuracy, restricted to the untuned no-selection
/// baselines when the ledger has any.
pub fn train_vs_test(ledger: &RunLedger) -> Vec<BarGroup> {
    let multi = multi_dataset(ledger);
    let has_baseline = ok_cells(ledger)
        .any(|c| c.key.selector == SelectorKind::None && c.key.tuner == TunerKind::None);
    ok_cells(ledger)
        .filter(|c| {
            !has_baseline
                || (c.key.selector == SelectorKind::None && c.key.tuner == TunerKind::None)
        })
        .filter_map(|c| {
            let r = c.report.as_ref()?;
            let mut label = format!("{}/{}/{}", c.key.model, c.key.selector, c.key.tuner);
            if multi {
                label = format!("{} {label}", c.key.dataset);
            }
            Some(BarGroup {
                label,
                bars: vec![
                    ("train".to_string(), r.train_accuracy?.mean),
                    ("test".to_string(), r.accuracy.mean),
                ],
            })
        })
        .collect()
}

/// Writes the full report tree under `outdir` and returns the files written.
pub fn emit_reports(ledger: &RunLedger, outdir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    if ledger.cells.is_empty() {
        return Err(PipelineError::Invalid("ledger is empty".into()));
    }
    let tables = outdir.join("tables");
    let figures = outdir.join("figures");
    for d in [&tables, &figures] {
        std::fs::create_dir_all(d).map_err(|e| io(d)(e.to_string()))?;
    }
    let mut written = Vec::new();

    let path = outdir.join("ledger.json-lines");
    std::fs::write(&path, ledger.to_json_lines()).map_err(|e| io(&path)(e.to_string()))?;
    written.push(path);

    let path = tables.join("folds.csv");
    write_csv(&path, &FOLD_COLUMNS, &fold_rows(ledger))?;
    written.push(path);

    let mut selectors: Vec<SelectorKind> = Vec::new();
    for c in &ledger.cells {
        if !selectors.contains(&c.key.selector) {
            selectors.push(c.key.selector);
        }
    }
    for s in selectors {
        let path = tables.join(format!("summary_{s}.csv"));
        write_csv(&path, &SUMMARY_COLUMNS, &summary_rows(ledger, s))?;
        written.push(path);
    }

    let path = tables.join("tuning_comparison.csv");
    write_csv(
        &path,
        &[
            "dataset",
            "selector",
            "model",
            "tuner",
            "baseline_selector",
            "untuned_accuracy",
            "tuned_accuracy",
            "lift_points",
        ],
        &tuning_rows(ledger),
    )?;
    written.push(path);

    let path = tables.join("overfitting.csv");
    write_csv(
        &path,
        &[
            "dataset",
            "selector",
            "model",
            "tuner",
            "train_accuracy",
            "test_accuracy",
            "gap_points",
            "baseline",
        ],
        &overfitting_rows(ledger),
    )?;
    written.push(path);

    let figs = [
        (
            "f1_by_selector.svg",
            "F1 by feature selector",
            "mean F1",
            f1_by_selector(ledger),
        ),
        (
            "accuracy_by_tuner.svg",
            "Accuracy by tuner",
            "mean accuracy",
            accuracy_by_tuner(ledger),
        ),
        (
            "train_vs_test.svg",
            "Train vs test accuracy",
            "accuracy",
            train_vs_test(ledger),
        ),
    ];
    for (name, title, y_label, groups) in figs {
        let path = figures.join(name);
        std::fs::write(&path, grouped_bar_svg(title, y_label, &groups))
            .map_err(|e| io(&path)(e.to_string()))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_bar_heights_follow_values() {
        let groups = vec![
            BarGroup {
                label: "a<b".into(),
                bars: vec![("x".into(), 0.25), ("y".into(), 1.0)],
            },
            BarGroup {
                label: "c".into(),
                bars: vec![("x".into(), 0.5)],
            },
        ];
        let svg = grouped_bar_svg("t & t", "v", &groups);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let bars: Vec<_> = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("bar"))
            .collect();
        assert_eq!(bars.len(), 3);
        for b in bars {
            let v: f64 = b.attribute("data-value").unwrap().parse().unwrap();
            let h: f64 = b.attribute("height").unwrap().parse().unwrap();
            assert!((h - v * PLOT_HEIGHT).abs() <= 0.5);
        }
    }
}
