use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::datamodel::Category;

use super::evaluate::EvalReport;

/// The five summary columns of one evaluation kind, as fractions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub map_w: Option<f64>,
    pub map_w_50: Option<f64>,
    pub map_w_75: Option<f64>,
    pub mar_w_top1: Option<f64>,
    pub mar_w_top100: Option<f64>,
}

impl MetricSet {
    /// Values given in percent, the way published tables list them.
    pub fn from_percent(values: [f64; 5]) -> Self {
        let v = values.map(|x| Some(x / 100.0));
        Self {
            map_w: v[0],
            map_w_50: v[1],
            map_w_75: v[2],
            mar_w_top1: v[3],
            mar_w_top100: v[4],
        }
    }

    fn columns(&self) -> [Option<f64>; 5] {
        [
            self.map_w,
            self.map_w_50,
            self.map_w_75,
            self.mar_w_top1,
            self.mar_w_top100,
        ]
    }
}

impl From<&EvalReport> for MetricSet {
    fn from(r: &EvalReport) -> Self {
        Self {
            map_w: Some(r.map_w),
            map_w_50: r.map_w_50,
            map_w_75: r.map_w_75,
            mar_w_top1: r.mar_w_top1,
            mar_w_top100: r.mar_w_top100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: String,
    pub boxes: Option<MetricSet>,
    pub masks: Option<MetricSet>,
}

const HEADERS: [&str; 5] = [
    "mAP_w",
    "mAP_w@.50",
    "mAP_w@.75",
    "mAR_w top1",
    "mAR_w top100",
];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{:.1}", x * 100.0))
}

/// Renders rows as a text table with box and mask sub-columns per metric.
pub fn render_table(rows: &[TableRow]) -> String {
    let method_w = rows
        .iter()
        .map(|r| r.method.chars().count())
        .chain(["Method".len()])
        .max()
        .unwrap_or(6);
    let mut out = String::new();
    let _ = write!(out, "{:<method_w$}", "Method");
    for h in HEADERS {
        let _ = write!(out, " | {h:^13}");
    }
    out.push('\n');
    let _ = write!(out, "{:<method_w$}", "");
    for _ in HEADERS {
        let _ = write!(out, " | {:>6} {:>6}", "box", "mask");
    }
    out.push('\n');
    out.push_str(&"-".repeat(method_w + HEADERS.len() * 16));
    out.push('\n');
    for r in rows {
        let b = r.boxes.unwrap_or_default().columns();
        let m = r.masks.unwrap_or_default().columns();
        let _ = write!(out, "{:<method_w$}", r.method);
        for i in 0..HEADERS.len() {
            let _ = write!(out, " | {:>6} {:>6}", cell(b[i]), cell(m[i]));
        }
        out.push('\n');
    }
    out
}

/// Per-class AP (averaged over IoU thresholds) with ground-truth counts in brackets.
pub fn render_per_class(report: &EvalReport, categories: &[Category]) -> String {
    let mut out = String::new();
    let name_w = categories
        .iter()
        .map(|c| c.name.chars().count())
        .max()
        .unwrap_or(4)
        .max(8);
    let mut cats: Vec<_> = categories.iter().collect();
    cats.sort_by_key(|c| c.id);
    for c in cats {
        let label = format!(
            "{} ({})",
            c.name,
            report.class_counts.get(&c.id).unwrap_or(&0)
        );
        let value = report.per_class_ap.get(&c.id).copied();
        let _ = writeln!(out, "{label:<w$} {:>6}", cell(value), w = name_w + 8);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_values_render_as_na() {
        let rows = [TableRow {
            method: "x".into(),
            boxes: Some(MetricSet::from_percent([1.0, 2.0, 3.0, 4.0, 5.0])),
            masks: None,
        }];
        let t = render_table(&rows);
        let last = t.lines().last().unwrap();
        assert!(last.contains("1.0"));
        assert!(last.contains("n/a"));
    }
}
