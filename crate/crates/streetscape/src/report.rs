//! Report emitters: CSV tables and small self-contained SVG charts for
//! feature importances, dependence plots, and the effect matrix.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::causal::{BalanceReport, EffectMatrix, GpsDiagnostics};
use crate::indicators::{IndicatorVector, INDICATOR_NAMES};
use crate::shap::ImportanceSummary;
use crate::{Error, Result};

/// `point_id, bc, ..., vd, n_views` rows, sorted by point id.
pub fn write_indicator_csv(
    path: &Path,
    rows: &BTreeMap<String, (IndicatorVector, usize)>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["point_id"];
    header.extend(INDICATOR_NAMES);
    header.push("n_views");
    w.write_record(&header)?;
    for (pid, (v, n_views)) in rows {
        let mut rec = vec![pid.clone()];
        rec.extend(v.as_array().iter().map(|x| format!("{x}")));
        rec.push(format!("{n_views}"));
        w.write_record(&rec)?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_indicator_csv(path: &Path) -> Result<BTreeMap<String, (IndicatorVector, usize)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 13 {
            return Err(Error::Dataset(format!(
                "indicator CSV row has {} fields, expected 13",
                record.len()
            )));
        }
        let pid = record[0].to_string();
        let mut arr = [0.0f64; 11];
        for (j, slot) in arr.iter_mut().enumerate() {
            *slot = record[j + 1]
                .parse()
                .map_err(|_| Error::Dataset(format!("bad indicator value {:?}", &record[j + 1])))?;
        }
        let n_views: usize = record[12]
            .parse()
            .map_err(|_| Error::Dataset(format!("bad n_views {:?}", &record[12])))?;
        out.insert(pid, (IndicatorVector::from_array(arr), n_views));
    }
    Ok(out)
}

/// `feature, mean_abs_shap, share` rows in descending importance.
pub fn write_importance_csv(
    path: &Path,
    feature_names: &[String],
    summary: &ImportanceSummary,
) -> Result<()> {
    let mut order: Vec<usize> = (0..feature_names.len()).collect();
    order.sort_by(|&a, &b| summary.mean_abs[b].total_cmp(&summary.mean_abs[a]));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["feature", "mean_abs_shap", "share"])?;
    for &j in &order {
        w.write_record([
            feature_names[j].as_str(),
            &format!("{}", summary.mean_abs[j]),
            &format!("{}", summary.shares[j]),
        ])?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn svg_header(width: u32, height: u32) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    )
}

/// Horizontal bar chart of mean |SHAP| per feature.
pub fn importance_bar_svg(feature_names: &[String], summary: &ImportanceSummary) -> String {
    let mut order: Vec<usize> = (0..feature_names.len()).collect();
    order.sort_by(|&a, &b| summary.mean_abs[b].total_cmp(&summary.mean_abs[a]));
    let row_h = 24u32;
    let width = 560u32;
    let height = 30 + row_h * feature_names.len() as u32;
    let maxv = summary
        .mean_abs
        .iter()
        .cloned()
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let mut svg = svg_header(width, height);
    for (i, &j) in order.iter().enumerate() {
        let y = 20 + i as u32 * row_h;
        let bar = (summary.mean_abs[j] / maxv * 380.0).max(1.0);
        let _ = write!(
            svg,
            "<text x=\"8\" y=\"{ty}\">{name}</text>\
             <rect x=\"100\" y=\"{ry}\" width=\"{bar:.1}\" height=\"16\" fill=\"#4878a8\"/>\
             <text x=\"{vx:.1}\" y=\"{ty}\">{v:.4}</text>\n",
            ty = y + 13,
            ry = y,
            vx = 104.0 + bar,
            name = feature_names[j],
            v = summary.mean_abs[j],
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Scatter of feature value against its attribution for one feature.
pub fn dependence_svg(feature_name: &str, pairs: &[(f64, f64)]) -> String {
    let width = 480u32;
    let height = 360u32;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pairs {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if pairs.is_empty() || x0 == x1 {
        x0 = 0.0;
        x1 = 1.0;
    }
    if pairs.is_empty() || y0 == y1 {
        y0 = -1.0;
        y1 = 1.0;
    }
    let px = |x: f64| 50.0 + (x - x0) / (x1 - x0) * 400.0;
    let py = |y: f64| 320.0 - (y - y0) / (y1 - y0) * 280.0;
    let mut svg = svg_header(width, height);
    let _ = write!(
        svg,
        "<text x=\"200\" y=\"350\">{feature_name}</text>\
         <text x=\"10\" y=\"20\">attribution</text>\
         <line x1=\"50\" y1=\"320\" x2=\"450\" y2=\"320\" stroke=\"black\"/>\
         <line x1=\"50\" y1=\"40\" x2=\"50\" y2=\"320\" stroke=\"black\"/>\n"
    );
    for &(x, y) in pairs {
        let _ = write!(
            svg,
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2.5\" fill=\"#4878a8\" fill-opacity=\"0.6\"/>\n",
            px(x),
            py(y)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// `treatment, outcome, or, ci_low, ci_high, p, stars, n, b` rows.
pub fn write_effect_matrix_csv(path: &Path, matrix: &EffectMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "treatment",
        "outcome",
        "or",
        "ci_low",
        "ci_high",
        "p",
        "stars",
        "n",
        "b",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for e in &matrix.estimates {
        w.write_record([
            e.treatment.as_str(),
            e.outcome.as_str(),
            &format!("{}", e.odds_ratio),
            &opt(e.ci_low),
            &opt(e.ci_high),
            &opt(e.p_value),
            e.stars.as_str(),
            &format!("{}", e.n),
            &format!("{}", e.bootstrap_replicates),
        ])?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Annotated grid: rows are treatments, columns outcomes; each cell shows
/// the odds ratio and its significance stars, shaded by direction.
pub fn effect_matrix_svg(matrix: &EffectMatrix) -> String {
    let mut treatments: Vec<&str> = matrix
        .estimates
        .iter()
        .map(|e| e.treatment.as_str())
        .collect();
    treatments.dedup();
    let mut outcomes: Vec<&str> = Vec::new();
    for e in &matrix.estimates {
        if !outcomes.contains(&e.outcome.as_str()) {
            outcomes.push(e.outcome.as_str());
        }
    }
    let cell_w = 110u32;
    let cell_h = 30u32;
    let left = 140u32;
    let top = 50u32;
    let width = left + cell_w * outcomes.len() as u32 + 20;
    let height = top + cell_h * treatments.len() as u32 + 20;
    let mut svg = svg_header(width, height);
    for (c, o) in outcomes.iter().enumerate() {
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"40\" text-anchor=\"middle\">{o}</text>\n",
            left + c as u32 * cell_w + cell_w / 2
        );
    }
    for (r, t) in treatments.iter().enumerate() {
        let _ = write!(
            svg,
            "<text x=\"8\" y=\"{}\">{t}</text>\n",
            top + r as u32 * cell_h + 20
        );
    }
    for e in &matrix.estimates {
        let r = treatments
            .iter()
            .position(|t| *t == e.treatment)
            .expect("row enumerated");
        let c = outcomes
            .iter()
            .position(|o| *o == e.outcome)
            .expect("column enumerated");
        let x = left + c as u32 * cell_w;
        let y = top + r as u32 * cell_h;
        // blue below 1, red above; stronger shade for larger |ln OR|
        let strength = (e.odds_ratio.ln().abs().min(1.0) * 120.0) as u8;
        let fill = if e.odds_ratio >= 1.0 {
            format!("rgb(255,{},{})", 200 - strength / 2, 200 - strength)
        } else {
            format!("rgb({},{},255)", 200 - strength, 200 - strength / 2)
        };
        let _ = write!(
            svg,
            "<rect x=\"{x}\" y=\"{y}\" width=\"{cell_w}\" height=\"{cell_h}\" \
             fill=\"{fill}\" stroke=\"#888\"/>\
             <text x=\"{tx}\" y=\"{ty}\" text-anchor=\"middle\">{or:.2}{stars}</text>\n",
            tx = x + cell_w / 2,
            ty = y + 20,
            or = e.odds_ratio,
            stars = e.stars,
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[derive(serde::Serialize)]
pub struct CausalReport<'a> {
    pub diagnostics: &'a [GpsDiagnostics],
    pub balance: &'a [(String, BalanceReport)],
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}
