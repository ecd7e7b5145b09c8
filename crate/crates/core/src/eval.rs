//! Accuracy metrics of learned predictions against simulated references,
//! and their report files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{Learner, LearnerKind, Target, EXT_DIM};
use crate::sampling::{Dataset, ModelKind, RowMatrix, Split};

/// `RMSE(pred, reference) / rms(reference)`.
pub fn rrmse(pred: &[f64], reference: &[f64]) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::dims(reference.len(), pred.len(), "rrmse"));
    }
    let n = reference.len() as f64;
    let norm = (reference.iter().map(|y| y * y).sum::<f64>() / n).sqrt();
    if !(norm > 0.0) {
        return Err(Error::UndefinedMetric(
            "reference series has zero norm".into(),
        ));
    }
    let err = (pred
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(err / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Binning {
    pub log_bins: usize,
    pub log_min: f64,
    pub log_max: f64,
    pub grid_bins: usize,
}

impl Default for Binning {
    fn default() -> Self {
        Self {
            log_bins: 40,
            log_min: 1e-4,
            log_max: 1.0,
            grid_bins: 50,
        }
    }
}

/// Counts per bin; values outside the edges fall in the first or last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

fn bin_index(edges: &[f64], v: f64, log: bool) -> usize {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let pos = if log {
        (v.max(f64::MIN_POSITIVE).ln() - lo.ln()) / (hi.ln() - lo.ln())
    } else if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    };
    ((pos * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

impl Histogram {
    pub fn log(values: &[f64], bins: usize, min: f64, max: f64) -> Self {
        let edges: Vec<f64> = (0..=bins)
            .map(|i| (min.ln() + (max.ln() - min.ln()) * i as f64 / bins as f64).exp())
            .collect();
        let mut counts = vec![0; bins];
        for &v in values {
            counts[bin_index(&edges, v, true)] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Joint counts of (reference, prediction) pairs on a shared linear grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2d {
    pub edges: Vec<f64>,
    /// `counts[i][j]`: reference in bin i, prediction in bin j.
    pub counts: Vec<Vec<usize>>,
}

impl Histogram2d {
    pub fn new(pairs: &[(f64, f64)], bins: usize) -> Self {
        let (lo, hi) = pairs
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
                (l.min(v), h.max(v))
            });
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
        let edges: Vec<f64> = (0..=bins)
            .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
            .collect();
        let mut counts = vec![vec![0; bins]; bins];
        for &(r, p) in pairs {
            counts[bin_index(&edges, r, false)][bin_index(&edges, p, false)] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    /// Dataset row.
    pub row: usize,
    pub rrmse: f64,
    pub final_pred: f64,
    pub final_ref: f64,
    pub min_h_ref: f64,
    pub max_c_ref: f64,
    /// Present for the predicted variable only.
    pub min_h_pred: Option<f64>,
    pub max_c_pred: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cases: usize,
    pub mean_rrmse: f64,
    pub median_rrmse: f64,
    pub max_rrmse: f64,
    pub fraction_below_0_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub target: Target,
    pub learner: Option<LearnerKind>,
    pub dataset_model: ModelKind,
    pub dataset_hash: String,
    pub split: Split,
    pub binning: Binning,
    pub summary: Summary,
    pub rrmse_histogram: Histogram,
    pub final_histogram: Histogram2d,
    /// Minimum thickness or maximum osmolarity, per target.
    pub extreme_histogram: Histogram2d,
    pub cases: Vec<CaseMetrics>,
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Metrics for predictions of `target`, row-aligned with `rows` of the
/// reference matrices.
pub fn summarize(
    target: Target,
    pred: &RowMatrix,
    ref_h: &RowMatrix,
    ref_c: &RowMatrix,
    rows: &[usize],
    binning: Binning,
) -> Result<(
    Summary,
    Histogram,
    Histogram2d,
    Histogram2d,
    Vec<CaseMetrics>,
)> {
    if pred.rows() != rows.len() {
        return Err(Error::dims(rows.len(), pred.rows(), "predictions vs cases"));
    }
    if ref_h.rows() != ref_c.rows() || rows.iter().any(|&r| r >= ref_h.rows()) {
        return Err(Error::InvalidParameter(
            "case rows outside the reference data".into(),
        ));
    }
    let mut cases = Vec::with_capacity(rows.len());
    for (i, &r) in rows.iter().enumerate() {
        let (h, c) = (ref_h.row(r), ref_c.row(r));
        let p = pred.row(i);
        let reference = match target {
            Target::H => h,
            Target::C => c,
        };
        cases.push(CaseMetrics {
            row: r,
            rrmse: rrmse(p, reference)?,
            final_pred: *p.last().unwrap_or(&f64::NAN),
            final_ref: *reference.last().unwrap_or(&f64::NAN),
            min_h_ref: min(h),
            max_c_ref: max(c),
            min_h_pred: (target == Target::H).then(|| min(p)),
            max_c_pred: (target == Target::C).then(|| max(p)),
        });
    }
    let errs: Vec<f64> = cases.iter().map(|c| c.rrmse).collect();
    let mut sorted = errs.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => sorted[n / 2],
        _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    };
    let summary = Summary {
        cases: n,
        mean_rrmse: errs.iter().sum::<f64>() / n.max(1) as f64,
        median_rrmse: median,
        max_rrmse: sorted.last().copied().unwrap_or(f64::NAN),
        fraction_below_0_1: errs.iter().filter(|&&e| e < 0.1).count() as f64 / n.max(1) as f64,
    };
    let hist = Histogram::log(&errs, binning.log_bins, binning.log_min, binning.log_max);
    let finals: Vec<(f64, f64)> = cases.iter().map(|c| (c.final_ref, c.final_pred)).collect();
    let extremes: Vec<(f64, f64)> = cases
        .iter()
        .map(|c| match target {
            Target::H => (c.min_h_ref, c.min_h_pred.unwrap_or(f64::NAN)),
            Target::C => (c.max_c_ref, c.max_c_pred.unwrap_or(f64::NAN)),
        })
        .collect();
    Ok((
        summary,
        hist,
        Histogram2d::new(&finals, binning.grid_bins),
        Histogram2d::new(&extremes, binning.grid_bins),
        cases,
    ))
}

/// Predicts every row of a split and summarizes against the simulated
/// outputs.
pub fn evaluate(
    learner: &Learner,
    ds: &Dataset,
    split: Split,
    binning: Binning,
) -> Result<EvalReport> {
    let rows = ds.split_indices(split);
    if rows.is_empty() {
        return Err(Error::Config(format!("{split:?} split is empty")));
    }
    let ext = learner.kind().uses_ext().then(|| ds.params.select(rows));
    let pred = learner.predict_rows(&ds.inputs.select(rows), ext.as_ref())?;
    let (summary, rrmse_histogram, final_histogram, extreme_histogram, cases) = summarize(
        learner.target(),
        &pred,
        &ds.outputs_h,
        &ds.outputs_c,
        rows,
        binning,
    )?;
    debug_assert!(EXT_DIM == 3);
    Ok(EvalReport {
        target: learner.target(),
        learner: Some(learner.kind()),
        dataset_model: ds.model(),
        dataset_hash: ds.manifest_hash()?,
        split,
        binning,
        summary,
        rrmse_histogram,
        final_histogram,
        extreme_histogram,
        cases,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn cases_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from(
            "row,rrmse,final_pred,final_ref,min_h_pred,min_h_ref,max_c_pred,max_c_ref\n",
        );
        for c in &self.cases {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                c.row,
                c.rrmse,
                c.final_pred,
                c.final_ref,
                opt(c.min_h_pred),
                c.min_h_ref,
                opt(c.max_c_pred),
                c.max_c_ref
            );
        }
        s
    }

    /// Writes report.json, cases.csv and the SVG figures into `dir`.
    pub fn emit(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))
        };
        let var = match self.target {
            Target::H => "h",
            Target::C => "c",
        };
        write("report.json", self.to_json()?)?;
        write("cases.csv", self.cases_csv())?;
        write(
            "rrmse_hist.svg",
            svg::histogram(&self.rrmse_histogram, &format!("rRMSE of {var}")),
        )?;
        write(
            "final_hist2d.svg",
            svg::heatmap(
                &self.final_histogram,
                &format!("{var}(1) reference"),
                &format!("{var}(1) predicted"),
            ),
        )?;
        let extreme = match self.target {
            Target::H => "min h",
            Target::C => "max c",
        };
        write(
            "extreme_hist2d.svg",
            svg::heatmap(
                &self.extreme_histogram,
                &format!("{extreme} reference"),
                &format!("{extreme} predicted"),
            ),
        )?;
        write("extremes.svg", svg::scatter_with_marginals(self))
    }
}

mod svg {
    use std::fmt::Write as _;

    use super::{EvalReport, Histogram, Histogram2d};
    use crate::learners::Target;

    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const PAD: f64 = 50.0;

    fn open(width: f64, height: f64) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        )
    }

    fn label(s: &mut String, x: f64, y: f64, text: &str, rotate: bool) {
        let t = if rotate {
            format!(" transform=\"rotate(-90 {x:.1} {y:.1})\"")
        } else {
            String::new()
        };
        let _ = writeln!(
            s,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"middle\"{t}>{}</text>",
            escape(text)
        );
    }

    fn escape(t: &str) -> String {
        t.replace('&', "&amp;")
            .replace('<', "&lt;")
            .replace('>', "&gt;")
    }

    fn axes(s: &mut String, x0: f64, y0: f64, w: f64, h: f64) {
        let _ = writeln!(
            s,
            "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" fill=\"none\" stroke=\"black\"/>"
        );
    }

    pub fn histogram(hist: &Histogram, xlabel: &str) -> String {
        let mut s = open(W, H);
        let (pw, ph) = (W - 2.0 * PAD, H - 2.0 * PAD);
        let peak = hist.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let bw = pw / hist.counts.len().max(1) as f64;
        for (i, &c) in hist.counts.iter().enumerate() {
            let bh = ph * c as f64 / peak;
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"steelblue\"/>",
                PAD + i as f64 * bw,
                PAD + ph - bh,
                bw,
                bh
            );
        }
        axes(&mut s, PAD, PAD, pw, ph);
        let (lo, hi) = (hist.edges[0], hist.edges[hist.edges.len() - 1]);
        label(&mut s, PAD, H - PAD + 16.0, &format!("{lo:.0e}"), false);
        label(&mut s, W - PAD, H - PAD + 16.0, &format!("{hi:.0e}"), false);
        label(
            &mut s,
            W / 2.0,
            H - 12.0,
            &format!("{xlabel} (log scale)"),
            false,
        );
        label(&mut s, 16.0, H / 2.0, "cases", true);
        label(
            &mut s,
            PAD - 8.0,
            PAD + 4.0,
            &format!("{}", peak as usize),
            false,
        );
        s.push_str("</svg>\n");
        s
    }

    pub fn heatmap(hist: &Histogram2d, xlabel: &str, ylabel: &str) -> String {
        let side = H - 2.0 * PAD;
        let mut s = open(side + 2.0 * PAD, H);
        let bins = hist.counts.len().max(1);
        let cell = side / bins as f64;
        let peak = hist
            .counts
            .iter()
            .flatten()
            .copied()
            .max()
            .unwrap_or(0)
            .max(1) as f64;
        for (i, row) in hist.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let shade = 0.15 + 0.85 * (c as f64).ln_1p() / peak.ln_1p();
                let _ = writeln!(
                    s,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"navy\" fill-opacity=\"{shade:.3}\"/>",
                    PAD + i as f64 * cell,
                    PAD + side - (j + 1) as f64 * cell,
                );
            }
        }
        let _ = writeln!(
            s,
            "<line x1=\"{PAD}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{PAD}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>",
            PAD + side,
            PAD + side
        );
        axes(&mut s, PAD, PAD, side, side);
        let (lo, hi) = (hist.edges[0], hist.edges[hist.edges.len() - 1]);
        label(&mut s, PAD, H - PAD + 16.0, &format!("{lo:.3}"), false);
        label(
            &mut s,
            PAD + side,
            H - PAD + 16.0,
            &format!("{hi:.3}"),
            false,
        );
        label(&mut s, PAD + side / 2.0, H - 12.0, xlabel, false);
        label(&mut s, 16.0, H / 2.0, ylabel, true);
        s.push_str("</svg>\n");
        s
    }

    /// Reference (min h, max c) points in gray, the predicted extreme of the
    /// target variable in color, and marginal histograms along both axes.
    pub fn scatter_with_marginals(report: &EvalReport) -> String {
        let (size, margin) = (300.0, 70.0);
        let total = PAD + size + margin + 10.0;
        let mut s = open(total, total);
        let pts_ref: Vec<(f64, f64)> = report
            .cases
            .iter()
            .map(|c| (c.min_h_ref, c.max_c_ref))
            .collect();
        let pts_pred: Vec<(f64, f64)> = report
            .cases
            .iter()
            .map(|c| {
                (
                    c.min_h_pred.unwrap_or(c.min_h_ref),
                    c.max_c_pred.unwrap_or(c.max_c_ref),
                )
            })
            .collect();
        let all = pts_ref.iter().chain(&pts_pred);
        let (xl, xh, yl, yh) = all.fold(
            (
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
            ),
            |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
        );
        let (xl, xh) = if xh > xl {
            (xl, xh)
        } else {
            (xl - 0.5, xl + 0.5)
        };
        let (yl, yh) = if yh > yl {
            (yl, yh)
        } else {
            (yl - 0.5, yl + 0.5)
        };
        let (x0, y0) = (PAD, margin);
        let sx = |x: f64| x0 + (x - xl) / (xh - xl) * size;
        let sy = |y: f64| y0 + size - (y - yl) / (yh - yl) * size;
        axes(&mut s, x0, y0, size, size);
        for (pts, color) in [(&pts_ref, "gray"), (&pts_pred, "crimson")] {
            for &(x, y) in pts.iter() {
                if x.is_finite() && y.is_finite() {
                    let _ = writeln!(
                        s,
                        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"{color}\" fill-opacity=\"0.5\"/>",
                        sx(x),
                        sy(y)
                    );
                }
            }
        }
        // marginals of the predicted points
        let bins = 30;
        let mut hx = vec![0usize; bins];
        let mut hy = vec![0usize; bins];
        for &(x, y) in &pts_pred {
            let bx = (((x - xl) / (xh - xl)) * bins as f64)
                .floor()
                .clamp(0.0, (bins - 1) as f64) as usize;
            let by = (((y - yl) / (yh - yl)) * bins as f64)
                .floor()
                .clamp(0.0, (bins - 1) as f64) as usize;
            hx[bx] += 1;
            hy[by] += 1;
        }
        let peak = hx.iter().chain(&hy).copied().max().unwrap_or(0).max(1) as f64;
        let bw = size / bins as f64;
        for i in 0..bins {
            let lx = (margin - 10.0) * hx[i] as f64 / peak;
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{bw:.2}\" height=\"{lx:.2}\" fill=\"crimson\" fill-opacity=\"0.6\"/>",
                x0 + i as f64 * bw,
                y0 - 5.0 - lx
            );
            let ly = (margin - 10.0) * hy[i] as f64 / peak;
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{ly:.2}\" height=\"{bw:.2}\" fill=\"crimson\" fill-opacity=\"0.6\"/>",
                x0 + size + 5.0,
                y0 + size - (i + 1) as f64 * bw
            );
        }
        let which = match report.target {
            Target::H => "predicted min h",
            Target::C => "predicted max c",
        };
        label(&mut s, x0 + size / 2.0, y0 + size + 36.0, "min h", false);
        label(&mut s, 16.0, y0 + size / 2.0, "max c", true);
        label(&mut s, x0, y0 + size + 16.0, &format!("{xl:.3}"), false);
        label(
            &mut s,
            x0 + size,
            y0 + size + 16.0,
            &format!("{xh:.3}"),
            false,
        );
        label(
            &mut s,
            x0 + size / 2.0,
            14.0,
            &format!("gray: reference, red: {which}"),
            false,
        );
        s.push_str("</svg>\n");
        s
    }
}
