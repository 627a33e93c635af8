//! SVG learning curves with across-seed 95% bands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::eval::Z95;
use super::train::METRICS_FILE;
use crate::error::{Error, Result};

/// Curves emitted by [`plot_run`].
pub const PLOTTED: [(&str, &str); 5] = [
    ("num_blocks", "Number of blocks"),
    ("distance_to_goal", "Distance to goal"),
    ("passable_path_length", "Passable path length"),
    ("solved_path_length", "Solved path length"),
    ("regret_raw", "Estimated regret"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub iteration: u64,
    pub mean: f64,
    /// Half-width of the band; `None` with fewer than two seeds.
    pub half_width: Option<f64>,
}

/// Per-iteration mean and `1.96 · stderr` band over the seeds that report a finite value.
pub fn aggregate(series: &[Vec<(u64, f64)>]) -> Vec<CurvePoint> {
    let mut by_iter: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for s in series {
        for &(it, v) in s {
            if v.is_finite() {
                by_iter.entry(it).or_default().push(v);
            }
        }
    }
    by_iter
        .into_iter()
        .map(|(iteration, vs)| {
            let n = vs.len() as f64;
            let mean = vs.iter().sum::<f64>() / n;
            let half_width = (vs.len() >= 2).then(|| {
                let var = vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                Z95 * (var / n).sqrt()
            });
            CurvePoint {
                iteration,
                mean,
                half_width,
            }
        })
        .collect()
}

/// Metrics files of a run: `seed_*/metrics.csv`, or a lone `metrics.csv`.
pub fn metrics_files(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let direct = run_dir.join(METRICS_FILE);
    if direct.is_file() {
        return Ok(vec![direct]);
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(run_dir).map_err(|e| Error::io(run_dir, e))? {
        let path = entry.map_err(|e| Error::io(run_dir, e))?.path();
        let is_seed = path
            .file_name()
            .is_some_and(|n| n.to_string_lossy().starts_with("seed_"));
        if is_seed && path.join(METRICS_FILE).is_file() {
            out.push(path.join(METRICS_FILE));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::invalid(format!("no {METRICS_FILE} under {}", run_dir.display())));
    }
    Ok(out)
}

/// `(iteration, value)` pairs for `column` from completed rows of one metrics file.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<(u64, f64)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(format!("{} lacks column `{name}`", path.display())))
    };
    let (it_col, val_col) = (find("iteration")?, find(column)?);
    let status_col = headers.iter().position(|h| h == "status");
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if status_col.is_some_and(|c| rec.get(c) != Some("ok")) {
            continue;
        }
        let bad = |what: &str| {
            Error::invalid(format!(
                "{}: bad {what} in row {:?}",
                path.display(),
                rec.position().map(|p| p.line())
            ))
        };
        let it = rec
            .get(it_col)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("iteration"))?;
        let v = rec
            .get(val_col)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(column))?;
        out.push((it, v));
    }
    Ok(out)
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        W / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Placeholder for a metric with nothing to draw.
pub fn no_data_svg(title: &str) -> String {
    let mut s = header(title);
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"20\" fill=\"#888\">no data</text>\n</svg>",
        W / 2.0,
        H / 2.0
    );
    s
}

pub fn curve_svg(title: &str, points: &[CurvePoint]) -> String {
    if points.is_empty() {
        return no_data_svg(title);
    }
    let lo = |p: &CurvePoint| p.mean - p.half_width.unwrap_or(0.0);
    let hi = |p: &CurvePoint| p.mean + p.half_width.unwrap_or(0.0);
    let (mut y0, mut y1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(lo(p)), b.max(hi(p)))
    });
    if (y1 - y0).abs() < 1e-12 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let x0 = points[0].iteration as f64;
    let x1 = (points[points.len() - 1].iteration as f64).max(x0 + 1.0);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = header(title);
    let _ = writeln!(
        s,
        "<g stroke=\"#444\" stroke-width=\"1\"><line x1=\"{LEFT}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/><line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{}\"/></g>",
        H - BOTTOM,
        W - RIGHT,
        H - BOTTOM,
        H - BOTTOM
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{:.0}</text>\n\
             <text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{:.3}</text>",
            px(xv),
            H - BOTTOM + 16.0,
            xv,
            LEFT - 6.0,
            py(yv) + 4.0,
            yv
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">iteration</text>",
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0
    );
    if points.iter().any(|p| p.half_width.is_some()) {
        let upper = points
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.iteration as f64), py(hi(p))));
        let lower = points
            .iter()
            .rev()
            .map(|p| format!("{:.2},{:.2}", px(p.iteration as f64), py(lo(p))));
        let poly: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            s,
            "<polygon class=\"band\" points=\"{}\" fill=\"#1f77b4\" fill-opacity=\"0.2\" stroke=\"none\"/>",
            poly.join(" ")
        );
    }
    let line: Vec<String> = points
        .iter()
        .map(|p| format!("{:.2},{:.2}", px(p.iteration as f64), py(p.mean)))
        .collect();
    let _ = writeln!(
        s,
        "<polyline class=\"mean\" points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>",
        line.join(" ")
    );
    s.push_str("</svg>\n");
    s
}

/// Writes one SVG per plotted metric into `out_dir` and returns their paths.
pub fn plot_run(run_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let files = metrics_files(run_dir)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for (column, title) in PLOTTED {
        let series = files
            .iter()
            .map(|f| read_column(f, column))
            .collect::<Result<Vec<_>>>()?;
        let svg = curve_svg(title, &aggregate(&series));
        let path = out_dir.join(format!("{column}.svg"));
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
