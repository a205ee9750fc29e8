//! CSV and SVG emission for sweep results.

use std::fmt::Write as _;
use std::path::Path;

use crate::fitting::poly_eval;
use crate::sweep::SweepRow;
use crate::{LabError, Result};

pub const CSV_HEADER: &str = "kappa,eps1,eps2,eps3,p_sliced,p_unsliced,ratio";

/// Render rows as CSV with full-precision decimal floats.
pub fn csv_string(rows: &[SweepRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(LabError::Config("no rows to emit".into()));
    }
    let mut out = String::new();
    let _ = writeln!(out, "{CSV_HEADER}");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.kappa, r.eps1, r.eps2, r.eps3, r.p_sliced, r.p_unsliced, r.ratio
        );
    }
    Ok(out)
}

pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let text = csv_string(rows)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| LabError::Config("empty CSV".into()))?;
    if header.trim() != CSV_HEADER {
        return Err(LabError::Config(format!("unexpected header `{header}`")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(LabError::Config(format!(
                "line {}: expected 7 fields",
                i + 2
            )));
        }
        let mut v = [0.0f64; 7];
        for (j, f) in fields.iter().enumerate() {
            v[j] = f.trim().parse().map_err(|_| {
                LabError::Config(format!("line {}: bad float `{f}`", i + 2))
            })?;
        }
        rows.push(SweepRow {
            kappa: v[0],
            eps1: v[1],
            eps2: v[2],
            eps3: v[3],
            p_sliced: v[4],
            p_unsliced: v[5],
            ratio: v[6],
        });
    }
    Ok(rows)
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 60.0;

struct Axes {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    log_y: bool,
}

impl Axes {
    fn x(&self, v: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(1e-12);
        MARGIN_L + (v - self.x_min) / span * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        let (v, lo, hi) = if self.log_y {
            (v.log10(), self.y_min.log10(), self.y_max.log10())
        } else {
            (v, self.y_min, self.y_max)
        };
        let span = (hi - lo).max(1e-12);
        HEIGHT - MARGIN_B - (v - lo) / span * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn polyline(points: &[(f64, f64)], axes: &Axes, color: &str, dashed: bool) -> String {
    let pts: Vec<String> = points
        .iter()
        .filter(|(_, y)| !axes.log_y || *y > 0.0)
        .map(|&(x, y)| format!("{:.2},{:.2}", axes.x(x), axes.y(y)))
        .collect();
    let dash = if dashed {
        " stroke-dasharray=\"6 4\""
    } else {
        ""
    };
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>\n",
        pts.join(" ")
    )
}

/// Self-contained SVG: both series as point-joined polylines, quadratic fit
/// curves, and a legend. Log-scale y-axis with a linear fallback whenever a
/// plotted value is zero or negative.
pub fn svg_string(rows: &[SweepRow], fits: Option<(&[f64], &[f64])>) -> Result<String> {
    if rows.is_empty() {
        return Err(LabError::Config("no rows to plot".into()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.kappa).collect();
    let mut ys: Vec<f64> = Vec::new();
    ys.extend(rows.iter().map(|r| r.p_sliced));
    ys.extend(rows.iter().map(|r| r.p_unsliced));
    let log_y = ys.iter().all(|&y| y > 0.0);
    let (mut y_min, mut y_max) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
            (lo.min(y), hi.max(y))
        });
    if log_y {
        y_min *= 0.5;
        y_max *= 2.0;
    } else {
        let pad = 0.05 * (y_max - y_min).max(1e-12);
        y_min = (y_min - pad).min(0.0);
        y_max += pad;
    }
    let axes = Axes {
        x_min: xs.iter().cloned().fold(f64::INFINITY, f64::min),
        x_max: xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        y_min,
        y_max,
        log_y,
    };

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = write!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    );
    // Axes.
    let _ = write!(
        svg,
        "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    );
    let _ = write!(
        svg,
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B
    );
    // X ticks.
    for i in 0..=5 {
        let v = axes.x_min + (axes.x_max - axes.x_min) * f64::from(i) / 5.0;
        let x = axes.x(v);
        let _ = write!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"black\"/>\n",
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 5.0
        );
        let _ = write!(
            svg,
            "<text x=\"{x:.2}\" y=\"{}\" text-anchor=\"middle\">{v:.2}</text>\n",
            HEIGHT - MARGIN_B + 20.0
        );
    }
    // Y ticks.
    if log_y {
        let lo = axes.y_min.log10().floor() as i32;
        let hi = axes.y_max.log10().ceil() as i32;
        for e in lo..=hi {
            let v = 10f64.powi(e);
            if v < axes.y_min || v > axes.y_max {
                continue;
            }
            let y = axes.y(v);
            let _ = write!(
                svg,
                "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{MARGIN_L}\" y2=\"{y:.2}\" stroke=\"black\"/>\n",
                MARGIN_L - 5.0
            );
            let _ = write!(
                svg,
                "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">1e{e}</text>\n",
                MARGIN_L - 8.0,
                y + 4.0
            );
        }
    } else {
        for i in 0..=5 {
            let v = axes.y_min + (axes.y_max - axes.y_min) * f64::from(i) / 5.0;
            let y = axes.y(v);
            let _ = write!(
                svg,
                "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{MARGIN_L}\" y2=\"{y:.2}\" stroke=\"black\"/>\n",
                MARGIN_L - 5.0
            );
            let _ = write!(
                svg,
                "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{v:.2e}</text>\n",
                MARGIN_L - 8.0,
                y + 4.0
            );
        }
    }
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">unitarity kappa</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 15.0
    );
    let _ = write!(
        svg,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">logical error</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0
    );

    let sliced: Vec<(f64, f64)> = rows.iter().map(|r| (r.kappa, r.p_sliced)).collect();
    let unsliced: Vec<(f64, f64)> = rows.iter().map(|r| (r.kappa, r.p_unsliced)).collect();
    svg.push_str(&polyline(&sliced, &axes, "#1f77b4", false));
    svg.push_str(&polyline(&unsliced, &axes, "#d62728", false));
    for (x, y) in sliced.iter().chain(unsliced.iter()) {
        if axes.log_y && *y <= 0.0 {
            continue;
        }
        let _ = write!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"black\"/>\n",
            axes.x(*x),
            axes.y(*y)
        );
    }
    if let Some((fit_sliced, fit_unsliced)) = fits {
        let sample = |coeffs: &[f64]| -> Vec<(f64, f64)> {
            (0..=100)
                .map(|i| {
                    let x =
                        axes.x_min + (axes.x_max - axes.x_min) * f64::from(i) / 100.0;
                    (x, poly_eval(coeffs, x))
                })
                .filter(|&(_, y)| y > 0.0 || !axes.log_y)
                .collect()
        };
        svg.push_str(&polyline(&sample(fit_sliced), &axes, "#1f77b4", true));
        svg.push_str(&polyline(&sample(fit_unsliced), &axes, "#d62728", true));
    }
    // Legend.
    let lx = WIDTH - MARGIN_R - 170.0;
    let _ = write!(
        svg,
        "<rect x=\"{lx}\" y=\"{MARGIN_T}\" width=\"160\" height=\"44\" fill=\"white\" stroke=\"black\"/>\n"
    );
    let _ = write!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n",
        lx + 8.0,
        MARGIN_T + 15.0,
        lx + 36.0,
        MARGIN_T + 15.0
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\">sliced</text>\n",
        lx + 42.0,
        MARGIN_T + 19.0
    );
    let _ = write!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n",
        lx + 8.0,
        MARGIN_T + 33.0,
        lx + 36.0,
        MARGIN_T + 33.0
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\">unsliced</text>\n",
        lx + 42.0,
        MARGIN_T + 37.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_svg(rows: &[SweepRow], fits: Option<(&[f64], &[f64])>, path: &Path) -> Result<()> {
    let text = svg_string(rows, fits)?;
    std::fs::write(path, text)?;
    Ok(())
}
