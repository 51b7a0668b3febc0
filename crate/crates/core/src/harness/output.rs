//! Learning-curve serialization: CSV with per-seed columns and a
//! standalone SVG plot with a log-scale cost axis.

use crate::error::{MdsError, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Per-update cost statistics across seeds.
#[derive(Debug, Clone)]
pub struct LearningCurve {
    /// `per_seed[seed][update]`
    pub per_seed: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Population standard deviation across seeds.
    pub std: Vec<f64>,
}

impl LearningCurve {
    pub fn from_seed_curves(per_seed: Vec<Vec<f64>>) -> Result<Self> {
        if per_seed.is_empty() || per_seed[0].is_empty() {
            return Err(MdsError::Empty);
        }
        let updates = per_seed[0].len();
        for c in &per_seed {
            if c.len() != updates {
                return Err(MdsError::DimensionMismatch {
                    left: c.len(),
                    right: updates,
                });
            }
        }
        let n = per_seed.len() as f64;
        let mut mean = Vec::with_capacity(updates);
        let mut std = Vec::with_capacity(updates);
        for u in 0..updates {
            let m = per_seed.iter().map(|c| c[u]).sum::<f64>() / n;
            let var = per_seed.iter().map(|c| (c[u] - m) * (c[u] - m)).sum::<f64>() / n;
            mean.push(m);
            std.push(var.sqrt());
        }
        Ok(Self {
            per_seed,
            mean,
            std,
        })
    }

    pub fn updates(&self) -> usize {
        self.mean.len()
    }

    pub fn seeds(&self) -> usize {
        self.per_seed.len()
    }

    pub fn final_mean(&self) -> f64 {
        *self.mean.last().unwrap()
    }

    pub fn final_std(&self) -> f64 {
        *self.std.last().unwrap()
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| MdsError::Io {
                path: parent.display().to_string(),
                source,
            })?;
        }
    }
    std::fs::write(path, contents).map_err(|source| MdsError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Renders the curve as CSV: header
/// `update,mean_cost,std_cost,seed_0,...`, one row per update, floats in
/// scientific notation at full round-trip precision.
pub fn render_csv(curve: &LearningCurve) -> String {
    let mut out = String::from("update,mean_cost,std_cost");
    for s in 0..curve.seeds() {
        let _ = write!(out, ",seed_{s}");
    }
    out.push('\n');
    for u in 0..curve.updates() {
        let _ = write!(out, "{u},{:e},{:e}", curve.mean[u], curve.std[u]);
        for c in &curve.per_seed {
            let _ = write!(out, ",{:e}", c[u]);
        }
        out.push('\n');
    }
    out
}

pub fn emit_csv(curve: &LearningCurve, path: &Path) -> Result<()> {
    write_file(path, &render_csv(curve))
}

const PLOT_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders named curves as a standalone SVG: one mean polyline per curve,
/// a shaded band of one standard deviation, a legend, and a log10 cost
/// axis.
pub fn render_svg(curves: &[(String, &LearningCurve)]) -> Result<String> {
    if curves.is_empty() {
        return Err(MdsError::Empty);
    }
    let updates = curves[0].1.updates();
    for (_, c) in curves {
        if c.updates() != updates {
            return Err(MdsError::DimensionMismatch {
                left: c.updates(),
                right: updates,
            });
        }
    }

    // Plot geometry.
    let (width, height) = (860.0, 560.0);
    let (left, right, top, bottom) = (90.0, 30.0, 40.0, 60.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    // Positive range for the log axis; band edges are clamped to the floor.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, c) in curves {
        for u in 0..updates {
            let upper = c.mean[u] + c.std[u];
            let lower = (c.mean[u] - c.std[u]).max(c.mean[u] * 1e-3);
            if lower > 0.0 {
                lo = lo.min(lower);
            }
            if upper > 0.0 {
                hi = hi.max(upper);
            }
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.1;
        hi = 10.0;
    }
    let log_lo = lo.log10().floor();
    let log_hi = hi.log10().ceil().max(log_lo + 1.0);
    let floor = 10f64.powf(log_lo);

    let x_of = |u: usize| -> f64 {
        if updates == 1 {
            left + plot_w / 2.0
        } else {
            left + plot_w * u as f64 / (updates - 1) as f64
        }
    };
    let y_of = |v: f64| -> f64 {
        let lv = v.max(floor).log10();
        top + plot_h * (1.0 - (lv - log_lo) / (log_hi - log_lo))
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\" \
         font-family=\"sans-serif\" font-size=\"13\">"
    );
    let _ = writeln!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>"
    );

    // Decade gridlines and labels.
    let mut decade = log_lo as i64;
    while decade <= log_hi as i64 {
        let y = y_of(10f64.powi(decade as i32));
        let _ = writeln!(
            svg,
            "<line x1=\"{left}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>",
            left + plot_w
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">1e{decade}</text>",
            left - 8.0,
            y + 4.0
        );
        decade += 1;
    }
    // x-axis ticks at quarters.
    for q in 0..=4 {
        let u = ((updates - 1) * q) / 4;
        let x = x_of(u);
        let _ = writeln!(
            svg,
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{u}</text>",
            top + plot_h + 20.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">update</text>",
        left + plot_w / 2.0,
        height - 14.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"20\" y=\"{:.2}\" transform=\"rotate(-90 20 {:.2})\" \
         text-anchor=\"middle\">cost</text>",
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    let _ = writeln!(
        svg,
        "<rect x=\"{left}\" y=\"{top}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333333\"/>"
    );

    for (idx, (name, curve)) in curves.iter().enumerate() {
        let color = PLOT_COLORS[idx % PLOT_COLORS.len()];
        // Band: upper edge forward, lower edge back.
        let mut band = String::from("M");
        for u in 0..updates {
            let y = y_of(curve.mean[u] + curve.std[u]);
            let _ = write!(band, " {:.2},{:.2}", x_of(u), y);
        }
        for u in (0..updates).rev() {
            let y = y_of((curve.mean[u] - curve.std[u]).max(floor));
            let _ = write!(band, " {:.2},{:.2}", x_of(u), y);
        }
        band.push_str(" Z");
        let _ = writeln!(
            svg,
            "<path d=\"{band}\" fill=\"{color}\" fill-opacity=\"0.18\" stroke=\"none\"/>"
        );

        let mut line = String::new();
        for u in 0..updates {
            let _ = write!(line, "{:.2},{:.2} ", x_of(u), y_of(curve.mean[u]));
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            line.trim_end()
        );

        // Legend entry.
        let ly = top + 16.0 + 20.0 * idx as f64;
        let lx = left + plot_w - 150.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>",
            lx + 26.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            lx + 34.0,
            ly + 4.0,
            xml_escape(name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_svg_plot(curves: &[(String, &LearningCurve)], path: &Path) -> Result<()> {
    write_file(path, &render_svg(curves)?)
}

pub fn emit_text(path: &Path, contents: &str) -> Result<()> {
    write_file(path, contents)
}
