use std::fmt::Write as _;
use std::path::Path;

use crate::{GateError, Result};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub enum PlotData {
    Scatter {
        x: Vec<f64>,
        y: Vec<f64>,
    },
    LineWithBand {
        x: Vec<f64>,
        mean: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    ViolinPair {
        left: (String, Vec<f64>),
        right: (String, Vec<f64>),
    },
}

impl PlotData {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            PlotData::Scatter { x, y } => !x.is_empty() && x.len() == y.len(),
            PlotData::LineWithBand {
                x,
                mean,
                lower,
                upper,
            } => {
                !x.is_empty()
                    && [mean.len(), lower.len(), upper.len()]
                        .iter()
                        .all(|&n| n == x.len())
            }
            PlotData::ViolinPair { left, right } => !left.1.is_empty() && !right.1.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(GateError::structural(
                "plot series must be nonempty and of equal length",
            ))
        }
    }

    fn csv(&self) -> String {
        let mut s = String::new();
        match self {
            PlotData::Scatter { x, y } => {
                s.push_str("x,y\n");
                for (a, b) in x.iter().zip(y) {
                    let _ = writeln!(s, "{a},{b}");
                }
            }
            PlotData::LineWithBand {
                x,
                mean,
                lower,
                upper,
            } => {
                s.push_str("x,mean,lower,upper\n");
                for i in 0..x.len() {
                    let _ = writeln!(s, "{},{},{},{}", x[i], mean[i], lower[i], upper[i]);
                }
            }
            PlotData::ViolinPair { left, right } => {
                s.push_str("group,value\n");
                for (name, values) in [left, right] {
                    for v in values {
                        let _ = writeln!(s, "{name},{v}");
                    }
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub data: PlotData,
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn axes(svg: &mut String, plot: &Plot, f: &Frame, x_ticks: bool) {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{l:.2} {t:.2} L{l:.2} {b:.2} L{r:.2} {b:.2}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let fy = f.y.0 + (f.y.1 - f.y.0) * i as f64 / 4.0;
        let y = f.py(fy);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{fy:.3}</text>"#,
            l - 4.0,
            y + 3.0
        );
        if x_ticks {
            let fx = f.x.0 + (f.x.1 - f.x.0) * i as f64 / 4.0;
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{fx:.3}</text>"#,
                f.px(fx),
                b + 14.0
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(&plot.title)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(&plot.y_label)
    );
}

/// Gaussian kernel density on `grid` with Silverman's bandwidth.
fn density(values: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let h = if sd > 0.0 {
        1.06 * sd * n.powf(-0.2)
    } else {
        1e-3
    };
    grid.iter()
        .map(|&g| {
            values
                .iter()
                .map(|v| (-0.5 * ((g - v) / h).powi(2)).exp())
                .sum::<f64>()
                / n
        })
        .collect()
}

pub fn render_svg(plot: &Plot) -> Result<String> {
    plot.data.validate()?;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    match &plot.data {
        PlotData::Scatter { x, y } => {
            let f = Frame {
                x: extent(x.iter().copied()),
                y: extent(y.iter().copied()),
            };
            axes(&mut svg, plot, &f, true);
            for (a, b) in x
                .iter()
                .zip(y)
                .filter(|(a, b)| a.is_finite() && b.is_finite())
            {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="steelblue" fill-opacity="0.7"/>"#,
                    f.px(*a),
                    f.py(*b)
                );
            }
        }
        PlotData::LineWithBand {
            x,
            mean,
            lower,
            upper,
        } => {
            let f = Frame {
                x: extent(x.iter().copied()),
                y: extent(lower.iter().chain(upper).chain(mean).copied()),
            };
            axes(&mut svg, plot, &f, true);
            let mut band = String::new();
            for (i, (a, u)) in x.iter().zip(upper).enumerate() {
                let _ = write!(
                    band,
                    "{}{:.2} {:.2} ",
                    if i == 0 { "M" } else { "L" },
                    f.px(*a),
                    f.py(*u)
                );
            }
            for (a, l) in x.iter().zip(lower).rev() {
                let _ = write!(band, "L{:.2} {:.2} ", f.px(*a), f.py(*l));
            }
            let _ = writeln!(
                svg,
                r#"<path d="{}Z" fill="steelblue" fill-opacity="0.25"/>"#,
                band
            );
            let line: Vec<String> = x
                .iter()
                .zip(mean)
                .map(|(a, m)| format!("{:.2},{:.2}", f.px(*a), f.py(*m)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
                line.join(" ")
            );
        }
        PlotData::ViolinPair { left, right } => {
            let f = Frame {
                x: (0.0, 2.0),
                y: extent(left.1.iter().chain(&right.1).copied()),
            };
            axes(&mut svg, plot, &f, false);
            let grid: Vec<f64> = (0..=60)
                .map(|i| f.y.0 + (f.y.1 - f.y.0) * i as f64 / 60.0)
                .collect();
            for (slot, (name, values), colour) in
                [(0.5, left, "steelblue"), (1.5, right, "darkorange")]
            {
                let d = density(values, &grid);
                let peak = d.iter().copied().fold(0.0, f64::max).max(1e-300);
                let half = 0.4 * (f.px(1.0) - f.px(0.0));
                let cx = f.px(slot);
                let mut path = String::new();
                for (i, (g, v)) in grid.iter().zip(&d).enumerate() {
                    let _ = write!(
                        path,
                        "{}{:.2} {:.2} ",
                        if i == 0 { "M" } else { "L" },
                        cx + half * v / peak,
                        f.py(*g)
                    );
                }
                for (g, v) in grid.iter().zip(&d).rev() {
                    let _ = write!(path, "L{:.2} {:.2} ", cx - half * v / peak, f.py(*g));
                }
                let _ = writeln!(
                    svg,
                    r#"<path d="{path}Z" fill="{colour}" fill-opacity="0.5" stroke="{colour}"/>"#
                );
                let _ = writeln!(
                    svg,
                    r#"<text x="{cx:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
                    HEIGHT - MARGIN + 14.0,
                    escape(name)
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes the SVG at `path` and its data as CSV next to it.
pub fn export_plot(plot: &Plot, path: &Path) -> Result<()> {
    let svg = render_svg(plot)?;
    std::fs::write(path, svg).map_err(|e| GateError::io(path, e))?;
    let csv_path = path.with_extension("csv");
    std::fs::write(&csv_path, plot.data.csv()).map_err(|e| GateError::io(csv_path, e))
}
