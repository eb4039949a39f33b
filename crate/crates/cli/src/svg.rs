//! Log-scale convergence plots as standalone SVG.

use std::fmt::Write as _;

use anyhow::{ensure, Result};

/// Values at or below zero are drawn at this level.
pub const Y_FLOOR: f64 = 1e-16;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Result of preparing data for a log axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub series: Vec<Series>,
    /// Points raised to [`Y_FLOOR`].
    pub clipped: usize,
    /// Points dropped because a coordinate was NaN or infinite.
    pub dropped: usize,
}

pub fn prepare(series: Vec<Series>) -> Prepared {
    let mut clipped = 0;
    let mut dropped = 0;
    let series = series
        .into_iter()
        .map(|s| Series {
            label: s.label,
            points: s
                .points
                .into_iter()
                .filter_map(|(x, y)| {
                    if !x.is_finite() || y.is_nan() || y == f64::INFINITY {
                        dropped += 1;
                        None
                    } else if y <= Y_FLOOR {
                        if y <= 0.0 {
                            clipped += 1;
                        }
                        Some((x, Y_FLOOR))
                    } else {
                        Some((x, y))
                    }
                })
                .collect(),
        })
        .collect();
    Prepared {
        series,
        clipped,
        dropped,
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders one polyline per series. Output depends only on the input.
pub fn render(series: &[Series], x_label: &str, y_label: &str) -> Result<String> {
    ensure!(!series.is_empty(), "nothing to plot");
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x_min, mut x_max, mut y_min, mut y_max) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in all {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    ensure!(x_min.is_finite(), "no finite points to plot");
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    let lo = y_min.log10().floor() as i32;
    let mut hi = y_max.log10().ceil() as i32;
    if hi <= lo {
        hi = lo + 1;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| TOP + (hi as f64 - y.log10()) / (hi - lo) as f64 * plot_h;

    let mut svg = String::new();
    let w = &mut svg;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(
        w,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )?;
    writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    )?;

    let step = ((hi - lo) as f64 / 10.0).ceil().max(1.0) as i32;
    let mut k = lo;
    while k <= hi {
        let y = sy(10f64.powi(k));
        writeln!(
            w,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        )?;
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{k}</text>"#,
            LEFT - 6.0,
            y + 4.0
        )?;
        k += step;
    }
    for i in 0..=5 {
        let x = x_min + (x_max - x_min) * i as f64 / 5.0;
        let px = sx(x);
        writeln!(
            w,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 18.0,
            tick_label(x)
        )?;
    }
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    )?;
    writeln!(
        w,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    )?;

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>"#
        )?;
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        )?;
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        )?;
    }
    writeln!(w, "</svg>")?;
    Ok(svg)
}

fn tick_label(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e4 || x.abs() < 1e-2 {
        format!("{x:.2e}")
    } else {
        format!("{x:.1}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(label: &str, pts: &[(f64, f64)]) -> Series {
        Series {
            label: label.into(),
            points: pts.to_vec(),
        }
    }

    #[test]
    fn one_polyline_per_series() {
        let s = vec![series("a", &[(0.0, 1.0), (10.0, 1e-3)])];
        let svg = render(&s, "queries", "gap").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let two = vec![s[0].clone(), series("b<c", &[(0.0, 2.0), (5.0, 1e-5)])];
        let svg = render(&two, "queries", "gap").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;c"));
        assert_eq!(render(&two, "queries", "gap").unwrap(), svg);
    }

    #[test]
    fn clipping_and_dropping() {
        let p = prepare(vec![series(
            "a",
            &[(0.0, 1.0), (1.0, 0.0), (2.0, -1e-3), (3.0, f64::NAN)],
        )]);
        assert_eq!(p.clipped, 2);
        assert_eq!(p.dropped, 1);
        assert_eq!(p.series[0].points[1], (1.0, Y_FLOOR));
        assert!(render(&p.series, "x", "y").is_ok());
    }

    #[test]
    fn degenerate_ranges() {
        let s = vec![series("a", &[(5.0, 1e-3)])];
        assert_eq!(
            render(&s, "x", "y").unwrap().matches("<polyline").count(),
            1
        );
        assert!(render(&[series("a", &[])], "x", "y").is_err());
        assert!(render(&[], "x", "y").is_err());
    }
}
