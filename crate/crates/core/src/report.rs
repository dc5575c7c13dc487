//! Static reports: SVG fan charts and score tables.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::forecast::QuantileForecast;
use crate::scoring::ScoreSummary;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

/// Symmetric level pairs from the outside in, plus the median index if present.
fn bands(levels: &[f64]) -> (Vec<(usize, usize)>, Option<usize>) {
    let q = levels.len();
    let pairs = (0..q / 2).map(|i| (i, q - 1 - i)).collect();
    let median = (q % 2 == 1).then_some(q / 2);
    (pairs, median)
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// SVG 1.1 fan chart with one x position per forecast hour.
pub fn fan_chart_svg(forecast: &QuantileForecast, actual: Option<&[f64]>, title: &str) -> Result<String> {
    let h = forecast.horizon();
    if h == 0 {
        return Err(Error::Empty("fan chart horizon"));
    }
    if !forecast.is_monotone() {
        let index = (0..h)
            .find(|&t| forecast.column(t).windows(2).any(|w| w[1] < w[0]))
            .unwrap_or(0);
        return Err(Error::Crossing { index });
    }
    if let Some(a) = actual {
        if a.len() != h {
            return Err(Error::Shape { expected: h, actual: a.len() });
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in &forecast.values {
        for v in row {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    for v in actual.into_iter().flatten() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::domain("fan chart values must be finite"));
    }
    if hi - lo < 1e-9 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let x = |t: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * if h > 1 { t as f64 / (h - 1) as f64 } else { 0.5 };
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).ok();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .ok();
    writeln!(s, r#"<title>{}</title>"#, escape(title)).ok();
    writeln!(s, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##).ok();
    writeln!(
        s,
        r##"<text x="{}" y="{}" font-family="sans-serif" font-size="14">{}</text>"##,
        MARGIN,
        MARGIN / 2.0,
        escape(title)
    )
    .ok();

    let (pairs, median) = bands(&forecast.levels);
    let n = pairs.len().max(1) as f64;
    for (k, (a, b)) in pairs.iter().enumerate() {
        let mut pts: Vec<String> = (0..h).map(|t| format!("{},{}", fmt(x(t)), fmt(y(forecast.values[*b][t])))).collect();
        pts.extend((0..h).rev().map(|t| format!("{},{}", fmt(x(t)), fmt(y(forecast.values[*a][t])))));
        let opacity = 0.15 + 0.5 * (k as f64 + 1.0) / n;
        writeln!(
            s,
            r##"<polygon class="band" data-lower="{}" data-upper="{}" points="{}" fill="#1f77b4" fill-opacity="{:.3}" stroke="none"/>"##,
            forecast.levels[*a],
            forecast.levels[*b],
            pts.join(" "),
            opacity
        )
        .ok();
    }
    if let Some(m) = median {
        let pts: Vec<String> = (0..h).map(|t| format!("{},{}", fmt(x(t)), fmt(y(forecast.values[m][t])))).collect();
        writeln!(
            s,
            r##"<polyline class="median" points="{}" fill="none" stroke="#08306b" stroke-width="2"/>"##,
            pts.join(" ")
        )
        .ok();
    }
    if let Some(a) = actual {
        let pts: Vec<String> = a.iter().enumerate().map(|(t, v)| format!("{},{}", fmt(x(t)), fmt(y(*v)))).collect();
        writeln!(
            s,
            r##"<polyline class="actual" points="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##,
            pts.join(" ")
        )
        .ok();
    }
    let base = HEIGHT - MARGIN;
    writeln!(
        s,
        r##"<line x1="{MARGIN}" y1="{base}" x2="{}" y2="{base}" stroke="#000000"/>"##,
        WIDTH - MARGIN
    )
    .ok();
    writeln!(s, r##"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{base}" stroke="#000000"/>"##).ok();
    for t in 0..h {
        writeln!(
            s,
            r##"<text class="hour" x="{}" y="{}" font-family="sans-serif" font-size="9" text-anchor="middle">{t}</text>"##,
            fmt(x(t)),
            fmt(base + 14.0)
        )
        .ok();
    }
    for (v, label) in [(lo + pad, fmt(lo + pad)), (hi - pad, fmt(hi - pad))] {
        writeln!(
            s,
            r##"<text x="{}" y="{}" font-family="sans-serif" font-size="9" text-anchor="end">{label}</text>"##,
            fmt(MARGIN - 4.0),
            fmt(y(v))
        )
        .ok();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Markdown table of score summaries, one row per named model.
pub fn summary_table(rows: &[(String, ScoreSummary)]) -> String {
    let mut s = String::from("| model | origins | skipped | CRPS | ES | ECE | PIT KS |\n|---|---:|---:|---:|---:|---:|---:|\n");
    for (name, r) in rows {
        let es = r.energy_score.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        writeln!(
            s,
            "| {name} | {} | {} | {:.4} | {es} | {:.4} | {:.4} |",
            r.origins, r.skipped_origins, r.crps, r.ece, r.pit_ks
        )
        .ok();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn forecast() -> QuantileForecast {
        let levels = vec![0.01, 0.1, 0.5, 0.9, 0.99];
        let values = levels
            .iter()
            .map(|l| (0..24).map(|t| 50.0 + t as f64 + 40.0 * (l - 0.5)).collect())
            .collect();
        QuantileForecast::new(Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).unwrap(), levels, values).unwrap()
    }

    fn polygon_points(svg: &str) -> Vec<Vec<(f64, f64)>> {
        svg.lines()
            .filter(|l| l.starts_with("<polygon"))
            .map(|l| {
                let p = l.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
                p.split(' ')
                    .map(|xy| {
                        let (a, b) = xy.split_once(',').unwrap();
                        (a.parse().unwrap(), b.parse().unwrap())
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn fan_chart_structure() {
        let svg = fan_chart_svg(&forecast(), Some(&[60.0; 24]), "test & chart").unwrap();
        assert!(svg.contains(r#"version="1.1""#));
        assert_eq!(svg.matches("class=\"hour\"").count(), 24);
        assert!(svg.contains("test &amp; chart"));
        let bands = polygon_points(&svg);
        assert_eq!(bands.len(), 2);
        // Inner band lies within the outer band at every hour (SVG y grows downward).
        for t in 0..24 {
            let (outer, inner) = (&bands[0], &bands[1]);
            assert!(inner[t].1 >= outer[t].1 - 1e-9);
            assert!(inner[47 - t].1 <= outer[47 - t].1 + 1e-9);
            assert!(inner[t].1 <= inner[47 - t].1);
        }
    }

    #[test]
    fn crossing_forecast_rejected() {
        let mut f = forecast();
        f.values[1][3] = 500.0;
        assert!(matches!(fan_chart_svg(&f, None, "x"), Err(Error::Crossing { index: 3 })));
    }

    #[test]
    fn deterministic_output() {
        assert_eq!(fan_chart_svg(&forecast(), None, "a").unwrap(), fan_chart_svg(&forecast(), None, "a").unwrap());
    }
}
