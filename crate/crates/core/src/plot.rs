//! Hand-written SVG charts: a score bar chart and a log-log timing chart.
//! No plotting dependency — the markup is emitted directly so outputs are
//! deterministic and diffable.

use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 64.0;

/// Bars beyond this many are dropped (largest kept) to keep labels legible.
const MAX_BARS: usize = 64;

fn svg_header(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = WIDTH / 2.0,
        title = escape(title),
    )
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Fixed-precision coordinate formatting keeps the markup byte-stable.
fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Round `max` up to a tidy tick ceiling: {1, 2, 5}·10^k.
fn tick_ceiling(max: f64) -> f64 {
    if max <= 0.0 {
        return 1.0;
    }
    let exp = max.log10().floor();
    let base = 10f64.powf(exp);
    for mult in [1.0, 2.0, 5.0, 10.0] {
        if mult * base >= max {
            return mult * base;
        }
    }
    10.0 * base
}

/// Vertical bar chart of named scores, tallest-first ordering preserved
/// from the caller. Returns the full SVG document.
pub fn score_bar_chart(title: &str, entries: &[(String, f64)]) -> Result<String> {
    if entries.is_empty() {
        return Err(Error::InvalidConfig("no scores to plot".into()));
    }
    if let Some((name, score)) = entries
        .iter()
        .find(|(_, s)| !s.is_finite() || *s < 0.0)
    {
        return Err(Error::InvalidConfig(format!(
            "score {score} for {name:?} is not plottable"
        )));
    }
    let shown = &entries[..entries.len().min(MAX_BARS)];
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let top = tick_ceiling(shown.iter().map(|e| e.1).fold(0.0, f64::max));

    let mut svg = svg_header(title);
    if shown.len() < entries.len() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"40\" font-size=\"11\" text-anchor=\"middle\">top {} of {} shown</text>\n",
            fmt(WIDTH / 2.0),
            shown.len(),
            entries.len()
        ));
    }

    // Axes and horizontal gridlines with value labels.
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let y = MARGIN_TOP + plot_h * (1.0 - frac);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
            fmt(MARGIN_LEFT),
            fmt(y),
            fmt(WIDTH - MARGIN_RIGHT),
            fmt(y)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN_LEFT - 6.0),
            fmt(y + 4.0),
            format_args!("{:.4}", top * frac)
        ));
    }

    let slot = plot_w / shown.len() as f64;
    let bar_w = (slot * 0.7).min(48.0);
    for (i, (name, score)) in shown.iter().enumerate() {
        let h = plot_h * score / top;
        let x = MARGIN_LEFT + slot * i as f64 + (slot - bar_w) / 2.0;
        let y = MARGIN_TOP + plot_h - h;
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#4878a8\"/>\n",
            fmt(x),
            fmt(y),
            fmt(bar_w),
            fmt(h)
        ));
        let lx = MARGIN_LEFT + slot * (i as f64 + 0.5);
        let ly = MARGIN_TOP + plot_h + 14.0;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\" transform=\"rotate(-45 {} {})\">{}</text>\n",
            fmt(lx),
            fmt(ly),
            fmt(lx),
            fmt(ly),
            escape(name)
        ));
    }
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP + plot_h),
        fmt(WIDTH - MARGIN_RIGHT),
        fmt(MARGIN_TOP + plot_h)
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Log-log scatter-plus-line chart of (x, seconds) points, used for the
/// timing-versus-dimension series. Points must be positive.
pub fn loglog_chart(title: &str, series: &[(f64, f64)]) -> Result<String> {
    if series.len() < 2 {
        return Err(Error::InvalidConfig(
            "log-log chart needs at least 2 points".into(),
        ));
    }
    if series.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0 || !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidConfig(
            "log-log chart needs positive finite coordinates".into(),
        ));
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let (lx_min, lx_max) = series
        .iter()
        .map(|p| p.0.ln())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let (ly_min, ly_max) = series
        .iter()
        .map(|p| p.1.ln())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let x_span = (lx_max - lx_min).max(1e-9);
    let y_span = (ly_max - ly_min).max(1e-9);
    let to_px = |x: f64, y: f64| {
        (
            MARGIN_LEFT + plot_w * (x.ln() - lx_min) / x_span,
            MARGIN_TOP + plot_h * (1.0 - (y.ln() - ly_min) / y_span),
        )
    };

    let mut svg = svg_header(title);
    // Frame.
    svg.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(plot_w),
        fmt(plot_h)
    ));
    let path: Vec<String> = series
        .iter()
        .map(|&(x, y)| {
            let (px, py) = to_px(x, y);
            format!("{},{}", fmt(px), fmt(py))
        })
        .collect();
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#4878a8\" stroke-width=\"2\"/>\n",
        path.join(" ")
    ));
    for &(x, y) in series {
        let (px, py) = to_px(x, y);
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"#28486c\"/>\n",
            fmt(px),
            fmt(py)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{x}, {y:.3}s</text>\n",
            fmt(px),
            fmt(py - 8.0)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">variables (log)</text>\n",
        fmt(MARGIN_LEFT + plot_w / 2.0),
        fmt(HEIGHT - 18.0)
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">seconds (log)</text>\n",
        fmt(MARGIN_TOP + plot_h / 2.0),
        fmt(MARGIN_TOP + plot_h / 2.0)
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
        pairs.iter().map(|(n, s)| (n.to_string(), *s)).collect()
    }

    #[test]
    fn bar_chart_structure() {
        let svg =
            score_bar_chart("scores", &entries(&[("t1", 0.5), ("t2", 0.3), ("c1", 0.2)])).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 1 + 3); // background + bars
        assert!(svg.contains(">t1<"));
        assert!(svg.contains(">c1<"));
    }

    #[test]
    fn bar_chart_is_deterministic() {
        let e = entries(&[("a", 0.7), ("b", 0.3)]);
        assert_eq!(
            score_bar_chart("x", &e).unwrap(),
            score_bar_chart("x", &e).unwrap()
        );
    }

    #[test]
    fn bar_chart_truncates_wide_inputs() {
        let many: Vec<(String, f64)> = (0..200)
            .map(|i| (format!("v{i}"), 1.0 / (i + 1) as f64))
            .collect();
        let svg = score_bar_chart("big", &many).unwrap();
        assert_eq!(svg.matches("<rect").count(), 1 + 64);
        assert!(svg.contains("top 64 of 200 shown"));
    }

    #[test]
    fn bar_chart_rejects_bad_scores() {
        assert!(score_bar_chart("x", &[]).is_err());
        assert!(score_bar_chart("x", &entries(&[("a", -0.1)])).is_err());
        assert!(score_bar_chart("x", &entries(&[("a", f64::NAN)])).is_err());
    }

    #[test]
    fn bar_chart_escapes_markup_in_names() {
        let svg = score_bar_chart("t", &entries(&[("a<b&c", 1.0)])).unwrap();
        assert!(svg.contains("a&lt;b&amp;c"));
        assert!(!svg.contains("a<b"));
    }

    #[test]
    fn tick_ceiling_snaps_to_tidy_values() {
        assert!((tick_ceiling(0.37) - 0.5).abs() < 1e-12);
        assert!((tick_ceiling(0.09) - 0.1).abs() < 1e-12);
        assert!((tick_ceiling(7.0) - 10.0).abs() < 1e-12);
        assert!((tick_ceiling(10.0) - 10.0).abs() < 1e-9);
        assert_eq!(tick_ceiling(0.0), 1.0);
    }

    #[test]
    fn loglog_chart_structure() {
        let svg = loglog_chart(
            "timing",
            &[(11.0, 0.9), (50.0, 1.4), (100.0, 2.8), (400.0, 13.5)],
        )
        .unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 4);
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("seconds (log)"));
    }

    #[test]
    fn loglog_chart_rejects_nonpositive_points() {
        assert!(loglog_chart("t", &[(1.0, 1.0)]).is_err());
        assert!(loglog_chart("t", &[(0.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(loglog_chart("t", &[(1.0, -1.0), (2.0, 2.0)]).is_err());
    }
}
