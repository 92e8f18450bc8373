//! Minimal SVG line plots for optional visual output. Nothing here feeds
//! back into any measurement.

use std::path::Path;

use anyhow::Result;

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

pub fn line_plot(
    path: &Path,
    title: &str,
    series: &[Series<'_>],
    log_log: bool,
) -> Result<()> {
    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (60.0, 20.0, 40.0, 40.0);
    let tx = |v: f64| if log_log { v.abs().max(1e-300).log10() } else { v };

    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            let (x, y) = (tx(x), tx(y));
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !(xmin.is_finite() && ymin.is_finite()) || xmin == xmax {
        xmin = 0.0;
        xmax = 1.0;
    }
    if ymin == ymax {
        ymin -= 1.0;
        ymax += 1.0;
    }
    let px = |x: f64| ml + (tx(x) - xmin) / (xmax - xmin) * (w - ml - mr);
    let py = |y: f64| h - mb - (tx(y) - ymin) / (ymax - ymin) * (h - mt - mb);

    let palette = ["#1c6fb8", "#c03a2b", "#2a9d5c", "#8655b8", "#b8860b", "#3aa6a6"];
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"14\">{title}</text>\n",
        ml
    ));
    svg.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        w - ml - mr,
        h - mt - mb
    ));
    for (i, s) in series.iter().enumerate() {
        let color = palette[i % palette.len()];
        let mut d = String::new();
        for (k, &(x, y)) in s.points.iter().enumerate() {
            d.push_str(if k == 0 { "M" } else { "L" });
            d.push_str(&format!("{:.2},{:.2} ", px(x), py(y)));
        }
        svg.push_str(&format!(
            "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            w - mr - 150.0,
            mt + 16.0 + 14.0 * i as f64,
            s.label
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}
