//! Static SVG line chart for the gamma-ratio series.

/// Render (epoch, ratio) points as a polyline with axes and tick labels.
/// Undefined ratios are skipped.
pub fn gamma_ratio_chart(series: &[(u32, Option<f64>)]) -> String {
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter_map(|(e, r)| r.map(|v| (*e as f64, v)))
        .collect();

    let (width, height) = (640.0, 400.0);
    let margin = 56.0;
    let plot_w = width - 2.0 * margin;
    let plot_h = height - 2.0 * margin;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    if points.is_empty() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\">no gamma-ratio samples</text>\n",
            width / 2.0,
            height / 2.0
        ));
        svg.push_str("</svg>\n");
        return svg;
    }

    let x_min = 0.0;
    let x_max = points.iter().map(|p| p.0).fold(f64::MIN, f64::max).max(1.0);
    let y_lo = points.iter().map(|p| p.1).fold(f64::MAX, f64::min);
    let y_hi = points.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    let pad = ((y_hi - y_lo).abs() * 0.15).max(0.05);
    let (y_min, y_max) = (y_lo - pad, y_hi + pad);

    let sx = |x: f64| margin + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| height - margin - (y - y_min) / (y_max - y_min) * plot_h;

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = margin,
        b = height - margin,
        r = width - margin,
        t = margin
    ));

    // X ticks at each sample epoch, y ticks at five even levels.
    for (e, _) in series {
        let x = sx(*e as f64);
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{b}\" x2=\"{x}\" y2=\"{b2}\" stroke=\"black\"/>\n<text x=\"{x}\" y=\"{ty}\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">{e}</text>\n",
            b = height - margin,
            b2 = height - margin + 5.0,
            ty = height - margin + 18.0
        ));
    }
    for i in 0..=4 {
        let y_val = y_min + (y_max - y_min) * i as f64 / 4.0;
        let y = sy(y_val);
        svg.push_str(&format!(
            "<line x1=\"{x2}\" y1=\"{y}\" x2=\"{m}\" y2=\"{y}\" stroke=\"black\"/>\n<text x=\"{tx}\" y=\"{ty}\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">{y_val:.3}</text>\n",
            m = margin,
            x2 = margin - 5.0,
            tx = margin - 8.0,
            ty = y + 4.0
        ));
    }

    let path: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
        .collect();
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\"/>\n",
        path.join(" ")
    ));
    for (x, y) in &points {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f6fb2\"/>\n",
            sx(*x),
            sy(*y)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">epoch</text>\n",
        width / 2.0,
        height - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" transform=\"rotate(-90 16 {})\">single / output gate ratio</text>\n",
        height / 2.0,
        height / 2.0
    ));
    svg.push_str("</svg>\n");
    svg
}
