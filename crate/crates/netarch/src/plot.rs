//! Minimal static SVG emission for the report plots. Coordinates are
//! rendered at fixed precision so files are byte-stable.

use crate::archetype::ArchetypeTable;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Line chart with one polyline per named series.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (64.0, 24.0, 40.0, 56.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);

    let xs: Vec<f64> = series.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.0)).collect();
    let ys: Vec<f64> = series.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.1)).collect();
    let (xmin, xmax) = bounds(&xs);
    let (ymin, ymax) = bounds(&ys);
    let sx = |x: f64| ml + (x - xmin) / (xmax - xmin).max(1e-12) * pw;
    let sy = |y: f64| mt + ph - (y - ymin) / (ymax - ymin).max(1e-12) * ph;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        coord(w / 2.0)
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        coord(ml), coord(mt + ph), coord(ml + pw), coord(mt + ph)
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        coord(ml), coord(mt), coord(ml), coord(mt + ph)
    ));
    // Tick labels at the extremes.
    for (x, anchor) in [(xmin, "start"), (xmax, "end")] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"{anchor}\">{x:.3}</text>\n",
            coord(sx(x)), coord(mt + ph + 16.0)
        ));
    }
    for y in [ymin, ymax] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{y:.3}</text>\n",
            coord(ml - 6.0), coord(sy(y) + 4.0)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{x_label}</text>\n",
        coord(ml + pw / 2.0), coord(h - 16.0)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        coord(mt + ph / 2.0), coord(mt + ph / 2.0)
    ));

    for (si, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{},{}", coord(sx(x)), coord(sy(y)))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        for &(x, y) in pts {
            svg.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>\n",
                coord(sx(x)), coord(sy(y))
            ));
        }
        // Legend.
        let ly = mt + 8.0 + si as f64 * 18.0;
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
            coord(ml + pw - 110.0), coord(ly)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{name}</text>\n",
            coord(ml + pw - 92.0), coord(ly + 10.0)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() || !max.is_finite() {
        (0.0, 1.0)
    } else if min == max {
        (min - 0.5, max + 0.5)
    } else {
        (min, max)
    }
}

/// Timeline of archetype signatures: one row per archetype, one cell per
/// timestep colored by cluster label.
pub fn archetype_timeline(table: &ArchetypeTable) -> String {
    let rows = table.archetypes.len().max(1);
    let cols = table
        .archetypes
        .first()
        .map_or(1, |a| a.signature.len().max(1));
    let cell = 26.0;
    let (ml, mt) = (150.0, 44.0);
    let w = ml + cols as f64 * cell + 24.0;
    let h = mt + rows as f64 * cell + 24.0;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">Archetype label trajectories</text>\n",
        coord(w / 2.0)
    ));
    for (r, arc) in table.archetypes.iter().enumerate() {
        let y = mt + r as f64 * cell;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">arch {} (n={})</text>\n",
            coord(ml - 8.0), coord(y + cell * 0.65), arc.id, arc.size()
        ));
        for (c, &label) in arc.signature.iter().enumerate() {
            let x = ml + c as f64 * cell;
            let color = PALETTE[label % PALETTE.len()];
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\" stroke=\"white\"/>\n",
                coord(x), coord(y), coord(cell), coord(cell)
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Significance heatmap over (feature, week) cells: filled when the omnibus
/// test flags the cell, shaded by p-value otherwise.
pub fn significance_heatmap(
    features: &[String],
    timesteps: &[usize],
    p_values: &[Vec<f64>],
    alpha: f64,
) -> String {
    let cell = 24.0;
    let (ml, mt) = (170.0, 56.0);
    let w = ml + timesteps.len() as f64 * cell + 24.0;
    let h = mt + features.len() as f64 * cell + 24.0;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">Feature significance by week (alpha={alpha})</text>\n",
        coord(w / 2.0)
    ));
    for (c, t) in timesteps.iter().enumerate() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{t}</text>\n",
            coord(ml + c as f64 * cell + cell / 2.0), coord(mt - 8.0)
        ));
    }
    for (r, feature) in features.iter().enumerate() {
        let y = mt + r as f64 * cell;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{feature}</text>\n",
            coord(ml - 8.0), coord(y + cell * 0.65)
        ));
        for c in 0..timesteps.len() {
            let p = p_values[r][c];
            let color = if p < alpha { "#d62728" } else { "#c7d9ed" };
            let opacity = if p < alpha {
                1.0
            } else {
                (1.0 - p).clamp(0.15, 0.9)
            };
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\" fill-opacity=\"{opacity:.2}\" stroke=\"white\"/>\n",
                coord(ml + c as f64 * cell), coord(y), coord(cell), coord(cell)
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
