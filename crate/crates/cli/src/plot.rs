//! Minimal SVG charts.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Axis-aligned plotting frame mapping data coordinates to pixels.
pub struct Frame {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub area: (f64, f64, f64, f64),
}

impl Frame {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Frame::in_area(x, y, (LEFT, TOP, W - RIGHT, H - BOTTOM))
    }

    pub fn in_area(x: (f64, f64), y: (f64, f64), area: (f64, f64, f64, f64)) -> Self {
        let widen = |(a, b): (f64, f64)| if a == b { (a - 0.5, b + 0.5) } else { (a, b) };
        Frame {
            x: widen(x),
            y: widen(y),
            area,
        }
    }

    pub fn px(&self, x: f64) -> f64 {
        let (l, _, r, _) = self.area;
        l + (x - self.x.0) / (self.x.1 - self.x.0) * (r - l)
    }

    pub fn py(&self, y: f64) -> f64 {
        let (_, t, _, b) = self.area;
        b - (y - self.y.0) / (self.y.1 - self.y.0) * (b - t)
    }
}

pub struct Svg {
    body: String,
    metadata: Option<String>,
}

impl Svg {
    pub fn new() -> Self {
        Svg {
            body: String::new(),
            metadata: None,
        }
    }

    /// Embeds `json` in a `<metadata>` element.
    pub fn with_metadata(mut self, json: &str) -> Self {
        self.metadata = Some(json.to_string());
        self
    }

    pub fn text(&mut self, x: f64, y: f64, s: &str, anchor: &str, size: f64) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size}" text-anchor="{anchor}" font-family="sans-serif">{}</text>"#,
            esc(s)
        );
    }

    pub fn title(&mut self, s: &str) {
        self.text(W / 2.0, 24.0, s, "middle", 15.0);
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, opacity: f64) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="{opacity}"/>"#,
            w.max(0.0),
            h.max(0.0)
        );
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64) {
        let mut d = String::new();
        for (x, y) in pts {
            let _ = write!(d, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
            d.trim_end()
        );
    }

    pub fn polygon(&mut self, pts: &[(f64, f64)], fill: &str, opacity: f64) {
        let mut d = String::new();
        for (x, y) in pts {
            let _ = write!(d, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            self.body,
            r#"<polygon points="{}" fill="{fill}" fill-opacity="{opacity}" stroke="none"/>"#,
            d.trim_end()
        );
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{fill}" fill-opacity="0.75"/>"#
        );
    }

    pub fn axes(&mut self, f: &Frame, xlabel: &str, ylabel: &str) {
        let (l, t, r, b) = f.area;
        self.polyline(&[(l, t), (l, b), (r, b)], "#333", 1.0);
        for i in 0..=4 {
            let fx = f.x.0 + (f.x.1 - f.x.0) * i as f64 / 4.0;
            let fy = f.y.0 + (f.y.1 - f.y.0) * i as f64 / 4.0;
            self.text(f.px(fx), b + 16.0, &tick(fx), "middle", 10.0);
            self.text(l - 6.0, f.py(fy) + 3.0, &tick(fy), "end", 10.0);
        }
        self.text((l + r) / 2.0, b + 36.0, xlabel, "middle", 12.0);
        let _ = writeln!(
            self.body,
            r#"<text x="16" y="{:.2}" font-size="12" text-anchor="middle" font-family="sans-serif" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (t + b) / 2.0,
            (t + b) / 2.0,
            esc(ylabel)
        );
    }

    pub fn legend(&mut self, names: &[String]) {
        for (i, n) in names.iter().enumerate() {
            let y = TOP + 8.0 + 16.0 * i as f64;
            self.rect(W - RIGHT - 130.0, y - 8.0, 10.0, 10.0, color(i), 1.0);
            self.text(W - RIGHT - 115.0, y + 1.0, n, "start", 11.0);
        }
    }

    pub fn finish(self) -> String {
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
        );
        if let Some(m) = &self.metadata {
            let _ = writeln!(out, "<metadata>{}</metadata>", esc(m));
        }
        out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// Line chart of named series.
pub fn line_chart(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(String, Vec<(f64, f64)>)],
    metadata: &str,
) -> String {
    let x = bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let y = bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let (x, y) = if x.0.is_finite() { (x, y) } else { ((0.0, 1.0), (0.0, 1.0)) };
    let f = Frame::new(x, y);
    let mut svg = Svg::new().with_metadata(metadata);
    svg.title(title);
    svg.axes(&f, xlabel, ylabel);
    for (i, (_, pts)) in series.iter().enumerate() {
        let px: Vec<(f64, f64)> = pts
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(a, b)| (f.px(a), f.py(b)))
            .collect();
        svg.polyline(&px, color(i), 1.6);
    }
    svg.legend(&series.iter().map(|s| s.0.clone()).collect::<Vec<_>>());
    svg.finish()
}

/// Confusion matrix heat map, rows = true class.
pub fn confusion_chart(title: &str, classes: &[String], m: &[Vec<usize>], metadata: &str) -> String {
    let k = classes.len().max(1);
    let max = m.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let size = (H - TOP - BOTTOM - 40.0).min(W - 2.0 * LEFT - 60.0);
    let cell = size / k as f64;
    let (ox, oy) = (LEFT + 80.0, TOP + 30.0);
    let mut svg = Svg::new().with_metadata(metadata);
    svg.title(title);
    for (r, row) in m.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let x = ox + c as f64 * cell;
            let y = oy + r as f64 * cell;
            svg.rect(x, y, cell - 2.0, cell - 2.0, "#1f77b4", 0.1 + 0.9 * v as f64 / max);
            svg.text(x + cell / 2.0, y + cell / 2.0 + 4.0, &v.to_string(), "middle", 13.0);
        }
    }
    for (i, name) in classes.iter().enumerate() {
        svg.text(ox - 6.0, oy + (i as f64 + 0.5) * cell + 4.0, name, "end", 11.0);
        svg.text(ox + (i as f64 + 0.5) * cell, oy - 8.0, name, "middle", 11.0);
    }
    svg.text(ox + size / 2.0, oy + size + 24.0, "predicted", "middle", 12.0);
    svg.text(ox - 70.0, oy - 8.0, "true", "middle", 12.0);
    svg.finish()
}

/// Scatter of two components with marginal density curves along the top
/// and right edges.
pub fn pca_chart(
    classes: &[String],
    points: &[(usize, f64, f64)],
    densities: &[(usize, Vec<(f64, f64)>, Vec<(f64, f64)>)],
    evr: (f64, f64),
    metadata: &str,
) -> String {
    let x = bounds(points.iter().map(|p| p.1));
    let y = bounds(points.iter().map(|p| p.2));
    let main = Frame::in_area(x, y, (LEFT, TOP + 70.0, W - RIGHT - 90.0, H - BOTTOM));
    let mut svg = Svg::new().with_metadata(metadata);
    svg.title("PCA scores with class marginals");
    svg.axes(
        &main,
        &format!("PC1 ({:.1}%)", 100.0 * evr.0),
        &format!("PC2 ({:.1}%)", 100.0 * evr.1),
    );
    for &(c, a, b) in points {
        svg.circle(main.px(a), main.py(b), 3.0, color(c));
    }
    let dmax = bounds(densities.iter().flat_map(|d| d.1.iter().chain(&d.2).map(|p| p.1))).1;
    let dmax = if dmax > 0.0 { dmax } else { 1.0 };
    let (l, t, r, b) = main.area;
    for (c, top, right) in densities {
        let pts: Vec<(f64, f64)> = top
            .iter()
            .filter(|p| p.0 >= main.x.0 && p.0 <= main.x.1)
            .map(|&(v, d)| (main.px(v), t - 6.0 - 56.0 * d / dmax))
            .collect();
        svg.polyline(&pts, color(*c), 1.4);
        let pts: Vec<(f64, f64)> = right
            .iter()
            .filter(|p| p.0 >= main.y.0 && p.0 <= main.y.1)
            .map(|&(v, d)| (r + 6.0 + 76.0 * d / dmax, main.py(v)))
            .collect();
        svg.polyline(&pts, color(*c), 1.4);
    }
    let _ = (l, b);
    svg.legend(classes);
    svg.finish()
}

/// Saliency weights over the wavenumber axis with shaded bands and an
/// optional reference trace scaled into `[0, 1]`.
pub fn saliency_chart(
    title: &str,
    wavenumbers: &[f64],
    weights: &[f64],
    reference: Option<&[f64]>,
    bands: &[(String, f64, f64)],
    metadata: &str,
) -> String {
    let hi = wavenumbers.first().copied().unwrap_or(1.0);
    let lo = wavenumbers.last().copied().unwrap_or(0.0);
    // IR convention: high wavenumbers on the left
    let f = Frame::new((hi, lo), (0.0, 1.05));
    let mut svg = Svg::new().with_metadata(metadata);
    svg.title(title);
    for (i, (name, bh, bl)) in bands.iter().enumerate() {
        let (x0, x1) = (f.px(bh.min(hi)), f.px(bl.max(lo)));
        svg.rect(x0, f.area.1, x1 - x0, f.area.3 - f.area.1, color(i + 2), 0.12);
        svg.text((x0 + x1) / 2.0, f.area.1 + 10.0 + 10.0 * (i % 2) as f64, name, "middle", 9.0);
    }
    svg.axes(&f, "wavenumber (cm-1)", "weight");
    let mut area: Vec<(f64, f64)> = vec![(f.px(hi), f.py(0.0))];
    area.extend(wavenumbers.iter().zip(weights).map(|(&w, &v)| (f.px(w), f.py(v))));
    area.push((f.px(lo), f.py(0.0)));
    svg.polygon(&area, color(1), 0.35);
    if let Some(r) = reference {
        let (a, b) = bounds(r.iter().copied());
        let span = if b > a { b - a } else { 1.0 };
        let pts: Vec<(f64, f64)> = wavenumbers
            .iter()
            .zip(r)
            .map(|(&w, &v)| (f.px(w), f.py((v - a) / span)))
            .collect();
        svg.polyline(&pts, "#222", 1.0);
    }
    svg.finish()
}
