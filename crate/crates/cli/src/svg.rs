//! Minimal self-contained SVG charts.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 70.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    s
}

fn axis_labels(s: &mut String, x_label: &str, y_label: &str) {
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 15.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{y}" text-anchor="middle" transform="rotate(-90 18 {y})">{}</text>"#,
        escape(y_label),
        y = HEIGHT / 2.0
    );
}

/// Heatmap of `values[row][col]`; rows are drawn bottom to top.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, x_ticks: &[f64], y_ticks: &[f64], values: &[Vec<f64>]) -> String {
    let mut s = open(title);
    let (rows, cols) = (y_ticks.len(), x_ticks.len());
    let cw = (WIDTH - 2.0 * MARGIN) / cols as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / rows as f64;
    let max = values.iter().flatten().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let shade = (255.0 * (1.0 - v / max)).round() as u8;
            let (x, y) = (MARGIN + j as f64 * cw, HEIGHT - MARGIN - (i + 1) as f64 * ch);
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{cw:.1}" height="{ch:.1}" fill="rgb({shade},{shade},255)" stroke="rgb(221,221,221)" stroke-width="0.5"><title>{v}</title></rect>"#
            );
        }
    }
    let step = (cols / 10).max(1);
    for (j, t) in x_ticks.iter().enumerate().step_by(step) {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{t}</text>"#, MARGIN + (j as f64 + 0.5) * cw, HEIGHT - MARGIN + 16.0);
    }
    let step = (rows / 10).max(1);
    for (i, t) in y_ticks.iter().enumerate().step_by(step) {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{t}</text>"#, MARGIN - 6.0, HEIGHT - MARGIN - (i as f64 + 0.5) * ch + 4.0);
    }
    axis_labels(&mut s, x_label, y_label);
    s.push_str("</svg>\n");
    s
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Line chart; `log_x` plots the x axis on a base-10 log scale.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_x: bool) -> String {
    let mut s = open(title);
    let fx = |x: f64| if log_x { x.log10() } else { x };
    let pts = series.iter().flat_map(|se| se.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(fx(x));
        x1 = x1.max(fx(x));
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (fx(x) - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {b} H{r} M{m} {b} V{m}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for i in 0..=4 {
        let y = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.3e}</text>"#, MARGIN - 6.0, py(y) + 4.0);
        let xv = x0 + (x1 - x0) * i as f64 / 4.0;
        let label = if log_x { format!("{:.0}", 10f64.powf(xv)) } else { format!("{xv:.3}") };
        let xpos = MARGIN + (xv - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let _ = writeln!(s, r#"<text x="{xpos:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, HEIGHT - MARGIN + 16.0);
    }
    for (n, se) in series.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        let d: Vec<String> = se
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .enumerate()
            .map(|(i, &(x, y))| format!("{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, px(x), py(y)))
            .collect();
        let _ = writeln!(s, r#"<path d="{}" stroke="{color}" stroke-width="2" fill="none"/>"#, d.join(" "));
        let ly = MARGIN + 16.0 * n as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{color}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN,
            escape(se.name)
        );
    }
    axis_labels(&mut s, x_label, y_label);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_self_contained() {
        let h = heatmap("t", "x", "y", &[0.1, 0.2], &[0.1, 0.2], &[vec![1.0, 0.0], vec![0.0, 3.0]]);
        let l = line_chart("t <a>", "x", "y", &[Series { name: "s", points: vec![(1.0, 2.0), (10.0, 1.0)] }], true);
        for svg in [h, l] {
            assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
            assert!(!svg.contains("href"));
        }
    }
}
