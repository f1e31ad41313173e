//! Minimal self-contained SVG charts. Each file carries its data as CSV in a
//! leading comment, so plots double as data files.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<[f64; 2]>,
    pub style: Style,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Comments may not contain `--`.
fn comment_safe(s: &str) -> String {
    s.replace("--", "- -")
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Chart {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
        }
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }

    pub fn with(mut self, name: &str, points: Vec<[f64; 2]>, style: Style) -> Self {
        self.series.push(Series { name: name.into(), points, style });
        self
    }

    fn transform(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        let x = if self.log_x { p[0].log10() } else { p[0] };
        let y = if self.log_y { p[1].log10() } else { p[1] };
        (x.is_finite() && y.is_finite()).then_some([x, y])
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        for s in &self.series {
            let _ = writeln!(out, "<!-- data series=\"{}\"", comment_safe(&s.name));
            let _ = writeln!(out, "{},{}", comment_safe(&self.x_label), comment_safe(&self.y_label));
            for p in &s.points {
                let _ = writeln!(out, "{:e},{:e}", p[0], p[1]);
            }
            out.push_str("-->\n");
        }
        let pts: Vec<[f64; 2]> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().filter_map(|p| self.transform(*p)))
            .collect();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &pts {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        if pts.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 <= 0.0 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 <= 0.0 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad = 0.05 * (y1 - y0);
        y0 -= pad;
        y1 += pad;
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
        );
        let _ = writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
            WIDTH - 2.0 * MARGIN,
            HEIGHT - 2.0 * MARGIN
        );
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let lx = if self.log_x { format!("1e{fx:.2}") } else { format!("{fx:.3}") };
            let ly = if self.log_y { format!("1e{fy:.2}") } else { format!("{fy:.3e}") };
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{lx}</text>",
                sx(fx),
                HEIGHT - MARGIN + 16.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{ly}</text>",
                MARGIN - 4.0,
                sy(fy) + 4.0
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            WIDTH / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for (k, s) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let mapped: Vec<[f64; 2]> = s
                .points
                .iter()
                .filter_map(|p| self.transform(*p))
                .map(|p| [sx(p[0]), sy(p[1])])
                .collect();
            match s.style {
                Style::Line => {
                    let path: Vec<String> = mapped.iter().map(|p| format!("{:.2},{:.2}", p[0], p[1])).collect();
                    let _ = writeln!(
                        out,
                        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                        path.join(" ")
                    );
                }
                Style::Markers => {
                    for p in &mapped {
                        let _ = writeln!(out, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>", p[0], p[1]);
                    }
                }
            }
            let ly = MARGIN + 14.0 + 16.0 * k as f64;
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{ly:.2}\" fill=\"{color}\" text-anchor=\"end\">{}</text>",
                WIDTH - MARGIN - 6.0,
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embeds_data_and_is_deterministic() {
        let chart = Chart::new("t", "x", "y").with("a--b", vec![[1.0, 2.0], [2.0, 3.0]], Style::Line);
        let svg = chart.render();
        assert!(svg.contains("<!-- data series=\"a- -b\"\nx,y\n1e0,2e0\n2e0,3e0\n-->"));
        assert_eq!(svg, chart.render());
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn log_axes_skip_nonpositive() {
        let svg = Chart::new("t", "x", "y")
            .log_log()
            .with("s", vec![[0.0, 1.0], [1.0, 10.0], [10.0, 100.0]], Style::Markers)
            .render();
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
