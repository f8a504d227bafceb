//! A minimal SVG writer: axes with ticks, polylines and scatter points.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 440.0;
const PAD_L: f64 = 70.0;
const PAD_R: f64 = 150.0;
const PAD_T: f64 = 40.0;
const PAD_B: f64 = 55.0;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub line: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
        }
    }

    pub fn line(&mut self, label: impl Into<String>, points: Vec<(f64, f64)>) -> &mut Self {
        let c = color(self.series.len()).to_string();
        self.series.push(Series {
            label: label.into(),
            points,
            color: c,
            line: true,
        });
        self
    }

    pub fn scatter(&mut self, label: impl Into<String>, points: Vec<(f64, f64)>, color: &str) -> &mut Self {
        self.series.push(Series {
            label: label.into(),
            points,
            color: color.into(),
            line: false,
        });
        self
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self.series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let widen = |a: f64, b: f64| {
            if b - a < 1e-12 {
                (a - 0.5, b + 0.5)
            } else {
                let m = 0.05 * (b - a);
                (a - m, b + m)
            }
        };
        let (x0, x1) = widen(x0, x1);
        let (y0, y1) = widen(y0, y1);
        (x0, x1, y0, y1)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = W - PAD_L - PAD_R;
        let ph = H - PAD_T - PAD_B;
        let sx = |x: f64| PAD_L + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| PAD_T + (1.0 - (y - y0) / (y1 - y0)) * ph;
        let mut out = String::new();
        let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#, PAD_L + pw / 2.0, escape(&self.title));
        let _ = writeln!(
            out,
            r#"<rect x="{PAD_L}" y="{PAD_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(out, r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/>"#, PAD_T + ph, PAD_T + ph + 5.0);
            let _ = writeln!(out, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, PAD_T + ph + 18.0, tick(xv));
            let _ = writeln!(out, r#"<line x1="{:.1}" y1="{py:.1}" x2="{PAD_L}" y2="{py:.1}" stroke="black"/>"#, PAD_L - 5.0);
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, PAD_L - 8.0, py + 4.0, tick(yv));
        }
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, PAD_L + pw / 2.0, H - 12.0, escape(&self.x_label));
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            PAD_T + ph / 2.0,
            PAD_T + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, s) in self.series.iter().enumerate() {
            let pts: Vec<(f64, f64)> = s.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
            if s.line && pts.len() > 1 {
                let path: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
                let _ = writeln!(out, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, s.color, path.join(" "));
            }
            for p in &pts {
                let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, sx(p.0), sy(p.1), s.color);
            }
            let ly = PAD_T + 14.0 * i as f64 + 8.0;
            let lx = W - PAD_R + 12.0;
            let _ = writeln!(out, r#"<rect x="{lx}" y="{:.1}" width="10" height="10" fill="{}"/>"#, ly - 8.0, s.color);
            let _ = writeln!(out, r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#, lx + 14.0, escape(&s.label));
        }
        out.push_str("</svg>\n");
        out
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series() {
        let mut p = Plot::new("a < b", "x", "y");
        p.line("one", vec![(0.0, 1.0), (1.0, 2.0)]).scatter("pts", vec![(0.5, f64::NAN), (0.2, 1.2)], "#000000");
        let s = p.render();
        assert!(s.starts_with("<svg"));
        assert!(s.contains("<polyline"));
        assert_eq!(s.matches("<circle").count(), 3);
        assert!(s.contains("a &lt; b"));
        assert!(Plot::new("", "", "").render().ends_with("</svg>\n"));
    }
}
