//! Minimal SVG line plots: polylines in a viewport fitted to the data with a
//! 5% margin.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliResult;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const PAD: f64 = 40.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Plot {
    title: String,
    series: Vec<(String, Vec<(f64, f64)>)>,
    equal_aspect: bool,
}

impl Plot {
    pub fn new(title: impl Into<String>) -> Self {
        Plot { title: title.into(), series: Vec::new(), equal_aspect: false }
    }

    /// Same scale on both axes, for curves in the plane.
    pub fn equal_aspect(mut self) -> Self {
        self.equal_aspect = true;
        self
    }

    pub fn line(mut self, label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        let pts = points.into_iter().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        self.series.push((label.into(), pts));
        self
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self.series.iter().flat_map(|s| s.1.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if x0 > x1 {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let grow = |lo: f64, hi: f64| {
            let span = if hi > lo { hi - lo } else { 1.0 };
            (lo - 0.05 * span, hi + 0.05 * span)
        };
        let (x0, x1) = grow(x0, x1);
        let (y0, y1) = grow(y0, y1);
        if !self.equal_aspect {
            return (x0, x1, y0, y1);
        }
        let (w, h) = (WIDTH - 2.0 * PAD, HEIGHT - 2.0 * PAD);
        let scale = ((x1 - x0) / w).max((y1 - y0) / h);
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        (cx - 0.5 * scale * w, cx + 0.5 * scale * w, cy - 0.5 * scale * h, cy + 0.5 * scale * h)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * PAD);
        let sy = |y: f64| HEIGHT - PAD - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * PAD);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r##"<text x="{PAD}" y="24" font-family="sans-serif" font-size="14">{}</text>"##,
            escape(&self.title)
        );
        if x0 < 0.0 && x1 > 0.0 {
            let _ = writeln!(
                s,
                r##"<line x1="{0:.3}" y1="{PAD}" x2="{0:.3}" y2="{1:.3}" stroke="#bbb" stroke-width="1"/>"##,
                sx(0.0),
                HEIGHT - PAD
            );
        }
        if y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                s,
                r##"<line x1="{PAD}" y1="{0:.3}" x2="{1:.3}" y2="{0:.3}" stroke="#bbb" stroke-width="1"/>"##,
                sy(0.0),
                WIDTH - PAD
            );
        }
        let _ = writeln!(
            s,
            r##"<text x="{PAD}" y="{:.1}" font-family="sans-serif" font-size="11" fill="#555">x ∈ [{x0:.4}, {x1:.4}], y ∈ [{y0:.4}, {y1:.4}]</text>"##,
            HEIGHT - 12.0
        );
        for (i, (label, pts)) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let mut path = String::new();
            for &(x, y) in pts {
                let _ = write!(path, "{:.3},{:.3} ", sx(x), sy(y));
            }
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.trim_end()
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
                WIDTH - PAD - 160.0,
                PAD + 16.0 * (i as f64 + 1.0),
                escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, dir: &Path, name: &str) -> CliResult<()> {
        std::fs::write(dir.join(name), self.render())?;
        Ok(())
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
