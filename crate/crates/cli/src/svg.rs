//! Minimal self-contained SVG line charts.

use std::fmt::Write;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub color: &'static str,
    /// Dotted overlays do not influence the axis ranges.
    pub dotted: bool,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series>,
}

struct Axis {
    scale: Scale,
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn value(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => v,
            Scale::Log => v.log10(),
        }
    }

    fn admits(&self, v: f64) -> bool {
        v.is_finite() && (self.scale == Scale::Linear || v > 0.0)
    }

    fn map(&self, v: f64) -> f64 {
        let (a, b) = (self.value(self.lo), self.value(self.hi));
        self.px_lo + (self.value(v) - a) / (b - a) * (self.px_hi - self.px_lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        match self.scale {
            Scale::Linear => linear_ticks(self.lo, self.hi),
            Scale::Log => {
                let (a, b) = (self.lo.log10().ceil() as i32, self.hi.log10().floor() as i32);
                (a..=b).map(|k| (10f64.powi(k), format!("1e{k}"))).collect()
            }
        }
    }
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let mut out = Vec::new();
    let mut k = (lo / step).ceil();
    while k * step <= hi + 1e-9 * step {
        let v = k * step;
        out.push((v, format!("{v:.decimals$}")));
        k += 1.0;
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range<'a>(values: impl Iterator<Item = &'a f64>, axis: &Axis) -> Option<(f64, f64)> {
    values.filter(|v| axis.admits(**v)).fold(None, |acc, &v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

impl Chart {
    pub fn render(&self) -> String {
        let mut x = Axis { scale: self.x_scale, lo: 0.0, hi: 1.0, px_lo: LEFT, px_hi: WIDTH - RIGHT };
        let mut y = Axis { scale: self.y_scale, lo: 0.0, hi: 1.0, px_lo: HEIGHT - BOTTOM, px_hi: TOP };
        let solid = || self.series.iter().filter(|s| !s.dotted).flat_map(|s| s.points.iter());
        if let Some((lo, hi)) = range(solid().map(|(a, _)| a), &x) {
            x.lo = lo;
            x.hi = if hi > lo { hi } else { lo + 1.0 };
        }
        if let Some((lo, hi)) = range(solid().map(|(_, b)| b), &y) {
            match self.y_scale {
                Scale::Linear => {
                    y.lo = lo.min(0.0);
                    y.hi = if hi > y.lo { hi * 1.05 } else { y.lo + 1.0 };
                }
                Scale::Log => {
                    y.lo = lo;
                    y.hi = if hi > lo { hi } else { lo * 10.0 };
                }
            }
        }

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            s,
            r#"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{}" height="{}"/></clipPath></defs>"#,
            WIDTH - LEFT - RIGHT,
            HEIGHT - TOP - BOTTOM
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            (LEFT + WIDTH - RIGHT) / 2.0,
            escape(&self.title)
        );

        // axes and ticks
        let _ = writeln!(
            s,
            r#"<path d="M{LEFT},{TOP} V{} H{}" fill="none" stroke="black"/>"#,
            HEIGHT - BOTTOM,
            WIDTH - RIGHT
        );
        for (v, label) in x.ticks() {
            let px = x.map(v);
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{b5}" stroke="black"/><text x="{px:.2}" y="{b18}" text-anchor="middle">{label}</text>"#,
                b = HEIGHT - BOTTOM,
                b5 = HEIGHT - BOTTOM + 5.0,
                b18 = HEIGHT - BOTTOM + 18.0
            );
        }
        for (v, label) in y.ticks() {
            let py = y.map(v);
            let _ = writeln!(
                s,
                r#"<line x1="{l5}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{l8}" y="{py4:.2}" text-anchor="end">{label}</text>"#,
                l5 = LEFT - 5.0,
                l8 = LEFT - 8.0,
                py4 = py + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (LEFT + WIDTH - RIGHT) / 2.0,
            HEIGHT - 18.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="20" y="{c}" text-anchor="middle" transform="rotate(-90 20 {c})">{}</text>"#,
            escape(&self.y_label),
            c = (TOP + HEIGHT - BOTTOM) / 2.0
        );

        // curves, split wherever a point cannot be drawn on the axes
        let _ = writeln!(s, r#"<g clip-path="url(#plot)" fill="none" stroke-width="1.8">"#);
        for series in &self.series {
            let dash = if series.dotted { r#" stroke-dasharray="2,4""# } else { "" };
            let mut segment: Vec<String> = Vec::new();
            let flush = |segment: &mut Vec<String>, s: &mut String| {
                if segment.len() > 1 {
                    let _ = writeln!(
                        s,
                        r#"<polyline stroke="{}"{dash} points="{}"/>"#,
                        series.color,
                        segment.join(" ")
                    );
                }
                segment.clear();
            };
            for &(a, b) in &series.points {
                if x.admits(a) && y.admits(b) {
                    segment.push(format!("{:.2},{:.2}", x.map(a), y.map(b)));
                } else {
                    flush(&mut segment, &mut s);
                }
            }
            flush(&mut segment, &mut s);
        }
        let _ = writeln!(s, "</g>");

        // legend
        for (i, series) in self.series.iter().enumerate() {
            let ly = TOP + 10.0 + 20.0 * i as f64;
            let lx = WIDTH - RIGHT + 15.0;
            let dash = if series.dotted { r#" stroke-dasharray="2,4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="1.8"{dash}/><text x="{}" y="{}">{}</text>"#,
                lx + 25.0,
                series.color,
                lx + 32.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_ticks_are_round() {
        let t = linear_ticks(0.0, 1.0);
        assert_eq!(t.first().unwrap().1, "0.0");
        assert_eq!(t.last().unwrap().1, "1.0");
        let t = linear_ticks(1.0, 100.0);
        assert!(t.iter().all(|(v, _)| v % 20.0 == 0.0));
    }

    #[test]
    fn splits_undrawable_points() {
        let chart = Chart {
            title: "a < b".into(),
            x_label: "t".into(),
            y_label: "rate".into(),
            x_scale: Scale::Log,
            y_scale: Scale::Log,
            series: vec![Series {
                label: "x".into(),
                color: "black",
                dotted: false,
                points: vec![(1.0, 1.0), (2.0, 2.0), (3.0, -1.0), (4.0, 4.0), (5.0, 5.0)],
            }],
        };
        let svg = chart.render();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt; b"));
    }
}
