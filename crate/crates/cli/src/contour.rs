//! Marching-squares contours of the meridional stream function rendered as SVG.

use std::fmt::Write as _;

use vortex_ring::domain::W_MIN;
use vortex_ring::{Grid, MeridionalDomain};

/// A contour segment in continuous cell-index coordinates `(i, j)`.
pub type Segment = [(f64, f64); 2];

/// Level set `values == level` of a field sampled on an `nx` by `ny` lattice
/// (row-major in `i`, so `values[i * ny + j]`). Squares touching a NaN are skipped.
pub fn marching_squares(values: &[f64], nx: usize, ny: usize, level: f64) -> Vec<Segment> {
    let at = |i: usize, j: usize| values[i * ny + j] - level;
    let cross = |p: (f64, f64), q: (f64, f64), a: f64, b: f64| {
        let t = a / (a - b);
        (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
    };
    let mut out = Vec::new();
    for i in 0..nx.saturating_sub(1) {
        for j in 0..ny.saturating_sub(1) {
            // corners counter-clockwise from (i, j)
            let c = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            if c.iter().any(|v| v.is_nan()) {
                continue;
            }
            let p = [
                (i as f64, j as f64),
                ((i + 1) as f64, j as f64),
                ((i + 1) as f64, (j + 1) as f64),
                (i as f64, (j + 1) as f64),
            ];
            let mut hits = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (c[e], c[(e + 1) % 4]);
                if (a > 0.0) != (b > 0.0) {
                    hits.push((e, cross(p[e], p[(e + 1) % 4], a, b)));
                }
            }
            match hits.len() {
                2 => out.push([hits[0].1, hits[1].1]),
                4 => {
                    // saddle: the centre value decides which pairs connect
                    let centre = c.iter().sum::<f64>() / 4.0;
                    let (h0, h1, h2, h3) = (hits[0].1, hits[1].1, hits[2].1, hits[3].1);
                    if (centre > 0.0) == (c[0] > 0.0) {
                        out.push([h0, h1]);
                        out.push([h2, h3]);
                    } else {
                        out.push([h3, h0]);
                        out.push([h1, h2]);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Everything drawn in one contour plot.
pub struct ContourPlot<'a> {
    pub grid: &'a Grid,
    /// ψ_λ; the zero level is the core boundary.
    pub psi: &'a [f64],
    /// Core weights in [0, 1]; cells above zero are shaded.
    pub weights: &'a [f64],
    pub r_star: Option<f64>,
    pub title: String,
    /// Generation time for the SVG metadata; `None` keeps the output reproducible.
    pub timestamp: Option<u64>,
}

const WIDTH: f64 = 480.0;
const MARGIN: f64 = 40.0;
const LEVELS: usize = 14;

impl ContourPlot<'_> {
    pub fn render(&self) -> String {
        let g = self.grid;
        let scale = WIDTH / g.window.r_max;
        let height = (2.0 * g.window.z_max * scale).min(4.0 * WIDTH);
        let scale = scale.min(height / (2.0 * g.window.z_max));
        let x = |r: f64| MARGIN + r * scale;
        let y = |z: f64| MARGIN + (g.window.z_max - z) * scale;
        let (w_px, h_px) = (g.window.r_max * scale + 2.0 * MARGIN, 2.0 * g.window.z_max * scale + 2.0 * MARGIN);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w_px:.0}" height="{h_px:.0}" viewBox="0 0 {w_px:.0} {h_px:.0}">"#
        );
        if let Some(t) = self.timestamp {
            let _ = writeln!(s, "<metadata>generated {t} s since epoch</metadata>");
        }
        let _ = writeln!(s, "<title>{}</title>", escape(&self.title));
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#ffffff" stroke="#000000" stroke-width="0.8"/>"##,
            x(0.0),
            y(g.window.z_max),
            g.window.r_max * scale,
            2.0 * g.window.z_max * scale
        );
        self.domain_outline(&mut s, &x, &y, scale);

        // Ω_λ: one rectangle per core cell, opacity by weight
        let _ = writeln!(s, r##"<g id="core" fill="#d95f02" stroke="none">"##);
        for k in 0..g.len() {
            let wk = self.weights[k];
            if wk > W_MIN && g.is_active(k) {
                let (r, z) = g.center(k);
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill-opacity="{:.3}"/>"#,
                    x(r - 0.5 * g.h_r),
                    y(z + 0.5 * g.h_z),
                    g.h_r * scale,
                    g.h_z * scale,
                    wk.min(1.0)
                );
            }
        }
        let _ = writeln!(s, "</g>");

        let masked: Vec<f64> = (0..g.len()).map(|k| if g.is_active(k) { self.psi[k] } else { f64::NAN }).collect();
        let to_px = |(i, j): (f64, f64)| (x((i + 0.5) * g.h_r), y(-g.window.z_max + (j + 0.5) * g.h_z));
        let _ = writeln!(s, r##"<g id="contours" fill="none" stroke="#1b5e9a" stroke-width="0.7">"##);
        for level in self.levels(&masked) {
            let segs = marching_squares(&masked, g.n_r, g.n_z, level);
            if segs.is_empty() {
                continue;
            }
            let mut d = String::new();
            for [a, b] in segs {
                let (a, b) = (to_px(a), to_px(b));
                let _ = write!(d, "M{:.2} {:.2}L{:.2} {:.2}", a.0, a.1, b.0, b.1);
            }
            let extra = if level == 0.0 { r##" stroke="#000000" stroke-width="1.4""## } else { "" };
            let _ = writeln!(s, r#"<path data-level="{level:.6e}"{extra} d="{d}"/>"#);
        }
        let _ = writeln!(s, "</g>");

        // the circle C_{r*} meets the meridional plane in the point (r*, 0)
        if let Some(rs) = self.r_star.filter(|&rs| rs <= g.window.r_max) {
            let (cx, cy) = (x(rs), y(0.0));
            let _ = writeln!(
                s,
                r##"<g id="r-star" stroke="#7b3294" stroke-width="1.2"><line x1="{:.2}" y1="{cy:.2}" x2="{:.2}" y2="{cy:.2}"/><line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}"/><text x="{:.2}" y="{:.2}" font-size="11" stroke="none" fill="#7b3294">r* = {rs:.4}</text></g>"##,
                cx - 6.0,
                cx + 6.0,
                cy - 6.0,
                cy + 6.0,
                cx + 8.0,
                cy - 8.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN}" y="{:.2}" font-size="12">{}</text>"#,
            MARGIN - 14.0,
            escape(&self.title)
        );
        let _ = writeln!(s, "</svg>");
        s
    }

    /// Zero plus evenly spaced levels on each side of it.
    fn levels(&self, values: &[f64]) -> Vec<f64> {
        let (lo, hi) = values
            .iter()
            .filter(|v| v.is_finite())
            .fold((0.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let mut out = vec![0.0];
        let half = LEVELS / 2;
        for k in 1..=half {
            let t = k as f64 / (half + 1) as f64;
            if hi > 0.0 {
                out.push(t * hi);
            }
            if lo < 0.0 {
                out.push(t * lo);
            }
        }
        out
    }

    fn domain_outline(&self, s: &mut String, x: &dyn Fn(f64) -> f64, y: &dyn Fn(f64) -> f64, scale: f64) {
        let style = r##"fill="none" stroke="#555555" stroke-width="1" stroke-dasharray="4 3""##;
        match self.grid.domain {
            MeridionalDomain::Disk { b: radius } | MeridionalDomain::ExteriorBall { d: radius } => {
                let _ = writeln!(
                    s,
                    r#"<path {style} d="M{:.2} {:.2}A{:.2} {:.2} 0 0 1 {:.2} {:.2}"/>"#,
                    x(0.0),
                    y(radius),
                    radius * scale,
                    radius * scale,
                    x(0.0),
                    y(-radius)
                );
            }
            MeridionalDomain::Pipe { d } => {
                let _ = writeln!(
                    s,
                    r#"<line {style} x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
                    x(d),
                    y(self.grid.window.z_max),
                    x(d),
                    y(-self.grid.window.z_max)
                );
            }
            MeridionalDomain::Rectangle { b, c } => {
                let _ = writeln!(
                    s,
                    r#"<rect {style} x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                    x(0.0),
                    y(c),
                    b * scale,
                    2.0 * c * scale
                );
            }
            MeridionalDomain::HalfPlane => {}
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use vortex_ring::TruncationBox;

    #[test]
    fn linear_field_gives_a_straight_level() {
        let (nx, ny) = (10, 8);
        let v: Vec<f64> = (0..nx * ny).map(|k| (k / ny) as f64).collect();
        let segs = marching_squares(&v, nx, ny, 3.5);
        assert_eq!(segs.len(), ny - 1);
        for [a, b] in segs {
            assert!((a.0 - 3.5).abs() < 1e-12 && (b.0 - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_level_lies_on_the_circle() {
        let n = 64;
        let c = 31.5;
        let v: Vec<f64> = (0..n * n)
            .map(|k| {
                let (i, j) = ((k / n) as f64 - c, (k % n) as f64 - c);
                (i * i + j * j).sqrt()
            })
            .collect();
        let segs = marching_squares(&v, n, n, 20.0);
        assert!(segs.len() > 100);
        for p in segs.iter().flatten() {
            let rho = ((p.0 - c).powi(2) + (p.1 - c).powi(2)).sqrt();
            assert!((rho - 20.0).abs() < 0.05, "point at radius {rho}");
        }
        // closed curve: every endpoint is shared by exactly two segments
        let key = |p: &(f64, f64)| ((p.0 * 1e6).round() as i64, (p.1 * 1e6).round() as i64);
        let mut counts = std::collections::HashMap::new();
        for p in segs.iter().flatten() {
            *counts.entry(key(p)).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c == 2));
    }

    #[test]
    fn nan_squares_are_skipped() {
        let v = vec![0.0, 1.0, f64::NAN, 1.0];
        assert!(marching_squares(&v, 2, 2, 0.5).is_empty());
    }

    #[test]
    fn svg_is_deterministic_and_marks_r_star() {
        let g = Grid::build(MeridionalDomain::Disk { b: 1.0 }, TruncationBox::new(1.0, 1.0), 16, 32).unwrap();
        let psi: Vec<f64> = (0..g.len())
            .map(|k| {
                let (r, z) = g.center(k);
                0.01 - (r - 0.5).powi(2) - z * z
            })
            .collect();
        let weights: Vec<f64> = psi.iter().map(|&p| if p > 0.0 { 1.0 } else { 0.0 }).collect();
        let plot = ContourPlot {
            grid: &g,
            psi: &psi,
            weights: &weights,
            r_star: Some(0.5),
            title: "test <plot>".into(),
            timestamp: None,
        };
        let a = plot.render();
        assert_eq!(a, plot.render());
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(a.contains("id=\"r-star\"") && a.contains("data-level=\"0.000000e0\""));
        assert!(a.contains("test &lt;plot&gt;") && !a.contains("<metadata>"));
    }
}
