//! Minimal SVG output: polylines, points and arrow glyphs in a y-up frame.

use crate::geometry::{Aabb, Point};
use std::fmt::Write as _;

pub struct Svg {
    bbox: Aabb,
    scale: f64,
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    /// Canvas showing `bbox` (x, y only) with the longer side `size` pixels.
    pub fn new(bbox: Aabb, size: f64) -> Self {
        let e = bbox.extent();
        let scale = size / e.x.max(e.y).max(1e-12);
        Svg { bbox, scale, width: e.x * scale, height: e.y * scale, body: String::new() }
    }

    fn map(&self, p: &Point) -> (f64, f64) {
        ((p.x - self.bbox.min.x) * self.scale, (self.bbox.max.y - p.y) * self.scale)
    }

    pub fn polyline(&mut self, pts: &[Point], closed: bool, stroke: &str, width: f64) {
        if pts.is_empty() {
            return;
        }
        let mut d = String::new();
        for (i, p) in pts.iter().enumerate() {
            let (x, y) = self.map(p);
            let _ = write!(d, "{}{x:.2},{y:.2}", if i == 0 { "M" } else { " L" });
        }
        if closed {
            d.push_str(" Z");
        }
        let _ = writeln!(self.body, r#"<path d="{d}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#);
    }

    pub fn dot(&mut self, p: &Point, r: f64, fill: &str) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{fill}"/>"#);
    }

    /// Arrow from `p` along `v` (in domain units).
    pub fn arrow(&mut self, p: &Point, v: &Point, stroke: &str) {
        let q = p + v;
        let (x0, y0) = self.map(p);
        let (x1, y1) = self.map(&q);
        let (dx, dy) = (x1 - x0, y1 - y0);
        let len = dx.hypot(dy);
        if len < 1e-9 {
            return;
        }
        let (ux, uy) = (dx / len, dy / len);
        let head = 0.3 * len;
        let (hx1, hy1) = (x1 - head * (ux - 0.5 * uy), y1 - head * (uy + 0.5 * ux));
        let (hx2, hy2) = (x1 - head * (ux + 0.5 * uy), y1 - head * (uy - 0.5 * ux));
        let _ = writeln!(
            self.body,
            r#"<path d="M{x0:.2},{y0:.2} L{x1:.2},{y1:.2} M{hx1:.2},{hy1:.2} L{x1:.2},{y1:.2} L{hx2:.2},{hy2:.2}" fill="none" stroke="{stroke}" stroke-width="1"/>"#
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::p2;

    #[test]
    fn y_axis_points_up() {
        let mut s = Svg::new(Aabb::from_points([&p2(0.0, 0.0), &p2(1.0, 1.0)]), 100.0);
        s.dot(&p2(0.0, 1.0), 1.0, "black");
        let out = s.finish();
        assert!(out.contains(r#"cx="0.00" cy="0.00""#));
        assert!(out.starts_with("<svg"));
    }
}
