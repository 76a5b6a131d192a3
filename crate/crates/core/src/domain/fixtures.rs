//! Analytic test domains: classifier, boundary mesh and atlas candidates.

use crate::geometry::{p2, p3, smooth_step, Point};
use crate::mesh::{torus_point, BoundaryMesh, TriMesh};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FixtureId {
    UnitDisk,
    /// [0,1]².
    UnitSquare,
    /// {inner < |x| < 1}.
    Annulus { inner: f64 },
    Ball3D,
    SolidTorus { major: f64, minor: f64 },
    /// {|x| < 1, W(x) < y < 1} with W a truncated Weierstrass series
    /// A Σ_{n≤N} aⁿ cos(bⁿπx), smoothly cut off for 0.6 ≤ |x| ≤ 0.8.
    WeierstrassDomain { a: f64, b: f64, n: u32, amplitude: f64 },
    /// B(0,1) ∖ closed B((0,½),½): the two boundary circles touch.
    KissingDisks,
    /// B(0,1) minus the closed balls B((1 − 1/j)e₁, 1/(3j²)), j = 1..k.
    BallChain { k: u32 },
    /// The box [−5,5]×[0,10]; near the origin it is the half-plane {y > 0}.
    HalfPlane,
}

impl FixtureId {
    pub const NAMES: [&'static str; 9] = [
        "UnitDisk",
        "UnitSquare",
        "Annulus",
        "Ball3D",
        "SolidTorus",
        "WeierstrassDomain",
        "KissingDisks",
        "BallChain",
        "HalfPlane",
    ];

    pub fn annulus() -> Self {
        FixtureId::Annulus { inner: 0.5 }
    }

    pub fn solid_torus() -> Self {
        FixtureId::SolidTorus { major: 2.0, minor: 1.0 }
    }

    pub fn weierstrass() -> Self {
        FixtureId::WeierstrassDomain { a: 0.6, b: 5.0, n: 5, amplitude: 0.08 }
    }

    pub fn ball_chain(k: u32) -> Self {
        FixtureId::BallChain { k }
    }

    /// Parse a fixture name (case-insensitive, `-`/`_` ignored) with default
    /// parameters.
    pub fn from_name(s: &str) -> Option<Self> {
        let key: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        Some(match key.as_str() {
            "unitdisk" | "disk" => FixtureId::UnitDisk,
            "unitsquare" | "square" => FixtureId::UnitSquare,
            "annulus" => Self::annulus(),
            "ball3d" | "ball" => FixtureId::Ball3D,
            "solidtorus" | "torus" => Self::solid_torus(),
            "weierstrassdomain" | "weierstrass" => Self::weierstrass(),
            "kissingdisks" => FixtureId::KissingDisks,
            "ballchain" => Self::ball_chain(3),
            "halfplane" => FixtureId::HalfPlane,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            FixtureId::UnitDisk => "UnitDisk",
            FixtureId::UnitSquare => "UnitSquare",
            FixtureId::Annulus { .. } => "Annulus",
            FixtureId::Ball3D => "Ball3D",
            FixtureId::SolidTorus { .. } => "SolidTorus",
            FixtureId::WeierstrassDomain { .. } => "WeierstrassDomain",
            FixtureId::KissingDisks => "KissingDisks",
            FixtureId::BallChain { .. } => "BallChain",
            FixtureId::HalfPlane => "HalfPlane",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FixtureId::Ball3D | FixtureId::SolidTorus { .. } => 3,
            _ => 2,
        }
    }

    /// Fixtures used only as counterexamples; collar-dependent operations
    /// reject them.
    pub fn is_pathological(&self) -> bool {
        matches!(self, FixtureId::KissingDisks | FixtureId::BallChain { .. })
    }

    pub fn default_spacing(&self) -> f64 {
        match self {
            FixtureId::Ball3D => 0.04,
            FixtureId::SolidTorus { minor, .. } => 0.035 * minor,
            FixtureId::WeierstrassDomain { .. } => 1e-3,
            FixtureId::HalfPlane => 0.01,
            _ => 2e-3,
        }
    }

    /// Exact interior test.
    pub fn inside(&self, x: &Point) -> bool {
        match self {
            FixtureId::UnitDisk => x.x * x.x + x.y * x.y < 1.0,
            FixtureId::UnitSquare => x.x > 0.0 && x.x < 1.0 && x.y > 0.0 && x.y < 1.0,
            FixtureId::Annulus { inner } => {
                let r2 = x.x * x.x + x.y * x.y;
                r2 < 1.0 && r2 > inner * inner
            }
            FixtureId::Ball3D => x.norm_squared() < 1.0,
            FixtureId::SolidTorus { major, minor } => {
                let q = x.x.hypot(x.y) - major;
                q * q + x.z * x.z < minor * minor
            }
            FixtureId::WeierstrassDomain { .. } => {
                x.x.abs() < 1.0 && x.y < 1.0 && x.y > self.weierstrass_height(x.x)
            }
            FixtureId::KissingDisks => {
                x.x * x.x + x.y * x.y < 1.0 && x.x * x.x + (x.y - 0.5) * (x.y - 0.5) > 0.25
            }
            FixtureId::BallChain { k } => {
                if x.x * x.x + x.y * x.y >= 1.0 {
                    return false;
                }
                (1..=*k).all(|j| {
                    let (c, r) = chain_ball(j);
                    (x.x - c).powi(2) + x.y * x.y > r * r
                })
            }
            FixtureId::HalfPlane => x.x > -5.0 && x.x < 5.0 && x.y > 0.0 && x.y < 10.0,
        }
    }

    /// Lower graph of the Weierstrass fixture.
    pub fn weierstrass_height(&self, x: f64) -> f64 {
        match self {
            FixtureId::WeierstrassDomain { a, b, n, amplitude } => {
                let c = 1.0 - smooth_step((x.abs() - 0.6) / 0.2);
                if c == 0.0 {
                    return 0.0;
                }
                let mut s = 0.0;
                let (mut an, mut bn) = (1.0, 1.0);
                for _ in 0..=*n {
                    s += an * (bn * PI * x).cos();
                    an *= a;
                    bn *= b;
                }
                c * amplitude * s
            }
            _ => 0.0,
        }
    }

    fn weierstrass_slope(&self, x: f64) -> f64 {
        let h = 1e-7;
        (self.weierstrass_height(x + h) - self.weierstrass_height(x - h)) / (2.0 * h)
    }

    /// Piecewise-linear boundary with vertex spacing at most `h`.
    pub fn boundary_mesh(&self, h: f64) -> BoundaryMesh {
        match self {
            FixtureId::Ball3D => {
                let mut level = 0;
                while 1.05 / f64::powi(2.0, level as i32) > h && level < 8 {
                    level += 1;
                }
                let s = TriMesh::icosphere(level);
                BoundaryMesh::from_triangles(s.vertices, s.triangles)
            }
            FixtureId::SolidTorus { major, minor } => {
                let nt = ((2.0 * PI * (major + minor) / h).ceil() as usize).max(8);
                let np = ((2.0 * PI * minor / h).ceil() as usize).max(8);
                let t = TriMesh::torus(*major, *minor, nt, np);
                BoundaryMesh::from_triangles(t.vertices, t.triangles)
            }
            _ => BoundaryMesh::from_loops(&self.boundary_loops(h)),
        }
    }

    /// Closed boundary curves (2D fixtures), interior on the left.
    pub fn boundary_loops(&self, h: f64) -> Vec<Vec<Point>> {
        match self {
            FixtureId::UnitDisk => vec![circle(p2(0.0, 0.0), 1.0, h, true)],
            FixtureId::UnitSquare => vec![box_loop(0.0, 1.0, 0.0, 1.0, h)],
            FixtureId::HalfPlane => vec![box_loop(-5.0, 5.0, 0.0, 10.0, h)],
            FixtureId::Annulus { inner } => {
                vec![circle(p2(0.0, 0.0), 1.0, h, true), circle(p2(0.0, 0.0), *inner, h, false)]
            }
            FixtureId::KissingDisks => {
                // Both circles start at the tangency point (0,1).
                let outer = arc_loop(p2(0.0, 0.0), 1.0, PI / 2.0, h, true);
                let inner = arc_loop(p2(0.0, 0.5), 0.5, PI / 2.0, h, false);
                vec![outer, inner]
            }
            FixtureId::BallChain { k } => {
                let mut v = vec![circle(p2(0.0, 0.0), 1.0, h, true)];
                for j in 1..=*k {
                    let (c, r) = chain_ball(j);
                    v.push(circle(p2(c, 0.0), r, h.min(r / 8.0), false));
                }
                v
            }
            FixtureId::WeierstrassDomain { .. } => vec![self.weierstrass_loop(h)],
            FixtureId::Ball3D | FixtureId::SolidTorus { .. } => Vec::new(),
        }
    }

    fn weierstrass_loop(&self, h: f64) -> Vec<Point> {
        let mut pts = Vec::new();
        // Lower graph, arc-length adaptive.
        let mut x = -1.0;
        while x < 1.0 {
            pts.push(p2(x, self.weierstrass_height(x)));
            let s0 = self.weierstrass_slope(x);
            let mut dx = (h / (1.0 + s0 * s0).sqrt()).min(1.0 - x);
            for _ in 0..60 {
                let dy = self.weierstrass_height(x + dx) - self.weierstrass_height(x);
                let len = dx.hypot(dy);
                if len <= h {
                    break;
                }
                dx *= 0.9 * h / len;
            }
            x += dx;
            if 1.0 - x < 1e-12 {
                break;
            }
        }
        let push_segment = |a: Point, b: Point, pts: &mut Vec<Point>| {
            let n = ((b - a).norm() / h).ceil().max(1.0) as usize;
            for i in 0..n {
                pts.push(a + (b - a) * (i as f64 / n as f64));
            }
        };
        push_segment(p2(1.0, 0.0), p2(1.0, 1.0), &mut pts);
        push_segment(p2(1.0, 1.0), p2(-1.0, 1.0), &mut pts);
        push_segment(p2(-1.0, 1.0), p2(-1.0, 0.0), &mut pts);
        pts
    }

    /// Candidate patch anchors: (point, candidate directions, initial δ).
    pub fn atlas_candidates(&self) -> Vec<(Point, Vec<Point>, f64)> {
        match self {
            FixtureId::UnitDisk => circle_candidates(p2(0.0, 0.0), 1.0, 256, true, 1.35),
            FixtureId::Annulus { inner } => {
                let mut v = circle_candidates(p2(0.0, 0.0), 1.0, 256, true, 0.6);
                v.extend(circle_candidates(p2(0.0, 0.0), *inner, 160, false, 0.6));
                v
            }
            FixtureId::UnitSquare => box_candidates(0.0, 1.0, 0.0, 1.0, 0.01, 0.95),
            FixtureId::HalfPlane => box_candidates(-5.0, 5.0, 0.0, 10.0, 0.1, 9.5),
            FixtureId::Ball3D => {
                let s = TriMesh::icosphere(3);
                s.vertices.iter().map(|p| (*p, vec![-p], 1.3)).collect()
            }
            FixtureId::SolidTorus { major, minor } => {
                let (nt, np) = (128, 48);
                let mut v = Vec::with_capacity(nt * np);
                for i in 0..nt {
                    let th = 2.0 * PI * i as f64 / nt as f64;
                    for j in 0..np {
                        let ph = 2.0 * PI * j as f64 / np as f64;
                        let p = torus_point(*major, *minor, th, ph);
                        let n = -p3(th.cos() * ph.cos(), th.sin() * ph.cos(), ph.sin());
                        v.push((p, vec![n], 1.3 * minor));
                    }
                }
                v
            }
            FixtureId::WeierstrassDomain { .. } => {
                let mut v = Vec::new();
                let diag = |sx: f64, sy: f64| p2(sx, sy).normalize();
                let step: f64 = 0.01;
                let nb = (2.0 / step).round() as usize;
                for i in 1..nb {
                    let x = -1.0 + i as f64 * step;
                    let p = p2(x, self.weierstrass_height(x));
                    let mut dirs = vec![p2(0.0, 1.0)];
                    if x.abs() > 0.7 {
                        dirs.push(diag(-x.signum(), 1.0));
                    }
                    v.push((p, dirs, 0.45));
                }
                for i in 1..((1.0 / step).round() as usize) {
                    let y = i as f64 * step;
                    let near_bottom = y < 0.5;
                    for sx in [-1.0, 1.0] {
                        let mut dirs = vec![p2(-sx, 0.0)];
                        dirs.push(if near_bottom { diag(-sx, 1.0) } else { diag(-sx, -1.0) });
                        v.push((p2(sx, y), dirs, 0.45));
                    }
                }
                for i in 1..nb {
                    let x = -1.0 + i as f64 * step;
                    let mut dirs = vec![p2(0.0, -1.0)];
                    if x.abs() > 0.5 {
                        dirs.push(diag(-x.signum(), -1.0));
                    }
                    v.push((p2(x, 1.0), dirs, 0.45));
                }
                for (cx, cy) in [(-1.0, 0.0), (1.0, 0.0), (1.0, 1.0), (-1.0, 1.0)] {
                    v.push((p2(cx, cy), vec![diag(-cx, 1.0 - 2.0 * cy)], 0.45));
                }
                v
            }
            FixtureId::KissingDisks | FixtureId::BallChain { .. } => Vec::new(),
        }
    }

    /// A box comfortably containing the closure.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            FixtureId::UnitSquare => (p2(0.0, 0.0), p2(1.0, 1.0)),
            FixtureId::HalfPlane => (p2(-5.0, 0.0), p2(5.0, 10.0)),
            FixtureId::Ball3D => (p3(-1.0, -1.0, -1.0), p3(1.0, 1.0, 1.0)),
            FixtureId::SolidTorus { major, minor } => {
                let r = major + minor;
                (p3(-r, -r, -minor), p3(r, r, *minor))
            }
            FixtureId::WeierstrassDomain { .. } => (p2(-1.0, -0.25), p2(1.0, 1.0)),
            _ => (p2(-1.0, -1.0), p2(1.0, 1.0)),
        }
    }

    /// Known Euler characteristic of the closed domain.
    pub fn euler_characteristic(&self) -> i64 {
        match self {
            FixtureId::Annulus { .. } => 0,
            FixtureId::SolidTorus { .. } => 0,
            FixtureId::KissingDisks => 0,
            FixtureId::BallChain { k } => 1 - *k as i64,
            _ => 1,
        }
    }
}

fn chain_ball(j: u32) -> (f64, f64) {
    let j = j as f64;
    (1.0 - 1.0 / j, 1.0 / (3.0 * j * j))
}

fn circle(c: Point, r: f64, h: f64, ccw: bool) -> Vec<Point> {
    arc_loop(c, r, 0.0, h, ccw)
}

fn arc_loop(c: Point, r: f64, start: f64, h: f64, ccw: bool) -> Vec<Point> {
    let n = ((2.0 * PI * r / h).ceil() as usize).max(8);
    let s = if ccw { 1.0 } else { -1.0 };
    (0..n)
        .map(|k| {
            let t = start + s * 2.0 * PI * k as f64 / n as f64;
            c + p2(r * t.cos(), r * t.sin())
        })
        .collect()
}

fn box_loop(x0: f64, x1: f64, y0: f64, y1: f64, h: f64) -> Vec<Point> {
    let corners = [p2(x0, y0), p2(x1, y0), p2(x1, y1), p2(x0, y1)];
    let mut pts = Vec::new();
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let n = ((b - a).norm() / h).ceil() as usize;
        for i in 0..n {
            pts.push(a + (b - a) * (i as f64 / n as f64));
        }
    }
    pts
}

fn circle_candidates(c: Point, r: f64, n: usize, outer: bool, delta: f64) -> Vec<(Point, Vec<Point>, f64)> {
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            let u = p2(t.cos(), t.sin());
            let dir = if outer { -u } else { u };
            (c + u * r, vec![dir], delta)
        })
        .collect()
}

fn box_candidates(x0: f64, x1: f64, y0: f64, y1: f64, step_frac: f64, delta: f64) -> Vec<(Point, Vec<Point>, f64)> {
    let w = x1 - x0;
    let h = y1 - y0;
    let step = step_frac * w.min(h) * 2.0;
    let corners = [p2(x0, y0), p2(x1, y0), p2(x1, y1), p2(x0, y1)];
    let inward = [p2(0.0, 1.0), p2(-1.0, 0.0), p2(0.0, -1.0), p2(1.0, 0.0)];
    let mut v = Vec::new();
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let len = (b - a).norm();
        let n = (len / step).round() as usize;
        for i in 1..n {
            let p = a + (b - a) * (i as f64 / n as f64);
            let ca = (p - a).norm();
            let cb = (p - b).norm();
            // Diagonal of the nearer corner as an alternative direction.
            let (corner_dir, _) = if ca <= cb {
                (inward[k] + inward[(k + 3) % 4], ca)
            } else {
                (inward[k] + inward[(k + 1) % 4], cb)
            };
            v.push((p, vec![inward[k], corner_dir.normalize()], delta));
        }
        let d = (inward[k] + inward[(k + 3) % 4]).normalize();
        v.push((a, vec![d], delta));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for n in FixtureId::NAMES {
            let f = FixtureId::from_name(n).unwrap();
            assert_eq!(f.name(), n);
        }
        assert!(FixtureId::from_name("Moebius").is_none());
    }

    #[test]
    fn weierstrass_loop_spacing() {
        let f = FixtureId::weierstrass();
        let l = &f.boundary_loops(2e-3)[0];
        let max = l.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max);
        assert!(max <= 2.05e-3, "max gap {max}");
        // Vertices on the graph lie exactly on the series.
        for p in l.iter().filter(|p| p.y < 0.99 && p.x.abs() < 0.99) {
            assert_eq!(p.y, f.weierstrass_height(p.x));
        }
        assert_eq!(f.weierstrass_height(0.85), 0.0);
    }

    #[test]
    fn ball_chain_balls_are_disjoint() {
        for j in 1..6 {
            let (c, r) = chain_ball(j);
            let (c2, r2) = chain_ball(j + 1);
            assert!(c + r < c2 - r2);
            assert!(c + r < 1.0);
        }
    }
}
