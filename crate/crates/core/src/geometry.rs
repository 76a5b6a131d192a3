//! Small vector helpers shared by every module. Points live in ℝ³; planar
//! domains use `z = 0` and carry their dimension separately.

use nalgebra::{Matrix3, Vector3};

pub type Point = Vector3<f64>;

pub fn p2(x: f64, y: f64) -> Point {
    Point::new(x, y, 0.0)
}

pub fn p3(x: f64, y: f64, z: f64) -> Point {
    Point::new(x, y, z)
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Point::repeat(f64::INFINITY),
            max: Point::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a, I: IntoIterator<Item = &'a Point>>(pts: I) -> Self {
        let mut b = Self::empty();
        for p in pts {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Point) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, o: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&o.min), max: self.max.sup(&o.max) }
    }

    pub fn inflate(&self, r: f64) -> Aabb {
        Aabb { min: self.min.add_scalar(-r), max: self.max.add_scalar(r) }
    }

    pub fn center(&self) -> Point {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Point {
        self.max - self.min
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance2(&self, p: &Point) -> f64 {
        let mut s = 0.0;
        for k in 0..3 {
            let v = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            s += v * v;
        }
        s
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn circumradius(&self) -> f64 {
        0.5 * self.extent().norm()
    }
}

/// Orthonormal frame whose last used axis is `n`. For `dim = 2` the frame is
/// `[e1, n]` with `e1` the clockwise perpendicular; for `dim = 3` it is
/// `[e1, e2, n]`, right-handed.
pub fn frame_from_normal(n: &Point, dim: usize) -> Vec<Point> {
    let n = n.normalize();
    if dim == 2 {
        vec![p2(n.y, -n.x), n]
    } else {
        // Branchless construction (Duff et al.).
        let s = if n.z >= 0.0 { 1.0 } else { -1.0 };
        let a = -1.0 / (s + n.z);
        let b = n.x * n.y * a;
        let e1 = p3(1.0 + s * n.x * n.x * a, s * b, -s * n.x);
        let e2 = p3(b, s + n.y * n.y * a, -n.y);
        vec![e1, e2, n]
    }
}

/// Coordinates of `x` in the frame anchored at `origin`.
pub fn to_frame(x: &Point, origin: &Point, frame: &[Point]) -> Point {
    let v = x - origin;
    let mut y = Point::zeros();
    for (k, e) in frame.iter().enumerate() {
        y[k] = v.dot(e);
    }
    y
}

pub fn from_frame(y: &Point, origin: &Point, frame: &[Point]) -> Point {
    let mut x = *origin;
    for (k, e) in frame.iter().enumerate() {
        x += e * y[k];
    }
    x
}

/// Angle between two unit vectors, robust near 0 and π.
pub fn angle_between(a: &Point, b: &Point) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Direction grid on S^{m-1}. Uniform angles in 2D (starting at angle 0),
/// a Fibonacci lattice in 3D with mean spacing close to `res`.
pub fn sphere_grid(dim: usize, res: f64) -> Vec<Point> {
    assert!(res > 0.0);
    if dim == 2 {
        let n = ((2.0 * std::f64::consts::PI / res) - 1e-9).ceil().max(4.0) as usize;
        (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                p2(t.cos(), t.sin())
            })
            .collect()
    } else {
        // Area per point of a hexagonal packing with spacing res.
        let n = (4.0 * std::f64::consts::PI / (res * res * 3f64.sqrt() / 2.0)).ceil().max(12.0) as usize;
        fibonacci_sphere(n)
    }
}

pub fn fibonacci_sphere(n: usize) -> Vec<Point> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let t = golden * i as f64;
            p3(r * t.cos(), r * t.sin(), z)
        })
        .collect()
}

/// Typical nearest-neighbour angle of `sphere_grid(dim, res)`.
pub fn sphere_grid_spacing(dim: usize, res: f64) -> f64 {
    let g = sphere_grid(dim, res);
    if dim == 2 {
        2.0 * std::f64::consts::PI / g.len() as f64
    } else {
        (4.0 * std::f64::consts::PI / (g.len() as f64 * 3f64.sqrt() / 2.0)).sqrt()
    }
}

/// Rotation about a unit axis (Rodrigues).
pub fn rotation(axis: &Point, angle: f64) -> Matrix3<f64> {
    let a = axis.normalize();
    nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_unchecked(a), angle).into_inner()
}

/// Smooth step from 0 (s ≤ 0) to 1 (s ≥ 1) built from the standard
/// exp(-1/x) construction; C^∞ everywhere.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / s).exp();
        let b = (-1.0 / (1.0 - s)).exp();
        a / (a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn frames_are_orthonormal() {
        for n in [p3(0.0, 0.0, 1.0), p3(0.0, 0.0, -1.0), p3(1.0, 2.0, -0.3), p3(-1e-9, 1.0, 0.0)] {
            let f = frame_from_normal(&n, 3);
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((f[i].dot(&f[j]) - want).abs() < 1e-12);
                }
            }
            assert_relative_eq!(f[0].cross(&f[1]), f[2], epsilon = 1e-12);
        }
        let f = frame_from_normal(&p2(0.6, 0.8), 2);
        assert!(f[0].dot(&f[1]).abs() < 1e-15);
        let y = to_frame(&p2(1.0, 2.0), &p2(0.5, 0.5), &f);
        assert_relative_eq!(from_frame(&y, &p2(0.5, 0.5), &f), p2(1.0, 2.0), epsilon = 1e-14);
    }

    #[test]
    fn sphere_grids() {
        let g = sphere_grid(2, 5f64.to_radians());
        assert_eq!(g.len(), 72);
        let g3 = sphere_grid(3, 5f64.to_radians());
        // Every direction of a dense probe set has a grid point within ~res.
        let probe = fibonacci_sphere(997);
        for p in &probe {
            let best = g3.iter().map(|q| angle_between(p, q)).fold(f64::MAX, f64::min);
            assert!(best < 5f64.to_radians());
        }
    }

    #[test]
    fn smooth_step_is_monotone() {
        let mut prev = 0.0;
        for k in 0..=100 {
            let v = smooth_step(k as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(smooth_step(0.5), 0.5);
    }
}
