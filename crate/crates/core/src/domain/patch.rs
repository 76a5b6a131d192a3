//! Local graph representation of the boundary: in the frame (e₁,…,e_m) at P
//! the domain is {y_m > f(y′), |y| < δ}.

use crate::geometry::{from_frame, to_frame, Point};

#[derive(Clone, Debug, PartialEq)]
pub struct GraphPatch {
    pub origin: Point,
    /// `dim` orthonormal vectors; the last one is the good direction.
    pub frame: Vec<Point>,
    pub delta: f64,
    /// Nodes per transverse axis, spanning [−δ, δ].
    pub resolution: usize,
    /// Row-major heights (first transverse axis fastest).
    pub values: Vec<f64>,
}

impl GraphPatch {
    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    pub fn direction(&self) -> Point {
        *self.frame.last().unwrap()
    }

    pub fn local(&self, x: &Point) -> Point {
        to_frame(x, &self.origin, &self.frame)
    }

    pub fn global(&self, y: &Point) -> Point {
        from_frame(y, &self.origin, &self.frame)
    }

    pub fn contains(&self, x: &Point) -> bool {
        (x - self.origin).norm_squared() < self.delta * self.delta
    }

    /// Transverse coordinate of grid node `i` along one axis.
    pub fn node(&self, i: usize) -> f64 {
        -self.delta + 2.0 * self.delta * i as f64 / (self.resolution - 1) as f64
    }

    /// Transverse coordinates of flat grid index `k`.
    pub fn node_coords(&self, k: usize) -> Point {
        let r = self.resolution;
        if self.dim() == 2 {
            Point::new(self.node(k), 0.0, 0.0)
        } else {
            Point::new(self.node(k % r), self.node(k / r), 0.0)
        }
    }

    pub fn node_count(&self) -> usize {
        self.resolution.pow(self.dim() as u32 - 1)
    }

    /// Piecewise-multilinear height at transverse coordinates `y` (first
    /// m−1 components used). Zero outside the grid square.
    pub fn height(&self, y: &Point) -> f64 {
        let r = self.resolution;
        let h = 2.0 * self.delta / (r - 1) as f64;
        let locate = |v: f64| -> Option<(usize, f64)> {
            let u = (v + self.delta) / h;
            if !(0.0..=(r - 1) as f64).contains(&u) {
                return None;
            }
            let i = (u.floor() as usize).min(r - 2);
            Some((i, u - i as f64))
        };
        if self.dim() == 2 {
            match locate(y.x) {
                Some((i, t)) => self.values[i] * (1.0 - t) + self.values[i + 1] * t,
                None => 0.0,
            }
        } else {
            match (locate(y.x), locate(y.y)) {
                (Some((i, s)), Some((j, t))) => {
                    let v = |a: usize, b: usize| self.values[a + r * b];
                    (1.0 - s) * (1.0 - t) * v(i, j)
                        + s * (1.0 - t) * v(i + 1, j)
                        + (1.0 - s) * t * v(i, j + 1)
                        + s * t * v(i + 1, j + 1)
                }
                _ => 0.0,
            }
        }
    }

    /// Patch-side classification: interior iff y_m > f(y′). Only meaningful
    /// inside the ball.
    pub fn is_interior(&self, x: &Point) -> bool {
        let y = self.local(x);
        let m = self.dim() - 1;
        y[m] > self.height(&y)
    }

    /// Boundary points (y′, f(y′)) at grid nodes lying inside the ball.
    pub fn boundary_nodes(&self) -> Vec<Point> {
        let m = self.dim() - 1;
        (0..self.node_count())
            .filter_map(|k| {
                let mut y = self.node_coords(k);
                y[m] = self.values[k];
                (y.norm() < self.delta).then(|| self.global(&y))
            })
            .collect()
    }

    /// Boundary points of the patch graph on a transverse grid of the given
    /// spacing (used for sampling and for patch-union meshes).
    pub fn graph_points(&self, spacing: f64) -> Vec<Vec<Point>> {
        let m = self.dim() - 1;
        let n = ((2.0 * self.delta / spacing).ceil() as usize).max(2) + 1;
        let coord = |i: usize| -self.delta + 2.0 * self.delta * i as f64 / (n - 1) as f64;
        let mut rows = Vec::new();
        if m == 1 {
            let mut row = Vec::new();
            for i in 0..n {
                let mut y = Point::new(coord(i), 0.0, 0.0);
                y[1] = self.height(&y);
                if y.norm() < self.delta {
                    row.push(self.global(&y));
                } else if !row.is_empty() {
                    rows.push(std::mem::take(&mut row));
                }
            }
            if !row.is_empty() {
                rows.push(row);
            }
        } else {
            for j in 0..n {
                let mut row = Vec::new();
                for i in 0..n {
                    let mut y = Point::new(coord(i), coord(j), 0.0);
                    y[2] = self.height(&y);
                    if y.norm() < self.delta {
                        row.push(self.global(&y));
                    }
                }
                rows.push(row);
            }
        }
        rows
    }

    /// Max deviation of the frame from orthonormality.
    pub fn frame_error(&self) -> f64 {
        let mut e = 0.0f64;
        for (i, a) in self.frame.iter().enumerate() {
            for (j, b) in self.frame.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                e = e.max((a.dot(b) - want).abs());
            }
        }
        e
    }

    pub fn transformed(&self, rot: &nalgebra::Matrix3<f64>) -> GraphPatch {
        GraphPatch {
            origin: rot * self.origin,
            frame: self.frame.iter().map(|e| rot * e).collect(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{frame_from_normal, p2};

    #[test]
    fn linear_interpolation_is_exact_for_affine_heights() {
        let frame = frame_from_normal(&p2(0.0, 1.0), 2);
        let r = 9;
        let delta = 0.5;
        let node = |i: usize| -delta + 2.0 * delta * i as f64 / (r - 1) as f64;
        let values = (0..r).map(|i| 0.3 * node(i)).collect();
        let p = GraphPatch { origin: p2(1.0, 1.0), frame, delta, resolution: r, values };
        assert!((p.height(&p2(0.123, 0.0)) - 0.0369).abs() < 1e-15);
        assert!(p.frame_error() < 1e-15);
        // Point above the line y = 0.3x is interior.
        let x = p.global(&p2(0.1, 0.2));
        assert!(p.is_interior(&x));
        assert!(!p.is_interior(&p.global(&p2(0.1, 0.0))));
    }
}
