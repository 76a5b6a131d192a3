//! Gauss–Legendre rules, the standard bump, a ball rule for mollification in
//! 2D/3D, and exact-moment evaluation of mollified piecewise-linear functions.

use crate::geometry::{Point, p3};
use std::sync::OnceLock;

/// Unnormalised bump exp(1 − 1/(1 − r²)) for r² < 1, else 0. Equals 1 at 0.
#[inline]
pub fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    }
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Discrete mollifier on the unit ball: tensor Gauss–Legendre nodes masked to
/// |z| < 1, weighted by the bump and normalised to unit mass.
#[derive(Clone, Debug)]
pub struct BallRule {
    pub dim: usize,
    pub order: usize,
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    /// Relative difference of the raw mass against a rule of twice the order.
    pub mass_error: f64,
}

impl BallRule {
    pub fn new(dim: usize, order: usize) -> Self {
        let (nodes, weights, raw) = Self::raw(dim, order);
        let (_, _, fine) = Self::raw(dim, 2 * order);
        let weights = weights.iter().map(|w| w / raw).collect();
        BallRule { dim, order, nodes, weights, mass_error: ((raw - fine) / fine).abs() }
    }

    fn raw(dim: usize, order: usize) -> (Vec<Point>, Vec<f64>, f64) {
        let (x, w) = gauss_legendre(order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let zs: Vec<(f64, f64)> = if dim == 2 { vec![(0.0, 1.0)] } else { x.iter().copied().zip(w.iter().copied()).collect() };
        for (&xi, &wi) in x.iter().zip(&w) {
            for (&xj, &wj) in x.iter().zip(&w) {
                for &(xk, wk) in &zs {
                    let z = p3(xi, xj, xk);
                    let phi = bump(z.norm_squared());
                    if phi > 0.0 {
                        nodes.push(z);
                        weights.push(wi * wj * wk * phi);
                    }
                }
            }
        }
        let total: f64 = weights.iter().sum();
        (nodes, weights, total)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

const MOMENT_CELLS: usize = 4096;

/// Cumulative zeroth and first moments of the normalised 1D bump on [−1, 1],
/// tabulated and interpolated by cubic Hermite splines (the derivatives are
/// known exactly). `m0(1) = 1` and `m1(±1) = 0` hold exactly.
pub struct BumpMoments {
    h: f64,
    m0: Vec<f64>,
    m1: Vec<f64>,
    z: f64,
}

impl BumpMoments {
    pub fn get() -> &'static BumpMoments {
        static CELL: OnceLock<BumpMoments> = OnceLock::new();
        CELL.get_or_init(BumpMoments::build)
    }

    fn build() -> Self {
        let n = MOMENT_CELLS;
        let h = 2.0 / n as f64;
        let (gx, gw) = gauss_legendre(10);
        let mut m0 = vec![0.0; n + 1];
        let mut m1 = vec![0.0; n + 1];
        for k in 0..n {
            let a = -1.0 + k as f64 * h;
            let (mut s0, mut s1) = (0.0, 0.0);
            for (x, w) in gx.iter().zip(&gw) {
                let s = a + 0.5 * h * (x + 1.0);
                let phi = bump(s * s);
                s0 += w * phi;
                s1 += w * s * phi;
            }
            m0[k + 1] = m0[k] + 0.5 * h * s0;
            m1[k + 1] = m1[k] + 0.5 * h * s1;
        }
        let z = m0[n];
        // Symmetrise so that odd/even identities hold to the last bit.
        let mut s0 = vec![0.0; n + 1];
        let mut s1 = vec![0.0; n + 1];
        for k in 0..=n {
            let j = n - k;
            s0[k] = 0.5 * (m0[k] / z + (1.0 - m0[j] / z));
            s1[k] = 0.5 * (m1[k] + m1[j]) / z;
        }
        s0[0] = 0.0;
        s0[n] = 1.0;
        s1[0] = 0.0;
        s1[n] = 0.0;
        BumpMoments { h, m0: s0, m1: s1, z }
    }

    /// Normalised density.
    #[inline]
    pub fn density(&self, s: f64) -> f64 {
        bump(s * s) / self.z
    }

    /// (∫_{−1}^s φ, ∫_{−1}^s σφ).
    pub fn moments(&self, s: f64) -> (f64, f64) {
        if s <= -1.0 {
            return (0.0, 0.0);
        }
        if s >= 1.0 {
            return (1.0, 0.0);
        }
        let u = (s + 1.0) / self.h;
        let k = (u.floor() as usize).min(MOMENT_CELLS - 1);
        let t = u - k as f64;
        let s0 = -1.0 + k as f64 * self.h;
        let s1 = s0 + self.h;
        let (d0, d1) = (self.density(s0), self.density(s1));
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let a = h00 * self.m0[k] + h10 * self.h * d0 + h01 * self.m0[k + 1] + h11 * self.h * d1;
        let b = h00 * self.m1[k] + h10 * self.h * s0 * d0 + h01 * self.m1[k + 1] + h11 * self.h * s1 * d1;
        (a, b)
    }
}

/// Convolution of a continuous piecewise-linear function with the normalised
/// bump of half-width `width`: `∫ φ(σ) H(t + width·σ) dσ`. Evaluated piece by
/// piece from exact moments, so affine stretches are reproduced exactly.
#[derive(Clone, Debug)]
pub struct MollifiedPiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// slopes[0] is the left extension, slopes[n] the right extension.
    slopes: Vec<f64>,
    width: f64,
}

impl MollifiedPiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, left_slope: f64, right_slope: f64, width: f64) -> Self {
        assert!(xs.len() == ys.len() && !xs.is_empty());
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        assert!(width > 0.0);
        let n = xs.len();
        let mut slopes = Vec::with_capacity(n + 1);
        slopes.push(left_slope);
        for i in 0..n - 1 {
            slopes.push((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
        }
        slopes.push(right_slope);
        MollifiedPiecewiseLinear { xs, ys, slopes, width }
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// The unmollified core.
    pub fn core(&self, t: f64) -> f64 {
        let j = self.piece(t);
        self.affine(j, t)
    }

    fn piece(&self, t: f64) -> usize {
        // Piece j spans [x_{j-1}, x_j] with x_{-1} = −∞, x_n = +∞.
        self.xs.partition_point(|&x| x <= t)
    }

    fn affine(&self, j: usize, t: f64) -> f64 {
        let k = if j == 0 { 0 } else { j - 1 };
        self.ys[k] + self.slopes[j] * (t - self.xs[k])
    }

    fn bounds(&self, j: usize) -> (f64, f64) {
        let lo = if j == 0 { f64::NEG_INFINITY } else { self.xs[j - 1] };
        let hi = if j == self.xs.len() { f64::INFINITY } else { self.xs[j] };
        (lo, hi)
    }

    pub fn value(&self, t: f64) -> f64 {
        let mo = BumpMoments::get();
        let w = self.width;
        let j0 = self.piece(t - w);
        let j1 = self.piece(t + w);
        if j0 == j1 {
            return self.affine(j0, t);
        }
        let mut total = 0.0;
        for j in j0..=j1 {
            let (lo, hi) = self.bounds(j);
            let p = ((lo - t) / w).max(-1.0);
            let q = ((hi - t) / w).min(1.0);
            if q <= p {
                continue;
            }
            let (a0, a1) = mo.moments(p);
            let (b0, b1) = mo.moments(q);
            total += self.affine(j, t) * (b0 - a0) + self.slopes[j] * w * (b1 - a1);
        }
        total
    }

    /// Exact derivative in t: the bump-weighted average of the slopes.
    pub fn derivative(&self, t: f64) -> f64 {
        let mo = BumpMoments::get();
        let w = self.width;
        let j0 = self.piece(t - w);
        let j1 = self.piece(t + w);
        if j0 == j1 {
            return self.slopes[j0];
        }
        let mut total = 0.0;
        for j in j0..=j1 {
            let (lo, hi) = self.bounds(j);
            let p = ((lo - t) / w).max(-1.0);
            let q = ((hi - t) / w).min(1.0);
            if q <= p {
                continue;
            }
            total += self.slopes[j] * (mo.moments(q).0 - mo.moments(p).0);
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        for deg in 0..16 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn ball_rule_is_normalised_and_even() {
        for (dim, order) in [(2, 16), (3, 8)] {
            let r = BallRule::new(dim, order);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
            let m: Point = r.nodes.iter().zip(&r.weights).map(|(z, w)| z * *w).sum();
            assert!(m.norm() < 1e-15);
            assert!(r.nodes.iter().all(|z| z.norm() < 1.0));
        }
        assert!(BallRule::new(2, 16).mass_error < 1e-3);
    }

    #[test]
    fn moments_match_direct_quadrature() {
        let mo = BumpMoments::get();
        let (gx, gw) = gauss_legendre(40);
        for &s in &[-0.9, -0.3, 0.0, 0.41, 0.95] {
            // Composite rule on [-1, s].
            let mut m0 = 0.0;
            let mut m1 = 0.0;
            let pieces = 64;
            for p in 0..pieces {
                let a = -1.0 + (s + 1.0) * p as f64 / pieces as f64;
                let b = -1.0 + (s + 1.0) * (p + 1) as f64 / pieces as f64;
                for (x, w) in gx.iter().zip(&gw) {
                    let u = 0.5 * (a + b) + 0.5 * (b - a) * x;
                    m0 += 0.5 * (b - a) * w * mo.density(u);
                    m1 += 0.5 * (b - a) * w * u * mo.density(u);
                }
            }
            let (a0, a1) = mo.moments(s);
            assert!((a0 - m0).abs() < 1e-12, "m0 at {s}: {a0} vs {m0}");
            assert!((a1 - m1).abs() < 1e-12, "m1 at {s}");
        }
        assert_eq!(mo.moments(0.0).0, 0.5);
    }

    #[test]
    fn mollified_function_reproduces_affine_parts() {
        let f = MollifiedPiecewiseLinear::new(vec![0.0, 1.0], vec![0.0, 2.0], 0.5, 0.5, 0.2);
        assert_eq!(f.value(-3.0), -1.5);
        assert_eq!(f.value(0.5), 1.0);
        // Across a kink the value is smooth and monotone.
        let mut prev = f.value(-0.3);
        for k in 1..100 {
            let t = -0.3 + 0.006 * k as f64;
            let v = f.value(t);
            assert!(v > prev);
            let d = (f.value(t + 1e-6) - f.value(t - 1e-6)) / 2e-6;
            assert!((d - f.derivative(t)).abs() < 1e-6);
            prev = v;
        }
    }
}
