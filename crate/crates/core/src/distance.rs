//! Regularized distance: ρ(x) is the fixed point of τ ↦ G(x,τ), where
//! G(x,τ) = ∫_{|z|<1} d(x − τz/2) φ(z) dz is the mollified signed distance.

use crate::domain::C0Domain;
use crate::geometry::{Aabb, Point};
use crate::quadrature::BallRule;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

/// Radial bump φ with its ball quadrature.
#[derive(Clone, Debug)]
pub struct Mollifier {
    pub rule: BallRule,
}

impl Mollifier {
    pub fn new(dim: usize, order: usize) -> Self {
        Mollifier { rule: BallRule::new(dim, order) }
    }

    /// 16 Gauss–Legendre nodes per axis in 2D, 8 in 3D.
    pub fn default_for(dim: usize) -> Self {
        Self::new(dim, if dim == 2 { 16 } else { 8 })
    }

    /// Relative error of the normalising mass against a rule of twice the order.
    pub fn mass_error(&self) -> f64 {
        self.rule.mass_error
    }
}

#[derive(Clone, Debug)]
pub struct RhoOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RhoOptions {
    fn default() -> Self {
        RhoOptions { tol: 1e-10, max_iter: 60 }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct RhoSolution {
    pub rho: f64,
    pub d: f64,
    pub iterations: usize,
    /// Largest ratio of successive fixed-point increments.
    pub contraction: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct RegularizedDistance {
    pub domain: Arc<C0Domain>,
    pub mollifier: Mollifier,
    pub opts: RhoOptions,
}

/// Above this many candidates the per-node query goes through the BVH.
const CANDIDATE_LIMIT: usize = 48;
/// Candidate lists are only gathered for search radii below this many
/// boundary spacings.
const CANDIDATE_RADIUS: f64 = 16.0;

#[derive(Default)]
struct Scratch {
    candidates: Vec<u32>,
    radius: f64,
    center: Point,
    element: Option<usize>,
}

impl RegularizedDistance {
    pub fn new(domain: Arc<C0Domain>) -> Self {
        let mollifier = Mollifier::default_for(domain.dim);
        RegularizedDistance { domain, mollifier, opts: RhoOptions::default() }
    }

    pub fn with_options(domain: Arc<C0Domain>, mollifier: Mollifier, opts: RhoOptions) -> Self {
        RegularizedDistance { domain, mollifier, opts }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn d(&self, x: &Point) -> f64 {
        self.domain.signed_distance(x)
    }

    /// G(x,τ).
    pub fn mollified_g(&self, x: &Point, tau: f64) -> f64 {
        let d0 = self.d(x);
        self.g_inner(x, tau, d0, &mut Scratch::default())
    }

    fn g_inner(&self, x: &Point, tau: f64, d0: f64, scratch: &mut Scratch) -> f64 {
        if tau == 0.0 {
            return d0;
        }
        let dom = &*self.domain;
        let rule = &self.mollifier.rule;
        // Every shifted point's nearest element lies within |d0| + |τ| of x.
        let r = d0.abs() + tau.abs() + 1e-12;
        let small = r <= CANDIDATE_RADIUS * dom.h_bnd();
        let reuse = scratch.center == *x && scratch.radius >= r && !scratch.candidates.is_empty();
        if !small {
            scratch.candidates.clear();
            scratch.radius = 0.0;
        } else if !reuse {
            if scratch.center != *x {
                scratch.element = None;
            }
            scratch.center = *x;
            scratch.radius = 1.25 * r;
            dom.mesh().candidates(x, scratch.radius, &mut scratch.candidates);
        }
        let half = 0.5 * tau;
        let mut sum = 0.0;
        if small && scratch.candidates.len() <= CANDIDATE_LIMIT {
            for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                let y = x - z * half;
                sum += w * dom.signed_distance_among(&y, &scratch.candidates);
            }
        } else {
            // The previous node's nearest element bounds the search tightly.
            let mesh = dom.mesh();
            let mut prev = match scratch.element {
                Some(e) if scratch.center == *x => e,
                _ => {
                    let e = dom.nearest(x).element;
                    scratch.element = Some(e);
                    e
                }
            };
            for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                let y = x - z * half;
                let bound = mesh.element_distance2(prev, &y).sqrt() * (1.0 + 1e-12) + 1e-300;
                let n = dom.nearest_bounded(&y, bound).unwrap_or_else(|| dom.nearest(&y));
                sum += w * n.signed;
                prev = n.element;
            }
        }
        sum
    }

    /// Fixed-point solve from τ₀ = d(x).
    pub fn solve(&self, x: &Point) -> Result<RhoSolution> {
        self.solve_tol(x, self.opts.tol)
    }

    pub fn solve_tol(&self, x: &Point, tol: f64) -> Result<RhoSolution> {
        let d0 = self.d(x);
        self.solve_from(x, d0, tol)
    }

    /// Fixed-point solve with d(x) already known. Picard steps are taken in
    /// pairs and combined by Aitken extrapolation; the contraction factor is
    /// the largest ratio of the two increments of a pair.
    pub fn solve_from(&self, x: &Point, d0: f64, tol: f64) -> Result<RhoSolution> {
        let mut scratch = Scratch::default();
        if d0 == 0.0 {
            return Ok(RhoSolution { rho: 0.0, d: 0.0, iterations: 0, contraction: 0.0, residual: 0.0 });
        }
        let mut t0 = d0;
        let mut contraction = 0.0f64;
        let mut evals = 0;
        let mut last = f64::NAN;
        while evals < self.opts.max_iter {
            let t1 = self.g_inner(x, t0, d0, &mut scratch);
            evals += 1;
            let s1 = t1 - t0;
            if s1.abs() < tol {
                return Ok(RhoSolution { rho: t1, d: d0, iterations: evals, contraction, residual: s1.abs() });
            }
            let t2 = self.g_inner(x, t1, d0, &mut scratch);
            evals += 1;
            let s2 = t2 - t1;
            if s1.abs() > 1e3 * tol {
                contraction = contraction.max(s2.abs() / s1.abs());
            }
            if s2.abs() < tol {
                return Ok(RhoSolution { rho: t2, d: d0, iterations: evals, contraction, residual: s2.abs() });
            }
            last = s2.abs();
            let denom = s2 - s1;
            let aitken = t0 - s1 * s1 / denom;
            // G − id has slope in [−3/2, −1/2]; keep the extrapolation only
            // when it stays within the contraction's reach of t2.
            t0 = if denom != 0.0 && aitken.is_finite() && (aitken - t2).abs() <= 2.0 * s2.abs() { aitken } else { t2 };
        }
        Err(Error::NoConvergence { iterations: evals, last_step: last })
    }

    pub fn rho(&self, x: &Point) -> Result<f64> {
        Ok(self.solve(x)?.rho)
    }

    pub fn default_step(rho: f64) -> f64 {
        (rho.abs() / 100.0).max(1e-4)
    }

    /// Central-difference gradient; with `richardson` the h and h/2
    /// differences are combined to fourth order.
    pub fn grad(&self, x: &Point, step: f64, richardson: bool) -> Result<Point> {
        let rho = self.rho(x)?;
        if rho.abs() <= 2.0 * step {
            return Err(Error::TooCloseToBoundary { rho, step });
        }
        let tol = self.opts.tol.min(1e-13);
        let diff = |h: f64| -> Result<Point> {
            let mut g = Point::zeros();
            for k in 0..self.dim() {
                let mut e = Point::zeros();
                e[k] = h;
                let a = self.solve_tol(&(x + e), tol)?.rho;
                let b = self.solve_tol(&(x - e), tol)?.rho;
                g[k] = (a - b) / (2.0 * h);
            }
            Ok(g)
        };
        let d1 = diff(step)?;
        if !richardson {
            return Ok(d1);
        }
        let d2 = diff(0.5 * step)?;
        Ok((d2 * 4.0 - d1) / 3.0)
    }

    /// Gradient with the default step, Richardson-extrapolated.
    pub fn grad_default(&self, x: &Point) -> Result<Point> {
        let rho = self.rho(x)?;
        self.grad(x, Self::default_step(rho), true)
    }

    /// ρ/d statistics over `points` with |d| > h_bnd.
    pub fn equivalence_audit(&self, points: &[Point], slack: f64) -> Result<EquivalenceReport> {
        let h = self.domain.h_bnd();
        let rows: Vec<Option<(f64, f64, usize, f64)>> = points
            .par_iter()
            .map(|x| -> Result<Option<(f64, f64, usize, f64)>> {
                let d = self.d(x);
                if d.abs() <= h {
                    return Ok(None);
                }
                let s = self.solve_from(x, d, self.opts.tol)?;
                Ok(Some((s.rho, d, s.iterations, s.contraction)))
            })
            .collect::<Result<_>>()?;
        let mut r = EquivalenceReport {
            points: 0,
            skipped: 0,
            min_ratio: f64::INFINITY,
            max_ratio: f64::NEG_INFINITY,
            sign_violations: 0,
            max_contraction: 0.0,
            max_iterations: 0,
            slack,
            pass: false,
        };
        for row in rows {
            match row {
                None => r.skipped += 1,
                Some((rho, d, it, c)) => {
                    r.points += 1;
                    let q = rho / d;
                    r.min_ratio = r.min_ratio.min(q);
                    r.max_ratio = r.max_ratio.max(q);
                    if rho * d <= 0.0 {
                        r.sign_violations += 1;
                    }
                    r.max_contraction = r.max_contraction.max(c);
                    r.max_iterations = r.max_iterations.max(it);
                }
            }
        }
        r.pass = r.points > 0 && r.sign_violations == 0 && r.min_ratio >= 0.5 - slack && r.max_ratio <= 2.0 + slack;
        Ok(r)
    }

    /// ρ on a regular grid over `bbox` with `n` nodes per axis.
    pub fn grid(&self, bbox: &Aabb, n: usize) -> Result<RhoGrid> {
        let g = RhoGrid::layout(self.dim(), bbox, n);
        let pts = g.points();
        let vals: Vec<(f64, f64)> = pts
            .par_iter()
            .map(|x| {
                let d = self.d(x);
                Ok((self.solve_from(x, d, self.opts.tol)?.rho, d))
            })
            .collect::<Result<_>>()?;
        Ok(RhoGrid { rho: vals.iter().map(|v| v.0).collect(), d: vals.iter().map(|v| v.1).collect(), ..g })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub points: usize,
    pub skipped: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub sign_violations: usize,
    pub max_contraction: f64,
    pub max_iterations: usize,
    pub slack: f64,
    pub pass: bool,
}

/// Regular grid of ρ and d values (first axis fastest).
#[derive(Clone, Debug)]
pub struct RhoGrid {
    pub dim: usize,
    pub n: usize,
    pub bbox: Aabb,
    pub spacing: Point,
    pub rho: Vec<f64>,
    pub d: Vec<f64>,
}

impl RhoGrid {
    pub fn layout(dim: usize, bbox: &Aabb, n: usize) -> Self {
        assert!(n >= 2);
        let mut spacing = bbox.extent() / (n - 1) as f64;
        if dim == 2 {
            spacing.z = 0.0;
        }
        RhoGrid { dim, n, bbox: *bbox, spacing, rho: Vec::new(), d: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, k: usize) -> Point {
        let n = self.n;
        let (i, j, l) = (k % n, (k / n) % n, k / (n * n));
        let mut p = self.bbox.min + self.spacing.component_mul(&Point::new(i as f64, j as f64, l as f64));
        if self.dim == 2 {
            p.z = 0.0;
        }
        p
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(if self.dim == 2 { "x,y,rho,d,ratio\n" } else { "x,y,z,rho,d,ratio\n" });
        for k in 0..self.len() {
            let p = self.point(k);
            let coords: Vec<String> = (0..self.dim).map(|i| p[i].to_string()).collect();
            let ratio = if self.d[k] != 0.0 { self.rho[k] / self.d[k] } else { f64::NAN };
            let _ = writeln!(s, "{},{},{},{}", coords.join(","), self.rho[k], self.d[k], ratio);
        }
        s
    }

    /// Binary layout: magic `RHOG`, u32 dim, u32 n per axis, 3×f64 min,
    /// 3×f64 max, 3×f64 spacing, then ρ as little-endian f64, row-major.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(b"RHOG")?;
        f.write_all(&(self.dim as u32).to_le_bytes())?;
        f.write_all(&(self.n as u32).to_le_bytes())?;
        for v in [self.bbox.min, self.bbox.max, self.spacing] {
            for k in 0..3 {
                f.write_all(&v[k].to_le_bytes())?;
            }
        }
        for v in &self.rho {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let bad = || Error::InvalidInput("not a ρ grid file".into());
        if bytes.len() < 4 + 8 + 72 || &bytes[..4] != b"RHOG" {
            return Err(bad());
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let dim = u32_at(4);
        let n = u32_at(8);
        let v3 = |o: usize| Point::new(f64_at(o), f64_at(o + 8), f64_at(o + 16));
        let (min, max, spacing) = (v3(12), v3(36), v3(60));
        let count = n.pow(dim as u32);
        if bytes.len() != 84 + 8 * count {
            return Err(bad());
        }
        let rho = (0..count).map(|k| f64_at(84 + 8 * k)).collect();
        Ok(RhoGrid { dim, n, bbox: Aabb { min, max }, spacing, rho, d: Vec::new() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BuildOptions, FixtureId};
    use crate::geometry::p2;

    fn plain(f: FixtureId) -> Arc<C0Domain> {
        Arc::new(C0Domain::from_fixture(f, &BuildOptions { no_atlas: true, ..Default::default() }).unwrap())
    }

    #[test]
    fn g_at_zero_is_d() {
        let r = RegularizedDistance::new(plain(FixtureId::UnitDisk));
        let x = p2(0.3, -0.2);
        assert_eq!(r.mollified_g(&x, 0.0), r.d(&x));
    }

    #[test]
    fn half_plane_is_reproduced() {
        let r = RegularizedDistance::new(plain(FixtureId::HalfPlane));
        for (x, y) in [(0.0, 0.3), (0.5, 1.2), (-1.0, 0.05)] {
            let p = p2(x, y);
            assert!((r.mollified_g(&p, 0.37) - y).abs() < 1e-12);
            assert!((r.rho(&p).unwrap() - y).abs() < 1e-8);
            let g = r.grad_default(&p).unwrap();
            assert!((g - p2(0.0, 1.0)).norm() < 1e-6, "{g:?}");
        }
    }

    #[test]
    fn disk_examples() {
        let r = RegularizedDistance::new(plain(FixtureId::UnitDisk));
        let rho = r.rho(&p2(0.5, 0.0)).unwrap();
        assert!((0.25..=1.0).contains(&rho));
        assert!(r.rho(&r.domain.boundary_cloud()[0]).unwrap().abs() < 1e-10);
        let g = r.grad_default(&p2(0.5, 0.0)).unwrap();
        assert!(crate::geometry::angle_between(&g, &p2(-1.0, 0.0)) < 2f64.to_radians());
        // |∂G/∂τ| ≤ ½.
        let x = p2(0.9, 0.1);
        for (a, b) in [(0.0, 0.1), (0.05, 0.3), (-0.2, 0.2)] {
            let lhs = (r.mollified_g(&x, a) - r.mollified_g(&x, b)).abs();
            assert!(lhs <= (0.5 + 1e-3) * (a - b).abs());
        }
    }

    #[test]
    fn binary_grid_round_trip() {
        let r = RegularizedDistance::new(plain(FixtureId::UnitSquare));
        let g = r.grid(&Aabb { min: p2(-0.2, -0.2), max: p2(1.2, 1.2) }, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho.bin");
        g.write_binary(&path).unwrap();
        let back = RhoGrid::read_binary(&path).unwrap();
        assert_eq!(back.rho, g.rho);
        assert_eq!(back.n, 9);
        assert!(g.to_csv().lines().count() == 82);
    }
}
