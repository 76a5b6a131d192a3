//! Good directions: the line probe, geodesic combinations, the canonical
//! field G built from the atlas, and sampled pseudonormal sets.

use crate::domain::{C0Domain, GraphPatch, Side};
use crate::geometry::{angle_between, frame_from_normal, sphere_grid, Point};
use crate::quadrature::bump;
use crate::spatial::KdTree;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

#[derive(Clone, Debug)]
pub struct ProbeOptions {
    /// Lines per transverse axis.
    pub lines: usize,
    /// Samples per line.
    pub samples: usize,
    /// Classification tolerance; samples within `tol` of ∂Ω are wildcards.
    pub tol: f64,
    /// Bisection depth used to tell a steep graph from a jump between
    /// neighbouring lines. Zero disables the continuity check.
    pub refine_depth: usize,
}

impl ProbeOptions {
    pub fn for_dim(dim: usize, samples: usize) -> Self {
        let lines = if dim == 2 { samples.max(8) } else { (samples / 2).clamp(8, 24) };
        ProbeOptions { lines, samples, tol: 0.0, refine_depth: 10 }
    }
}

struct LineProbe<'a> {
    domain: &'a C0Domain,
    p: Point,
    frame: Vec<Point>,
    delta: f64,
    opts: &'a ProbeOptions,
}

impl LineProbe<'_> {
    fn side(&self, x: &Point) -> Side {
        if self.opts.tol > 0.0 {
            self.domain.classify(x, self.opts.tol)
        } else if self.domain.inside(x) {
            Side::Interior
        } else {
            Side::Exterior
        }
    }

    fn base(&self, u: &Point) -> Point {
        let mut x = self.p;
        for k in 0..self.frame.len() - 1 {
            x += self.frame[k] * u[k];
        }
        x
    }

    /// Height of the crossing on the line through transverse point `u`
    /// (±s_top when the line stays on one side); `None` if the line is not
    /// monotone. Also returns the bracketing samples of the crossing.
    fn scan(&self, u: &Point) -> Option<(f64, Option<(f64, f64)>)> {
        let s_top = (self.delta * self.delta - u.norm_squared()).max(0.0).sqrt();
        let n = self.frame[self.frame.len() - 1];
        let base = self.base(u);
        let m = self.opts.samples;
        let ds = 2.0 * s_top / m as f64;
        let mut last_ext: Option<f64> = None;
        let mut first_int: Option<f64> = None;
        for k in 0..m {
            let s = -s_top + (k as f64 + 0.5) * ds;
            match self.side(&(base + n * s)) {
                Side::Exterior => {
                    if first_int.is_some() {
                        return None;
                    }
                    last_ext = Some(s);
                }
                Side::Interior => {
                    if first_int.is_none() {
                        first_int = Some(s);
                    }
                }
                Side::NearBoundary => {}
            }
        }
        Some(match (last_ext, first_int) {
            (Some(a), Some(b)) => (0.5 * (a + b), Some((a, b))),
            (Some(_), None) => (s_top, None),
            (None, Some(_)) => (-s_top, None),
            (None, None) => (0.0, None),
        })
    }

    fn transverse(&self, i: usize, j: usize) -> Point {
        let l = self.opts.lines;
        let c = |k: usize| -self.delta + (k as f64 + 0.5) * 2.0 * self.delta / l as f64;
        if self.frame.len() == 2 {
            Point::new(c(i), 0.0, 0.0)
        } else {
            Point::new(c(i), c(j), 0.0)
        }
    }

    fn continuous(&self, ua: &Point, ga: f64, ub: &Point, gb: f64, depth: usize) -> bool {
        if (ga - gb).abs() <= 0.25 * self.delta {
            return true;
        }
        if depth == 0 {
            return false;
        }
        let um = (ua + ub) * 0.5;
        let Some((gm, _)) = self.scan(&um) else { return false };
        self.continuous(ua, ga, &um, gm, depth - 1) && self.continuous(&um, gm, ub, gb, depth - 1)
    }

    fn run(&self) -> bool {
        let l = self.opts.lines;
        let rows = if self.frame.len() == 2 { 1 } else { l };
        let mut g = vec![None::<f64>; l * rows];
        // Lines nearest P first: that is where a bad direction usually fails.
        let mut order: Vec<(usize, usize)> = (0..rows).flat_map(|j| (0..l).map(move |i| (i, j))).collect();
        order.sort_by(|a, b| self.transverse(a.0, a.1).norm().total_cmp(&self.transverse(b.0, b.1).norm()));
        for (i, j) in order {
            let u = self.transverse(i, j);
            if u.norm() >= self.delta {
                continue;
            }
            match self.scan(&u) {
                Some((h, _)) => g[i + l * j] = Some(h),
                None => return false,
            }
        }
        if self.opts.refine_depth == 0 {
            return true;
        }
        for j in 0..rows {
            for i in 0..l {
                let Some(ga) = g[i + l * j] else { continue };
                let ua = self.transverse(i, j);
                let mut nbrs = vec![];
                if i + 1 < l {
                    nbrs.push((i + 1, j));
                }
                if j + 1 < rows {
                    nbrs.push((i, j + 1));
                }
                for (a, b) in nbrs {
                    let Some(gb) = g[a + l * b] else { continue };
                    if !self.continuous(&ua, ga, &self.transverse(a, b), gb, self.opts.refine_depth) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Line test for a good direction: every sampled line parallel to `n`
/// through B(P,δ) meets ∂Ω at most once, going from outside to inside, and
/// the crossing height varies continuously from line to line.
pub fn probe(domain: &C0Domain, p: &Point, n: &Point, delta: f64, opts: &ProbeOptions) -> Result<bool> {
    let dist = domain.signed_distance(p).abs();
    if dist >= delta {
        return Err(Error::BallMissesBoundary { distance: dist, delta });
    }
    let lp = LineProbe { domain, p: *p, frame: frame_from_normal(n, domain.dim), delta, opts };
    Ok(lp.run())
}

/// [`probe`] with `grid_res` samples per line and default line layout.
pub fn probe_good_direction(domain: &C0Domain, p: &Point, n: &Point, delta: f64, grid_res: usize) -> Result<bool> {
    if grid_res < 8 {
        return Err(Error::InvalidInput("grid_res must be at least 8".into()));
    }
    probe(domain, p, n, delta, &ProbeOptions::for_dim(domain.dim, grid_res))
}

/// Σλᵢnᵢ/|Σλᵢnᵢ|.
pub fn geodesic_combine(dirs: &[Point], weights: &[f64]) -> Result<Point> {
    if dirs.len() != weights.len() || dirs.is_empty() {
        return Err(Error::InvalidInput("need one weight per direction".into()));
    }
    if weights.iter().any(|&w| !(w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("weights must be positive and sum to 1".into()));
    }
    let s: Point = dirs.iter().zip(weights).map(|(d, w)| d * *w).sum();
    let norm = s.norm();
    if norm < 1e-12 {
        return Err(Error::DegenerateCombination { norm });
    }
    Ok(s / norm)
}

// ---------------------------------------------------------------------------
// Atlas construction

#[derive(Clone, Debug)]
pub struct AtlasOptions {
    /// Height-grid nodes per transverse axis.
    pub resolution: usize,
    pub shrink: f64,
    pub max_shrinks: usize,
    pub probe: Option<ProbeOptions>,
}

impl Default for AtlasOptions {
    fn default() -> Self {
        AtlasOptions { resolution: 33, shrink: 0.85, max_shrinks: 30, probe: None }
    }
}

/// Build graph patches from candidate anchors. For each anchor the direction
/// admitting the largest probe-passing radius wins; heights come from
/// classifier bisection along the good direction at the grid nodes.
pub fn build_atlas(
    domain: &C0Domain,
    candidates: &[(Point, Vec<Point>, f64)],
    opts: &AtlasOptions,
) -> Result<Vec<GraphPatch>> {
    let popts = opts.probe.clone().unwrap_or({
        if domain.dim == 2 {
            ProbeOptions { lines: 32, samples: 64, tol: 0.0, refine_depth: 10 }
        } else {
            ProbeOptions { lines: 12, samples: 32, tol: 0.0, refine_depth: 8 }
        }
    });
    let patches: Vec<Option<GraphPatch>> = candidates
        .par_iter()
        .map(|(p, dirs, delta0)| -> Result<Option<GraphPatch>> {
            let mut best: Option<(Point, f64)> = None;
            for n in dirs {
                let n = n.normalize();
                let mut delta = *delta0;
                for _ in 0..=opts.max_shrinks {
                    if best.is_some_and(|(_, b)| delta <= b) {
                        break;
                    }
                    if probe(domain, p, &n, delta, &popts)? {
                        best = Some((n, delta));
                        break;
                    }
                    delta *= opts.shrink;
                }
            }
            Ok(best.map(|(n, delta)| patch_from_classifier(domain, p, &n, delta, opts.resolution, popts.samples)))
        })
        .collect::<Result<_>>()?;
    Ok(patches.into_iter().flatten().collect())
}

/// Sample the graph function of ∂Ω over the transverse grid by bisection of
/// the classifier along `n`.
pub fn patch_from_classifier(
    domain: &C0Domain,
    p: &Point,
    n: &Point,
    delta: f64,
    resolution: usize,
    samples: usize,
) -> GraphPatch {
    let frame = frame_from_normal(n, domain.dim);
    let mut patch = GraphPatch { origin: *p, frame, delta, resolution, values: Vec::new() };
    let count = patch.node_count();
    let m = domain.dim - 1;
    let mut values = vec![f64::NAN; count];
    for (k, v) in values.iter_mut().enumerate() {
        let u = patch.node_coords(k);
        if u.norm() >= delta {
            continue;
        }
        let s_top = (delta * delta - u.norm_squared()).sqrt();
        let base = patch.global(&u);
        let at = |s: f64| domain.inside(&(base + n * s));
        let ds = 2.0 * s_top / samples as f64;
        let mut lo = None;
        let mut hi = None;
        for i in 0..samples {
            let s = -s_top + (i as f64 + 0.5) * ds;
            if at(s) {
                hi = Some(s);
                break;
            }
            lo = Some(s);
        }
        *v = match (lo, hi) {
            (Some(mut a), Some(mut b)) => {
                for _ in 0..60 {
                    let c = 0.5 * (a + b);
                    if c == a || c == b {
                        break;
                    }
                    if at(c) {
                        b = c
                    } else {
                        a = c
                    }
                }
                0.5 * (a + b)
            }
            (None, Some(_)) => -s_top,
            _ => s_top,
        };
    }
    // Nodes outside the ball take the value of the nearest node inside.
    let inside: Vec<usize> = (0..count).filter(|&k| !values[k].is_nan()).collect();
    for k in 0..count {
        if values[k].is_nan() {
            let u = patch.node_coords(k);
            let j = inside
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let da = (patch.node_coords(a) - u).norm_squared();
                    let db = (patch.node_coords(b) - u).norm_squared();
                    da.total_cmp(&db)
                })
                .unwrap_or(k);
            values[k] = if j == k { 0.0 } else { values[j] };
        }
    }
    let _ = m;
    patch.values = values;
    patch
}

// ---------------------------------------------------------------------------
// Partition of unity and the canonical field

/// Bumps α̂ᵢ(x) = φ(2|x − Pᵢ|/δᵢ), normalised by their sum.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
    tree: KdTree,
    max_radius: f64,
}

impl PartitionOfUnity {
    pub fn new(centers: Vec<Point>, radii: Vec<f64>) -> Self {
        let max_radius = radii.iter().copied().fold(0.0, f64::max);
        let tree = KdTree::new(centers.clone());
        PartitionOfUnity { centers, radii, tree, max_radius }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Raw bump values (index, α̂ᵢ) of the patches active at `x`.
    pub fn raw(&self, x: &Point) -> Vec<(usize, f64)> {
        self.tree
            .within(x, 0.5 * self.max_radius)
            .into_iter()
            .filter_map(|i| {
                let r = 2.0 * (x - self.centers[i]).norm() / self.radii[i];
                (r < 1.0).then(|| (i, bump(r * r)))
            })
            .filter(|&(_, v)| v > 0.0)
            .collect()
    }

    /// Normalised weights; empty outside every support.
    pub fn weights(&self, x: &Point) -> Vec<(usize, f64)> {
        let mut w = self.raw(x);
        let s: f64 = w.iter().map(|v| v.1).sum();
        if s > 0.0 {
            for v in &mut w {
                v.1 /= s;
            }
        }
        w
    }
}

/// G(x) = Σαᵢ(x)nᵢ / |Σαᵢ(x)nᵢ| on the collar U = ∪B(Pᵢ, δᵢ/4).
#[derive(Clone, Debug)]
pub struct CanonicalField {
    pub partition: PartitionOfUnity,
    pub anchors: Vec<Point>,
    /// Depth of ∂Ω inside U: {|d| < collar} ⊂ U.
    pub collar: f64,
}

impl CanonicalField {
    /// `None` where every bump vanishes.
    pub fn eval(&self, x: &Point) -> Result<Option<Point>> {
        let raw = self.partition.raw(x);
        if raw.is_empty() {
            return Ok(None);
        }
        let s: Point = raw.iter().map(|&(i, w)| self.anchors[i] * w).sum();
        let norm = s.norm();
        let total: f64 = raw.iter().map(|v| v.1).sum();
        if norm < 1e-12 * total {
            return Err(Error::DegenerateCombination { norm: norm / total });
        }
        Ok(Some(s / norm))
    }

    /// Smallest patch radius among the patches whose half-ball contains x,
    /// halved (the Δ(x) for which G(x) stays good).
    pub fn local_delta(&self, x: &Point) -> Option<f64> {
        self.partition
            .raw(x)
            .iter()
            .map(|&(i, _)| 0.5 * self.partition.radii[i])
            .min_by(f64::total_cmp)
    }

    pub fn in_collar(&self, x: &Point) -> bool {
        self.partition
            .tree
            .within(x, 0.25 * self.partition.max_radius)
            .into_iter()
            .any(|i| (x - self.partition.centers[i]).norm() < 0.25 * self.partition.radii[i])
    }

    pub fn to_csv(&self, points: &[Point], dim: usize) -> Result<String> {
        let mut s = String::from(if dim == 2 { "x,y,gx,gy\n" } else { "x,y,z,gx,gy,gz\n" });
        for p in points {
            if let Some(g) = self.eval(p)? {
                let row: Vec<String> = (0..dim).map(|k| p[k].to_string()).chain((0..dim).map(|k| g[k].to_string())).collect();
                let _ = writeln!(s, "{}", row.join(","));
            }
        }
        Ok(s)
    }
}

/// Canonical field from the domain's atlas.
pub fn build_canonical_field(domain: &C0Domain) -> Result<CanonicalField> {
    domain.require_c0("canonical field")?;
    if let Some(i) = domain.cover_gap() {
        return Err(Error::CoverGap { index: i });
    }
    let collar = domain.collar_width()?;
    let centers = domain.atlas.iter().map(|p| p.origin).collect();
    let radii = domain.atlas.iter().map(|p| p.delta).collect();
    let anchors = domain.atlas.iter().map(|p| p.direction()).collect();
    Ok(CanonicalField { partition: PartitionOfUnity::new(centers, radii), anchors, collar })
}

// ---------------------------------------------------------------------------
// Sampled pseudonormal sets

#[derive(Clone, Debug)]
pub struct DirectionSet {
    pub center: Point,
    pub radius: f64,
    pub directions: Vec<Point>,
    pub angular_resolution: f64,
}

impl DirectionSet {
    /// Largest pairwise angle.
    pub fn angular_diameter(&self) -> f64 {
        let mut m = 0.0f64;
        for (i, a) in self.directions.iter().enumerate() {
            for b in &self.directions[i + 1..] {
                m = m.max(angle_between(a, b));
            }
        }
        m
    }

    pub fn to_csv(&self, dim: usize) -> String {
        let mut s = String::from(if dim == 2 { "px,py,nx,ny\n" } else { "px,py,pz,nx,ny,nz\n" });
        for n in &self.directions {
            let row: Vec<String> =
                (0..dim).map(|k| self.center[k].to_string()).chain((0..dim).map(|k| n[k].to_string())).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

/// All sphere-grid directions passing the probe at (P, δ).
pub fn pseudonormal_set(domain: &C0Domain, p: &Point, delta: f64, angular_res: f64) -> Result<DirectionSet> {
    pseudonormal_set_with(domain, p, delta, angular_res, &ProbeOptions::for_dim(domain.dim, 64))
}

pub fn pseudonormal_set_with(
    domain: &C0Domain,
    p: &Point,
    delta: f64,
    angular_res: f64,
    opts: &ProbeOptions,
) -> Result<DirectionSet> {
    let dist = domain.signed_distance(p).abs();
    if dist >= delta {
        return Err(Error::BallMissesBoundary { distance: dist, delta });
    }
    let grid = sphere_grid(domain.dim, angular_res);
    let keep: Vec<bool> = grid
        .par_iter()
        .map(|n| probe(domain, p, n, delta, opts))
        .collect::<Result<_>>()?;
    let directions = grid.into_iter().zip(keep).filter(|(_, k)| *k).map(|(n, _)| n).collect();
    Ok(DirectionSet { center: *p, radius: delta, directions, angular_resolution: angular_res })
}

/// Discrete geodesic-convexity check on random pairs.
pub fn convexity_audit(set: &DirectionSet, samples: usize, seed: u64) -> bool {
    let d = &set.directions;
    if d.len() <= 1 {
        return true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let a = d[rng.gen_range(0..d.len())];
        let b = d[rng.gen_range(0..d.len())];
        let lam: f64 = rng.gen_range(1e-6..1.0 - 1e-6);
        let Ok(c) = geodesic_combine(&[a, b], &[lam, 1.0 - lam]) else { return false };
        let near = d.iter().any(|n| angle_between(n, &c) <= set.angular_resolution * (1.0 + 1e-9));
        if !near {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::FixtureId;
    use crate::geometry::p2;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn disk_and_square_probe_examples() {
        let disk = C0Domain::fixture(FixtureId::UnitDisk).unwrap();
        assert!(probe_good_direction(&disk, &p2(1.0, 0.0), &p2(-1.0, 0.0), 0.5, 64).unwrap());
        assert!(!probe_good_direction(&disk, &p2(1.0, 0.0), &p2(0.0, 1.0), 0.5, 64).unwrap());
        let sq = C0Domain::fixture(FixtureId::UnitSquare).unwrap();
        let diag = p2(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2);
        assert!(probe_good_direction(&sq, &p2(1.0, 1.0), &diag, 0.3, 64).unwrap());
        assert!(matches!(
            probe_good_direction(&disk, &p2(0.0, 0.0), &diag, 0.5, 64),
            Err(Error::BallMissesBoundary { .. })
        ));
    }

    #[test]
    fn tangent_directions_fail_on_a_flat_edge() {
        let sq = C0Domain::fixture(FixtureId::UnitSquare).unwrap();
        let p = p2(0.5, 0.0);
        assert!(!probe_good_direction(&sq, &p, &p2(1.0, 0.0), 0.3, 64).unwrap());
        assert!(!probe_good_direction(&sq, &p, &p2(-1.0, 0.0), 0.3, 64).unwrap());
        // Steep but good.
        let t = 80f64.to_radians();
        assert!(probe_good_direction(&sq, &p, &p2(t.cos(), t.sin()), 0.3, 64).unwrap());
    }

    #[test]
    fn combine_examples() {
        let p = p2(0.6, 0.8);
        let c = geodesic_combine(&[p, p], &[0.5, 0.5]).unwrap();
        assert!((c - p).norm() < 1e-15);
        let c = geodesic_combine(&[p2(1.0, 0.0), p2(0.0, 1.0)], &[0.5, 0.5]).unwrap();
        assert!((c - p2(FRAC_1_SQRT_2, FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!(matches!(
            geodesic_combine(&[p2(1.0, 0.0), p2(-1.0, 0.0)], &[0.5, 0.5]),
            Err(Error::DegenerateCombination { .. })
        ));
    }

    #[test]
    fn disk_field_is_radial() {
        let disk = C0Domain::fixture(FixtureId::UnitDisk).unwrap();
        let g = build_canonical_field(&disk).unwrap();
        for q in disk.boundary_cloud().iter().step_by(37) {
            let v = g.eval(q).unwrap().unwrap();
            assert!(angle_between(&v, &-q.normalize()) < 2f64.to_radians());
        }
    }

    #[test]
    fn corner_cone() {
        let sq = C0Domain::fixture(FixtureId::UnitSquare).unwrap();
        let res = 5f64.to_radians();
        let set = pseudonormal_set(&sq, &p2(1.0, 1.0), 0.2, res).unwrap();
        let diag = p2(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2);
        let grid = sphere_grid(2, res);
        for n in &grid {
            let a = angle_between(n, &diag);
            let has = set.directions.iter().any(|m| (m - n).norm() < 1e-12);
            if a < 45f64.to_radians() - res {
                assert!(has, "missing direction at {} deg", a.to_degrees());
            }
            if a >= 45f64.to_radians() - 1e-9 {
                assert!(!has, "extra direction at {} deg", a.to_degrees());
            }
        }
        assert!(convexity_audit(&set, 200, 1));
    }

    #[test]
    fn convexity_detects_gaps() {
        let set = DirectionSet {
            center: Point::zeros(),
            radius: 1.0,
            directions: vec![p2(1.0, 0.0), p2(0.0, 1.0), p2(-1.0, 0.0)],
            angular_resolution: 0.05,
        };
        assert!(!convexity_audit(&set, 50, 3));
        let single = DirectionSet { directions: vec![p2(1.0, 0.0)], ..set };
        assert!(convexity_audit(&single, 10, 3));
    }
}
