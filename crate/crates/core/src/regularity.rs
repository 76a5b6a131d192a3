//! Lipschitz certificates at boundary points from m independent good
//! directions, detection of points with a single good direction, and
//! partial-regularity scans over boundary components.

use crate::domain::C0Domain;
use crate::geometry::{angle_between, frame_from_normal, sphere_grid, to_frame, Point};
use crate::good_directions::{probe, pseudonormal_set, DirectionSet, ProbeOptions};
use crate::topology::{boundary_components, direction_rank};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzCertificate {
    pub point: Point,
    /// ñ = Σnᵢ/|Σnᵢ|.
    pub direction: Point,
    pub delta: f64,
    /// Largest secant slope of the boundary cloud in B(P, δ/2), in the ñ frame.
    pub lipschitz: f64,
    /// m independent good directions.
    pub witnesses: Vec<Point>,
    /// Angle from ñ to the nearest sampled direction that is not good.
    pub margin: f64,
    /// cot(margin): the aperture bound on the slope.
    pub cone_bound: f64,
    /// Cloud pairs used by the secant estimate.
    pub secant_pairs: usize,
}

#[derive(Clone, Debug, Serialize)]
pub enum ProbeOutcome {
    Certificate(LipschitzCertificate),
    NoCertificate {
        point: Point,
        delta: f64,
        /// Rank of the sampled good set.
        rank: usize,
        directions: usize,
    },
}

impl ProbeOutcome {
    pub fn certificate(&self) -> Option<&LipschitzCertificate> {
        match self {
            ProbeOutcome::Certificate(c) => Some(c),
            ProbeOutcome::NoCertificate { .. } => None,
        }
    }
}

/// m members of the set chosen greedily for independence: the pair at the
/// largest angle, then (3D) the member maximizing the spanned volume.
fn witnesses(dirs: &[Point], dim: usize) -> Vec<Point> {
    let mut best = (0usize, 0usize, -1.0f64);
    for i in 0..dirs.len() {
        for j in i + 1..dirs.len() {
            let a = angle_between(&dirs[i], &dirs[j]);
            if a > best.2 {
                best = (i, j, a);
            }
        }
    }
    let mut w = vec![dirs[best.0], dirs[best.1]];
    if dim == 3 {
        let c = w[0].cross(&w[1]);
        let k = (0..dirs.len()).max_by(|&a, &b| c.dot(&dirs[a]).abs().total_cmp(&c.dot(&dirs[b]).abs())).unwrap();
        w.push(dirs[k]);
    }
    w
}

/// Certificate from an already sampled good set at (P, δ).
pub fn certify(domain: &C0Domain, set: &DirectionSet) -> Result<ProbeOutcome> {
    let dim = domain.dim;
    let (p, delta) = (set.center, set.radius);
    let no = |rank| ProbeOutcome::NoCertificate { point: p, delta, rank, directions: set.directions.len() };
    if set.directions.len() < dim {
        return Ok(no(set.directions.len().min(1)));
    }
    let (rank, _) = direction_rank(&set.directions, dim);
    if rank < dim {
        return Ok(no(rank));
    }
    let w = witnesses(&set.directions, dim);
    let (wr, _) = direction_rank(&w, dim);
    if wr < dim {
        return Ok(no(rank));
    }
    let s: Point = w.iter().sum();
    if s.norm() < 1e-12 {
        return Err(Error::DegenerateCombination { norm: s.norm() });
    }
    let n = s / s.norm();
    let (lipschitz, secant_pairs) = secant_slope(domain, &p, &n, delta);
    let margin = sphere_grid(dim, set.angular_resolution)
        .iter()
        .filter(|g| !set.directions.iter().any(|d| (d - *g).norm() < 1e-12))
        .map(|g| angle_between(&n, g))
        .fold(std::f64::consts::PI, f64::min);
    Ok(ProbeOutcome::Certificate(LipschitzCertificate {
        point: p,
        direction: n,
        delta,
        lipschitz,
        witnesses: w,
        margin,
        cone_bound: 1.0 / margin.tan(),
        secant_pairs,
    }))
}

/// max |Δheight| / |Δtransverse| over cloud pairs in B(P, δ/2) whose
/// transverse separation in the frame of `n` is at least h_bnd.
pub fn secant_slope(domain: &C0Domain, p: &Point, n: &Point, delta: f64) -> (f64, usize) {
    let frame = frame_from_normal(n, domain.dim);
    let cloud = domain.boundary_cloud();
    let local: Vec<Point> = domain.cloud_within(p, 0.5 * delta).into_iter().map(|i| to_frame(&cloud[i], p, &frame)).collect();
    let h = domain.h_bnd();
    let hk = domain.dim - 1;
    let mut l = 0.0f64;
    let mut pairs = 0;
    for i in 0..local.len() {
        for j in i + 1..local.len() {
            let mut dt = local[i] - local[j];
            let dh = dt[hk];
            dt[hk] = 0.0;
            let t = dt.norm();
            if t >= h {
                pairs += 1;
                l = l.max(dh.abs() / t);
            }
        }
    }
    (l, pairs)
}

/// Lipschitz certificate at P from the good directions sampled at
/// `angular_res`, or `NoCertificate` when they do not span ℝ^m.
pub fn lipschitz_probe(domain: &C0Domain, p: &Point, delta: f64, angular_res: f64) -> Result<ProbeOutcome> {
    certify(domain, &pseudonormal_set(domain, p, delta, angular_res)?)
}

/// True when the sampled good set at (P, δ) is nonempty with angular
/// diameter at most 2·`angular_res`.
pub fn unique_direction_detector(domain: &C0Domain, p: &Point, delta: f64, angular_res: f64) -> Result<bool> {
    let set = pseudonormal_set(domain, p, delta, angular_res)?;
    Ok(is_unique(&set))
}

fn is_unique(set: &DirectionSet) -> bool {
    !set.directions.is_empty() && set.angular_diameter() <= 2.0 * set.angular_resolution + 1e-12
}

/// Whether the cloud in B(P, δ/2), written in the certificate's frame, is a
/// single-valued height map: no two points closer than h_bnd transversally
/// differ in height by more than (L + 2)·h_bnd.
pub fn certificate_is_sound(domain: &C0Domain, c: &LipschitzCertificate) -> bool {
    let frame = frame_from_normal(&c.direction, domain.dim);
    let cloud = domain.boundary_cloud();
    let local: Vec<Point> =
        domain.cloud_within(&c.point, 0.5 * c.delta).into_iter().map(|i| to_frame(&cloud[i], &c.point, &frame)).collect();
    let h = domain.h_bnd();
    let hk = domain.dim - 1;
    for i in 0..local.len() {
        for j in i + 1..local.len() {
            let mut dt = local[i] - local[j];
            let dh = dt[hk].abs();
            dt[hk] = 0.0;
            if dt.norm() < h && dh > (c.lipschitz + 2.0) * h {
                return false;
            }
        }
    }
    true
}

/// Whether ñ itself passes the line probe at (P, δ).
pub fn direction_is_good(domain: &C0Domain, c: &LipschitzCertificate) -> Result<bool> {
    probe(domain, &c.point, &c.direction, c.delta, &ProbeOptions::for_dim(domain.dim, 64))
}

#[derive(Clone, Debug)]
pub struct ScanOptions {
    pub angular_res: f64,
    /// Every `stride`-th cloud point of each component is probed.
    pub stride: usize,
    /// Radii tried in order; empty means {δ₀, δ₀/2, δ₀/4} with δ₀ half the
    /// smallest patch radius.
    pub deltas: Vec<f64>,
    /// Nodes per axis of the complement flood fill.
    pub component_grid: usize,
}

impl ScanOptions {
    pub fn for_dim(dim: usize) -> Self {
        ScanOptions {
            angular_res: if dim == 2 { 2f64.to_radians() } else { 10f64.to_radians() },
            stride: 8,
            deltas: Vec::new(),
            component_grid: if dim == 2 { 256 } else { 48 },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PointScan {
    /// Index into the boundary cloud.
    pub index: usize,
    pub point: Point,
    pub certificate: Option<LipschitzCertificate>,
    /// The good set at the largest δ has a single direction.
    pub unique_direction: bool,
    pub rank: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentScan {
    pub label: usize,
    pub outer: bool,
    pub points: Vec<PointScan>,
    pub diagnostic: Option<String>,
}

impl ComponentScan {
    pub fn certificates(&self) -> impl Iterator<Item = &LipschitzCertificate> {
        self.points.iter().filter_map(|p| p.certificate.as_ref())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityScan {
    pub deltas: Vec<f64>,
    pub angular_res: f64,
    pub components: Vec<ComponentScan>,
}

impl RegularityScan {
    pub fn certificates(&self) -> impl Iterator<Item = &LipschitzCertificate> {
        self.components.iter().flat_map(|c| c.certificates())
    }

    /// One JSON object per certificate: point, direction, delta, L, margin.
    pub fn to_jsonl(&self, dim: usize) -> String {
        let mut s = String::new();
        for c in self.certificates() {
            let v = serde_json::json!({
                "point": &c.point.as_slice()[..dim],
                "direction": &c.direction.as_slice()[..dim],
                "delta": c.delta,
                "L": c.lipschitz,
                "margin": c.margin,
            });
            let _ = writeln!(s, "{v}");
        }
        s
    }
}

/// Probe a single boundary point at decreasing radii until a certificate
/// appears.
pub fn scan_point(domain: &C0Domain, index: usize, deltas: &[f64], angular_res: f64) -> Result<PointScan> {
    let p = domain.boundary_cloud()[index];
    let mut out = PointScan { index, point: p, certificate: None, unique_direction: false, rank: 0 };
    for (k, &delta) in deltas.iter().enumerate() {
        let set = pseudonormal_set(domain, &p, delta, angular_res)?;
        if k == 0 {
            out.unique_direction = is_unique(&set);
        }
        match certify(domain, &set)? {
            ProbeOutcome::Certificate(c) => {
                out.rank = domain.dim;
                out.certificate = Some(c);
                break;
            }
            ProbeOutcome::NoCertificate { rank, .. } => out.rank = out.rank.max(rank),
        }
    }
    Ok(out)
}

/// Certificates over every boundary component.
pub fn partial_regularity_scan(domain: &C0Domain, opts: &ScanOptions) -> Result<RegularityScan> {
    let deltas = if opts.deltas.is_empty() {
        let r = domain.atlas.iter().map(|p| p.delta).fold(f64::INFINITY, f64::min);
        if !r.is_finite() {
            return Err(Error::InvalidInput("scan needs an atlas to choose radii".into()));
        }
        vec![0.5 * r, 0.25 * r, 0.125 * r]
    } else {
        opts.deltas.clone()
    };
    let dec = boundary_components(domain, opts.component_grid)?;
    let mut components = Vec::new();
    for comp in &dec.components {
        let picks: Vec<usize> = comp.points.iter().step_by(opts.stride.max(1)).copied().collect();
        let points: Vec<PointScan> =
            picks.par_iter().map(|&i| scan_point(domain, i, &deltas, opts.angular_res)).collect::<Result<_>>()?;
        let found = points.iter().any(|p| p.certificate.is_some());
        let diagnostic = (!found).then(|| {
            format!("no certificate at {} points; refine the angular resolution or the radii", points.len())
        });
        components.push(ComponentScan { label: comp.label, outer: comp.outer, points, diagnostic });
    }
    Ok(RegularityScan { deltas, angular_res: opts.angular_res, components })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::FixtureId;
    use crate::geometry::p2;

    #[test]
    fn square_corner_has_slope_one() {
        let d = C0Domain::fixture(FixtureId::UnitSquare).unwrap();
        let out = lipschitz_probe(&d, &p2(1.0, 1.0), 0.2, 2f64.to_radians()).unwrap();
        let c = out.certificate().expect("certificate");
        assert!((c.direction - p2(-1.0, -1.0).normalize()).norm() < 1e-9, "{:?}", c.direction);
        assert!((c.lipschitz - 1.0).abs() < 0.05, "L = {}", c.lipschitz);
        assert!(certificate_is_sound(&d, c));
        assert!(direction_is_good(&d, c).unwrap());
    }

    #[test]
    fn disk_point_is_nearly_flat() {
        let d = C0Domain::fixture(FixtureId::UnitDisk).unwrap();
        let p = d.boundary_cloud()[100];
        let c = lipschitz_probe(&d, &p, 0.1, 2f64.to_radians()).unwrap();
        assert!(c.certificate().unwrap().lipschitz <= 0.1);
        assert!(!unique_direction_detector(&d, &p, 0.1, 2f64.to_radians()).unwrap());
    }

    #[test]
    fn square_edge_has_a_cone() {
        let d = C0Domain::fixture(FixtureId::UnitSquare).unwrap();
        assert!(!unique_direction_detector(&d, &p2(0.5, 0.0), 0.1, 2f64.to_radians()).unwrap());
    }

    #[test]
    fn far_ball_is_rejected() {
        let d = C0Domain::fixture(FixtureId::UnitDisk).unwrap();
        assert!(matches!(lipschitz_probe(&d, &p2(0.0, 0.0), 0.1, 0.1), Err(Error::BallMissesBoundary { .. })));
    }
}
