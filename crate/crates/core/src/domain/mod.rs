//! Bounded C⁰ domains: graph-patch atlas, classifier, signed distance and
//! boundary sampling.

mod fixtures;
mod patch;
mod spec_file;

pub use fixtures::FixtureId;
pub use patch::GraphPatch;
pub use spec_file::{DomainSpec, GridSpec, PatchSpec};

use crate::geometry::{Aabb, Point};
use crate::good_directions::{build_atlas, AtlasOptions};
use crate::mesh::{BoundaryMesh, Nearest};
use crate::spatial::KdTree;
use crate::{Error, Result};
use nalgebra::Matrix3;
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Side {
    Interior,
    Exterior,
    NearBoundary,
}

#[derive(Clone, Debug, Default)]
pub struct BuildOptions {
    /// Boundary mesh spacing; fixture default when `None`.
    pub spacing: Option<f64>,
    /// Height-grid nodes per transverse axis; 33 in 2D, 9 in 3D by default.
    pub patch_resolution: Option<usize>,
    /// Skip the atlas (cheap domains for distance-only work).
    pub no_atlas: bool,
}

#[derive(Clone, Debug)]
pub struct C0Domain {
    pub dim: usize,
    pub atlas: Vec<GraphPatch>,
    pub fixture: Option<FixtureId>,
    pub pathological: bool,
    /// Rotation applied to the fixture (classifier evaluated at Rᵀx).
    pub transform: Option<Matrix3<f64>>,
    mesh: BoundaryMesh,
    cloud: KdTree,
    h_bnd: f64,
    bbox: Aabb,
    patch_tree: Option<KdTree>,
    max_delta: f64,
    sign_from_classifier: bool,
}

impl C0Domain {
    /// Fixture with default resolution.
    pub fn fixture(f: FixtureId) -> Result<Self> {
        Self::from_fixture(f, &BuildOptions::default())
    }

    pub fn from_fixture(f: FixtureId, opts: &BuildOptions) -> Result<Self> {
        let h = opts.spacing.unwrap_or_else(|| f.default_spacing());
        if !(h > 0.0) {
            return Err(Error::InvalidInput(format!("boundary spacing must be positive, got {h}")));
        }
        let mesh = f.boundary_mesh(h);
        let (lo, hi) = f.bounding_box();
        let pathological = f.is_pathological();
        let mut d = Self::assemble(f.dim(), Vec::new(), Some(f.clone()), mesh, Aabb { min: lo, max: hi });
        d.pathological = pathological;
        d.sign_from_classifier = pathological;
        if !pathological && !opts.no_atlas {
            let res = opts.patch_resolution.unwrap_or(if d.dim == 2 { 33 } else { 9 });
            let atlas = build_atlas(&d, &f.atlas_candidates(), &AtlasOptions { resolution: res, ..Default::default() })?;
            d.set_atlas(atlas);
        }
        Ok(d)
    }

    fn assemble(dim: usize, atlas: Vec<GraphPatch>, fixture: Option<FixtureId>, mesh: BoundaryMesh, bbox: Aabb) -> Self {
        let cloud = KdTree::new(mesh.vertices.clone());
        let h_bnd = mesh.max_edge();
        let bbox = bbox.merge(&mesh.bbox());
        let mut d = C0Domain {
            dim,
            atlas: Vec::new(),
            fixture,
            pathological: false,
            transform: None,
            mesh,
            cloud,
            h_bnd,
            bbox,
            patch_tree: None,
            max_delta: 0.0,
            sign_from_classifier: false,
        };
        d.set_atlas(atlas);
        d
    }

    /// Replace the atlas and rebuild the patch lookup.
    pub fn set_atlas(&mut self, atlas: Vec<GraphPatch>) {
        self.max_delta = atlas.iter().map(|p| p.delta).fold(0.0, f64::max);
        self.patch_tree = (!atlas.is_empty()).then(|| KdTree::new(atlas.iter().map(|p| p.origin).collect()));
        self.atlas = atlas;
    }

    /// Domain described only by patches (optionally with a fixture classifier).
    pub fn from_spec(spec: &DomainSpec) -> Result<Self> {
        let atlas = spec.patches()?;
        let dim = spec.dimension;
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidInput(format!("dimension must be 2 or 3, got {dim}")));
        }
        if let Some(f) = &spec.fixture {
            if f.dim() != dim {
                return Err(Error::InvalidInput("fixture dimension does not match the spec".into()));
            }
            let mut d = Self::from_fixture(f.clone(), &BuildOptions { no_atlas: true, ..Default::default() })?;
            if let Some(t) = spec.transform() {
                d = d.rotated(&t);
            }
            d.set_atlas(atlas);
            return Ok(d);
        }
        if atlas.is_empty() {
            return Err(Error::InvalidInput("spec has neither patches nor a fixture".into()));
        }
        let spacing = atlas.iter().map(|p| p.delta).fold(f64::INFINITY, f64::min) / 64.0;
        let mesh = patch_union_mesh(&atlas, dim, spacing);
        let mut bbox = Aabb::empty();
        for p in &atlas {
            bbox = bbox.merge(&Aabb::from_points([&p.origin]).inflate(p.delta));
        }
        let mut d = Self::assemble(dim, atlas, None, mesh, bbox);
        d.sign_from_classifier = true;
        Ok(d)
    }

    pub fn to_spec(&self) -> DomainSpec {
        DomainSpec::from_domain(self)
    }

    /// Rigidly rotated copy (fixture domains only carry the rotation along;
    /// patch-only domains rotate their patches).
    pub fn rotated(&self, rot: &Matrix3<f64>) -> Self {
        let t = match self.transform {
            Some(t) => rot * t,
            None => *rot,
        };
        let mesh = self.mesh.transformed(rot);
        let atlas = self.atlas.iter().map(|p| p.transformed(rot)).collect();
        let corners = corners(&self.bbox);
        let bbox = Aabb::from_points(corners.iter().map(|c| rot * c).collect::<Vec<_>>().iter());
        let mut d = Self::assemble(self.dim, atlas, self.fixture.clone(), mesh, bbox);
        d.pathological = self.pathological;
        d.sign_from_classifier = self.sign_from_classifier;
        d.transform = Some(t);
        d
    }

    pub fn is_c0(&self) -> bool {
        !self.pathological
    }

    /// Fail with `NotC0` for pathological fixtures.
    pub fn require_c0(&self, what: &str) -> Result<()> {
        if self.pathological {
            let name = self.fixture.as_ref().map(|f| f.name()).unwrap_or("domain");
            return Err(Error::NotC0(format!("{what} needs a C⁰ domain; {name} is pathological")));
        }
        Ok(())
    }

    pub fn h_bnd(&self) -> f64 {
        self.h_bnd
    }

    pub fn bounding_box(&self) -> Aabb {
        self.bbox
    }

    pub fn mesh(&self) -> &BoundaryMesh {
        &self.mesh
    }

    pub fn boundary_cloud(&self) -> &[Point] {
        self.cloud.points()
    }

    /// Indices of cloud points within `r` of `x`.
    pub fn cloud_within(&self, x: &Point, r: f64) -> Vec<usize> {
        self.cloud.within(x, r)
    }

    /// Exact interior test.
    pub fn inside(&self, x: &Point) -> bool {
        if let Some(f) = &self.fixture {
            let y = match &self.transform {
                Some(t) => t.transpose() * x,
                None => *x,
            };
            return f.inside(&y);
        }
        self.patch_inside(x)
    }

    fn patch_inside(&self, x: &Point) -> bool {
        // The patch in which x sits deepest decides.
        if let Some(p) = self.deepest_patch(x) {
            return self.atlas[p].is_interior(x);
        }
        // Outside every ball: side of the nearest boundary point with respect
        // to the good direction of the patch that contains it.
        let nb = self.mesh.nearest(x);
        let q = nb.point;
        match self.deepest_patch(&q) {
            Some(p) => (x - q).dot(&self.atlas[p].direction()) > 0.0,
            None => false,
        }
    }

    /// Patch whose ball contains `x` with the largest relative margin.
    pub fn deepest_patch(&self, x: &Point) -> Option<usize> {
        let tree = self.patch_tree.as_ref()?;
        let mut best: Option<(usize, f64)> = None;
        for i in tree.within(x, self.max_delta) {
            let p = &self.atlas[i];
            let r = (x - p.origin).norm() / p.delta;
            if r < 1.0 && best.is_none_or(|(_, b)| r < b) {
                best = Some((i, r));
            }
        }
        best.map(|b| b.0)
    }

    /// Indices of patches with `|x − P_i| < scale·δ_i`.
    pub fn patches_near(&self, x: &Point, scale: f64) -> Vec<usize> {
        let Some(tree) = self.patch_tree.as_ref() else { return Vec::new() };
        tree.within(x, scale * self.max_delta)
            .into_iter()
            .filter(|&i| (x - self.atlas[i].origin).norm() < scale * self.atlas[i].delta)
            .collect()
    }

    pub fn classify(&self, x: &Point, tol: f64) -> Side {
        if self.signed_distance(x).abs() <= tol {
            Side::NearBoundary
        } else if self.inside(x) {
            Side::Interior
        } else {
            Side::Exterior
        }
    }

    /// Signed distance to the boundary, positive inside.
    pub fn signed_distance(&self, x: &Point) -> f64 {
        self.fix_sign(x, self.mesh.nearest(x))
    }

    /// Nearest boundary feature with sign.
    pub fn nearest(&self, x: &Point) -> Nearest {
        let mut n = self.mesh.nearest(x);
        n.signed = self.fix_sign(x, n);
        n
    }

    /// Signed distance when |d(x)| < `bound` is known; falls back to the
    /// unbounded query otherwise.
    pub fn signed_distance_bounded(&self, x: &Point, bound: f64) -> f64 {
        match self.mesh.nearest_bounded(x, bound) {
            Some(n) => self.fix_sign(x, n),
            None => self.signed_distance(x),
        }
    }

    /// Nearest feature (sign fixed) if one lies within `bound`.
    pub fn nearest_bounded(&self, x: &Point, bound: f64) -> Option<Nearest> {
        self.mesh.nearest_bounded(x, bound).map(|mut n| {
            n.signed = self.fix_sign(x, n);
            n
        })
    }

    /// Signed distance restricted to candidate elements (caller guarantees
    /// the nearest element is among them).
    pub fn signed_distance_among(&self, x: &Point, candidates: &[u32]) -> f64 {
        self.fix_sign(x, self.mesh.nearest_among(x, candidates))
    }

    #[inline]
    fn fix_sign(&self, x: &Point, n: Nearest) -> f64 {
        if !self.sign_from_classifier || n.distance == 0.0 {
            return n.signed;
        }
        if self.inside(x) {
            n.distance
        } else {
            -n.distance
        }
    }

    /// Distance with sign taken from the mesh pseudonormal only.
    pub fn uses_classifier_sign(&self) -> bool {
        self.sign_from_classifier
    }

    /// Dense point sample of ∂Ω with gaps at most `spacing`.
    pub fn boundary_sample(&self, spacing: f64) -> Result<Vec<Point>> {
        if !(spacing > 0.0) {
            return Err(Error::InvalidInput("spacing must be positive".into()));
        }
        let min_radius = self.atlas.iter().map(|p| p.delta).fold(f64::INFINITY, f64::min);
        if spacing > min_radius {
            return Err(Error::SpacingTooCoarse { spacing, min_radius });
        }
        if let Some(f) = &self.fixture {
            let m = f.boundary_mesh(spacing);
            let pts = match &self.transform {
                Some(t) => m.vertices.iter().map(|p| t * p).collect(),
                None => m.vertices,
            };
            return Ok(pts);
        }
        let mut out = Vec::new();
        for p in &self.atlas {
            for row in p.graph_points(spacing / 2.0) {
                out.extend(row);
            }
        }
        Ok(out)
    }

    /// Index of the first boundary point outside every quarter-radius ball.
    pub fn cover_gap(&self) -> Option<usize> {
        self.boundary_cloud()
            .par_iter()
            .position_first(|q| self.quarter_depth(q) <= 0.0)
    }

    fn quarter_depth(&self, q: &Point) -> f64 {
        let Some(tree) = self.patch_tree.as_ref() else { return f64::NEG_INFINITY };
        tree.within(q, 0.25 * self.max_delta)
            .into_iter()
            .map(|i| 0.25 * self.atlas[i].delta - (q - self.atlas[i].origin).norm())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Width w such that {|d| < w} lies in the union of quarter-radius balls.
    /// Errors with `CoverGap` when some boundary point is uncovered.
    pub fn collar_width(&self) -> Result<f64> {
        self.require_c0("collar")?;
        if self.atlas.is_empty() {
            return Err(Error::CoverGap { index: 0 });
        }
        let depths: Vec<f64> = self.boundary_cloud().par_iter().map(|q| self.quarter_depth(q)).collect();
        if let Some(i) = depths.iter().position(|&v| v <= 0.0) {
            return Err(Error::CoverGap { index: i });
        }
        let w = depths.iter().copied().fold(f64::INFINITY, f64::min) - self.h_bnd;
        if w <= 0.0 {
            return Err(Error::CollarTooThin { distance: w, required: 0.0 });
        }
        Ok(w)
    }
}

fn corners(b: &Aabb) -> Vec<Point> {
    let mut v = Vec::with_capacity(8);
    for i in 0..8 {
        v.push(Point::new(
            if i & 1 == 0 { b.min.x } else { b.max.x },
            if i & 2 == 0 { b.min.y } else { b.max.y },
            if i & 4 == 0 { b.min.z } else { b.max.z },
        ));
    }
    v
}

/// Union of the patch graphs as a (non-manifold) PL boundary.
fn patch_union_mesh(atlas: &[GraphPatch], dim: usize, spacing: f64) -> BoundaryMesh {
    if dim == 2 {
        let lines: Vec<Vec<Point>> = atlas.iter().flat_map(|p| p.graph_points(spacing)).collect();
        return BoundaryMesh::from_polylines(&lines);
    }
    let mut vertices = Vec::new();
    let mut tris = Vec::new();
    for p in atlas {
        let n = ((2.0 * p.delta / spacing).ceil() as usize).max(2) + 1;
        let coord = |i: usize| -p.delta + 2.0 * p.delta * i as f64 / (n - 1) as f64;
        let base = vertices.len();
        let mut keep = vec![false; n * n];
        for j in 0..n {
            for i in 0..n {
                let mut y = Point::new(coord(i), coord(j), 0.0);
                y.z = p.height(&y);
                keep[i + n * j] = y.norm() < p.delta;
                vertices.push(p.global(&y));
            }
        }
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let k = |a: usize, b: usize| a + n * b;
                let q = [k(i, j), k(i + 1, j), k(i + 1, j + 1), k(i, j + 1)];
                if q.iter().all(|&v| keep[v]) {
                    let g = |v: usize| (base + v) as u32;
                    tris.push([g(q[0]), g(q[1]), g(q[2])]);
                    tris.push([g(q[0]), g(q[2]), g(q[3])]);
                }
            }
        }
    }
    BoundaryMesh::from_triangles(vertices, tris)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{p2, p3};

    fn disk() -> C0Domain {
        C0Domain::fixture(FixtureId::UnitDisk).unwrap()
    }

    #[test]
    fn disk_classification_and_distance() {
        let d = disk();
        assert_eq!(d.classify(&p2(0.0, 0.0), 0.0), Side::Interior);
        assert_eq!(d.classify(&p2(2.0, 0.0), 0.0), Side::Exterior);
        assert_eq!(d.classify(&p2(1.0, 0.0), 1e-9), Side::NearBoundary);
        let h = d.h_bnd();
        assert!((d.signed_distance(&p2(0.0, 0.0)) - 1.0).abs() <= h);
        assert!((d.signed_distance(&p2(2.0, 0.0)) + 1.0).abs() <= h);
    }

    #[test]
    fn square_center_distance() {
        let d = C0Domain::fixture(FixtureId::UnitSquare).unwrap();
        assert!((d.signed_distance(&p2(0.5, 0.5)) - 0.5).abs() <= d.h_bnd());
    }

    #[test]
    fn atlas_covers_the_disk() {
        let d = disk();
        assert!(d.cover_gap().is_none());
        let w = d.collar_width().unwrap();
        assert!(w > 0.2, "collar {w}");
        for p in &d.atlas {
            assert!(p.frame_error() < 1e-12);
            assert!(p.height(&Point::zeros()).abs() < 1e-9);
        }
    }

    #[test]
    fn patch_heights_separate_the_sides() {
        for f in [FixtureId::UnitDisk, FixtureId::UnitSquare, FixtureId::annulus()] {
            let d = C0Domain::fixture(f).unwrap();
            for p in d.atlas.iter().step_by(7) {
                for k in 0..p.node_count() {
                    let mut y = p.node_coords(k);
                    y.y = p.values[k];
                    if y.norm() > 0.7 * p.delta {
                        continue;
                    }
                    for s in [1e-3, 0.05, 0.2].map(|s| s * p.delta) {
                        let mut a = y;
                        a.y += s;
                        let mut b = y;
                        b.y -= s;
                        assert!(d.inside(&p.global(&a)));
                        assert!(!d.inside(&p.global(&b)));
                    }
                }
            }
        }
    }

    #[test]
    fn sample_spacing() {
        let d = disk();
        let s = d.boundary_sample(0.1).unwrap();
        assert!(s.len() >= 62);
        assert!(matches!(d.boundary_sample(5.0), Err(Error::SpacingTooCoarse { .. })));
    }

    #[test]
    fn rotation_moves_the_classifier() {
        let d = disk();
        let sq = C0Domain::fixture(FixtureId::UnitSquare).unwrap();
        let r = crate::geometry::rotation(&p3(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        let rs = sq.rotated(&r);
        assert!(rs.inside(&p2(-0.5, 0.5)));
        assert!(!rs.inside(&p2(0.5, 0.5)));
        assert!((rs.signed_distance(&p2(-0.5, 0.5)) - 0.5).abs() < 1e-9);
        assert!(d.rotated(&r).inside(&p2(0.3, 0.3)));
    }

    #[test]
    fn pathological_fixtures_are_flagged() {
        let k = C0Domain::fixture(FixtureId::KissingDisks).unwrap();
        assert!(!k.is_c0());
        assert!(matches!(k.collar_width(), Err(Error::NotC0(_))));
        assert!(k.inside(&p2(0.0, -0.5)));
        assert!(!k.inside(&p2(0.0, 0.5)));
        assert!(k.signed_distance(&p2(0.0, 0.5)) < 0.0);
    }
}
