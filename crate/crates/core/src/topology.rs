//! Degrees of sphere-valued boundary fields, Euler characteristics, cover
//! (surjectivity) checks, the torus pseudonormal field, complement
//! components and the good-direction structure of boundary components.

use crate::domain::C0Domain;
use crate::geometry::{angle_between, p3, sphere_grid, sphere_grid_spacing, Point};
use crate::good_directions::{pseudonormal_set, CanonicalField};
use crate::mesh::TriMesh;
use crate::spatial::KdTree;
use crate::{Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{HashMap, VecDeque};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

/// Degrees are rejected when the raw sum is this far from an integer.
pub const DEGREE_GATE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum FieldLabel {
    Normal,
    Canonical,
    Torus(f64),
    Custom(String),
}

/// Unit vectors attached to the vertices of a closed oriented carrier:
/// segments (2D) or triangles (3D), oriented with the outward normal.
#[derive(Clone, Debug)]
pub struct SphereField {
    pub dim: usize,
    pub positions: Vec<Point>,
    pub cells: Vec<Vec<u32>>,
    pub values: Vec<Point>,
    pub label: FieldLabel,
}

impl SphereField {
    /// Normalizes `values`; zero vectors are rejected.
    pub fn new(dim: usize, positions: Vec<Point>, cells: Vec<Vec<u32>>, values: Vec<Point>, label: FieldLabel) -> Result<Self> {
        if values.len() != positions.len() {
            return Err(Error::InvalidInput("one field value per carrier vertex".into()));
        }
        let per_cell = if dim == 2 { 2 } else { 3 };
        if cells.iter().any(|c| c.len() != per_cell || c.iter().any(|&v| v as usize >= positions.len())) {
            return Err(Error::InvalidInput("malformed carrier cell".into()));
        }
        let values = values
            .into_iter()
            .map(|v| if v.norm() > 0.0 { Ok(v.normalize()) } else { Err(Error::InvalidInput("zero field value".into())) })
            .collect::<Result<_>>()?;
        Ok(SphereField { dim, positions, cells, values, label })
    }

    /// Closed curve through `points` in order (counter-clockwise for an
    /// outer boundary).
    pub fn on_curve(points: Vec<Point>, values: Vec<Point>, label: FieldLabel) -> Result<Self> {
        let n = points.len() as u32;
        let cells = (0..n).map(|i| vec![i, (i + 1) % n]).collect();
        Self::new(2, points, cells, values, label)
    }

    pub fn on_trimesh(mesh: &TriMesh, values: Vec<Point>, label: FieldLabel) -> Result<Self> {
        let cells = mesh.triangles.iter().map(|t| t.to_vec()).collect();
        Self::new(3, mesh.vertices.clone(), cells, values, label)
    }

    /// Outward unit normals of a triangle mesh.
    pub fn mesh_normals(mesh: &TriMesh) -> Result<Self> {
        Self::on_trimesh(mesh, mesh.vertex_normals(), FieldLabel::Normal)
    }

    /// Outward normals of an extracted level boundary.
    pub fn level_normals(level: &crate::approximation::LevelDomain) -> Result<Self> {
        Self::new(level.dim, level.vertices.clone(), level.cells.clone(), level.vertex_normals(), FieldLabel::Normal)
    }

    /// A field evaluated on the vertices of a level boundary.
    pub fn on_level<F>(level: &crate::approximation::LevelDomain, f: F, label: FieldLabel) -> Result<Self>
    where
        F: Fn(&Point) -> Result<Point> + Sync + Send,
    {
        let values = level.vertices.par_iter().map(f).collect::<Result<_>>()?;
        Self::new(level.dim, level.vertices.clone(), level.cells.clone(), values, label)
    }

    /// The canonical good-direction field on the boundary mesh of `domain`.
    pub fn canonical(domain: &C0Domain, field: &CanonicalField) -> Result<Self> {
        let mesh = domain.mesh();
        let values: Vec<Point> = mesh
            .vertices
            .par_iter()
            .map(|p| field.eval(p)?.ok_or(Error::CollarTooThin { distance: 0.0, required: field.collar }))
            .collect::<Result<_>>()?;
        let per = if domain.dim == 2 { 2 } else { 3 };
        let cells = mesh.elements.iter().map(|e| e[..per].to_vec()).collect();
        Self::new(domain.dim, mesh.vertices.clone(), cells, values, FieldLabel::Canonical)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(if self.dim == 2 { "x,y,nx,ny\n" } else { "x,y,z,nx,ny,nz\n" });
        for (p, v) in self.positions.iter().zip(&self.values) {
            let row: Vec<String> =
                (0..self.dim).map(|k| p[k].to_string()).chain((0..self.dim).map(|k| v[k].to_string())).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeReport {
    pub degree: i64,
    /// Sum before rounding.
    pub raw: f64,
    pub residual: f64,
    pub cells: usize,
    pub vertices: usize,
    /// Largest angular jump along a segment or across a triangle.
    pub max_jump: f64,
}

fn finish_degree(parts: Vec<f64>, cells: usize, vertices: usize, max_jump: f64, full_turn: f64) -> Result<DegreeReport> {
    // Sequential sum in cell order keeps the result reproducible.
    let raw = parts.iter().sum::<f64>() / full_turn;
    let degree = raw.round();
    let residual = (raw - degree).abs();
    if residual >= DEGREE_GATE {
        return Err(Error::DegreeRejected { residual });
    }
    Ok(DegreeReport { degree: degree as i64, raw, residual, cells, vertices, max_jump })
}

/// Winding number of a field on closed curves: accumulated signed angle over
/// 2π.
pub fn winding_degree_2d(field: &SphereField) -> Result<DegreeReport> {
    if field.dim != 2 {
        return Err(Error::InvalidInput("winding degree needs a planar field".into()));
    }
    let parts: Vec<f64> = field
        .cells
        .iter()
        .map(|c| {
            let (a, b) = (field.values[c[0] as usize], field.values[c[1] as usize]);
            (a.x * b.y - a.y * b.x).atan2(a.dot(&b))
        })
        .collect();
    let mut max_jump = 0.0f64;
    for (i, d) in parts.iter().enumerate() {
        if d.abs() >= FRAC_PI_2 {
            return Err(Error::JumpTooLarge { index: i, angle: d.abs() });
        }
        max_jump = max_jump.max(d.abs());
    }
    finish_degree(parts, field.cells.len(), field.positions.len(), max_jump, 2.0 * PI)
}

/// Signed solid angle of the spherical triangle (a, b, c).
fn solid_angle(a: &Point, b: &Point, c: &Point) -> f64 {
    let num = a.dot(&b.cross(c));
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * num.atan2(den)
}

/// Degree of a field on a closed oriented surface: total signed area of the
/// image triangles over 4π.
pub fn solid_angle_degree_3d(field: &SphereField) -> Result<DegreeReport> {
    if field.dim != 3 {
        return Err(Error::InvalidInput("solid-angle degree needs a 3D field".into()));
    }
    let rows: Vec<(f64, f64)> = field
        .cells
        .par_iter()
        .map(|c| {
            let [a, b, cc] = [0, 1, 2].map(|k| field.values[c[k] as usize]);
            let diam = angle_between(&a, &b).max(angle_between(&b, &cc)).max(angle_between(&cc, &a));
            (solid_angle(&a, &b, &cc), diam)
        })
        .collect();
    let mut max_jump = 0.0f64;
    for (i, &(_, d)) in rows.iter().enumerate() {
        if d >= FRAC_PI_2 {
            return Err(Error::TriangleTooCoarse { index: i, diameter: d });
        }
        max_jump = max_jump.max(d);
    }
    finish_degree(rows.into_iter().map(|r| r.0).collect(), field.cells.len(), field.positions.len(), max_jump, 4.0 * PI)
}

/// Winding number or solid-angle degree, by dimension.
pub fn degree(field: &SphereField) -> Result<DegreeReport> {
    if field.dim == 2 {
        winding_degree_2d(field)
    } else {
        solid_angle_degree_3d(field)
    }
}

/// V − E + F of a closed triangle mesh.
pub fn euler_characteristic(mesh: &TriMesh) -> Result<i64> {
    let cells: Vec<Vec<u32>> = mesh.triangles.iter().map(|t| t.to_vec()).collect();
    euler_characteristic_of(3, mesh.vertices.len(), &cells)
}

/// V − E + F for triangles (3D), requiring every edge to have exactly two
/// faces; 0 for closed curves (2D), requiring every vertex to have two
/// segments. Only referenced vertices count.
pub fn euler_characteristic_of(dim: usize, vertices: usize, cells: &[Vec<u32>]) -> Result<i64> {
    let mut used = vec![false; vertices];
    for c in cells {
        for &v in c {
            used[v as usize] = true;
        }
    }
    let v = used.iter().filter(|&&u| u).count() as i64;
    if dim == 2 {
        let mut deg = vec![0usize; vertices];
        for c in cells {
            deg[c[0] as usize] += 1;
            deg[c[1] as usize] += 1;
        }
        if let Some(i) = deg.iter().position(|&d| d != 0 && d != 2) {
            return Err(Error::NonManifoldMesh(i, i, deg[i]));
        }
        return Ok(v - cells.len() as i64);
    }
    let mut edges: HashMap<(u32, u32), usize> = HashMap::new();
    for c in cells {
        for k in 0..3 {
            let (a, b) = (c[k], c[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut bad: Vec<_> = edges.iter().filter(|(_, &n)| n != 2).collect();
    bad.sort();
    if let Some((&(a, b), &n)) = bad.first() {
        return Err(Error::NonManifoldMesh(a as usize, b as usize, n));
    }
    Ok(v - edges.len() as i64 + cells.len() as i64)
}

/// Euler characteristic of a planar region bounded by closed curves:
/// +1 per outer curve, −1 per hole (signed by orientation).
pub fn planar_euler_characteristic(loops: &[Vec<Point>]) -> i64 {
    loops
        .iter()
        .map(|l| {
            let area: f64 = (0..l.len()).map(|i| {
                let (a, b) = (l[i], l[(i + 1) % l.len()]);
                a.x * b.y - a.y * b.x
            }).sum();
            if area > 0.0 { 1 } else { -1 }
        })
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct SurjectivityReport {
    pub degree: Option<i64>,
    /// Degree ≠ 0, so the field is onto.
    pub degree_route: bool,
    pub grid_directions: usize,
    pub uncovered: usize,
    /// Grid directions farther than the resolution from every field value.
    pub uncovered_directions: Vec<[f64; 3]>,
    pub cover_route: bool,
    /// Degree route claims surjectivity but the cover check disagrees.
    pub disagreement: bool,
    pub angular_res: f64,
}

/// Field values plus the normalized midpoints of every cell (the image of
/// the piecewise-geodesic interpolant sampled at its cells).
fn image_sample(field: &SphereField) -> Vec<Point> {
    let mut pts = field.values.clone();
    for c in &field.cells {
        let s: Point = c.iter().map(|&v| field.values[v as usize]).sum();
        if s.norm() > 1e-9 {
            pts.push(s.normalize());
        }
    }
    pts
}

/// Directions of `grid` whose angle to the nearest of `image` exceeds `res`.
pub fn uncovered_directions(image: &[Point], grid: &[Point], res: f64) -> Vec<Point> {
    let tree = KdTree::new(image.to_vec());
    let chord = 2.0 * (0.5 * res).sin();
    grid.par_iter()
        .filter(|g| tree.nearest(g).is_none_or(|(_, d)| d > chord))
        .copied()
        .collect()
}

/// Two verdicts on surjectivity: nonzero degree, and a direct cover check
/// of a sphere grid at `angular_res`.
pub fn surjectivity_audit(field: &SphereField, angular_res: f64) -> SurjectivityReport {
    let degree = degree(field).ok().map(|d| d.degree);
    let grid = sphere_grid(field.dim, angular_res);
    let miss = uncovered_directions(&image_sample(field), &grid, angular_res);
    let degree_route = degree.is_some_and(|d| d != 0);
    let cover_route = miss.is_empty();
    SurjectivityReport {
        degree,
        degree_route,
        grid_directions: grid.len(),
        uncovered: miss.len(),
        uncovered_directions: miss.iter().map(|p| [p.x, p.y, p.z]).collect(),
        cover_route,
        disagreement: degree_route && !cover_route,
        angular_res,
    }
}

/// The pseudonormal field ñ^γ on the boundary of the standard solid torus,
/// parametrized by (θ, φ) ∈ [0, 2π)², which agrees with the inward normal ñ
/// away from the bands around φ = π/2 and φ = 3π/2.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TorusField {
    pub gamma: f64,
}

/// Inward unit normal of the torus at (θ, φ).
pub fn torus_inward_normal(theta: f64, phi: f64) -> Point {
    -p3(theta.cos() * phi.cos(), theta.sin() * phi.cos(), phi.sin())
}

pub fn torus_pseudonormal(gamma: f64) -> Result<TorusField> {
    if !(gamma > 0.0 && gamma < FRAC_PI_2) {
        return Err(Error::InvalidInput(format!("torus field needs gamma in (0, pi/2), got {gamma}")));
    }
    Ok(TorusField { gamma })
}

impl TorusField {
    pub fn eval(&self, theta: f64, phi: f64) -> Point {
        let g = self.gamma;
        let phi = phi.rem_euclid(2.0 * PI);
        let (a, b) = (FRAC_PI_2, 3.0 * FRAC_PI_2);
        if phi > a - g && phi < a + g {
            torus_inward_normal(theta + (phi - a + g) * PI / (2.0 * g), a - g)
        } else if phi > b - g && phi < b + g {
            torus_inward_normal(theta + (phi - b - g) * PI / (2.0 * g), b + g)
        } else {
            torus_inward_normal(theta, phi)
        }
    }

    /// (θ, φ, n₁, n₂, n₃) rows over an n×n grid.
    pub fn to_csv(&self, n: usize) -> String {
        let mut s = String::from("theta,phi,n1,n2,n3\n");
        for i in 0..n {
            for j in 0..n {
                let (t, p) = (2.0 * PI * i as f64 / n as f64, 2.0 * PI * j as f64 / n as f64);
                let v = self.eval(t, p);
                let _ = writeln!(s, "{t},{p},{},{},{}", v.x, v.y, v.z);
            }
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TorusBandReport {
    pub gamma: f64,
    pub grid: usize,
    /// min ñ·ñ^γ.
    pub min_alignment: f64,
    pub valid: bool,
    /// max |ñ^γ·e₃|.
    pub max_e3: f64,
    /// The image lies in E_{max_e3}; cos γ is the exact bound.
    pub band_bound: f64,
    /// Largest unit-norm or periodicity defect.
    pub max_defect: f64,
}

/// Pseudonormal validity and band containment of ñ^γ on a grid×grid
/// (θ, φ) lattice.
pub fn torus_band_audit(field: &TorusField, grid: usize) -> TorusBandReport {
    let rows: Vec<(f64, f64, f64)> = (0..grid)
        .into_par_iter()
        .map(|i| {
            let t = 2.0 * PI * i as f64 / grid as f64;
            let mut acc = (f64::INFINITY, 0.0f64, 0.0f64);
            for j in 0..grid {
                let p = 2.0 * PI * (j as f64 + 0.5) / grid as f64;
                let v = field.eval(t, p);
                acc.0 = acc.0.min(torus_inward_normal(t, p).dot(&v));
                acc.1 = acc.1.max(v.z.abs());
                let per = (field.eval(t + 2.0 * PI, p) - v).norm().max((field.eval(t, p + 2.0 * PI) - v).norm());
                acc.2 = acc.2.max((v.norm() - 1.0).abs()).max(per);
            }
            acc
        })
        .collect();
    let min_alignment = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    TorusBandReport {
        gamma: field.gamma,
        grid,
        min_alignment,
        valid: min_alignment > 0.0,
        max_e3: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        band_bound: field.gamma.cos(),
        max_defect: rows.iter().map(|r| r.2).fold(0.0, f64::max),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BandCoverReport {
    pub delta: f64,
    pub angular_res: f64,
    pub band_directions: usize,
    pub uncovered: usize,
    pub covered: bool,
    /// Largest δ′ (on a 1/100 grid) with E_δ′ covered.
    pub largest_covered_band: f64,
}

/// Whether the image of `f` on an n×n (θ, φ) grid covers the band
/// E_δ = {|n·e₃| < δ} at `angular_res`.
pub fn band_cover_audit<F>(f: F, n: usize, delta: f64, angular_res: f64) -> BandCoverReport
where
    F: Fn(f64, f64) -> Point + Sync,
{
    let image: Vec<Point> = (0..n * n)
        .into_par_iter()
        .map(|k| f(2.0 * PI * (k / n) as f64 / n as f64, 2.0 * PI * (k % n) as f64 / n as f64))
        .collect();
    let grid = sphere_grid(3, angular_res);
    let miss = uncovered_directions(&image, &grid, angular_res);
    let in_band = |p: &Point, d: f64| p.z.abs() < d;
    let band_directions = grid.iter().filter(|p| in_band(p, delta)).count();
    let uncovered = miss.iter().filter(|p| in_band(p, delta)).count();
    let lowest_miss = miss.iter().map(|p| p.z.abs()).fold(1.0, f64::min);
    BandCoverReport {
        delta,
        angular_res,
        band_directions,
        uncovered,
        covered: uncovered == 0,
        largest_covered_band: (lowest_miss * 100.0).floor() / 100.0,
    }
}

/// A connected piece of ∂Ω, identified by the complement component it
/// bounds. A portion is a hand-picked subset that is not a full component.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryComponent {
    pub label: usize,
    /// Bounds the unbounded complement component.
    pub outer: bool,
    /// Indices into the domain's boundary cloud.
    pub points: Vec<usize>,
    pub closed: bool,
}

impl BoundaryComponent {
    pub fn portion(points: Vec<usize>) -> Self {
        BoundaryComponent { label: usize::MAX, outer: false, points, closed: false }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentDecomposition {
    pub grid: usize,
    /// Complement components: index 0 is the unbounded one.
    pub complement_sizes: Vec<usize>,
    pub components: Vec<BoundaryComponent>,
}

impl ComponentDecomposition {
    pub fn bounded_complements(&self) -> usize {
        self.complement_sizes.len() - 1
    }
}

/// Flood fill of ℝ^m ∖ Ω̄ on a grid×…×grid lattice over the inflated
/// bounding box; each boundary-cloud point is assigned to the nearest
/// complement component.
pub fn boundary_components(domain: &C0Domain, grid: usize) -> Result<ComponentDecomposition> {
    let dim = domain.dim;
    if grid < 8 {
        return Err(Error::InvalidInput("component grid needs at least 8 nodes per axis".into()));
    }
    let b = domain.bounding_box();
    let span = (0..dim).map(|k| b.extent()[k]).fold(0.0, f64::max);
    let bbox = b.inflate(3.0 * span / (grid - 6) as f64);
    let ext = bbox.extent();
    let step: Vec<f64> = (0..dim).map(|k| ext[k] / (grid - 1) as f64).collect();
    let total = grid.pow(dim as u32);
    let coords = |k: usize| -> [usize; 3] { [k % grid, (k / grid) % grid, k / (grid * grid)] };
    let point = |k: usize| -> Point {
        let c = coords(k);
        let mut p = bbox.min;
        for a in 0..dim {
            p[a] += c[a] as f64 * step[a];
        }
        if dim == 2 {
            p.z = 0.0;
        }
        p
    };
    let outside: Vec<bool> = (0..total).into_par_iter().map(|k| !domain.inside(&point(k))).collect();
    let mut label = vec![usize::MAX; total];
    let mut sizes = Vec::new();
    let mut extents = Vec::new();
    // Seed from a corner so the unbounded component gets label 0.
    let order = std::iter::once(0).chain(1..total);
    for seed in order {
        if !outside[seed] || label[seed] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut q = VecDeque::from([seed]);
        label[seed] = id;
        let (mut size, mut lo, mut hi) = (0usize, [usize::MAX; 3], [0usize; 3]);
        while let Some(k) = q.pop_front() {
            size += 1;
            let c = coords(k);
            for a in 0..dim {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
            for a in 0..dim {
                let stride = grid.pow(a as u32);
                for (ok, nb) in [(c[a] > 0, k.wrapping_sub(stride)), (c[a] + 1 < grid, k + stride)] {
                    if ok && outside[nb] && label[nb] == usize::MAX {
                        label[nb] = id;
                        q.push_back(nb);
                    }
                }
            }
        }
        sizes.push(size);
        extents.push((0..dim).map(|a| hi[a] - lo[a]).min().unwrap());
    }
    if sizes.is_empty() {
        return Err(Error::ComponentDetectionFailure);
    }
    if let Some(c) = extents.iter().position(|&e| e < 2) {
        return Err(Error::ResolutionTooCoarse { component: c });
    }
    // Each cloud point joins the component of the nearest outside node that
    // borders Ω; narrow exterior fingers can put it several cells away.
    let rim: Vec<usize> = (0..total)
        .filter(|&k| {
            label[k] != usize::MAX && {
                let c = coords(k);
                (0..dim).any(|a| {
                    let stride = grid.pow(a as u32);
                    (c[a] > 0 && !outside[k - stride]) || (c[a] + 1 < grid && !outside[k + stride])
                })
            }
        })
        .collect();
    if rim.is_empty() {
        return Err(Error::ComponentDetectionFailure);
    }
    let tree = KdTree::new(rim.iter().map(|&k| point(k)).collect());
    let assign: Vec<usize> =
        domain.boundary_cloud().par_iter().map(|p| label[rim[tree.nearest(p).unwrap().0]]).collect();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
    for (i, &l) in assign.iter().enumerate() {
        groups[l].push(i);
    }
    let components = groups
        .into_iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .map(|(l, points)| BoundaryComponent { label: l, outer: l == 0, points, closed: true })
        .collect();
    Ok(ComponentDecomposition { grid, complement_sizes: sizes, components })
}

#[derive(Clone, Debug, Serialize)]
pub struct GgReport {
    /// Set when the audit does not apply (a portion, not a full component).
    pub skipped: Option<String>,
    pub sampled_points: usize,
    pub directions: usize,
    pub rank: usize,
    pub spans: bool,
    pub clusters: usize,
    pub connected: bool,
    pub singular_values: Vec<f64>,
}

/// Union of the sampled pseudonormal sets along a component: does it span
/// ℝ^m, and is it connected at the grid's resolution?
pub fn gg_structure_audit(
    domain: &C0Domain,
    component: &BoundaryComponent,
    angular_res: f64,
    delta: f64,
    samples: usize,
) -> Result<GgReport> {
    let dim = domain.dim;
    let mut rep = GgReport {
        skipped: None,
        sampled_points: 0,
        directions: 0,
        rank: 0,
        spans: false,
        clusters: 0,
        connected: false,
        singular_values: Vec::new(),
    };
    if !component.closed {
        rep.skipped = Some("boundary portion, not a closed component".into());
        return Ok(rep);
    }
    let cloud = domain.boundary_cloud();
    let stride = (component.points.len() / samples.max(1)).max(1);
    let picks: Vec<usize> = component.points.iter().step_by(stride).take(samples).copied().collect();
    rep.sampled_points = picks.len();
    let mut dirs: Vec<Point> = Vec::new();
    for i in picks {
        for n in pseudonormal_set(domain, &cloud[i], delta, angular_res)?.directions {
            dirs.push(n);
        }
    }
    dirs.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z)));
    dirs.dedup();
    rep.directions = dirs.len();
    if dirs.is_empty() {
        return Ok(rep);
    }
    let (rank, sv) = direction_rank(&dirs, dim);
    rep.rank = rank;
    rep.singular_values = sv;
    rep.spans = rank == dim;
    rep.clusters = angular_clusters(&dirs, 1.5 * sphere_grid_spacing(dim, angular_res));
    rep.connected = rep.clusters == 1;
    Ok(rep)
}

/// Numerical rank (σ ≥ 1e−6·σ_max) of a list of directions.
pub fn direction_rank(dirs: &[Point], dim: usize) -> (usize, Vec<f64>) {
    let m = DMatrix::from_fn(dirs.len(), dim, |i, j| dirs[i][j]);
    let sv: Vec<f64> = m.singular_values().iter().copied().collect();
    let max = sv.iter().copied().fold(0.0, f64::max);
    (sv.iter().filter(|&&s| s >= 1e-6 * max && max > 0.0).count(), sv)
}

/// Connected components of the graph joining directions within `link` rad.
pub fn angular_clusters(dirs: &[Point], link: f64) -> usize {
    let tree = KdTree::new(dirs.to_vec());
    let chord = 2.0 * (0.5 * link).sin();
    let mut uf = crate::approximation::UnionFind::new(dirs.len());
    for (i, d) in dirs.iter().enumerate() {
        for j in tree.within(d, chord) {
            uf.union(i, j);
        }
    }
    let mut roots: Vec<usize> = (0..dirs.len()).map(|i| uf.find(i)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::p2;

    fn circle(n: usize) -> Vec<Point> {
        (0..n).map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            p2(t.cos(), t.sin())
        }).collect()
    }

    #[test]
    fn winding_examples() {
        let pts = circle(200);
        let inward: Vec<Point> = pts.iter().map(|p| -p).collect();
        let f = SphereField::on_curve(pts.clone(), inward, FieldLabel::Normal).unwrap();
        assert_eq!(winding_degree_2d(&f).unwrap().degree, 1);
        let c = SphereField::on_curve(pts.clone(), vec![p2(1.0, 0.0); 200], FieldLabel::Custom("const".into())).unwrap();
        assert_eq!(winding_degree_2d(&c).unwrap().degree, 0);
        let dbl: Vec<Point> = pts.iter().map(|p| {
            let t = p.y.atan2(p.x);
            p2((2.0 * t).cos(), (2.0 * t).sin())
        }).collect();
        let d = SphereField::on_curve(pts.clone(), dbl, FieldLabel::Custom("double".into())).unwrap();
        assert_eq!(winding_degree_2d(&d).unwrap().degree, 2);
        let coarse = SphereField::on_curve(circle(3), circle(3), FieldLabel::Normal).unwrap();
        assert!(matches!(winding_degree_2d(&coarse), Err(Error::JumpTooLarge { .. })));
    }

    #[test]
    fn sphere_and_torus_degrees() {
        let s = TriMesh::icosphere(4);
        assert_eq!(s.vertices.len(), 2562);
        assert_eq!(solid_angle_degree_3d(&SphereField::mesh_normals(&s).unwrap()).unwrap().degree, 1);
        let anti: Vec<Point> = s.vertices.iter().map(|v| -v).collect();
        let a = SphereField::on_trimesh(&s, anti, FieldLabel::Custom("antipodal".into())).unwrap();
        assert_eq!(solid_angle_degree_3d(&a).unwrap().degree, -1);
        let t = TriMesh::torus(2.0, 1.0, 96, 48);
        assert_eq!(solid_angle_degree_3d(&SphereField::mesh_normals(&t).unwrap()).unwrap().degree, 0);
        assert_eq!(euler_characteristic(&s).unwrap(), 2);
        assert_eq!(euler_characteristic(&t).unwrap(), 0);
        let mut two = TriMesh::icosphere(1);
        two.merge(&TriMesh::icosphere(2));
        assert_eq!(euler_characteristic(&two).unwrap(), 4);
        let mut open = TriMesh::icosphere(1);
        open.triangles.pop();
        assert!(matches!(euler_characteristic(&open), Err(Error::NonManifoldMesh(..))));
    }

    #[test]
    fn torus_field_properties() {
        let f = torus_pseudonormal(1.0).unwrap();
        let v = f.eval(0.3, 0.0);
        assert!((v - torus_inward_normal(0.3, 0.0)).norm() < 1e-15);
        let mut last = 1.0;
        for g in [0.5, 1.0, 1.4] {
            let r = torus_band_audit(&torus_pseudonormal(g).unwrap(), 128);
            assert!(r.valid && r.max_defect < 1e-10);
            assert!(r.max_e3 <= g.cos() + 1e-12 && r.max_e3 < last);
            last = r.max_e3;
        }
        assert!(torus_pseudonormal(FRAC_PI_2).is_err());
    }

    #[test]
    fn cover_check_finds_caps() {
        let f = torus_pseudonormal(1.4).unwrap();
        let rep = band_cover_audit(|t, p| f.eval(t, p), 256, 0.1, 5f64.to_radians());
        assert!(rep.covered);
        assert!(rep.largest_covered_band < 0.3);
    }

    #[test]
    fn rank_and_clusters() {
        let d = vec![p3(1.0, 0.0, 0.0), p3(0.0, 1.0, 0.0)];
        assert_eq!(direction_rank(&d, 3).0, 2);
        assert_eq!(angular_clusters(&d, 0.1), 2);
        assert_eq!(angular_clusters(&d, 1.6), 1);
    }
}
