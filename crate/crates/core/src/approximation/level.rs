//! Boundary meshes of the level domains Ω_ε = {ρ > ε}, extracted by marching
//! simplices: squares split into two triangles, cubes into six Kuhn
//! tetrahedra. Vertices are refined by root finding along grid edges.

use crate::distance::RegularizedDistance;
use crate::geometry::{Aabb, Point};
use crate::roots::{find_root_with, RootFailure, RootOptions};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::fmt::Write as _;

#[derive(Clone, Debug)]
pub struct LevelOptions {
    /// Nodes per axis.
    pub grid: usize,
    /// Acceptable |ρ − ε| at refined vertices.
    pub tol: f64,
    /// Fixed-point tolerance for ρ at grid nodes and vertices.
    pub rho_tol: f64,
}

impl LevelOptions {
    pub fn for_dim(dim: usize) -> Self {
        LevelOptions { grid: if dim == 2 { 256 } else { 64 }, tol: 1e-10, rho_tol: 1e-12 }
    }
}

/// Closed, outward-oriented boundary mesh of Ω_ε: segments in 2D, triangles
/// in 3D.
#[derive(Clone, Debug, Serialize)]
pub struct LevelDomain {
    pub level: f64,
    pub dim: usize,
    pub vertices: Vec<Point>,
    /// Segments (2D, two indices) or triangles (3D, three indices).
    pub cells: Vec<Vec<u32>>,
    /// Largest |ρ − ε| over the vertices.
    pub max_residual: f64,
    /// Smallest directional derivative of ρ along the refining edge.
    pub min_slope: f64,
    pub grid: usize,
    pub rho_evaluations: usize,
}

/// {ρ = ε} on a `grid`-per-axis lattice covering the domain's bounding box
/// plus the band the level can reach.
pub fn extract_level_domain(rho: &RegularizedDistance, eps: f64, opts: &LevelOptions) -> Result<LevelDomain> {
    let dim = rho.dim();
    let n = opts.grid;
    if n < 4 {
        return Err(Error::InvalidInput("level grid needs at least 4 nodes per axis".into()));
    }
    let b0 = rho.domain.bounding_box();
    let ext = b0.extent();
    let span = (0..dim).map(|k| ext[k]).fold(0.0, f64::max);
    let margin = 2.5 * eps.abs() + 3.0 * span / (n - 4) as f64;
    let mut bbox = b0.inflate(margin);
    if dim == 2 {
        bbox.min.z = 0.0;
        bbox.max.z = 0.0;
    }
    let lat = Lattice::new(dim, n, bbox);
    let total = lat.len();

    // Sign of ρ − ε from the sandwich ½ ≤ ρ/d ≤ 2 where it decides; None
    // means ρ must be evaluated.
    let ds: Vec<f64> = (0..total).into_par_iter().map(|k| rho.d(&lat.point(k))).collect();
    let known: Vec<Option<bool>> = ds.iter().map(|&d| sandwich_side(d, eps)).collect();
    let mut values: Vec<Option<f64>> = vec![None; total];
    let solve = |k: usize| -> Result<f64> { Ok(rho.solve_from(&lat.point(k), ds[k], opts.rho_tol)?.rho - eps) };
    let first: Vec<usize> = (0..total).filter(|&k| known[k].is_none()).collect();
    let vals: Vec<f64> = first.par_iter().map(|&k| solve(k)).collect::<Result<_>>()?;
    let mut evaluations = first.len();
    for (k, v) in first.into_iter().zip(vals) {
        values[k] = Some(v);
    }
    let inside = |k: usize, values: &[Option<f64>]| values[k].map(|v| v > 0.0).or(known[k]).unwrap();

    // Crossing edges of every simplex.
    let simplices = lat.simplices();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let side: Vec<bool> = (0..total).map(|k| inside(k, &values)).collect();
    for cell in 0..lat.cells() {
        for s in &simplices {
            let v = lat.simplex(cell, s);
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    if side[v[i]] != side[v[j]] {
                        edges.push((v[i].min(v[j]), v[i].max(v[j])));
                    }
                }
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();

    // Node values at both ends of every crossing edge.
    let mut need: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).filter(|&k| values[k].is_none()).collect();
    need.sort_unstable();
    need.dedup();
    let vals: Vec<f64> = need.par_iter().map(|&k| solve(k)).collect::<Result<_>>()?;
    evaluations += need.len();
    for (k, v) in need.into_iter().zip(vals) {
        values[k] = Some(v);
    }
    // A node known only by the sandwich must agree with its evaluated sign.
    for &(a, b) in &edges {
        for k in [a, b] {
            if (values[k].unwrap() > 0.0) != side[k] {
                return Err(Error::InvalidInput(format!("node {k} contradicts the distance sandwich")));
            }
        }
    }

    let root_opts = RootOptions { bisect_width: 0.0, tol: 1e-13, ftol: opts.tol * 0.1, max_iter: 200 };
    let refined: Vec<(Point, f64, f64, usize)> = edges
        .par_iter()
        .map(|&(a, b)| {
            let pa = lat.point(a);
            let pb = lat.point(b);
            let (fa, fb) = (values[a].unwrap(), values[b].unwrap());
            let mut count = 0usize;
            let mut f = |s: f64| -> Result<f64> {
                count += 1;
                Ok(rho.solve_tol(&(pa + (pb - pa) * s), opts.rho_tol)?.rho - eps)
            };
            let root = match find_root_with(&mut f, 0.0, fa, 1.0, fb, &RootOptions { bisect_width: 0.05, ..root_opts }) {
                Ok(r) => r,
                Err(RootFailure::Eval(e)) => return Err(e),
                Err(RootFailure::NotConverged { x, .. }) => crate::roots::Root { x, fx: f(x)?, iterations: 0 },
                Err(RootFailure::NoBracket { .. }) => return Err(Error::RootBracketFailure),
            };
            let len = (pb - pa).norm();
            let hs = 1e-4f64.min(root.x.min(1.0 - root.x).max(1e-6));
            let slope = (f((root.x + hs).min(1.0))? - f((root.x - hs).max(0.0))?) / (len * 2.0 * hs);
            Ok((pa + (pb - pa) * root.x, root.fx.abs(), slope.abs(), count))
        })
        .collect::<Result<_>>()?;
    let mut index: HashMap<(usize, usize), u32> = HashMap::with_capacity(edges.len());
    let mut vertices = Vec::with_capacity(edges.len());
    let mut max_residual = 0.0f64;
    let mut min_slope = f64::INFINITY;
    for (e, (p, res, slope, count)) in edges.iter().zip(refined) {
        index.insert(*e, vertices.len() as u32);
        vertices.push(p);
        max_residual = max_residual.max(res);
        min_slope = min_slope.min(slope);
        evaluations += count;
    }
    if min_slope < 1e-8 {
        return Err(Error::DegenerateLevel { grad: min_slope });
    }

    let key = |a: usize, b: usize| index[&(a.min(b), a.max(b))];
    let mut cells = Vec::new();
    for cell in 0..lat.cells() {
        for s in &simplices {
            let v = lat.simplex(cell, s);
            let ins: Vec<usize> = v.iter().copied().filter(|&k| side[k]).collect();
            let out: Vec<usize> = v.iter().copied().filter(|&k| !side[k]).collect();
            if ins.is_empty() || out.is_empty() {
                continue;
            }
            let cin: Point = ins.iter().map(|&k| lat.point(k)).sum::<Point>() / ins.len() as f64;
            let cout: Point = out.iter().map(|&k| lat.point(k)).sum::<Point>() / out.len() as f64;
            let outward = cout - cin;
            let mut emit = |mut c: Vec<u32>| {
                if orientation(&vertices, &c, dim).dot(&outward) < 0.0 {
                    c.swap(0, 1);
                }
                cells.push(c);
            };
            if dim == 2 {
                // One vertex alone on its side: the segment joins its two edges.
                let (lone, pair) = if ins.len() == 1 { (ins[0], out) } else { (out[0], ins) };
                emit(vec![key(lone, pair[0]), key(lone, pair[1])]);
            } else if ins.len() == 2 {
                let (a, b, c, d) = (ins[0], ins[1], out[0], out[1]);
                emit(vec![key(a, c), key(a, d), key(b, d)]);
                emit(vec![key(a, c), key(b, d), key(b, c)]);
            } else {
                let (lone, rest) = if ins.len() == 1 { (ins[0], out) } else { (out[0], ins) };
                emit(vec![key(lone, rest[0]), key(lone, rest[1]), key(lone, rest[2])]);
            }
        }
    }
    Ok(LevelDomain { level: eps, dim, vertices, cells, max_residual, min_slope, grid: n, rho_evaluations: evaluations })
}

/// Whether ρ > ε follows from d alone (with a 5% margin on the sandwich).
fn sandwich_side(d: f64, eps: f64) -> Option<bool> {
    let (lo, hi) = if d >= 0.0 { (0.475 * d, 2.1 * d) } else { (2.1 * d, 0.475 * d) };
    if lo > eps {
        Some(true)
    } else if hi < eps {
        Some(false)
    } else {
        None
    }
}

/// Normal of a segment (rotated tangent) or triangle.
fn orientation(v: &[Point], c: &[u32], dim: usize) -> Point {
    let p = |i: usize| v[c[i] as usize];
    if dim == 2 {
        let t = p(1) - p(0);
        Point::new(t.y, -t.x, 0.0)
    } else {
        (p(1) - p(0)).cross(&(p(2) - p(0)))
    }
}

struct Lattice {
    dim: usize,
    n: usize,
    bbox: Aabb,
    step: Point,
}

impl Lattice {
    fn new(dim: usize, n: usize, bbox: Aabb) -> Self {
        let e = bbox.extent();
        let step = Point::new(e.x / (n - 1) as f64, e.y / (n - 1) as f64, if dim == 3 { e.z / (n - 1) as f64 } else { 0.0 });
        Lattice { dim, n, bbox, step }
    }

    fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    fn cells(&self) -> usize {
        (self.n - 1).pow(self.dim as u32)
    }

    fn point(&self, k: usize) -> Point {
        let n = self.n;
        let (i, j, l) = (k % n, (k / n) % n, k / (n * n));
        self.bbox.min + Point::new(i as f64 * self.step.x, j as f64 * self.step.y, l as f64 * self.step.z)
    }

    /// Corner offsets (bit b set = +1 along axis b) of each simplex.
    fn simplices(&self) -> Vec<Vec<usize>> {
        if self.dim == 2 {
            vec![vec![0, 1, 3], vec![0, 2, 3]]
        } else {
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            perms
                .iter()
                .map(|p| {
                    let mut v = vec![0usize];
                    let mut c = 0usize;
                    for &axis in p {
                        c |= 1 << axis;
                        v.push(c);
                    }
                    v
                })
                .collect()
        }
    }

    fn simplex(&self, cell: usize, corners: &[usize]) -> Vec<usize> {
        let m = self.n - 1;
        let (i, j, l) = (cell % m, (cell / m) % m, cell / (m * m));
        let n = self.n;
        corners
            .iter()
            .map(|&c| (i + (c & 1)) + n * (j + ((c >> 1) & 1)) + n * n * (l + ((c >> 2) & 1)))
            .collect()
    }
}

impl LevelDomain {
    /// Undirected edges of the mesh with their incidence counts.
    fn edge_counts(&self) -> HashMap<(u32, u32), usize> {
        let mut m = HashMap::new();
        for c in &self.cells {
            if self.dim == 2 {
                continue;
            }
            for i in 0..3 {
                let (a, b) = (c[i], c[(i + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    /// Every 3D edge has two incident triangles; every 2D vertex two segments.
    pub fn is_closed(&self) -> bool {
        if self.dim == 2 {
            let mut deg = vec![0usize; self.vertices.len()];
            for c in &self.cells {
                deg[c[0] as usize] += 1;
                deg[c[1] as usize] += 1;
            }
            deg.iter().all(|&d| d == 2)
        } else {
            self.edge_counts().values().all(|&c| c == 2)
        }
    }

    /// Connected components (closed curves or surfaces).
    pub fn components(&self) -> usize {
        let mut uf = UnionFind::new(self.vertices.len());
        for c in &self.cells {
            for w in c.windows(2) {
                uf.union(w[0] as usize, w[1] as usize);
            }
        }
        let mut roots: Vec<usize> = (0..self.vertices.len()).map(|v| uf.find(v)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    /// V − E + F of a 3D mesh; 0 per closed curve in 2D.
    pub fn euler_characteristic(&self) -> Result<i64> {
        crate::topology::euler_characteristic_of(self.dim, self.vertices.len(), &self.cells)
    }

    /// Area-weighted (3D) or length-weighted (2D) outward vertex normals.
    pub fn vertex_normals(&self) -> Vec<Point> {
        let mut nrm = vec![Point::zeros(); self.vertices.len()];
        for c in &self.cells {
            let n = orientation(&self.vertices, c, self.dim);
            for &v in c {
                nrm[v as usize] += n;
            }
        }
        nrm.into_iter().map(|n| if n.norm() > 0.0 { n.normalize() } else { n }).collect()
    }

    /// Closed polylines in traversal order (2D only).
    pub fn loops(&self) -> Vec<Vec<u32>> {
        let mut next: HashMap<u32, u32> = HashMap::new();
        for c in &self.cells {
            next.insert(c[0], c[1]);
        }
        let mut seen = vec![false; self.vertices.len()];
        let mut out = Vec::new();
        for c in &self.cells {
            let start = c[0];
            if seen[start as usize] {
                continue;
            }
            let mut lp = vec![];
            let mut v = start;
            while !seen[v as usize] {
                seen[v as usize] = true;
                lp.push(v);
                match next.get(&v) {
                    Some(&w) => v = w,
                    None => break,
                }
            }
            out.push(lp);
        }
        out
    }

    /// Vertices whose ρ is not above `level`, i.e. outside Ω_level.
    pub fn nesting_violations(&self, rho: &RegularizedDistance, level: f64) -> Result<usize> {
        let bad: Vec<bool> =
            self.vertices.par_iter().map(|v| Ok(rho.rho(v)? <= level)).collect::<Result<_>>()?;
        Ok(bad.into_iter().filter(|&b| b).count())
    }

    /// OFF for surfaces; for curves, one `loop,x,y` row per vertex.
    pub fn export(&self) -> String {
        let mut s = String::new();
        if self.dim == 3 {
            let _ = writeln!(s, "OFF\n{} {} 0", self.vertices.len(), self.cells.len());
            for v in &self.vertices {
                let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
            }
            for c in &self.cells {
                let _ = writeln!(s, "3 {} {} {}", c[0], c[1], c[2]);
            }
        } else {
            s.push_str("loop,x,y\n");
            for (i, lp) in self.loops().iter().enumerate() {
                for &v in lp {
                    let p = self.vertices[v as usize];
                    let _ = writeln!(s, "{i},{},{}", p.x, p.y);
                }
            }
        }
        s
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{C0Domain, FixtureId};
    use std::sync::Arc;

    fn rho(f: FixtureId) -> RegularizedDistance {
        RegularizedDistance::new(Arc::new(C0Domain::fixture(f).unwrap()))
    }

    #[test]
    fn disk_levels_sit_inside_the_sandwich() {
        let r = rho(FixtureId::UnitDisk);
        let opts = LevelOptions { grid: 96, ..LevelOptions::for_dim(2) };
        let eps = 0.02;
        let lv = extract_level_domain(&r, eps, &opts).unwrap();
        assert!(lv.is_closed());
        assert_eq!(lv.components(), 1);
        assert!(lv.max_residual <= 1e-10);
        for v in &lv.vertices {
            let rad = v.norm();
            assert!(rad >= 1.0 - 2.0 * eps && rad <= 1.0 - 0.5 * eps, "radius {rad}");
        }
        // Counter-clockwise for an outward-oriented outer boundary.
        let lp = &lv.loops()[0];
        let area: f64 = (0..lp.len())
            .map(|i| {
                let a = lv.vertices[lp[i] as usize];
                let b = lv.vertices[lp[(i + 1) % lp.len()] as usize];
                a.x * b.y - a.y * b.x
            })
            .sum();
        assert!(area > 0.0);
        let outer = extract_level_domain(&r, -eps, &opts).unwrap();
        assert!(outer.vertices.iter().all(|v| v.norm() > 1.0));
    }
}
