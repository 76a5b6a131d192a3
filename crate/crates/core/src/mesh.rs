//! Piecewise-linear boundary representation (closed polylines in 2D, closed
//! triangle meshes in 3D) with exact closest-feature queries and
//! angle-weighted pseudonormals. Element normals point into the domain.

use crate::geometry::{Aabb, Point};
use crate::spatial::Bvh;
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feature {
    Vertex(u32),
    /// Local edge k ∈ {0,1,2} of a triangle: (v0,v1), (v1,v2), (v2,v0).
    Edge(u8),
    Face,
}

#[derive(Clone, Debug)]
pub struct BoundaryMesh {
    pub dim: usize,
    pub vertices: Vec<Point>,
    /// Segments use the first two slots.
    pub elements: Vec<[u32; 3]>,
    normals: Vec<Point>,
    vertex_normals: Vec<Point>,
    tri_edges: Vec<[u32; 3]>,
    edge_normals: Vec<Point>,
    edge_faces: Vec<u32>,
    bvh: Bvh,
}

/// Result of a signed-distance query: distance with the sign of the nearest
/// feature's pseudonormal (positive on the inward side).
#[derive(Clone, Copy, Debug)]
pub struct Nearest {
    pub element: usize,
    pub point: Point,
    pub distance: f64,
    pub signed: f64,
}

impl BoundaryMesh {
    /// Closed polylines; each loop must have interior on its left.
    pub fn from_loops(loops: &[Vec<Point>]) -> Self {
        let mut vertices = Vec::new();
        let mut elements = Vec::new();
        for l in loops {
            let base = vertices.len() as u32;
            let n = l.len() as u32;
            vertices.extend_from_slice(l);
            for i in 0..n {
                elements.push([base + i, base + (i + 1) % n, u32::MAX]);
            }
        }
        Self::new(2, vertices, elements)
    }

    /// Open polylines (no wrap-around); used for patch-union boundaries.
    pub fn from_polylines(lines: &[Vec<Point>]) -> Self {
        let mut vertices = Vec::new();
        let mut elements = Vec::new();
        for l in lines {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(l);
            for i in 0..l.len().saturating_sub(1) as u32 {
                elements.push([base + i, base + i + 1, u32::MAX]);
            }
        }
        Self::new(2, vertices, elements)
    }

    /// Triangles oriented counter-clockwise seen from outside the domain.
    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[u32; 3]>) -> Self {
        Self::new(3, vertices, triangles)
    }

    fn new(dim: usize, vertices: Vec<Point>, elements: Vec<[u32; 3]>) -> Self {
        let mut normals = Vec::with_capacity(elements.len());
        let mut vertex_normals = vec![Point::zeros(); vertices.len()];
        let mut tri_edges = Vec::new();
        let mut edge_normals = Vec::new();
        let mut edge_faces = Vec::new();
        let mut boxes = Vec::with_capacity(elements.len());
        if dim == 2 {
            for e in &elements {
                let (a, b) = (vertices[e[0] as usize], vertices[e[1] as usize]);
                let t = b - a;
                let n = Point::new(-t.y, t.x, 0.0).normalize();
                normals.push(n);
                vertex_normals[e[0] as usize] += n;
                vertex_normals[e[1] as usize] += n;
                boxes.push(Aabb::from_points([&a, &b]));
            }
        } else {
            let mut edge_id: HashMap<(u32, u32), u32> = HashMap::new();
            for e in &elements {
                let p: [Point; 3] = [vertices[e[0] as usize], vertices[e[1] as usize], vertices[e[2] as usize]];
                let n = -(p[1] - p[0]).cross(&(p[2] - p[0])).normalize();
                normals.push(n);
                let mut te = [0u32; 3];
                for k in 0..3 {
                    let (i, j) = (e[k], e[(k + 1) % 3]);
                    let key = (i.min(j), i.max(j));
                    let id = *edge_id.entry(key).or_insert_with(|| {
                        edge_normals.push(Point::zeros());
                        edge_faces.push(0);
                        (edge_normals.len() - 1) as u32
                    });
                    edge_normals[id as usize] += n;
                    edge_faces[id as usize] += 1;
                    te[k] = id;
                    // Angle at vertex e[k].
                    let u = p[(k + 1) % 3] - p[k];
                    let v = p[(k + 2) % 3] - p[k];
                    let ang = u.cross(&v).norm().atan2(u.dot(&v));
                    vertex_normals[e[k] as usize] += n * ang;
                }
                tri_edges.push(te);
                boxes.push(Aabb::from_points(p.iter()));
            }
        }
        let bvh = Bvh::with_slabs(&boxes, &normals, |e| {
            let el = elements[e];
            let c = if el[2] == u32::MAX { el[1] } else { el[2] };
            [vertices[el[0] as usize], vertices[el[1] as usize], vertices[c as usize]]
        });
        BoundaryMesh { dim, vertices, elements, normals, vertex_normals, tri_edges, edge_normals, edge_faces, bvh }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    /// Same connectivity with every vertex mapped through `rot`.
    pub fn transformed(&self, rot: &nalgebra::Matrix3<f64>) -> Self {
        let v = self.vertices.iter().map(|p| rot * p).collect();
        Self::new(self.dim, v, self.elements.clone())
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn bbox(&self) -> Aabb {
        self.bvh.bbox()
    }

    pub fn element_normal(&self, e: usize) -> Point {
        self.normals[e]
    }

    /// Longest element edge.
    pub fn max_edge(&self) -> f64 {
        let mut m = 0.0f64;
        for e in &self.elements {
            let k = if self.dim == 2 { 1 } else { 3 };
            for i in 0..k {
                let a = self.vertices[e[i] as usize];
                let b = self.vertices[e[(i + 1) % if self.dim == 2 { 2 } else { 3 }] as usize];
                m = m.max((b - a).norm());
            }
        }
        m
    }

    /// True when every 3D edge has exactly two incident faces (2D: every
    /// vertex has exactly two incident segments).
    pub fn is_closed(&self) -> bool {
        if self.dim == 3 {
            self.edge_faces.iter().all(|&c| c == 2)
        } else {
            let mut deg = vec![0u32; self.vertices.len()];
            for e in &self.elements {
                deg[e[0] as usize] += 1;
                deg[e[1] as usize] += 1;
            }
            deg.iter().all(|&d| d == 2)
        }
    }

    #[inline]
    fn closest_on(&self, e: usize, x: &Point) -> (Point, Feature) {
        let el = &self.elements[e];
        if self.dim == 2 {
            let a = self.vertices[el[0] as usize];
            let b = self.vertices[el[1] as usize];
            let t = b - a;
            let s = (x - a).dot(&t) / t.norm_squared();
            if s <= 0.0 {
                (a, Feature::Vertex(el[0]))
            } else if s >= 1.0 {
                (b, Feature::Vertex(el[1]))
            } else {
                (a + t * s, Feature::Face)
            }
        } else {
            closest_on_triangle(
                x,
                &self.vertices[el[0] as usize],
                &self.vertices[el[1] as usize],
                &self.vertices[el[2] as usize],
                el,
            )
        }
    }

    #[inline]
    pub fn element_distance2(&self, e: usize, x: &Point) -> f64 {
        (self.closest_on(e, x).0 - x).norm_squared()
    }

    fn pseudonormal(&self, e: usize, f: Feature) -> Point {
        match f {
            Feature::Face => self.normals[e],
            Feature::Vertex(v) => self.vertex_normals[v as usize],
            Feature::Edge(k) => self.edge_normals[self.tri_edges[e][k as usize] as usize],
        }
    }

    fn finish(&self, e: usize, x: &Point) -> Nearest {
        let (q, f) = self.closest_on(e, x);
        let v = x - q;
        let dist = v.norm();
        let s = v.dot(&self.pseudonormal(e, f));
        let signed = if dist == 0.0 { 0.0 } else if s >= 0.0 { dist } else { -dist };
        Nearest { element: e, point: q, distance: dist, signed }
    }

    /// Nearest element via the hierarchy.
    pub fn nearest(&self, x: &Point) -> Nearest {
        let (e, _) = self.bvh.nearest(x, |k| self.element_distance2(k, x)).expect("empty mesh");
        self.finish(e, x)
    }

    /// Nearest element if one lies within distance `bound`.
    pub fn nearest_bounded(&self, x: &Point, bound: f64) -> Option<Nearest> {
        let (e, _) = self.bvh.nearest_bounded(x, |k| self.element_distance2(k, x), bound * bound)?;
        Some(self.finish(e, x))
    }

    /// Nearest element restricted to a candidate list, seeded with a guess.
    pub fn nearest_among(&self, x: &Point, candidates: &[u32]) -> Nearest {
        let mut best = (usize::MAX, f64::INFINITY);
        for &c in candidates {
            let d2 = self.element_distance2(c as usize, x);
            if d2 < best.1 || (d2 == best.1 && (c as usize) < best.0) {
                best = (c as usize, d2);
            }
        }
        self.finish(best.0, x)
    }

    /// Elements whose boxes come within `r` of `x`.
    pub fn candidates(&self, x: &Point, r: f64, out: &mut Vec<u32>) {
        self.bvh.candidates(x, r, out);
    }
}

fn closest_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point, el: &[u32; 3]) -> (Point, Feature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, Feature::Vertex(el[0]));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, Feature::Vertex(el[1]));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, Feature::Edge(0));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, Feature::Vertex(el[2]));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, Feature::Edge(2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, Feature::Edge(1));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, Feature::Face)
}

/// Plain triangle surface (used for extracted level sets and test meshes).
#[derive(Clone, Debug, Default)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    /// Unit icosphere with `level` midpoint subdivisions, outward CCW.
    pub fn icosphere(level: usize) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut v: Vec<Point> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Point::new(x, y, z).normalize())
        .collect();
        let mut f: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
            let mut nf = Vec::with_capacity(f.len() * 4);
            let mut midpoint = |i: u32, j: u32, v: &mut Vec<Point>| -> u32 {
                let key = (i.min(j), i.max(j));
                *mid.entry(key).or_insert_with(|| {
                    v.push(((v[i as usize] + v[j as usize]) * 0.5).normalize());
                    (v.len() - 1) as u32
                })
            };
            for tri in &f {
                let a = midpoint(tri[0], tri[1], &mut v);
                let b = midpoint(tri[1], tri[2], &mut v);
                let c = midpoint(tri[2], tri[0], &mut v);
                nf.push([tri[0], a, c]);
                nf.push([tri[1], b, a]);
                nf.push([tri[2], c, b]);
                nf.push([a, b, c]);
            }
            f = nf;
        }
        TriMesh { vertices: v, triangles: f }
    }

    /// Torus surface ((R + r cos φ) cos θ, (R + r cos φ) sin θ, r sin φ),
    /// outward CCW.
    pub fn torus(major: f64, minor: f64, n_theta: usize, n_phi: usize) -> Self {
        let mut vertices = Vec::with_capacity(n_theta * n_phi);
        for i in 0..n_theta {
            let th = 2.0 * std::f64::consts::PI * i as f64 / n_theta as f64;
            for j in 0..n_phi {
                let ph = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
                vertices.push(torus_point(major, minor, th, ph));
            }
        }
        let id = |i: usize, j: usize| ((i % n_theta) * n_phi + (j % n_phi)) as u32;
        let mut triangles = Vec::with_capacity(2 * n_theta * n_phi);
        for i in 0..n_theta {
            for j in 0..n_phi {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        TriMesh { vertices, triangles }
    }

    pub fn merge(&mut self, other: &TriMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }

    pub fn face_normal(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i as usize]);
        (b - a).cross(&(c - a)).normalize()
    }

    /// Area-weighted outward vertex normals.
    pub fn vertex_normals(&self) -> Vec<Point> {
        let mut n = vec![Point::zeros(); self.vertices.len()];
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i as usize]);
            let fnrm = (b - a).cross(&(c - a));
            for &i in t {
                n[i as usize] += fnrm;
            }
        }
        n.into_iter().map(|v| v.normalize()).collect()
    }

    /// Signed enclosed volume (positive for outward orientation).
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }
}

pub fn torus_point(major: f64, minor: f64, theta: f64, phi: f64) -> Point {
    let rr = major + minor * phi.cos();
    Point::new(rr * theta.cos(), rr * theta.sin(), minor * phi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{p2, p3};
    use rand::{Rng, SeedableRng};

    fn circle(n: usize, r: f64) -> Vec<Point> {
        (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                p2(r * t.cos(), r * t.sin())
            })
            .collect()
    }

    #[test]
    fn polyline_signed_distance() {
        let m = BoundaryMesh::from_loops(&[circle(2000, 1.0), circle(1000, 0.5).into_iter().rev().collect()]);
        assert!(m.is_closed());
        let n = m.nearest(&p2(0.75, 0.0));
        assert!((n.signed - 0.25).abs() < 1e-6);
        assert!((m.nearest(&p2(0.2, 0.1)).signed + (0.5 - 0.2f64.hypot(0.1))).abs() < 1e-5);
        assert!((m.nearest(&p2(0.0, 2.0)).signed + 1.0).abs() < 1e-5);
        // Exactly at a vertex.
        assert_eq!(m.nearest(&p2(1.0, 0.0)).signed, 0.0);
    }

    #[test]
    fn sphere_sign_matches_radius() {
        let s = TriMesh::icosphere(3);
        let m = BoundaryMesh::from_triangles(s.vertices.clone(), s.triangles.clone());
        assert!(m.is_closed());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let x = p3(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let n = m.nearest(&x);
            // The polyhedron lies inside the unit sphere, within 0.02 of it.
            let r = x.norm();
            if (r - 1.0).abs() > 0.03 {
                assert_eq!(n.signed > 0.0, r < 1.0, "x = {x:?}");
            }
            let mut c = Vec::new();
            m.candidates(&x, n.distance + 1e-9, &mut c);
            let n2 = m.nearest_among(&x, &c);
            assert_eq!(n2.distance, n.distance);
        }
        assert!((s.volume() - 4.0 / 3.0 * std::f64::consts::PI).abs() < 0.05);
    }

    #[test]
    fn torus_mesh_is_outward() {
        let t = TriMesh::torus(2.0, 1.0, 64, 32);
        let v = t.volume();
        let exact = 2.0 * std::f64::consts::PI.powi(2) * 2.0;
        assert!((v - exact).abs() / exact < 0.02);
        let m = BoundaryMesh::from_triangles(t.vertices, t.triangles);
        assert!(m.nearest(&p3(2.0, 0.0, 0.0)).signed > 0.0);
        assert!(m.nearest(&p3(0.0, 0.0, 0.0)).signed < 0.0);
        assert!(m.nearest(&p3(2.0, 0.0, 1.5)).signed < 0.0);
    }
}
