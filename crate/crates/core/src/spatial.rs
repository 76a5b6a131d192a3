//! Spatial indices: a k-d tree over points and a bounding-volume hierarchy
//! over mesh elements.

use crate::geometry::{Aabb, Point};

const LEAF: usize = 8;

/// Static k-d tree over a point set (indices into the original slice).
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Point>,
    idx: Vec<u32>,
    nodes: Vec<KdNode>,
}

#[derive(Clone, Debug)]
struct KdNode {
    lo: u32,
    hi: u32,
    bbox: Aabb,
    children: Option<(u32, u32)>,
}

impl KdTree {
    pub fn new(points: Vec<Point>) -> Self {
        let mut t = KdTree { idx: (0..points.len() as u32).collect(), points, nodes: Vec::new() };
        if !t.points.is_empty() {
            t.build(0, t.points.len());
        }
        t
    }

    fn build(&mut self, lo: usize, hi: usize) -> u32 {
        let bbox = Aabb::from_points(self.idx[lo..hi].iter().map(|&i| &self.points[i as usize]));
        let id = self.nodes.len() as u32;
        self.nodes.push(KdNode { lo: lo as u32, hi: hi as u32, bbox, children: None });
        if hi - lo > LEAF {
            let ext = bbox.extent();
            let axis = if ext.x >= ext.y && ext.x >= ext.z { 0 } else if ext.y >= ext.z { 1 } else { 2 };
            let mid = (lo + hi) / 2;
            let pts = &self.points;
            self.idx[lo..hi].select_nth_unstable_by(mid - lo, |a, b| {
                pts[*a as usize][axis].total_cmp(&pts[*b as usize][axis])
            });
            let l = self.build(lo, mid);
            let r = self.build(mid, hi);
            self.nodes[id as usize].children = Some((l, r));
        }
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Nearest point: (index, distance).
    pub fn nearest(&self, x: &Point) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(0, x, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn nearest_rec(&self, n: u32, x: &Point, best: &mut (usize, f64)) {
        let node = &self.nodes[n as usize];
        if node.bbox.distance2(x) >= best.1 {
            return;
        }
        match node.children {
            None => {
                for &i in &self.idx[node.lo as usize..node.hi as usize] {
                    let d2 = (self.points[i as usize] - x).norm_squared();
                    if d2 < best.1 {
                        *best = (i as usize, d2);
                    }
                }
            }
            Some((l, r)) => {
                let dl = self.nodes[l as usize].bbox.distance2(x);
                let dr = self.nodes[r as usize].bbox.distance2(x);
                let (a, b) = if dl <= dr { (l, r) } else { (r, l) };
                self.nearest_rec(a, x, best);
                self.nearest_rec(b, x, best);
            }
        }
    }

    /// Indices of all points within `r` of `x`, in ascending index order.
    pub fn within(&self, x: &Point, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.within_rec(0, x, r * r, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn within_rec(&self, n: u32, x: &Point, r2: f64, out: &mut Vec<usize>) {
        let node = &self.nodes[n as usize];
        if node.bbox.distance2(x) > r2 {
            return;
        }
        match node.children {
            None => {
                for &i in &self.idx[node.lo as usize..node.hi as usize] {
                    if (self.points[i as usize] - x).norm_squared() <= r2 {
                        out.push(i as usize);
                    }
                }
            }
            Some((l, r)) => {
                self.within_rec(l, x, r2, out);
                self.within_rec(r, x, r2, out);
            }
        }
    }
}

/// Bounding-volume hierarchy over abstract elements described by their boxes.
/// Distance queries supply the exact element distance as a closure.
#[derive(Clone, Debug)]
pub struct Bvh {
    idx: Vec<u32>,
    nodes: Vec<BvhNode>,
}

#[derive(Clone, Debug)]
struct BvhNode {
    bbox: Aabb,
    /// Optional slab {lo ≤ n·p ≤ hi} containing every element of the node.
    slab: Option<(Point, f64, f64)>,
    lo: u32,
    hi: u32,
    children: Option<(u32, u32)>,
}

impl BvhNode {
    #[inline]
    fn lower_bound2(&self, x: &Point) -> f64 {
        let b = self.bbox.distance2(x);
        match &self.slab {
            Some((n, lo, hi)) => {
                let t = n.dot(x);
                let s = (lo - t).max(t - hi).max(0.0);
                b.max(s * s)
            }
            None => b,
        }
    }
}

const BVH_LEAF: usize = 4;

impl Bvh {
    pub fn new(boxes: &[Aabb]) -> Self {
        let centers: Vec<Point> = boxes.iter().map(|b| b.center()).collect();
        let mut t = Bvh { idx: (0..boxes.len() as u32).collect(), nodes: Vec::new() };
        if !boxes.is_empty() {
            t.build(boxes, &centers, 0, boxes.len());
        }
        t
    }

    fn build(&mut self, boxes: &[Aabb], centers: &[Point], lo: usize, hi: usize) -> u32 {
        let mut bbox = Aabb::empty();
        let mut cb = Aabb::empty();
        for &i in &self.idx[lo..hi] {
            bbox = bbox.merge(&boxes[i as usize]);
            cb.grow(&centers[i as usize]);
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(BvhNode { bbox, slab: None, lo: lo as u32, hi: hi as u32, children: None });
        if hi - lo > BVH_LEAF {
            let ext = cb.extent();
            let axis = if ext.x >= ext.y && ext.x >= ext.z { 0 } else if ext.y >= ext.z { 1 } else { 2 };
            let mid = (lo + hi) / 2;
            self.idx[lo..hi].select_nth_unstable_by(mid - lo, |a, b| {
                centers[*a as usize][axis].total_cmp(&centers[*b as usize][axis])
            });
            let l = self.build(boxes, centers, lo, mid);
            let r = self.build(boxes, centers, mid, hi);
            self.nodes[id as usize].children = Some((l, r));
        }
        id
    }

    /// Hierarchy whose nodes also carry a slab normal to the mean element
    /// normal; this prunes far better than boxes for tilted surface patches.
    pub fn with_slabs<F: Fn(usize) -> [Point; 3]>(boxes: &[Aabb], normals: &[Point], vertices: F) -> Self {
        let mut t = Self::new(boxes);
        for k in 0..t.nodes.len() {
            let (lo, hi) = (t.nodes[k].lo as usize, t.nodes[k].hi as usize);
            let n: Point = t.idx[lo..hi].iter().map(|&i| normals[i as usize]).sum();
            if n.norm() < 1e-9 * (hi - lo) as f64 {
                continue;
            }
            let n = n.normalize();
            let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &t.idx[lo..hi] {
                for v in vertices(i as usize) {
                    let s = n.dot(&v);
                    a = a.min(s);
                    b = b.max(s);
                }
            }
            // Only keep slabs thinner than the box they refine.
            if b - a < 0.5 * t.nodes[k].bbox.extent().max() {
                t.nodes[k].slab = Some((n, a, b));
            }
        }
        t
    }

    pub fn bbox(&self) -> Aabb {
        self.nodes.first().map(|n| n.bbox).unwrap_or_else(Aabb::empty)
    }

    /// Element minimising `dist2(element, x)`: (index, squared distance).
    pub fn nearest<F: Fn(usize) -> f64>(&self, x: &Point, dist2: F) -> Option<(usize, f64)> {
        self.nearest_bounded(x, dist2, f64::INFINITY)
    }

    /// As [`Bvh::nearest`], pruning everything farther than `bound2`
    /// (squared); `None` if no element lies within the bound.
    pub fn nearest_bounded<F: Fn(usize) -> f64>(&self, x: &Point, dist2: F, bound2: f64) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, bound2);
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].lower_bound2(x)));
        while let Some((n, bd)) = stack.pop() {
            if bd >= best.1 {
                continue;
            }
            let node = &self.nodes[n as usize];
            match node.children {
                None => {
                    for &i in &self.idx[node.lo as usize..node.hi as usize] {
                        let d2 = dist2(i as usize);
                        if d2 < best.1 || (d2 == best.1 && (i as usize) < best.0) {
                            best = (i as usize, d2);
                        }
                    }
                }
                Some((l, r)) => {
                    let dl = self.nodes[l as usize].lower_bound2(x);
                    let dr = self.nodes[r as usize].lower_bound2(x);
                    // Push the farther child first so the nearer is explored first.
                    if dl <= dr {
                        stack.push((r, dr));
                        stack.push((l, dl));
                    } else {
                        stack.push((l, dl));
                        stack.push((r, dr));
                    }
                }
            }
        }
        (best.0 != usize::MAX).then_some(best)
    }

    /// Elements whose boxes come within `r` of `x`.
    pub fn candidates(&self, x: &Point, r: f64, out: &mut Vec<u32>) {
        out.clear();
        if self.nodes.is_empty() {
            return;
        }
        let r2 = r * r;
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if node.bbox.distance2(x) > r2 {
                continue;
            }
            match node.children {
                None => out.extend_from_slice(&self.idx[node.lo as usize..node.hi as usize]),
                Some((l, rr)) => {
                    stack.push(l);
                    stack.push(rr);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::p3;
    use rand::{Rng, SeedableRng};

    #[test]
    fn kd_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point> = (0..2000).map(|_| p3(rng.gen(), rng.gen(), rng.gen())).collect();
        let tree = KdTree::new(pts.clone());
        for _ in 0..200 {
            let x = p3(rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2));
            let (i, d) = tree.nearest(&x).unwrap();
            let bd = pts.iter().map(|p| (p - x).norm()).fold(f64::MAX, f64::min);
            assert_eq!(d, bd);
            assert_eq!((pts[i] - x).norm(), bd);
            let w = tree.within(&x, 0.1);
            let bw: Vec<usize> = (0..pts.len()).filter(|&k| (pts[k] - x).norm() <= 0.1).collect();
            assert_eq!(w, bw);
        }
    }

    #[test]
    fn bvh_nearest_box_center() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point> = (0..500).map(|_| p3(rng.gen(), rng.gen(), 0.0)).collect();
        let boxes: Vec<Aabb> = pts.iter().map(|p| Aabb { min: *p, max: *p }).collect();
        let bvh = Bvh::new(&boxes);
        for _ in 0..100 {
            let x = p3(rng.gen(), rng.gen(), 0.0);
            let (i, d2) = bvh.nearest(&x, |k| (pts[k] - x).norm_squared()).unwrap();
            let bd = pts.iter().map(|p| (p - x).norm_squared()).fold(f64::MAX, f64::min);
            assert_eq!(d2, bd);
            assert_eq!((pts[i] - x).norm_squared(), bd);
            let mut c = Vec::new();
            bvh.candidates(&x, 0.05, &mut c);
            for k in 0..pts.len() {
                if (pts[k] - x).norm() <= 0.05 {
                    assert!(c.contains(&(k as u32)));
                }
            }
        }
    }
}
