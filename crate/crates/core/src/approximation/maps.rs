//! Deformations carrying Ω̄ onto Ω̄_ε along the flow of good directions:
//! the interior map f, the exterior map F, the two-sided map f̄ between two
//! level domains, and their global assembly.

use super::transfer::{build_smooth_transfer, ReshapeProfile};
use crate::flow::Flow;
use crate::geometry::Point;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Which map a [`DeformationMap`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MapKind {
    Interior,
    Exterior,
    TwoSided,
    Global,
}

/// Flow plus reshaping profile; every map is a flow time computed from level
/// crossings along the orbit through the point.
#[derive(Clone)]
pub struct Deformation {
    pub flow: Arc<Flow>,
    pub profile: ReshapeProfile,
    /// Points with ρ ≥ −`domain_tol` count as Ω̄ for the interior map.
    pub domain_tol: f64,
}

impl Deformation {
    pub fn new(flow: Arc<Flow>) -> Self {
        Deformation { flow, profile: ReshapeProfile::new(), domain_tol: 1e-12 }
    }

    pub fn eps0(&self) -> f64 {
        self.flow.eps0()
    }

    /// Levels the maps may target: the band where γ ≡ 1, (−3ε₀, 3ε₀).
    pub fn level_band(&self) -> f64 {
        3.0 * self.eps0()
    }

    fn check_level(&self, level: f64) -> Result<()> {
        let band = self.level_band();
        if level.abs() >= band {
            return Err(Error::LevelTimeOutOfBand { level, band });
        }
        Ok(())
    }

    fn check_eps(&self, eps: f64) -> Result<()> {
        let e0 = self.eps0();
        if eps.abs() >= e0 {
            return Err(Error::LevelTimeOutOfBand { level: eps, band: e0 });
        }
        Ok(())
    }

    fn rho(&self, x: &Point) -> Result<f64> {
        self.flow.rho_at(x)
    }

    /// f(ε, x) for x ∈ Ω̄: ρ(f(ε,x)) = ρ(x) + h(ε, ρ(x)); identity on Ω_{3ε}.
    pub fn interior_map(&self, eps: f64, x: &Point) -> Result<Point> {
        self.check_eps(eps)?;
        if eps < 0.0 {
            return Err(Error::InvalidInput("interior map needs eps >= 0".into()));
        }
        let r = self.rho(x)?;
        if r < -self.domain_tol {
            return Err(Error::OutsideDomain { rho: r });
        }
        if eps == 0.0 || r >= 3.0 * eps {
            return Ok(*x);
        }
        Ok(self.flow.crossing_from(eps, x, r.max(0.0), &self.profile)?.x)
    }

    /// f⁻¹(ε, y) for y ∈ Ω̄_ε: the level r with r + h(ε,r) = ρ(y) is reached
    /// backward along the orbit of y.
    pub fn interior_map_inverse(&self, eps: f64, y: &Point) -> Result<Point> {
        self.check_eps(eps)?;
        if eps < 0.0 {
            return Err(Error::InvalidInput("interior map needs eps >= 0".into()));
        }
        let r = self.rho(y)?;
        if eps == 0.0 || r >= 3.0 * eps {
            return Ok(*y);
        }
        if r < eps - self.domain_tol {
            return Err(Error::OutsideDomain { rho: r });
        }
        let r0 = self.profile.invert_shift(eps, r.max(eps));
        if r0 == r {
            return Ok(*y);
        }
        Ok(self.flow.level_hits_from(y, r, &[r0])?[0].x)
    }

    /// F(ε′, x) for ε′ < 0 and x ∈ Ω^c, the mirror of f: ρ is lowered by
    /// h(|ε′|, −ρ(x)); identity where ρ ≤ 3ε′.
    pub fn exterior_map(&self, eps_prime: f64, x: &Point) -> Result<Point> {
        self.check_eps(eps_prime)?;
        if eps_prime > 0.0 {
            return Err(Error::InvalidInput("exterior map needs eps' <= 0".into()));
        }
        let e = -eps_prime;
        let r = self.rho(x)?;
        if r > self.domain_tol {
            return Err(Error::OutsideDomain { rho: r });
        }
        let s = (-r).max(0.0);
        if e == 0.0 || s >= 3.0 * e {
            return Ok(*x);
        }
        let target = -(s + self.profile.h(e, s));
        Ok(self.flow.level_hits_from(x, r, &[target])?[0].x)
    }

    /// F⁻¹(ε′, y) for y with ρ(y) ≤ ε′.
    pub fn exterior_map_inverse(&self, eps_prime: f64, y: &Point) -> Result<Point> {
        self.check_eps(eps_prime)?;
        if eps_prime > 0.0 {
            return Err(Error::InvalidInput("exterior map needs eps' <= 0".into()));
        }
        let e = -eps_prime;
        let r = self.rho(y)?;
        if e == 0.0 || -r >= 3.0 * e {
            return Ok(*y);
        }
        if r > eps_prime + self.domain_tol {
            return Err(Error::OutsideDomain { rho: r });
        }
        let q = self.profile.invert_shift(e, (-r).max(e));
        if -q == r {
            return Ok(*y);
        }
        Ok(self.flow.level_hits_from(y, r, &[-q])?[0].x)
    }

    /// Orbit constants of the two-sided map at `x`: (α, β, r, s) with
    /// α = 1/(t(2ε) − t(2ε′)), β = −t(2ε′)α, r = αt(ε) + β, s = αt(ε′) + β.
    fn orbit_coordinates(&self, eps: f64, eps_prime: f64, x: &Point, rho: f64) -> Result<(f64, f64, f64, f64)> {
        for level in [2.0 * eps, 2.0 * eps_prime] {
            self.check_level(level)?;
        }
        let hits = self.flow.level_hits_from(x, rho, &[2.0 * eps, 2.0 * eps_prime, eps, eps_prime])?;
        let (t2e, t2ep, te, tep) = (hits[0].t, hits[1].t, hits[2].t, hits[3].t);
        let alpha = 1.0 / (t2e - t2ep);
        let beta = -t2ep * alpha;
        Ok((alpha, beta, alpha * te + beta, alpha * tep + beta))
    }

    fn check_two_sided(&self, eps: f64, eps_prime: f64) -> Result<()> {
        if !(eps > 0.0 && eps_prime < 0.0) {
            return Err(Error::InvalidInput("two-sided map needs eps > 0 > eps'".into()));
        }
        self.check_eps(eps)?;
        self.check_eps(eps_prime)
    }

    /// f̄(ε, ε′, x): carries ∂Ω_ε onto ∂Ω_{ε′} and is the identity where
    /// ρ ≥ 2ε or ρ ≤ 2ε′.
    pub fn two_sided_map(&self, eps: f64, eps_prime: f64, x: &Point) -> Result<Point> {
        self.check_two_sided(eps, eps_prime)?;
        let rho = self.rho(x)?;
        if rho >= 2.0 * eps || rho <= 2.0 * eps_prime {
            return Ok(*x);
        }
        let (alpha, beta, r, s) = self.orbit_coordinates(eps, eps_prime, x, rho)?;
        let eta = (build_smooth_transfer(r, s)?.eval(beta) - beta) / alpha;
        self.flow.advance(x, eta)
    }

    /// f̄⁻¹(ε, ε′, y), using that r, s and α are constant along orbits.
    pub fn two_sided_map_inverse(&self, eps: f64, eps_prime: f64, y: &Point) -> Result<Point> {
        self.check_two_sided(eps, eps_prime)?;
        let rho = self.rho(y)?;
        if rho >= 2.0 * eps || rho <= 2.0 * eps_prime {
            return Ok(*y);
        }
        let (alpha, beta, r, s) = self.orbit_coordinates(eps, eps_prime, y, rho)?;
        let tau = (build_smooth_transfer(r, s)?.inverse(beta) - beta) / alpha;
        self.flow.advance(y, tau)
    }

    /// The map carrying Ω̄ onto Ω̄_ε and Ω^c onto Ω_ε^c for either sign of ε.
    pub fn global_map(&self, eps: f64, x: &Point) -> Result<Point> {
        self.check_eps(eps)?;
        if eps == 0.0 {
            return Ok(*x);
        }
        let inside = self.rho(x)? >= 0.0;
        match (eps > 0.0, inside) {
            (true, true) => self.interior_map(eps, x),
            (true, false) => self.two_sided_map_inverse(eps, -eps, &self.exterior_map(-eps, x)?),
            (false, true) => self.two_sided_map(-eps, eps, &self.interior_map(-eps, x)?),
            (false, false) => self.exterior_map(eps, x),
        }
    }

    pub fn global_map_inverse(&self, eps: f64, y: &Point) -> Result<Point> {
        self.check_eps(eps)?;
        if eps == 0.0 {
            return Ok(*y);
        }
        let inside = self.rho(y)? >= eps;
        match (eps > 0.0, inside) {
            (true, true) => self.interior_map_inverse(eps, y),
            (true, false) => self.exterior_map_inverse(-eps, &self.two_sided_map(eps, -eps, y)?),
            (false, true) => self.interior_map_inverse(-eps, &self.two_sided_map_inverse(-eps, eps, y)?),
            (false, false) => self.exterior_map_inverse(eps, y),
        }
    }

    /// Largest distance between the Ω̄-branch and Ω^c-branch images of
    /// boundary points under the global map.
    pub fn seam_audit(&self, eps: f64, points: &[Point]) -> Result<f64> {
        self.check_eps(eps)?;
        if eps == 0.0 {
            return Ok(0.0);
        }
        let gaps: Vec<f64> = points
            .par_iter()
            .map(|x| {
                let (a, b) = if eps > 0.0 {
                    (self.interior_map(eps, x)?, self.two_sided_map_inverse(eps, -eps, &self.exterior_map(-eps, x)?)?)
                } else {
                    (self.two_sided_map(-eps, eps, &self.interior_map(-eps, x)?)?, self.exterior_map(eps, x)?)
                };
                Ok((a - b).norm())
            })
            .collect::<Result<_>>()?;
        Ok(gaps.into_iter().fold(0.0, f64::max))
    }
}

/// A deformation with its parameters fixed.
#[derive(Clone)]
pub struct DeformationMap {
    pub kind: MapKind,
    pub eps: f64,
    /// Lower level of the two-sided map; unused otherwise.
    pub eps_prime: f64,
    pub deformation: Deformation,
}

impl DeformationMap {
    pub fn new(deformation: Deformation, kind: MapKind, eps: f64, eps_prime: f64) -> Self {
        DeformationMap { kind, eps, eps_prime, deformation }
    }

    pub fn forward(&self, x: &Point) -> Result<Point> {
        let d = &self.deformation;
        match self.kind {
            MapKind::Interior => d.interior_map(self.eps, x),
            MapKind::Exterior => d.exterior_map(self.eps, x),
            MapKind::TwoSided => d.two_sided_map(self.eps, self.eps_prime, x),
            MapKind::Global => d.global_map(self.eps, x),
        }
    }

    pub fn inverse(&self, y: &Point) -> Result<Point> {
        let d = &self.deformation;
        match self.kind {
            MapKind::Interior => d.interior_map_inverse(self.eps, y),
            MapKind::Exterior => d.exterior_map_inverse(self.eps, y),
            MapKind::TwoSided => d.two_sided_map_inverse(self.eps, self.eps_prime, y),
            MapKind::Global => d.global_map_inverse(self.eps, y),
        }
    }

    /// Whether `x` lies in the source of the forward map.
    pub fn in_source(&self, rho: f64) -> bool {
        match self.kind {
            MapKind::Interior => rho >= 0.0,
            MapKind::Exterior => rho <= 0.0,
            _ => true,
        }
    }

    /// Whether `y` lies in the image of the forward map.
    pub fn in_image(&self, rho: f64) -> bool {
        match self.kind {
            MapKind::Interior => rho >= self.eps,
            MapKind::Exterior => rho <= self.eps,
            _ => true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundTripReport {
    pub kind: MapKind,
    pub eps: f64,
    pub eps_prime: f64,
    /// Points audited in each direction.
    pub forward_samples: usize,
    pub inverse_samples: usize,
    /// Points of the sample that the map moved.
    pub moved: usize,
    /// max |f⁻¹(f(x)) − x|.
    pub max_inverse_after_forward: f64,
    /// max |f(f⁻¹(y)) − y|.
    pub max_forward_after_inverse: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Round trips over a stratified sample: collar points on both sides of ∂Ω
/// plus boundary points (the seam), each kept when it lies in the relevant
/// source or image.
pub fn roundtrip_audit(map: &DeformationMap, samples: usize, seed: u64, threshold: f64) -> Result<RoundTripReport> {
    let flow = &map.deformation.flow;
    let mut pts = flow.collar_sample(samples - samples / 4, seed)?;
    let cloud = flow.domain().boundary_cloud();
    let stride = (cloud.len() / (samples / 4).max(1)).max(1);
    pts.extend(cloud.iter().step_by(stride).take(samples / 4).copied());
    let rhos: Vec<f64> = pts.par_iter().map(|p| flow.rho_at(p)).collect::<Result<_>>()?;
    let rows: Vec<(Option<(f64, bool)>, Option<f64>)> = pts
        .par_iter()
        .zip(rhos.par_iter())
        .map(|(p, &r)| {
            let fwd = if map.in_source(r) {
                let y = map.forward(p)?;
                Some(((map.inverse(&y)? - p).norm(), y != *p))
            } else {
                None
            };
            let inv = if map.in_image(r) { Some((map.forward(&map.inverse(p)?)? - p).norm()) } else { None };
            Ok((fwd, inv))
        })
        .collect::<Result<_>>()?;
    let mut rep = RoundTripReport {
        kind: map.kind,
        eps: map.eps,
        eps_prime: map.eps_prime,
        forward_samples: 0,
        inverse_samples: 0,
        moved: 0,
        max_inverse_after_forward: 0.0,
        max_forward_after_inverse: 0.0,
        threshold,
        pass: false,
    };
    for (f, i) in rows {
        if let Some((e, moved)) = f {
            rep.forward_samples += 1;
            rep.moved += moved as usize;
            rep.max_inverse_after_forward = rep.max_inverse_after_forward.max(e);
        }
        if let Some(e) = i {
            rep.inverse_samples += 1;
            rep.max_forward_after_inverse = rep.max_forward_after_inverse.max(e);
        }
    }
    rep.pass = rep.max_inverse_after_forward <= threshold && rep.max_forward_after_inverse <= threshold;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{C0Domain, FixtureId};
    use crate::geometry::p2;
    use std::sync::OnceLock;

    fn disk() -> &'static Deformation {
        static D: OnceLock<Deformation> = OnceLock::new();
        D.get_or_init(|| {
            let dom = Arc::new(C0Domain::fixture(FixtureId::UnitDisk).unwrap());
            Deformation::new(Arc::new(Flow::for_domain(dom).unwrap()))
        })
    }

    fn on_boundary(k: usize) -> Point {
        let cloud = disk().flow.domain().boundary_cloud();
        cloud[k * 397 % cloud.len()]
    }

    #[test]
    fn interior_map_reaches_the_level() {
        let d = disk();
        let eps = 0.5 * d.eps0();
        let x = on_boundary(1);
        let y = d.interior_map(eps, &x).unwrap();
        assert!((d.flow.rho_at(&y).unwrap() - eps).abs() < 1e-9);
        let back = d.interior_map_inverse(eps, &y).unwrap();
        assert!((back - x).norm() < 1e-7);
        assert_eq!(d.interior_map(0.0, &x).unwrap(), x);
        let deep = p2(0.2, 0.1);
        assert_eq!(d.interior_map(eps, &deep).unwrap(), deep);
    }

    #[test]
    fn exterior_map_mirrors_the_interior_map() {
        let d = disk();
        let e = -0.5 * d.eps0();
        let x = on_boundary(2);
        let y = d.exterior_map(e, &x).unwrap();
        let err = (d.flow.rho_at(&y).unwrap() - e).abs();
        assert!(err < 1e-9, "{err}");
        assert!((d.exterior_map_inverse(e, &y).unwrap() - x).norm() < 1e-7);
    }

    #[test]
    fn two_sided_map_swaps_levels() {
        let d = disk();
        let (e, ep) = (0.4 * d.eps0(), -0.3 * d.eps0());
        let x = d.flow.level_hits(&p2(0.8, 0.6), &[e]).unwrap()[0].x;
        let y = d.two_sided_map(e, ep, &x).unwrap();
        assert!((d.flow.rho_at(&y).unwrap() - ep).abs() < 1e-8);
        assert!((d.two_sided_map_inverse(e, ep, &y).unwrap() - x).norm() < 1e-7);
        let far = d.flow.level_hits(&p2(0.8, 0.6), &[2.5 * e]).unwrap()[0].x;
        assert_eq!(d.two_sided_map(e, ep, &far).unwrap(), far);
    }

    #[test]
    fn global_map_branches_agree_on_the_boundary() {
        let d = disk();
        let pts: Vec<Point> = (0..8).map(on_boundary).collect();
        for eps in [0.5 * d.eps0(), -0.5 * d.eps0()] {
            assert!(d.seam_audit(eps, &pts).unwrap() < 1e-7);
        }
    }

    #[test]
    fn global_round_trip() {
        let d = disk().clone();
        let map = DeformationMap::new(d.clone(), MapKind::Global, 0.5 * d.eps0(), 0.0);
        let rep = roundtrip_audit(&map, 40, 3, 1e-6).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.moved > 0);
    }
}
