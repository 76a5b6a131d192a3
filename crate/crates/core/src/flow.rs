//! Flow of canonical good directions ẋ = γ(x)G(x), level-crossing times and
//! the monotonicity audit.

use crate::approximation::ReshapeProfile;
use crate::distance::RegularizedDistance;
use crate::domain::C0Domain;
use crate::geometry::{smooth_step, Aabb, Point};
use crate::good_directions::{build_canonical_field, CanonicalField};
use crate::ode::{self, OdeOptions, OdeStats, Stepper};
use crate::roots::{find_root_with, RootFailure, RootOptions};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::sync::Arc;

/// γ decays from 1 at |ρ| = ε̄ to 0 at |ρ| = `GAMMA_SUPPORT`·ε̄.
pub const GAMMA_SUPPORT: f64 = 1.25;

/// γ = ψ(|ρ|/ε̄) with ψ ≡ 1 on [0, 1], ψ ≡ 0 on [1.25, ∞), smooth and
/// monotone in between.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CutoffGamma {
    pub eps_bar: f64,
    /// Collar width of the field the cutoff was audited against.
    pub collar: f64,
}

impl CutoffGamma {
    pub fn of_rho(&self, rho: f64) -> f64 {
        let s = (rho.abs() / self.eps_bar - 1.0) / (GAMMA_SUPPORT - 1.0);
        1.0 - smooth_step(s)
    }

    /// |ρ| beyond which γ vanishes.
    pub fn support(&self) -> f64 {
        GAMMA_SUPPORT * self.eps_bar
    }
}

/// Cutoff for `eps_bar`, after checking that every point where γ may be
/// nonzero lies in the field's collar. Since ρ/d ∈ [½, 2], γ > 0 forces
/// |d| < 2.5ε̄; grid nodes in that band are tested against the quarter-ball
/// union.
pub fn build_cutoff(rho: &RegularizedDistance, field: &CanonicalField, eps_bar: f64) -> Result<CutoffGamma> {
    if !(eps_bar > 0.0) {
        return Err(Error::InvalidInput("eps_bar must be positive".into()));
    }
    let reach = 2.0 * GAMMA_SUPPORT * eps_bar;
    if reach > field.collar {
        return Err(Error::CollarTooThin { distance: reach, required: field.collar });
    }
    let dom = &rho.domain;
    let n = if dom.dim == 2 { 160 } else { 40 };
    let bbox = dom.bounding_box().inflate(reach);
    let bad = audit_grid(&bbox, dom.dim, n).into_par_iter().find_any(|x| {
        let d = dom.signed_distance(x);
        d.abs() < reach && !field.in_collar(x)
    });
    if let Some(x) = bad {
        return Err(Error::CollarTooThin { distance: dom.signed_distance(&x), required: reach });
    }
    Ok(CutoffGamma { eps_bar, collar: field.collar })
}

fn audit_grid(b: &Aabb, dim: usize, n: usize) -> Vec<Point> {
    let e = b.extent();
    let c = |k: usize, i: usize| b.min[k] + e[k] * i as f64 / (n - 1) as f64;
    let mut out = Vec::new();
    let nz = if dim == 2 { 1 } else { n };
    for k in 0..nz {
        for j in 0..n {
            for i in 0..n {
                out.push(Point::new(c(0, i), c(1, j), if dim == 2 { 0.0 } else { c(2, k) }));
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct FlowOptions {
    /// Integrator settings; `max_step` defaults to ε̄/4.
    pub ode: OdeOptions,
    /// Root refinement in time.
    pub root: RootOptions,
    /// Fixed-point tolerance for ρ along trajectories.
    pub rho_tol: f64,
    /// Longest time a level search marches before giving up, in units of ε̄.
    pub horizon: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            ode: OdeOptions { atol: 1e-9, ..Default::default() },
            root: RootOptions { bisect_width: 1e-3, tol: 1e-13, ftol: 1e-13, max_iter: 200 },
            rho_tol: 1e-12,
            horizon: 40.0,
        }
    }
}

/// Integrator for ẋ = γ(x)G(x) with level-time solvers.
#[derive(Clone, Debug)]
pub struct Flow {
    pub rho: Arc<RegularizedDistance>,
    pub field: Arc<CanonicalField>,
    pub gamma: CutoffGamma,
    pub opts: FlowOptions,
}

/// A point where the trajectory crosses a level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LevelHit {
    pub level: f64,
    pub t: f64,
    pub x: Point,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub x0: Point,
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    pub rho: Vec<f64>,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn end(&self) -> Point {
        *self.points.last().unwrap()
    }

    /// Adjacent pairs, in order of increasing time, where ρ fails to increase
    /// by more than −`tol`.
    pub fn monotonicity_violations(&self, tol: f64) -> usize {
        let forward = self.times.last().copied().unwrap_or(0.0) >= 0.0;
        self.rho
            .windows(2)
            .filter(|w| {
                let inc = if forward { w[1] - w[0] } else { w[0] - w[1] };
                inc <= -tol || (inc <= 0.0 && tol == 0.0)
            })
            .count()
    }

    /// Smallest increase of ρ between adjacent samples (time-ordered).
    pub fn min_increment(&self) -> f64 {
        let forward = self.times.last().copied().unwrap_or(0.0) >= 0.0;
        self.rho
            .windows(2)
            .map(|w| if forward { w[1] - w[0] } else { w[0] - w[1] })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest |Δx|/|Δt| over adjacent samples.
    pub fn max_speed(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.points.windows(2))
            .map(|(t, p)| (p[1] - p[0]).norm() / (t[1] - t[0]).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self, dim: usize) -> String {
        let mut s = String::from(if dim == 2 { "t,x,y,rho\n" } else { "t,x,y,z,rho\n" });
        for ((t, p), r) in self.times.iter().zip(&self.points).zip(&self.rho) {
            let coords: Vec<String> = (0..dim).map(|k| p[k].to_string()).collect();
            let _ = writeln!(s, "{t},{},{r}", coords.join(","));
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub trajectories: usize,
    pub pairs: usize,
    pub violations: usize,
    pub min_increment: f64,
    pub max_speed: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Flow {
    pub fn new(rho: Arc<RegularizedDistance>, field: Arc<CanonicalField>, eps_bar: f64) -> Result<Self> {
        let gamma = build_cutoff(&rho, &field, eps_bar)?;
        let mut opts = FlowOptions::default();
        opts.ode.max_step = 0.25 * eps_bar;
        Ok(Flow { rho, field, gamma, opts })
    }

    /// Canonical field of the domain's atlas and ε̄ just below collar/2.5, the
    /// largest value the containment audit can accept.
    pub fn for_domain(domain: Arc<C0Domain>) -> Result<Self> {
        let field = Arc::new(build_canonical_field(&domain)?);
        let eps_bar = 0.99 * field.collar / (2.0 * GAMMA_SUPPORT);
        let rho = Arc::new(RegularizedDistance::new(domain));
        Self::new(rho, field, eps_bar)
    }

    pub fn domain(&self) -> &C0Domain {
        &self.rho.domain
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn eps_bar(&self) -> f64 {
        self.gamma.eps_bar
    }

    /// Default ε₀ = ε̄/6, so that 3ε₀ < ε̄.
    pub fn eps0(&self) -> f64 {
        self.gamma.eps_bar / 6.0
    }

    pub fn rho_at(&self, x: &Point) -> Result<f64> {
        Ok(self.rho.solve_tol(x, self.opts.rho_tol)?.rho)
    }

    /// γ(x); ρ is only solved for when the distance bounds leave γ undecided.
    pub fn gamma_at(&self, x: &Point) -> Result<f64> {
        let d = self.rho.d(x).abs();
        if d <= 0.5 * self.gamma.eps_bar {
            return Ok(1.0);
        }
        if d >= 2.0 * self.gamma.support() {
            return Ok(0.0);
        }
        Ok(self.gamma.of_rho(self.rho.solve_from(x, self.rho.d(x), self.rho.opts.tol)?.rho))
    }

    /// Right-hand side γ(x)G(x).
    pub fn velocity(&self, x: &Point) -> Result<Point> {
        let g = self.gamma_at(x)?;
        if g == 0.0 {
            return Ok(Point::zeros());
        }
        match self.field.eval(x)? {
            Some(v) => Ok(v * g),
            None => Err(Error::CollarTooThin { distance: self.rho.d(x), required: self.gamma.support() }),
        }
    }

    fn rhs(&self) -> impl FnMut(&Point) -> Result<Point> + '_ {
        move |x: &Point| self.velocity(x)
    }

    fn ode_opts(&self, atol: f64) -> OdeOptions {
        OdeOptions { atol, ..self.opts.ode }
    }

    /// S(t)x₀ sampled at the accepted steps, with ρ at every sample.
    pub fn integrate(&self, x0: &Point, t: f64, step_ctrl: f64) -> Result<Trajectory> {
        let sol = ode::integrate(self.rhs(), *x0, t, &self.ode_opts(step_ctrl))?;
        let rho = sol.points.iter().map(|p| self.rho_at(p)).collect::<Result<_>>()?;
        Ok(Trajectory { x0: *x0, times: sol.times, points: sol.points, rho, stats: sol.stats })
    }

    /// S(t)x₀.
    pub fn advance(&self, x0: &Point, t: f64) -> Result<Point> {
        Ok(ode::integrate(self.rhs(), *x0, t, &self.opts.ode)?.last())
    }

    /// t(τ, x): the unique time with ρ(S(t)x) = τ.
    pub fn level_time(&self, x: &Point, target: f64) -> Result<f64> {
        Ok(self.level_hits(x, &[target])?[0].t)
    }

    /// Crossings of several levels along the orbit through `x`, in the order
    /// given. One forward and one backward march serve all targets.
    pub fn level_hits(&self, x: &Point, targets: &[f64]) -> Result<Vec<LevelHit>> {
        let r0 = self.rho_at(x)?;
        self.level_hits_from(x, r0, targets)
    }

    /// As [`Flow::level_hits`] with ρ(x) already known.
    pub fn level_hits_from(&self, x: &Point, r0: f64, targets: &[f64]) -> Result<Vec<LevelHit>> {
        let mut out: Vec<Option<LevelHit>> = vec![None; targets.len()];
        for (k, &tau) in targets.iter().enumerate() {
            if tau == r0 {
                out[k] = Some(LevelHit { level: tau, t: 0.0, x: *x });
            }
        }
        for dir in [1.0, -1.0] {
            let mut pending: Vec<usize> =
                (0..targets.len()).filter(|&k| out[k].is_none() && (targets[k] - r0) * dir > 0.0).collect();
            if pending.is_empty() {
                continue;
            }
            pending.sort_by(|&a, &b| (dir * targets[a]).total_cmp(&(dir * targets[b])));
            for (k, hit) in self.march(x, r0, dir, pending.iter().map(|&k| targets[k]).collect())? {
                out[pending[k]] = Some(hit);
            }
        }
        Ok(out.into_iter().map(|h| h.unwrap()).collect())
    }

    /// March in direction `dir` locating the ordered `levels` (monotone in
    /// `dir`). Each crossing is refined inside its step by re-taking the step
    /// with a shorter size.
    fn march(&self, x: &Point, r0: f64, dir: f64, levels: Vec<f64>) -> Result<Vec<(usize, LevelHit)>> {
        let horizon = self.opts.horizon * self.gamma.eps_bar;
        let far = levels.last().copied().unwrap_or(r0);
        if far.abs() >= self.gamma.support() {
            return Err(Error::BracketFailure { target: far, horizon });
        }
        let mut f = self.rhs();
        let opts = self.opts.ode;
        let mut st = Stepper::new(&mut f, *x, dir, opts.max_step, &opts)?;
        if st.is_stationary() {
            return Err(Error::BracketFailure { target: levels[0], horizon: 0.0 });
        }
        let mut out = Vec::with_capacity(levels.len());
        let mut r_prev = r0;
        let mut next = 0;
        while next < levels.len() {
            if st.t.abs() >= horizon {
                return Err(Error::BracketFailure { target: levels[next], horizon });
            }
            let (x_prev, k_prev, t_prev) = (st.x, st.k1, st.t);
            let h = st.step(&mut f, horizon - st.t.abs())?;
            let r_new = self.rho_at(&st.x)?;
            while next < levels.len() && (r_new - levels[next]) * dir >= 0.0 {
                let tau = levels[next];
                let hit = if r_new == tau {
                    LevelHit { level: tau, t: st.t, x: st.x }
                } else {
                    self.refine(&mut f, &x_prev, &k_prev, t_prev, dir, h, r_prev - tau, r_new - tau, tau)?
                };
                out.push((next, hit));
                next += 1;
            }
            r_prev = r_new;
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine<F>(
        &self,
        f: &mut F,
        x0: &Point,
        k0: &Point,
        t0: f64,
        dir: f64,
        h: f64,
        f_lo: f64,
        f_hi: f64,
        tau: f64,
    ) -> Result<LevelHit>
    where
        F: FnMut(&Point) -> Result<Point>,
    {
        let mut g = |s: f64| -> Result<f64> {
            let (xs, _, _) = ode::dp_step(f, x0, k0, dir * s)?;
            Ok(self.rho_at(&xs)? - tau)
        };
        let root = match find_root_with(&mut g, 0.0, f_lo, h, f_hi, &self.opts.root) {
            Ok(r) => r,
            Err(RootFailure::Eval(e)) => return Err(e),
            Err(RootFailure::NotConverged { x, .. }) => crate::roots::Root { x, fx: g(x)?, iterations: 0 },
            Err(RootFailure::NoBracket { .. }) => return Err(Error::BracketFailure { target: tau, horizon: h }),
        };
        let (xs, _, _) = ode::dp_step(f, x0, k0, dir * root.x)?;
        Ok(LevelHit { level: tau, t: t0 + dir * root.x, x: xs })
    }

    /// t(ε, x) solving ρ(S(t)x) = ρ(x) + h(ε, ρ(x)) for x ∈ Ω̄ ∖ Ω_{3ε}.
    pub fn crossing_time(&self, eps: f64, x: &Point, profile: &ReshapeProfile) -> Result<f64> {
        Ok(self.crossing(eps, x, profile)?.t)
    }

    /// As [`Flow::crossing_time`], also returning S(t)x.
    pub fn crossing(&self, eps: f64, x: &Point, profile: &ReshapeProfile) -> Result<LevelHit> {
        let r = self.rho_at(x)?;
        self.crossing_from(eps, x, r, profile)
    }

    pub fn crossing_from(&self, eps: f64, x: &Point, r: f64, profile: &ReshapeProfile) -> Result<LevelHit> {
        if eps < 0.0 {
            return Err(Error::InvalidInput("crossing_time needs eps >= 0".into()));
        }
        if r < 0.0 || r > 3.0 * eps {
            return Err(Error::OutOfBand { rho: r, eps });
        }
        let target = r + profile.h(eps, r);
        if target == r {
            return Ok(LevelHit { level: r, t: 0.0, x: *x });
        }
        Ok(self.level_hits_from(x, r, &[target])?[0])
    }

    /// (t₋, t₊): twice the largest |t(∓ε, P)| over the sample.
    pub fn uniform_crossing_bounds(&self, eps: f64, sample: &[Point]) -> Result<(f64, f64)> {
        let eps = eps.abs();
        let times: Vec<(f64, f64)> = sample
            .par_iter()
            .map(|p| {
                let h = self.level_hits(p, &[-eps, eps])?;
                Ok((h[0].t.abs(), h[1].t.abs()))
            })
            .collect::<Result<_>>()?;
        let lo = times.iter().map(|v| v.0).fold(0.0, f64::max);
        let hi = times.iter().map(|v| v.1).fold(0.0, f64::max);
        Ok((2.0 * lo, 2.0 * hi))
    }

    /// Random starting points with γ(x₀) > 0, drawn uniformly from the band
    /// |d| < 2.5ε̄ around ∂Ω by rejection.
    pub fn collar_sample(&self, count: usize, seed: u64) -> Result<Vec<Point>> {
        let dom = self.domain();
        let reach = 2.0 * self.gamma.support();
        let bbox = dom.bounding_box().inflate(reach);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = dom.boundary_cloud();
        let mut out = Vec::with_capacity(count);
        let mut tries = 0usize;
        while out.len() < count {
            tries += 1;
            if tries > 10_000 * count.max(1) {
                return Err(Error::InvalidInput("could not sample the collar".into()));
            }
            // Start from a boundary point to keep the rejection rate low.
            let c = cloud[rng.gen_range(0..cloud.len())];
            let mut x = c;
            for k in 0..dom.dim {
                x[k] += rng.gen_range(-reach..reach);
            }
            if !bbox.contains(&x) {
                continue;
            }
            if self.gamma_at(&x)? > 0.0 {
                out.push(x);
            }
        }
        Ok(out)
    }

    /// Integrates every start point forward over `t` and counts adjacent
    /// sample pairs where ρ drops by `tol` or more.
    pub fn monotonicity_audit(&self, starts: &[Point], t: f64, tol: f64) -> Result<MonotonicityReport> {
        let atol = self.opts.ode.atol;
        let rows: Vec<(usize, usize, f64, f64)> = starts
            .par_iter()
            .map(|x| {
                let tr = self.integrate(x, t, atol)?;
                Ok((tr.rho.len().saturating_sub(1), tr.monotonicity_violations(tol), tr.min_increment(), tr.max_speed()))
            })
            .collect::<Result<_>>()?;
        let mut r = MonotonicityReport {
            trajectories: rows.len(),
            pairs: 0,
            violations: 0,
            min_increment: f64::INFINITY,
            max_speed: 0.0,
            tol,
            pass: false,
        };
        for (p, v, m, s) in rows {
            r.pairs += p;
            r.violations += v;
            r.min_increment = r.min_increment.min(m);
            r.max_speed = r.max_speed.max(s);
        }
        r.pass = r.violations == 0 && r.max_speed <= 1.0 + 1e-6;
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::FixtureId;
    use crate::geometry::p2;

    fn disk_flow() -> Flow {
        Flow::for_domain(Arc::new(C0Domain::fixture(FixtureId::UnitDisk).unwrap())).unwrap()
    }

    #[test]
    fn cutoff_profile() {
        let g = CutoffGamma { eps_bar: 0.1, collar: 0.3 };
        assert_eq!(g.of_rho(0.0), 1.0);
        assert_eq!(g.of_rho(-0.1), 1.0);
        assert_eq!(g.of_rho(0.125), 0.0);
        assert!(g.of_rho(0.11) > 0.0 && g.of_rho(0.11) < 1.0);
        assert!(g.of_rho(0.11) > g.of_rho(0.12));
    }

    #[test]
    fn cutoff_rejects_wide_bands() {
        let dom = Arc::new(C0Domain::fixture(FixtureId::UnitDisk).unwrap());
        let field = build_canonical_field(&dom).unwrap();
        let rho = RegularizedDistance::new(dom);
        assert!(matches!(build_cutoff(&rho, &field, field.collar), Err(Error::CollarTooThin { .. })));
        assert!(build_cutoff(&rho, &field, 0.05).is_ok());
    }

    #[test]
    fn far_points_are_stationary() {
        let f = disk_flow();
        let x = p2(0.0, 0.1);
        let tr = f.integrate(&x, 1.0, 1e-9).unwrap();
        assert_eq!(tr.end(), x);
    }

    #[test]
    fn rho_increases_along_the_flow() {
        let f = disk_flow();
        let x = p2(0.99, 0.05);
        let tr = f.integrate(&x, 0.1, 1e-9).unwrap();
        assert_eq!(tr.monotonicity_violations(0.0), 0);
        assert!(tr.max_speed() <= 1.0 + 1e-9);
    }

    #[test]
    fn level_time_properties() {
        let f = disk_flow();
        let x = p2(0.995, 0.0);
        let r = f.rho_at(&x).unwrap();
        assert_eq!(f.level_time(&x, r).unwrap(), 0.0);
        let tau = 0.02;
        let hit = f.level_hits(&x, &[tau]).unwrap()[0];
        assert!((f.rho_at(&hit.x).unwrap() - tau).abs() < 1e-10);
        // Time translation along the orbit.
        let sigma = 0.3 * hit.t;
        let y = f.advance(&x, sigma).unwrap();
        let t2 = f.level_time(&y, tau).unwrap();
        assert!((t2 - (hit.t - sigma)).abs() < 1e-7, "{t2} vs {}", hit.t - sigma);
    }

    #[test]
    fn crossing_time_conventions() {
        let f = disk_flow();
        let prof = ReshapeProfile::new();
        let eps = 0.01;
        // ρ(x) = 2.7ε: inside the zero band of h.
        let x = crate::roots::find_root(
            |s: f64| f.rho_at(&p2(s, 0.0)).map(|r| r - 2.7 * eps),
            0.9,
            1.0,
            &RootOptions::default(),
        )
        .unwrap()
        .x;
        assert_eq!(f.crossing_time(eps, &p2(x, 0.0), &prof).unwrap(), 0.0);
        let b = f.crossing(eps, &p2(1.0, 0.0), &prof).unwrap();
        assert!(b.t > 0.0);
        assert!((f.rho_at(&b.x).unwrap() - eps).abs() < 1e-10);
        assert!(matches!(f.crossing_time(eps, &p2(0.5, 0.0), &prof), Err(Error::OutOfBand { .. })));
    }
}
