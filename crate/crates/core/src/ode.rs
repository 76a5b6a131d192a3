//! Dormand–Prince 5(4) integrator for autonomous systems in ℝ³.

use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { atol: 1e-9, rtol: 0.0, max_step: f64::INFINITY, min_step: 1e-14, max_steps: 1_000_000 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub max_error: f64,
}

#[derive(Clone, Debug)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    pub stats: OdeStats,
}

impl OdeSolution {
    pub fn last(&self) -> Point {
        *self.points.last().unwrap()
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between 5th and 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One Dormand–Prince step of signed size `h` from `x` with `k1 = f(x)`.
/// Returns the new point, `f` there, and the embedded error vector.
pub fn dp_step<F>(f: &mut F, x: &Point, k1: &Point, h: f64) -> Result<(Point, Point, Point)>
where
    F: FnMut(&Point) -> Result<Point>,
{
    let k2 = f(&(x + h * (A21 * k1)))?;
    let k3 = f(&(x + h * (A31 * k1 + A32 * k2)))?;
    let k4 = f(&(x + h * (A41 * k1 + A42 * k2 + A43 * k3)))?;
    let k5 = f(&(x + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)))?;
    let k6 = f(&(x + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)))?;
    let xn = x + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
    let k7 = f(&xn)?;
    let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
    Ok((xn, k7, err))
}

/// Adaptive marcher in a fixed time direction. Each call to [`Stepper::step`]
/// performs one accepted step; the state before the step stays available
/// for dense root searches within it.
#[derive(Clone, Debug)]
pub struct Stepper {
    pub t: f64,
    pub x: Point,
    /// f(x).
    pub k1: Point,
    pub dir: f64,
    h: f64,
    opts: OdeOptions,
    pub stats: OdeStats,
}

impl Stepper {
    pub fn new<F>(f: &mut F, x0: Point, dir: f64, first_step: f64, opts: &OdeOptions) -> Result<Self>
    where
        F: FnMut(&Point) -> Result<Point>,
    {
        let k1 = f(&x0)?;
        let stats = OdeStats { evaluations: 1, ..Default::default() };
        let h = first_step.min(opts.max_step).max(opts.min_step);
        Ok(Stepper { t: 0.0, x: x0, k1, dir: dir.signum(), h, opts: *opts, stats })
    }

    pub fn is_stationary(&self) -> bool {
        self.k1 == Point::zeros()
    }

    /// Advance by one accepted step of at most `limit` (unsigned). Returns the
    /// unsigned size of the step taken.
    pub fn step<F>(&mut self, f: &mut F, limit: f64) -> Result<f64>
    where
        F: FnMut(&Point) -> Result<Point>,
    {
        loop {
            if self.stats.accepted + self.stats.rejected >= self.opts.max_steps {
                return Err(Error::StepUnderflow { t: self.t, h: self.h });
            }
            let last = self.h >= limit;
            let h = if last { limit } else { self.h };
            let (xn, k7, errv) = dp_step(f, &self.x, &self.k1, self.dir * h)?;
            self.stats.evaluations += 6;
            let scale = self.opts.atol + self.opts.rtol * self.x.abs().sup(&xn.abs()).max();
            let err = errv.abs().max() / scale;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                self.t += self.dir * h;
                self.x = xn;
                self.k1 = k7;
                self.stats.accepted += 1;
                self.stats.max_error = self.stats.max_error.max(errv.abs().max());
                // A truncated final step says nothing about the natural size.
                if !last || fac < 1.0 {
                    self.h = (h * fac).min(self.opts.max_step);
                }
                return Ok(h);
            }
            self.stats.rejected += 1;
            self.h = h * fac.min(1.0);
            if self.h < self.opts.min_step {
                return Err(Error::StepUnderflow { t: self.t, h: self.h });
            }
        }
    }
}

/// Integrate `ẋ = f(x)` from `x0` over signed time `t_end`, recording every
/// accepted step. The right-hand side may fail; the error is propagated.
pub fn integrate<F>(mut f: F, x0: Point, t_end: f64, opts: &OdeOptions) -> Result<OdeSolution>
where
    F: FnMut(&Point) -> Result<Point>,
{
    let mut times = vec![0.0];
    let mut points = vec![x0];
    if t_end == 0.0 {
        return Ok(OdeSolution { times, points, stats: OdeStats::default() });
    }
    let span = t_end.abs();
    let mut st = Stepper::new(&mut f, x0, t_end, 0.01 * span, opts)?;
    if st.is_stationary() {
        // Stationary point of an autonomous system stays put.
        times.push(t_end);
        points.push(x0);
        return Ok(OdeSolution { times, points, stats: st.stats });
    }
    let mut done = 0.0;
    while done < span {
        let remaining = span - done;
        let h = st.step(&mut f, remaining)?;
        done = if h >= remaining { span } else { done + h };
        times.push(st.dir * done);
        points.push(st.x);
    }
    Ok(OdeSolution { times, points, stats: st.stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::p3;

    #[test]
    fn rotation_flow_is_accurate() {
        let f = |x: &Point| Ok(p3(-x.y, x.x, 0.0));
        let opts = OdeOptions { atol: 1e-11, ..Default::default() };
        let sol = integrate(f, p3(1.0, 0.0, 0.0), std::f64::consts::PI, &opts).unwrap();
        assert!((sol.last() - p3(-1.0, 0.0, 0.0)).norm() < 1e-8);
        let back = integrate(f, sol.last(), -std::f64::consts::PI, &opts).unwrap();
        assert!((back.last() - p3(1.0, 0.0, 0.0)).norm() < 1e-8);
        assert!(back.times.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn exponential_growth() {
        let opts = OdeOptions { atol: 1e-12, rtol: 1e-12, ..Default::default() };
        let sol = integrate(|x: &Point| Ok(*x), p3(1.0, 2.0, 0.0), 1.0, &opts).unwrap();
        let e = std::f64::consts::E;
        assert!((sol.last() - p3(e, 2.0 * e, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn respects_max_step() {
        let opts = OdeOptions { max_step: 0.05, ..Default::default() };
        let sol = integrate(|_: &Point| Ok(p3(1.0, 0.0, 0.0)), Point::zeros(), 1.0, &opts).unwrap();
        assert!(sol.times.windows(2).all(|w| w[1] - w[0] <= 0.05 + 1e-15));
        assert!((sol.last().x - 1.0).abs() < 1e-14);
    }

    #[test]
    fn discontinuous_field_underflows() {
        // Sign switch with a jump: the controller keeps rejecting at the jump.
        let f = |x: &Point| Ok(p3(if x.x < 0.5 { 1.0 } else { -1.0 }, 0.0, 0.0));
        let opts = OdeOptions { atol: 1e-12, max_steps: 100_000, ..Default::default() };
        let r = integrate(f, Point::zeros(), 2.0, &opts);
        assert!(matches!(r, Err(Error::StepUnderflow { .. })));
    }
}
