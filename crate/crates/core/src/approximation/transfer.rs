//! The reshape profile h(ε, r) and the three-parameter transfer h(a, c, t).

use crate::quadrature::MollifiedPiecewiseLinear;
use crate::roots::{find_root, RootOptions};
use crate::{Error, Result};
use std::convert::Infallible;

/// h̃: 1 on [0, 1], 0 on [5/2, ∞), slope in [−4/5, 0]. Built by mollifying
/// the ramp from 1 at 9/8 to 0 at 19/8 with half-width 1/8; h(ε, r) = ε h̃(r/ε).
#[derive(Clone, Debug)]
pub struct ReshapeProfile {
    base: MollifiedPiecewiseLinear,
}

impl Default for ReshapeProfile {
    fn default() -> Self {
        Self::new()
    }
}

impl ReshapeProfile {
    pub fn new() -> Self {
        let base = MollifiedPiecewiseLinear::new(vec![9.0 / 8.0, 19.0 / 8.0], vec![1.0, 0.0], 0.0, 0.0, 1.0 / 8.0);
        ReshapeProfile { base }
    }

    /// h̃(r).
    pub fn base(&self, r: f64) -> f64 {
        if r <= 1.0 {
            1.0
        } else if r >= 2.5 {
            0.0
        } else {
            self.base.value(r)
        }
    }

    pub fn base_derivative(&self, r: f64) -> f64 {
        if r <= 1.0 || r >= 2.5 {
            0.0
        } else {
            // The profile is nonincreasing; clip quadrature round-off.
            self.base.derivative(r).min(0.0)
        }
    }

    /// h(ε, r) for ε ≥ 0.
    pub fn h(&self, eps: f64, r: f64) -> f64 {
        if eps == 0.0 {
            0.0
        } else {
            eps * self.base(r / eps)
        }
    }

    /// ∂h/∂r.
    pub fn dh_dr(&self, eps: f64, r: f64) -> f64 {
        if eps == 0.0 {
            0.0
        } else {
            self.base_derivative(r / eps)
        }
    }

    /// The unique r ≥ 0 with r + h(ε, r) = level, for level ∈ [ε, ∞).
    pub fn invert_shift(&self, eps: f64, level: f64) -> f64 {
        if eps == 0.0 || level >= 3.0 * eps {
            return level;
        }
        // On [0, ε] the shift is exactly +ε.
        if level <= 2.0 * eps {
            return (level - eps).max(0.0);
        }
        let opts = RootOptions { bisect_width: 0.0, tol: 1e-15 * eps.max(1e-300), ftol: 0.0, max_iter: 200 };
        let g = |r: f64| -> std::result::Result<f64, Infallible> { Ok(r + self.h(eps, r) - level) };
        match find_root(g, eps, 3.0 * eps, &opts) {
            Ok(r) => r.x,
            Err(_) => level,
        }
    }
}

/// h(a, c, ·): the identity outside [0, 1], strictly increasing, with
/// h(a, c, a) = c. The piecewise-affine core H has breakpoints
/// δ, a − δ, a + δ, 1 − δ with δ = a(1−a)c(1−c)/4 and is mollified with
/// half-width δ/2; the convolution is evaluated exactly piece by piece.
#[derive(Clone, Debug)]
pub struct SmoothTransfer {
    pub a: f64,
    pub c: f64,
    pub delta: f64,
    core: MollifiedPiecewiseLinear,
}

/// δ(a, c) = a(1−a)c(1−c)/4.
pub fn transfer_width(a: f64, c: f64) -> f64 {
    0.25 * a * (1.0 - a) * c * (1.0 - c)
}

pub fn build_smooth_transfer(a: f64, c: f64) -> Result<SmoothTransfer> {
    if !(a > 0.0 && a < 1.0 && c > 0.0 && c < 1.0) {
        return Err(Error::InvalidInput(format!("transfer parameters must lie in (0,1), got a = {a}, c = {c}")));
    }
    let d = transfer_width(a, c);
    let core = MollifiedPiecewiseLinear::new(
        vec![d, a - d, a + d, 1.0 - d],
        vec![d, c - d, c + d, 1.0 - d],
        1.0,
        1.0,
        0.5 * d,
    );
    Ok(SmoothTransfer { a, c, delta: d, core })
}

impl SmoothTransfer {
    fn active(&self, t: f64) -> bool {
        t > 0.5 * self.delta && t < 1.0 - 0.5 * self.delta
    }

    /// The unmollified core H(a, c, t).
    pub fn core(&self, t: f64) -> f64 {
        self.core.core(t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.active(t) {
            self.core.value(t)
        } else {
            t
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if self.active(t) {
            self.core.derivative(t)
        } else {
            1.0
        }
    }

    /// h⁻¹(a, c, v). The active interval maps onto itself.
    pub fn inverse(&self, v: f64) -> f64 {
        if !self.active(v) {
            return v;
        }
        let lo = 0.5 * self.delta;
        let hi = 1.0 - lo;
        let opts = RootOptions { bisect_width: 1e-3, tol: 1e-15, ftol: 0.0, max_iter: 300 };
        let g = |t: f64| -> std::result::Result<f64, Infallible> { Ok(self.eval(t) - v) };
        match find_root(g, lo, hi, &opts) {
            Ok(r) => r.x,
            Err(_) => v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reshape_profile_properties() {
        let p = ReshapeProfile::new();
        let eps = 0.03;
        for k in 0..=100 {
            let r = eps * k as f64 / 100.0;
            assert_eq!(p.h(eps, r), eps);
        }
        assert_eq!(p.h(eps, 2.5 * eps), 0.0);
        assert_eq!(p.h(eps, 4.0 * eps), 0.0);
        let mut prev = p.base(1.0);
        for k in 0..=3000 {
            let r = 1.0 + 1.5 * k as f64 / 3000.0;
            let s = p.base_derivative(r);
            assert!(s > -1.0 && s <= 0.0, "slope {s} at {r}");
            let v = p.base(r);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn invert_shift_round_trips() {
        let p = ReshapeProfile::new();
        let eps = 0.02;
        for k in 0..=200 {
            let r = 3.0 * eps * k as f64 / 200.0;
            let l = r + p.h(eps, r);
            assert!((p.invert_shift(eps, l) - r).abs() < 1e-14, "r = {r}");
        }
    }

    #[test]
    fn transfer_examples() {
        let h = build_smooth_transfer(0.3, 0.7).unwrap();
        assert!((h.eval(0.3) - 0.7).abs() < 1e-8);
        assert_eq!(h.eval(-0.5), -0.5);
        assert_eq!(h.eval(1.5), 1.5);
        assert_eq!(transfer_width(0.5, 0.5), 1.0 / 64.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let t: f64 = rng.gen_range(-0.2..1.2);
            assert!((h.inverse(h.eval(t)) - t).abs() < 1e-8);
        }
        assert!(build_smooth_transfer(0.0, 0.5).is_err());
    }

    #[test]
    fn transfer_is_strictly_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let a = rng.gen_range(0.01..0.99);
            let c = rng.gen_range(0.01..0.99);
            let t = rng.gen_range(-0.5..1.5);
            let h = build_smooth_transfer(a, c).unwrap();
            assert!(h.derivative(t) > 0.0);
            assert!((h.eval(a) - c).abs() < 1e-8);
        }
    }
}
