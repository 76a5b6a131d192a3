//! Bracketing root finder for monotone scalar functions: bisection down to a
//! coarse width, then Illinois false position with a bisection safeguard.

#[derive(Clone, Copy, Debug)]
pub struct RootOptions {
    /// Bracket width below which bisection hands over to the secant phase.
    pub bisect_width: f64,
    /// Final bracket width.
    pub tol: f64,
    /// Stop early once |f| falls below this.
    pub ftol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions { bisect_width: 1e-3, tol: 1e-10, ftol: 0.0, max_iter: 200 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RootFailure<E> {
    /// f(lo) and f(hi) have the same strict sign.
    NoBracket { flo: f64, fhi: f64 },
    NotConverged { x: f64, width: f64 },
    Eval(E),
}

/// Find a zero of `f` in `[lo, hi]` (either order). `f(lo)` and `f(hi)` must
/// have opposite signs or one must vanish.
pub fn find_root<E, F>(mut f: F, lo: f64, hi: f64, opts: &RootOptions) -> Result<Root, RootFailure<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let fa = f(lo).map_err(RootFailure::Eval)?;
    let fb = f(hi).map_err(RootFailure::Eval)?;
    find_root_with(&mut f, lo, fa, hi, fb, opts)
}

/// As [`find_root`] with endpoint values already known.
pub fn find_root_with<E, F>(
    f: &mut F,
    lo: f64,
    flo: f64,
    hi: f64,
    fhi: f64,
    opts: &RootOptions,
) -> Result<Root, RootFailure<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    if flo == 0.0 {
        return Ok(Root { x: lo, fx: 0.0, iterations: 0 });
    }
    if fhi == 0.0 {
        return Ok(Root { x: hi, fx: 0.0, iterations: 0 });
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(RootFailure::NoBracket { flo, fhi });
    }
    // Normalise so that f(a) < 0 < f(b).
    let (mut a, mut fa, mut b, mut fb) = if flo < 0.0 { (lo, flo, hi, fhi) } else { (hi, fhi, lo, flo) };
    let mut it = 0;

    while (b - a).abs() > opts.bisect_width.max(opts.tol) && it < opts.max_iter {
        let m = 0.5 * (a + b);
        let fm = f(m).map_err(RootFailure::Eval)?;
        it += 1;
        if fm == 0.0 || fm.abs() <= opts.ftol {
            return Ok(Root { x: m, fx: fm, iterations: it });
        }
        if fm < 0.0 {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }

    // Illinois: halve the retained endpoint value when the same side is kept
    // twice; fall back to bisection when the bracket shrinks too slowly.
    // `ga`/`gb` are the (possibly scaled) secant weights, `fa`/`fb` the true values.
    let mut side = 0i8;
    let (mut ga, mut gb) = (fa, fb);
    while (b - a).abs() > opts.tol && it < opts.max_iter {
        let width = (b - a).abs();
        let mut x = b - gb * (b - a) / (gb - ga);
        if !x.is_finite() || (x - a) * (x - b) >= 0.0 {
            x = 0.5 * (a + b);
        }
        let fx = f(x).map_err(RootFailure::Eval)?;
        it += 1;
        if fx == 0.0 || fx.abs() <= opts.ftol {
            return Ok(Root { x, fx, iterations: it });
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
            ga = fx;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            gb = fx;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() > 0.75 * width {
            let m = 0.5 * (a + b);
            let fm = f(m).map_err(RootFailure::Eval)?;
            it += 1;
            if fm == 0.0 {
                return Ok(Root { x: m, fx: fm, iterations: it });
            }
            if fm < 0.0 {
                a = m;
                fa = fm;
                ga = fm;
            } else {
                b = m;
                fb = fm;
                gb = fm;
            }
            side = 0;
        }
    }
    if (b - a).abs() > opts.tol {
        return Err(RootFailure::NotConverged { x: 0.5 * (a + b), width: (b - a).abs() });
    }
    let (x, fx) = if fa.abs() <= fb.abs() { (a, fa) } else { (b, fb) };
    Ok(Root { x, fx, iterations: it })
}

/// Walk outward from `t0` in direction `dir` (±1), doubling the step, until
/// `f` changes sign relative to `f(t0)`. Returns `(t_inner, f_inner, t_outer,
/// f_outer)`.
pub fn expand_bracket<E, F>(
    f: &mut F,
    t0: f64,
    f0: f64,
    dir: f64,
    first_step: f64,
    horizon: f64,
) -> Result<Option<(f64, f64, f64, f64)>, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let mut inner = (t0, f0);
    let mut step = first_step.abs().max(1e-300);
    loop {
        let t = t0 + dir * step.min(horizon);
        let ft = f(t)?;
        if ft == 0.0 || ft.signum() != f0.signum() {
            return Ok(Some((inner.0, inner.1, t, ft)));
        }
        if step >= horizon {
            return Ok(None);
        }
        inner = (t, ft);
        step *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn ok(v: f64) -> Result<f64, Infallible> {
        Ok(v)
    }

    #[test]
    fn finds_simple_roots() {
        let r = find_root(|x| ok(x * x - 2.0), 0.0, 3.0, &RootOptions::default()).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-10);
        let r = find_root(|x| ok(x.cos() - x), 1.0, 0.0, &RootOptions::default()).unwrap();
        assert!((r.x - 0.739_085_133_215_160_6).abs() < 1e-10);
    }

    #[test]
    fn handles_flat_tails() {
        // Illinois degenerates on strongly convex functions without the safeguard.
        let r = find_root(|x: f64| ok((10.0 * x).exp() - 1.0), -1.0, 4.0, &RootOptions::default()).unwrap();
        assert!(r.x.abs() < 1e-10);
        assert!(r.iterations < 80);
    }

    #[test]
    fn reports_missing_bracket() {
        let e = find_root(|x| ok(x * x + 1.0), -1.0, 1.0, &RootOptions::default()).unwrap_err();
        assert!(matches!(e, RootFailure::NoBracket { .. }));
    }

    #[test]
    fn expands_brackets() {
        let mut f = |t: f64| ok(t - 37.0);
        let (a, _, b, _) = expand_bracket(&mut f, 0.0, -37.0, 1.0, 1.0, 1e3).unwrap().unwrap();
        assert!(a < 37.0 && b >= 37.0);
        assert!(expand_bracket(&mut f, 0.0, -37.0, -1.0, 1.0, 1e3).unwrap().is_none());
    }

    proptest::proptest! {
        #[test]
        fn cubic_roots(c in -5.0f64..5.0) {
            let r = find_root(|x| ok(x * x * x + x - c), -3.0, 3.0, &RootOptions::default()).unwrap();
            proptest::prop_assert!((r.x * r.x * r.x + r.x - c).abs() < 1e-8);
        }
    }
}
