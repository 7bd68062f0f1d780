//! Bracketed scalar root finding.

/// Root of `f` in the bracket [a, b] where `fa` and `fb` have opposite signs
/// (or one is zero). Illinois steps, with a bisection step every third
/// iteration so discontinuous `f` still converges. Stops when the bracket is
/// narrower than `tol` and returns its midpoint.
pub(crate) fn find_root(f: impl FnMut(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, tol: f64) -> f64 {
    let (a, b) = shrink_bracket(f, (a, fa), (b, fb), |a, b| (b.0 - a.0).abs() <= tol);
    0.5 * (a.0 + b.0)
}

/// The final bracket of [`find_root`] as (x, f(x)) pairs, stopping once
/// `done` holds. `f` keeps its sign at each end; an exact zero comes back at
/// both ends.
pub(crate) fn shrink_bracket(
    mut f: impl FnMut(f64) -> f64,
    mut a: (f64, f64),
    mut b: (f64, f64),
    done: impl Fn((f64, f64), (f64, f64)) -> bool,
) -> ((f64, f64), (f64, f64)) {
    if a.1 == 0.0 {
        return (a, a);
    }
    if b.1 == 0.0 {
        return (b, b);
    }
    debug_assert!(a.1.signum() != b.1.signum(), "root is not bracketed");
    // Illinois weights on the stored values.
    let (mut wa, mut wb) = (1.0, 1.0);
    let mut side = 0i8;
    for it in 0..400 {
        if done(a, b) {
            break;
        }
        let (fa, fb) = (wa * a.1, wb * b.1);
        let mut x = if it % 3 == 2 { 0.5 * (a.0 + b.0) } else { (a.0 * fb - b.0 * fa) / (fb - fa) };
        if !x.is_finite() || x <= a.0.min(b.0) || x >= a.0.max(b.0) {
            x = 0.5 * (a.0 + b.0);
        }
        if x == a.0 || x == b.0 {
            break;
        }
        let fx = f(x);
        if fx == 0.0 {
            return ((x, fx), (x, fx));
        }
        if fx.signum() == b.1.signum() {
            b = (x, fx);
            wb = 1.0;
            if side == -1 {
                wa *= 0.5;
            }
            side = -1;
        } else {
            a = (x, fx);
            wa = 1.0;
            if side == 1 {
                wb *= 0.5;
            }
            side = 1;
        }
    }
    (a, b)
}
