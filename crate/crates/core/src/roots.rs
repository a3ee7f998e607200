//! Bracketing and bisection for monotone scalar equations.

/// Widens `[guess, guess]` by doubling steps until `f(lo) > 0 > f(hi)`
/// for a decreasing `f`. Returns `None` if no sign change is found.
pub fn bracket_decreasing<F>(mut f: F, guess: f64) -> Option<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let guess = if guess.is_finite() { guess } else { 0.0 };
    let (mut lo, mut hi) = (guess, guess);
    let mut step = 1.0;
    let mut f_lo = f(lo);
    let mut tries = 0;
    while f_lo.is_nan() || f_lo <= 0.0 {
        lo -= step;
        step *= 2.0;
        f_lo = f(lo);
        tries += 1;
        if tries > 1100 {
            return None;
        }
    }
    step = 1.0;
    tries = 0;
    while f(hi).is_nan() || f(hi) >= 0.0 {
        hi += step;
        step *= 2.0;
        tries += 1;
        if tries > 1100 {
            return None;
        }
    }
    Some((lo, hi))
}

/// Bisection on `[a, b]` where `f(a)` and `f(b)` have strictly opposite
/// signs. Stops when the bracket is narrower than `width` or cannot be
/// split further in floating point; returns the endpoint with the smaller
/// `|f|`.
pub fn bisect<F>(mut f: F, mut a: f64, mut b: f64, width: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let mut fa = f(a);
    let mut fb = f(b);
    debug_assert!(fa.signum() != fb.signum(), "root not bracketed");
    for _ in 0..2000 {
        if (b - a).abs() <= width {
            break;
        }
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
            fb = fm;
        }
    }
    if fa.abs() <= fb.abs() {
        a
    } else {
        b
    }
}

/// Newton steps from `x`, each accepted only if it stays inside `[lo, hi]`
/// and reduces `|f|`.
pub fn newton_polish<F, D>(mut f: F, mut df: D, mut x: f64, lo: f64, hi: f64, steps: usize) -> f64
where
    F: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    let mut fx = f(x);
    for _ in 0..steps {
        let slope = df(x);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = x - fx / slope;
        if !(lo..=hi).contains(&next) {
            break;
        }
        let fn_ = f(next);
        if fn_.abs() >= fx.abs() {
            break;
        }
        x = next;
        fx = fn_;
    }
    x
}
