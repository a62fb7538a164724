//! Maximization of a concave, upper-semicontinuous score over `[0, 1]`.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizer and maximum of `score` on `[0, 1]`.
///
/// Endpoints are probed first: by concavity, `score(δ) ≤ score(0)` means `0` is
/// optimal and `score(1−δ) < score(1)` means the maximizer lies within `δ` of `1`.
/// Otherwise golden-section search runs until the bracket is narrower than `δ`.
/// `extra` candidates (e.g. the previous iteration's maximizer) are compared as
/// well. Ties go to the smallest proportion.
pub fn maximize_concave<F: FnMut(f64) -> f64>(mut score: F, tolerance: f64, extra: Option<f64>) -> (f64, f64) {
    let delta = tolerance.clamp(1e-12, 0.25);
    let mut best = (0.0, score(0.0));
    let consider = |pi: f64, value: f64, best: &mut (f64, f64)| {
        if value > best.1 || (value == best.1 && pi < best.0) || best.1.is_nan() {
            *best = (pi, value);
        }
    };

    let near_zero = score(delta);
    if near_zero <= best.1 {
        if let Some(p) = extra.filter(|p| (0.0..=1.0).contains(p) && *p > 0.0) {
            let v = score(p);
            consider(p, v, &mut best);
        }
        return best;
    }
    consider(delta, near_zero, &mut best);

    let at_one = score(1.0);
    let near_one = score(1.0 - delta);
    consider(1.0 - delta, near_one, &mut best);
    consider(1.0, at_one, &mut best);
    if near_one < at_one {
        if let Some(p) = extra.filter(|p| (0.0..=1.0).contains(p)) {
            let v = score(p);
            consider(p, v, &mut best);
        }
        return best;
    }

    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = score(c);
    let mut fd = score(d);
    while b - a > delta {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = score(d);
        }
    }
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    let mid = 0.5 * (a + b);
    let fm = score(mid);
    consider(mid, fm, &mut best);
    if let Some(p) = extra.filter(|p| (0.0..=1.0).contains(p)) {
        let v = score(p);
        consider(p, v, &mut best);
    }
    best
}
