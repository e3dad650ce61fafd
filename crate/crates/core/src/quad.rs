//! Adaptive Simpson quadrature used for densities without a closed-form CDF.

/// Target error relative to the integral; a zero coarse estimate is taken as
/// underflow.
pub const REL_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[a, b]`; infinite bounds are mapped onto a finite
/// interval by `x = t / (1 - t^2)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if !(a < b) {
        return 0.0;
    }
    if a.is_finite() && b.is_finite() {
        return simpson(&f, a, b);
    }
    let to_t = |x: f64| {
        if x == f64::INFINITY {
            1.0
        } else if x == f64::NEG_INFINITY {
            -1.0
        } else if x == 0.0 {
            0.0
        } else {
            // inverse of x = t / (1 - t^2) on (-1, 1)
            (-1.0 + (1.0 + 4.0 * x * x).sqrt()) / (2.0 * x)
        }
    };
    let g = |t: f64| {
        let d = 1.0 - t * t;
        if d <= 0.0 {
            return 0.0;
        }
        let x = t / d;
        let jac = (1.0 + t * t) / (d * d);
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    simpson(&g, to_t(a), to_t(b))
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    // seed with a coarse composite rule so narrow peaks are not missed
    const PIECES: usize = 16;
    let h = (b - a) / PIECES as f64;
    let pieces: Vec<_> = (0..PIECES)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == PIECES { b } else { lo + h };
            let (flo, fmid, fhi) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
            (lo, hi, flo, fmid, fhi, whole)
        })
        .collect();
    let coarse: f64 = pieces.iter().map(|p| p.5.abs()).sum();
    if coarse == 0.0 || !coarse.is_finite() {
        return if coarse.is_finite() { 0.0 } else { coarse };
    }
    let eps = REL_TOL * coarse / PIECES as f64;
    pieces
        .into_iter()
        .map(|(lo, hi, flo, fmid, fhi, whole)| refine(f, lo, hi, flo, fmid, fhi, whole, eps, MAX_DEPTH))
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let both = left + right;
    if depth == 0 || (both - whole).abs() <= 15.0 * eps {
        return both + (both - whole) / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) + refine(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}
