//! Adaptive Simpson quadrature.
//!
//! Recursive bisection with Richardson extrapolation; the error estimate
//! for a panel is |S_fine - S_coarse| / 15. Callers pick absolute and
//! relative tolerances; the relative one is measured against a running
//! scale supplied from the first whole-interval estimate.

#[derive(Clone, Copy, Debug)]
pub struct QuadOpts {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadOpts {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_depth: 50,
        }
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let fine = left + right;
    let err = (fine - whole) / 15.0;
    if depth == 0 || err.abs() <= tol {
        return fine + err;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Integrate `f` over `[a, b]`. Non-finite evaluations are treated as 0,
/// which lets integrands with removable endpoint blow-ups (weight decays
/// faster than the singularity) pass through quietly.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, opts: QuadOpts) -> f64 {
    if b <= a {
        return 0.0;
    }
    let g = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (g(a), g(m), g(b));
    let whole = simpson(fa, fm, fb, b - a);
    let tol = opts.abs_tol.max(opts.rel_tol * whole.abs());
    recurse(&g, a, b, fa, fm, fb, whole, tol, opts.max_depth)
}

/// Integrate over an explicit list of breakpoints (useful when the caller
/// knows where an integrand is singular or kinked).
pub fn adaptive_simpson_split<F: Fn(f64) -> f64>(f: &F, points: &[f64], opts: QuadOpts) -> f64 {
    points
        .windows(2)
        .map(|w| adaptive_simpson(f, w[0], w[1], opts))
        .sum()
}
