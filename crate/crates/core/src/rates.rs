//! Rate functions and cumulant transforms.
//!
//! The GEM/PD rates are elementary: log 1/(1 - sum of masses). The
//! Dirichlet-process side goes through the Gartner-Ellis chain: per-cell
//! log-MGFs psi and L, the cumulant Lambda, its Legendre-Fenchel conjugate
//! J, the normalized partition rate with its stationary closed form, the
//! partition-supremum rate for measures, and relative entropy.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::measure::{BaseMeasure, MeasureSpec, PartitionSpec, PartitionVector, MASS_TOL};
use crate::quad::{adaptive_simpson_split, QuadOpts};
use crate::stats::log_sum_exp;

/// A nonnegative extended-real rate value; infinity is a distinguished
/// variant rather than a float overflow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateValue {
    Finite(f64),
    Infinite,
}

impl RateValue {
    /// Wrap a finite computation, clamping away the sub-1e-9 negative dust
    /// that Newton/quadrature can leave at the zero of a rate function.
    pub(crate) fn finite(v: f64) -> RateValue {
        debug_assert!(v > -1e-9, "rate value {v} significantly negative");
        if v.is_infinite() {
            RateValue::Infinite
        } else {
            RateValue::Finite(v.max(0.0))
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            RateValue::Finite(v) => *v,
            RateValue::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, RateValue::Infinite)
    }

    pub fn is_finite(&self) -> bool {
        !self.is_infinite()
    }
}

impl std::fmt::Display for RateValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateValue::Finite(v) => write!(f, "{v}"),
            RateValue::Infinite => write!(f, "inf"),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie strictly inside (0,1), got {alpha}"
        )));
    }
    Ok(())
}

/// Rate of a single stick fraction: log 1/(1-u) on [0,1), infinity at 1.
pub fn rate_i1(u: f64) -> Result<RateValue> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("u must lie in [0,1], got {u}")));
    }
    if u == 1.0 {
        return Ok(RateValue::Infinite);
    }
    Ok(RateValue::finite(-(-u).ln_1p()))
}

/// Rate of a mass prefix: log 1/(1 - sum p_i), infinity when the masses
/// exhaust the total. With `infinite_tail` the input is read as the prefix
/// of a ranked (descending) sequence and the ordering is enforced; without
/// it the entries are GEM coordinates and any order is accepted.
pub fn rate_pd_prefix(masses: &[f64], infinite_tail: bool) -> Result<RateValue> {
    if masses.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::Domain(format!(
            "masses must be nonnegative, got {masses:?}"
        )));
    }
    if infinite_tail && masses.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Ordering(format!(
            "ranked-prefix mode requires descending masses, got {masses:?}"
        )));
    }
    let sum: f64 = masses.iter().sum();
    if sum > 1.0 + MASS_TOL {
        return Err(Error::Domain(format!("masses sum to {sum} > 1")));
    }
    if (sum - 1.0).abs() <= MASS_TOL || sum >= 1.0 {
        return Ok(RateValue::Infinite);
    }
    Ok(RateValue::finite(-(-sum).ln_1p()))
}

/// Log-MGF of the tempered stable increment at time 1:
/// (Gamma(1-alpha)/alpha) (1 - (1-lambda)^alpha) for lambda <= 1, else inf.
pub fn logmgf_psi(lambda: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if lambda > 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(gamma(1.0 - alpha) / alpha * (1.0 - (1.0 - lambda).powf(alpha)))
}

/// Scaled log-MGF of the gamma time: log 1/(1-lambda) for lambda < 1, else inf.
pub fn logmgf_l(lambda: f64) -> f64 {
    if lambda < 1.0 {
        -(-lambda).ln_1p()
    } else {
        f64::INFINITY
    }
}

/// Cumulant of the scaled increment vector:
/// Lambda(l_1..l_n) = (1/alpha) L((alpha/Gamma(1-alpha)) sum a_i psi(l_i)),
/// which collapses to -(1/alpha) log sum a_i (1-l_i)^alpha on its domain.
/// Outside the domain (any l_i > 1, or the boundary point (1,..,1)) the
/// value is +infinity.
pub fn logmgf_lambda(lambdas: &[f64], alpha: f64, cells: &PartitionSpec) -> Result<f64> {
    check_alpha(alpha)?;
    if lambdas.len() != cells.n() {
        return Err(Error::Domain(format!(
            "need one lambda per cell: {} vs {}",
            lambdas.len(),
            cells.n()
        )));
    }
    if lambdas.iter().any(|&l| l > 1.0) {
        return Ok(f64::INFINITY);
    }
    let g: f64 = cells
        .probs()
        .iter()
        .zip(lambdas)
        .map(|(&a, &l)| a * (1.0 - l).powf(alpha))
        .sum();
    if g <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-g.ln() / alpha)
}

/// Convergence diagnostics carried by a failed conjugate computation.
#[derive(Clone, Copy, Debug)]
pub struct NewtonDiagnostics {
    pub iterations: usize,
    pub grad_norm: f64,
}

const NEWTON_GRAD_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 500;

/// Legendre-Fenchel conjugate J(y) = sup_lambda <lambda,y> - Lambda(lambda)
/// over (-inf,1)^n, computed by damped Newton ascent in the reparameterized
/// variables lambda_i = 1 - e^{-eta_i} (iterates stay strictly inside the
/// domain). J is +infinity when any coordinate of y vanishes.
pub fn legendre_j(y: &[f64], alpha: f64, cells: &PartitionSpec) -> Result<RateValue> {
    check_alpha(alpha)?;
    let n = cells.n();
    if y.len() != n {
        return Err(Error::Domain(format!(
            "need one coordinate per cell: {} vs {}",
            y.len(),
            n
        )));
    }
    if y.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "coordinates must be nonnegative, got {y:?}"
        )));
    }
    if y.iter().any(|&v| v == 0.0) {
        // the supremum diverges along lambda_i -> -inf (y=0) or +1 (partial)
        return Ok(RateValue::Infinite);
    }
    let a = cells.probs();

    // objective phi(eta) = sum (1-e^{-eta_i}) y_i + (1/alpha) log sum a_i e^{-alpha eta_i}
    let phi = |eta: &[f64]| -> f64 {
        let terms: Vec<f64> = a
            .iter()
            .zip(eta)
            .map(|(&ai, &e)| ai.ln() - alpha * e)
            .collect();
        let lse = log_sum_exp(&terms);
        y.iter()
            .zip(eta)
            .map(|(&yi, &e)| (1.0 - (-e).exp()) * yi)
            .sum::<f64>()
            + lse / alpha
    };

    let mut eta = vec![0.0; n];
    let mut iterations = 0;
    loop {
        // weights w_i = a_i e^{-alpha eta_i} / sum_j a_j e^{-alpha eta_j}
        let terms: Vec<f64> = a
            .iter()
            .zip(&eta)
            .map(|(&ai, &e)| ai.ln() - alpha * e)
            .collect();
        let lse = log_sum_exp(&terms);
        let w: Vec<f64> = terms.iter().map(|t| (t - lse).exp()).collect();
        let ye: Vec<f64> = y.iter().zip(&eta).map(|(&yi, &e)| yi * (-e).exp()).collect();
        let grad: Vec<f64> = ye.iter().zip(&w).map(|(&g, &wi)| g - wi).collect();
        let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm <= NEWTON_GRAD_TOL {
            return Ok(RateValue::finite(phi(&eta)));
        }
        iterations += 1;
        if iterations > NEWTON_MAX_ITER {
            return Err(Error::Numeric(format!(
                "conjugate ascent did not converge: {:?}",
                NewtonDiagnostics {
                    iterations,
                    grad_norm,
                }
            )));
        }
        // Hessian H_ij = delta_ij (alpha w_i - y_i e^{-eta_i}) - alpha w_i w_j
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut v = -alpha * w[i] * w[j];
                if i == j {
                    v += alpha * w[i] - ye[i];
                }
                h[i * n + j] = v;
            }
        }
        // Newton direction H d = -grad, with gradient-ascent fallback
        let mut dir = match solve_linear(&mut h, &grad.iter().map(|g| -g).collect::<Vec<_>>()) {
            Some(d) => d,
            None => grad.clone(),
        };
        let ascent: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if !(ascent > 0.0) || dir.iter().any(|d| !d.is_finite()) {
            dir = grad.clone();
        }
        // backtracking line search on phi
        let base = phi(&eta);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = eta.iter().zip(&dir).map(|(e, d)| e + step * d).collect();
            if phi(&cand) > base {
                eta = cand;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // gradient is nonzero but no ascent possible at f64 resolution;
            // treat the current point as converged
            return Ok(RateValue::finite(phi(&eta)));
        }
    }
}

/// Solve an n x n linear system in place (Gaussian elimination with partial
/// pivoting); `None` when singular to working precision.
fn solve_linear(a: &mut [f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            x.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut v = x[col];
        for c in col + 1..n {
            v -= a[col * n + c] * x[c];
        }
        x[col] = v / a[col * n + col];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Partition rate for a normalized vector x with cell probabilities a:
/// sup over gamma >= 0 of (1/alpha) log sum a_i gamma_i^alpha + 1 - sum gamma_i x_i.
/// At interior x the supremum has the stationary closed form
/// ((1-alpha)/alpha) log sum a_i^{1/(1-alpha)} x_i^{-alpha/(1-alpha)};
/// it diverges when some x_i = 0, and the rate is +infinity off the simplex.
pub fn rate_partition(x: &PartitionVector, alpha: f64, cells: &PartitionSpec) -> Result<RateValue> {
    check_alpha(alpha)?;
    if x.len() != cells.n() {
        return Err(Error::Domain(format!(
            "need one coordinate per cell: {} vs {}",
            x.len(),
            cells.n()
        )));
    }
    rate_partition_raw(x.values(), alpha, cells.probs())
}

/// As `rate_partition`, for a raw vector that may fail the simplex
/// constraint (in which case the rate is +infinity, per the theorem).
pub fn rate_partition_raw(x: &[f64], alpha: f64, a: &[f64]) -> Result<RateValue> {
    check_alpha(alpha)?;
    if x.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "coordinates must be nonnegative, got {x:?}"
        )));
    }
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > MASS_TOL {
        return Ok(RateValue::Infinite);
    }
    if x.iter().any(|&v| v == 0.0) {
        return Ok(RateValue::Infinite);
    }
    let c = 1.0 / (1.0 - alpha);
    let terms: Vec<f64> = a
        .iter()
        .zip(x)
        .map(|(&ai, &xi)| c * ai.ln() - alpha * c * xi.ln())
        .collect();
    let log_t = log_sum_exp(&terms);
    if log_t.is_infinite() {
        return Ok(RateValue::Infinite);
    }
    Ok(RateValue::finite((1.0 - alpha) / alpha * log_t))
}

/// Discrete relative entropy sum a_i log(a_i / x_i) of cell masses
/// (the alpha -> 0 limit of the partition rate).
pub fn discrete_relative_entropy(nu_masses: &[f64], mu_masses: &[f64]) -> RateValue {
    let mut h = 0.0;
    for (&a, &x) in nu_masses.iter().zip(mu_masses) {
        if a == 0.0 {
            continue;
        }
        if x <= 0.0 {
            return RateValue::Infinite;
        }
        h += a * (a / x).ln();
    }
    RateValue::finite(h)
}

/// Result of the partition-supremum evaluation of the measure rate.
#[derive(Clone, Debug)]
pub struct MeasureRate {
    pub value: RateValue,
    /// Running supremum at each dyadic depth 0..=depth.
    pub by_depth: Vec<RateValue>,
    /// True when the last two depths differ by less than 1e-4.
    pub converged: bool,
}

const MEASURE_RATE_CONV_TOL: f64 = 1e-4;

/// Lower bound for the measure rate I^alpha(mu): the supremum of the
/// partition rate over dyadic partitions of depth 0..=depth, monotone in
/// depth. Cell masses of mu are integrated once at the finest level and
/// aggregated upward, so every depth sees consistent masses.
pub fn rate_measure_alpha(
    mu: &MeasureSpec,
    nu: &BaseMeasure,
    alpha: f64,
    depth: u32,
) -> Result<MeasureRate> {
    check_alpha(alpha)?;
    if depth > 20 {
        return Err(Error::Domain(format!("depth {depth} too large (max 20)")));
    }
    let n = 1usize << depth;
    let cuts: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let mut mu_masses = mu.masses_on(&cuts);
    let total: f64 = mu_masses.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::Domain(format!(
            "mu is not a probability measure: dyadic masses sum to {total}"
        )));
    }
    let mut nu_masses: Vec<f64> = {
        let mut lo = 0.0;
        cuts.iter()
            .map(|&t| {
                let m = nu.mass(lo, t);
                lo = t;
                m
            })
            .collect()
    };
    let mut by_depth = Vec::with_capacity(depth as usize + 1);
    let mut levels = Vec::with_capacity(depth as usize + 1);
    levels.push((nu_masses.clone(), mu_masses.clone()));
    for _ in 0..depth {
        nu_masses = nu_masses.chunks(2).map(|c| c.iter().sum()).collect();
        mu_masses = mu_masses.chunks(2).map(|c| c.iter().sum()).collect();
        levels.push((nu_masses.clone(), mu_masses.clone()));
    }
    levels.reverse(); // coarse to fine
    let mut best = RateValue::Finite(0.0);
    for (a, x) in &levels {
        let v = rate_partition_raw(x, alpha, a)?;
        if v.value() > best.value() {
            best = v;
        }
        by_depth.push(best);
    }
    let converged = match &by_depth[..] {
        [.., prev, last] => match (prev, last) {
            (RateValue::Finite(p), RateValue::Finite(l)) => (l - p).abs() < MEASURE_RATE_CONV_TOL,
            (RateValue::Infinite, RateValue::Infinite) => true,
            _ => false,
        },
        [_only] => true,
        _ => true,
    };
    Ok(MeasureRate {
        value: best,
        by_depth,
        converged,
    })
}

/// Relative entropy H(nu|mu) = integral (dnu/dmu) log(dnu/dmu) dmu, by
/// adaptive quadrature of f_nu log(f_nu/f_mu) at absolute tolerance 1e-6.
/// Failure of absolute continuity is detected on a 1024-cell scan (mu-mass
/// below 1e-14 where nu-mass exceeds 1e-10) and reported as +infinity.
pub fn relative_entropy(nu: &BaseMeasure, mu: &MeasureSpec) -> Result<RateValue> {
    let n = 1024;
    let mut lo = 0.0;
    for i in 1..=n {
        let hi = i as f64 / n as f64;
        let m_mu = mu.mass(lo, hi);
        let m_nu = nu.mass(lo, hi);
        if m_mu < 1e-14 && m_nu > 1e-10 {
            return Ok(RateValue::Infinite);
        }
        lo = hi;
    }
    let integrand = |x: f64| {
        let fn_ = nu.density(x);
        if fn_ < 1e-300 {
            return 0.0;
        }
        let fm = mu.density(x).max(1e-300);
        fn_ * (fn_ / fm).ln()
    };
    let opts = QuadOpts {
        abs_tol: 1e-8,
        rel_tol: 1e-9,
        max_depth: 52,
    };
    // split near the endpoints where densities may be singular, and on the
    // cell boundaries of cell-based measures where the integrand is kinked
    let mut points = vec![
        0.0, 1e-9, 1e-6, 1e-3, 0.1, 0.5, 0.9, 1.0 - 1e-3, 1.0 - 1e-6, 1.0 - 1e-9, 1.0,
    ];
    if let MeasureSpec::Cells { cells, .. } = mu {
        points.extend_from_slice(cells.cuts());
    }
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();
    let v = adaptive_simpson_split(&integrand, &points, opts);
    if !v.is_finite() {
        return Err(Error::Numeric(format!(
            "relative entropy quadrature returned {v}"
        )));
    }
    Ok(RateValue::finite(v))
}
