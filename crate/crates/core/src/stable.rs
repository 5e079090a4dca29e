//! One-sided stable subordinators: density evaluation, exact sampling, and
//! exponentially tilted (tempered) increments.
//!
//! Untempered case: Levy density h(x) = alpha*C*x^{-(alpha+1)}, so the time-1
//! marginal has Laplace transform exp(-C*Gamma(1-alpha)*s^alpha). The density
//! is evaluated through Zolotarev's integral representation for small and
//! moderate arguments and through the convergent power series in x^{-alpha}
//! for large arguments.
//!
//! Tempered case: Levy density x^{-(alpha+1)}e^{-x}. Increments are sampled
//! exactly by rejection: draw the matching untempered increment and accept
//! with probability e^{-x}, splitting the duration into chunks so each
//! chunk's acceptance probability stays above e^{-1}.

use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, QuadOpts};
use crate::rng::RandomStream;

/// Parameters of a one-sided stable subordinator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StableSpec {
    alpha: f64,
    scale_c: f64,
    tempered: bool,
}

impl StableSpec {
    pub fn new(alpha: f64, scale_c: f64, tempered: bool) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!(
                "stable index must lie strictly inside (0,1), got {alpha}"
            )));
        }
        if !(scale_c.is_finite() && scale_c > 0.0) {
            return Err(Error::Domain(format!(
                "scale constant must be positive, got {scale_c}"
            )));
        }
        Ok(Self {
            alpha,
            scale_c,
            tempered,
        })
    }

    /// Untempered spec with the default scale C = 1.
    pub fn untempered(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0, false)
    }

    /// Tempered spec (Levy density x^{-(1+alpha)}e^{-x}; C plays no role).
    pub fn tempered(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0, true)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale_c(&self) -> f64 {
        self.scale_c
    }

    pub fn is_tempered(&self) -> bool {
        self.tempered
    }
}

fn gamma_fn(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Zolotarev's function A(u) on (0, pi), in log space.
fn log_zolotarev_a(u: f64, alpha: f64) -> f64 {
    (alpha * (alpha * u).sin().ln() + (1.0 - alpha) * ((1.0 - alpha) * u).sin().ln()
        - u.sin().ln())
        / (1.0 - alpha)
}

/// Density of the standard one-sided stable law (Laplace transform
/// exp(-s^alpha)) via Zolotarev's integral representation.
fn standard_pdf_integral(x: f64, alpha: f64) -> f64 {
    let z = x.powf(-alpha / (1.0 - alpha));
    let integrand = |u: f64| {
        if u <= 0.0 || u >= PI {
            return 0.0;
        }
        let la = log_zolotarev_a(u, alpha);
        let e = la - la.exp() * z;
        if e < -745.0 {
            0.0
        } else {
            e.exp()
        }
    };
    let opts = QuadOpts {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        max_depth: 48,
    };
    let v = adaptive_simpson(&integrand, 0.0, PI, opts);
    alpha / (1.0 - alpha) / PI * x.powf(-1.0 / (1.0 - alpha)) * v
}

/// Density of the standard one-sided stable law via the convergent series
/// (1/pi) sum_k (-1)^{k+1} Gamma(alpha k + 1)/k! sin(k pi alpha) x^{-alpha k - 1}.
fn standard_pdf_series(x: f64, alpha: f64) -> f64 {
    let lx = x.ln();
    let mut sum = 0.0;
    let mut tiny_run = 0;
    for k in 1..400 {
        let kf = k as f64;
        let ln_mag = ln_gamma(alpha * kf + 1.0) - ln_gamma(kf + 1.0) - (alpha * kf + 1.0) * lx;
        let t = ln_mag.exp() * (kf * PI * alpha).sin() * if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += t;
        // sin(k pi alpha) can vanish exactly (e.g. alpha = 1/2), so require
        // two consecutive negligible terms before stopping
        if t.abs() <= 1e-17 * sum.abs() {
            tiny_run += 1;
            if tiny_run >= 2 && k > 8 {
                break;
            }
        } else {
            tiny_run = 0;
        }
    }
    sum / PI
}

const SERIES_CUTOFF: f64 = 3.0;

/// Standard stable density at x > 0 (Laplace transform exp(-s^alpha)).
pub(crate) fn standard_stable_pdf(x: f64, alpha: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= SERIES_CUTOFF {
        standard_pdf_series(x, alpha)
    } else {
        standard_pdf_integral(x, alpha)
    }
}

/// Scale b such that the time-1 marginal of the untempered subordinator is
/// b times a standard stable variable.
fn untempered_scale(alpha: f64, scale_c: f64) -> f64 {
    (scale_c * gamma_fn(1.0 - alpha)).powf(1.0 / alpha)
}

/// Density psi(t) at t = x of the untempered stable subordinator at time 1.
pub fn stable_density(spec: &StableSpec, x: f64) -> Result<f64> {
    if spec.tempered {
        return Err(Error::Domain(
            "stable_density evaluates the untempered law; spec is tempered".into(),
        ));
    }
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain(format!("density argument must be positive, got {x}")));
    }
    let b = untempered_scale(spec.alpha, spec.scale_c);
    Ok(standard_stable_pdf(x / b, spec.alpha) / b)
}

/// Kanter's exact sampler for the standard one-sided stable law:
/// S = (A(pi U) / E)^{(1-alpha)/alpha} with U uniform, E exponential.
pub(crate) fn standard_stable_sample(alpha: f64, stream: &mut RandomStream) -> f64 {
    let u = stream.uniform_open() * PI;
    let e = stream.exponential();
    let la = log_zolotarev_a(u, alpha);
    ((la - e.ln()) * (1.0 - alpha) / alpha).exp()
}

/// One draw of the untempered subordinator at the given duration.
pub fn stable_increment(spec: &StableSpec, duration: f64, stream: &mut RandomStream) -> Result<f64> {
    if spec.tempered {
        return Err(Error::Domain(
            "stable_increment samples the untempered law; spec is tempered".into(),
        ));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::Domain(format!("duration must be positive, got {duration}")));
    }
    // time-t marginal scale: (t*C*Gamma(1-alpha))^{1/alpha}
    let b = (duration * spec.scale_c * gamma_fn(1.0 - spec.alpha)).powf(1.0 / spec.alpha);
    Ok(b * standard_stable_sample(spec.alpha, stream))
}

/// One draw of sigma(duration) for the tempered subordinator
/// (Levy density x^{-(1+alpha)}e^{-x}).
///
/// Rejection from the matching untempered subordinator with tilting weight
/// e^{-x}. The duration is split into n = ceil(duration*Gamma(1-alpha)/alpha)
/// chunks so each chunk accepts with probability at least e^{-1}; chunk
/// increments add up exactly by independence of increments.
pub fn tilted_stable_increment(
    spec: &StableSpec,
    duration: f64,
    stream: &mut RandomStream,
) -> Result<f64> {
    if !spec.tempered {
        return Err(Error::Domain(
            "tilted_stable_increment requires a tempered spec".into(),
        ));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::Domain(format!("duration must be positive, got {duration}")));
    }
    let alpha = spec.alpha;
    // Laplace exponent of the untempered part at s=1 is
    // duration * Gamma(1-alpha)/alpha = -log(acceptance probability).
    let rate = gamma_fn(1.0 - alpha) / alpha;
    let chunks = (duration * rate).ceil().max(1.0);
    let n = chunks as u64;
    let d = duration / chunks;
    // per-chunk stable scale: the untempered chunk has Laplace transform
    // exp(-d * Gamma(1-alpha)/alpha * s^alpha)
    let b = (d * rate).powf(1.0 / alpha);
    let mut total = 0.0;
    for _ in 0..n {
        loop {
            let x = b * standard_stable_sample(alpha, stream);
            if stream.uniform_open() <= (-x).exp() {
                total += x;
                break;
            }
        }
    }
    Ok(total)
}
