//! Empirical verification harness: theta-sweep Monte Carlo estimation of
//! event probabilities, exponential-slope regression against the speed
//! parameter, and comparison with the theoretical rates.
//!
//! The estimator derives one random stream per replicate from
//! (seed, stream_base + replicate index), so results are bit-identical for
//! a fixed seed no matter how replicates are scheduled across workers, and
//! events evaluated at different thresholds share paths (coupling).

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dist::beta_sample;
use crate::error::{Error, Result};
use crate::gem::TopTracker;
use crate::measure::{BaseMeasure, PartitionSpec};
use crate::quad::{adaptive_simpson, QuadOpts};
use crate::rates::{discrete_relative_entropy, rate_partition_raw, RateValue};
use crate::rng::RandomStream;
use crate::subordinator::sample_partition_via_subordinator;

const MAX_STICKS: usize = 20_000_000;
/// Residual tolerance for weak-ball path truncation; the induced bias on
/// the surrogate metric is below 2e-4 (test functions are bounded by 1).
const WEAK_BALL_RESIDUAL_TOL: f64 = 1e-4;
const WEAK_BALL_FAMILY: usize = 8;

/// A rare event over one replicate of the construction.
#[derive(Clone, Debug, PartialEq)]
pub enum EventSpec {
    /// The largest PD mass reaches x.
    P1Ge { x: f64 },
    /// The k largest PD masses together reach x.
    FirstKSumGe { k: usize, x: f64 },
    /// The first GEM stick reaches x.
    GemX1Ge { x: f64 },
    /// One partition cell of the Dirichlet process carries mass >= x.
    PartitionCellGe {
        cells: PartitionSpec,
        index: usize,
        x: f64,
    },
    /// The process deviates from the base measure by at least `radius` in
    /// the finite test-function surrogate of the weak metric
    /// (scaled Chebyshev family, 8 terms, weights 2^-j).
    WeakBall {
        radius: f64,
        nu: BaseMeasure,
        nu_moments: Vec<f64>,
    },
}

fn check_threshold(x: f64) -> Result<()> {
    if !(x.is_finite() && (0.0..=1.0).contains(&x)) {
        return Err(Error::Domain(format!(
            "event threshold must lie in [0,1], got {x}"
        )));
    }
    Ok(())
}

/// Chebyshev test function T_j(2x-1), bounded by 1 on [0,1].
fn chebyshev(j: usize, x: f64) -> f64 {
    let t = 2.0 * x - 1.0;
    let mut prev = 1.0;
    let mut cur = t;
    for _ in 1..j {
        let next = 2.0 * t * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

impl EventSpec {
    pub fn p1_ge(x: f64) -> Result<Self> {
        check_threshold(x)?;
        Ok(EventSpec::P1Ge { x })
    }

    pub fn first_k_sum_ge(k: usize, x: f64) -> Result<Self> {
        check_threshold(x)?;
        if k == 0 {
            return Err(Error::Domain("prefix length k must be at least 1".into()));
        }
        Ok(EventSpec::FirstKSumGe { k, x })
    }

    pub fn gem_x1_ge(x: f64) -> Result<Self> {
        check_threshold(x)?;
        Ok(EventSpec::GemX1Ge { x })
    }

    pub fn partition_cell_ge(cells: PartitionSpec, index: usize, x: f64) -> Result<Self> {
        check_threshold(x)?;
        if index >= cells.n() {
            return Err(Error::Domain(format!(
                "cell index {index} out of range for {} cells",
                cells.n()
            )));
        }
        Ok(EventSpec::PartitionCellGe { cells, index, x })
    }

    pub fn weak_ball(radius: f64, nu: BaseMeasure) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Domain(format!(
                "weak-ball radius must be positive, got {radius}"
            )));
        }
        let opts = QuadOpts {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_depth: 50,
        };
        let nu_moments = (1..=WEAK_BALL_FAMILY)
            .map(|j| adaptive_simpson(&|x| chebyshev(j, x) * nu.density(x), 0.0, 1.0, opts))
            .collect();
        Ok(EventSpec::WeakBall {
            radius,
            nu,
            nu_moments,
        })
    }

    /// Compact text form (also used in reports and config files).
    pub fn describe(&self) -> String {
        match self {
            EventSpec::P1Ge { x } => format!("p1_ge:{x}"),
            EventSpec::FirstKSumGe { k, x } => format!("first_k_sum_ge:{k}:{x}"),
            EventSpec::GemX1Ge { x } => format!("gem_x1_ge:{x}"),
            EventSpec::PartitionCellGe { index, x, .. } => {
                format!("partition_cell_ge:{index}:{x}")
            }
            EventSpec::WeakBall { radius, .. } => format!("weak_ball:{radius}"),
        }
    }

    /// Evaluate the event indicator on one replicate, by the cheapest exact
    /// route: adaptive stick-breaking with early exit for mass events, the
    /// subordinator representation for partition events.
    pub fn indicator(&self, theta: f64, alpha: f64, stream: &mut RandomStream) -> Result<bool> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::Domain(format!("theta must be positive, got {theta}")));
        }
        if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
            return Err(Error::Domain(format!("alpha must lie in [0,1), got {alpha}")));
        }
        match self {
            EventSpec::P1Ge { x } => {
                if *x <= 0.0 {
                    return Ok(true);
                }
                let mut residual = 1.0;
                let mut best = 0.0f64;
                let mut k = 0usize;
                loop {
                    k += 1;
                    if k > MAX_STICKS {
                        return Err(Error::Accuracy("stick cap hit in p1_ge".into()));
                    }
                    let u = beta_sample(1.0 - alpha, theta + k as f64 * alpha, stream)?;
                    best = best.max(residual * u);
                    residual *= 1.0 - u;
                    if best >= *x {
                        return Ok(true);
                    }
                    if residual < *x {
                        return Ok(false);
                    }
                }
            }
            EventSpec::FirstKSumGe { k, x } => {
                if *x <= 0.0 {
                    return Ok(true);
                }
                let mut residual = 1.0;
                let mut top = TopTracker::new(*k);
                let mut i = 0usize;
                loop {
                    i += 1;
                    if i > MAX_STICKS {
                        return Err(Error::Accuracy("stick cap hit in first_k_sum_ge".into()));
                    }
                    let u = beta_sample(1.0 - alpha, theta + i as f64 * alpha, stream)?;
                    top.observe(residual * u);
                    residual *= 1.0 - u;
                    let s = top.sum();
                    if top.is_full() && s >= *x {
                        return Ok(true);
                    }
                    if s + residual < *x {
                        return Ok(false);
                    }
                }
            }
            EventSpec::GemX1Ge { x } => {
                let u1 = beta_sample(1.0 - alpha, theta + alpha, stream)?;
                Ok(u1 >= *x)
            }
            EventSpec::PartitionCellGe { cells, index, x } => {
                let draw = sample_partition_via_subordinator(theta, alpha, cells, stream)?;
                Ok(draw.vector.values()[*index] >= *x)
            }
            EventSpec::WeakBall {
                radius,
                nu,
                nu_moments,
            } => {
                let mut residual = 1.0;
                let mut acc = [0.0f64; WEAK_BALL_FAMILY];
                let mut k = 0usize;
                while residual >= WEAK_BALL_RESIDUAL_TOL {
                    k += 1;
                    if k > MAX_STICKS {
                        return Err(Error::Accuracy("stick cap hit in weak_ball".into()));
                    }
                    let u = beta_sample(1.0 - alpha, theta + k as f64 * alpha, stream)?;
                    let stick = residual * u;
                    let xi = nu.sample(stream);
                    for (j, a) in acc.iter_mut().enumerate() {
                        *a += stick * chebyshev(j + 1, xi);
                    }
                    residual *= 1.0 - u;
                }
                let xi = nu.sample(stream);
                for (j, a) in acc.iter_mut().enumerate() {
                    *a += residual * chebyshev(j + 1, xi);
                }
                let mut rho = 0.0;
                let mut w = 0.5;
                for (a, m) in acc.iter().zip(nu_moments) {
                    rho += w * (a - m).abs();
                    w *= 0.5;
                }
                Ok(rho >= *radius)
            }
        }
    }
}

/// A Monte Carlo probability estimate with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub probability: f64,
    pub stderr: f64,
    pub events: u64,
    pub samples: u64,
}

/// Unbiased Monte Carlo estimate of the event probability, deterministic
/// for a fixed seed (replicate r draws from stream `stream_base + r`).
pub fn estimate_event_prob(
    event: &EventSpec,
    theta: f64,
    alpha: f64,
    samples: u64,
    seed: u64,
    workers: usize,
) -> Result<Estimate> {
    estimate_event_prob_with_base(event, theta, alpha, samples, seed, 0, workers)
}

pub fn estimate_event_prob_with_base(
    event: &EventSpec,
    theta: f64,
    alpha: f64,
    samples: u64,
    seed: u64,
    stream_base: u64,
    workers: usize,
) -> Result<Estimate> {
    if samples < 1_000 {
        return Err(Error::Domain(format!(
            "need at least 1000 samples, got {samples}"
        )));
    }
    if workers == 0 {
        return Err(Error::Domain("worker count must be positive".into()));
    }
    let w = workers as u64;
    let chunk = samples / w;
    let extra = samples % w;
    let ranges: Vec<(u64, u64)> = (0..w)
        .map(|i| {
            let lo = i * chunk + i.min(extra);
            let hi = lo + chunk + if i < extra { 1 } else { 0 };
            (lo, hi)
        })
        .collect();
    let counts: Result<Vec<u64>> = ranges
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut c = 0u64;
            for r in lo..hi {
                let mut stream = RandomStream::new(seed, stream_base + r);
                if event.indicator(theta, alpha, &mut stream)? {
                    c += 1;
                }
            }
            Ok(c)
        })
        .collect();
    let events: u64 = counts?.iter().sum();
    let p = events as f64 / samples as f64;
    Ok(Estimate {
        probability: p,
        stderr: (p * (1.0 - p) / samples as f64).sqrt(),
        events,
        samples,
    })
}

/// Weighted least-squares fit of log p against theta.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    /// Sign-flipped slope, reported as a nonnegative rate.
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Standard error of the slope (residual-scaled).
    pub stderr: f64,
    /// Residual scale: sqrt of weighted RSS / df, floored at the known
    /// per-point noise level 1 in the weighted case.
    pub sigma_hat: f64,
    pub points_used: usize,
}

impl FitResult {
    pub fn ci_halfwidth(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    pub fn covers(&self, rate: f64) -> bool {
        (self.rate - rate).abs() <= self.ci_halfwidth()
    }
}

/// Fit log p = intercept + slope * theta by weighted least squares
/// (weights 1/stderr^2) and report rate = -slope with a t-based 95%
/// confidence interval from the weighted regression. With all-zero
/// stderrs the fit is unweighted and the residual scale is not floored,
/// so exact synthetic lines report a zero-width interval.
pub fn fit_rate_slope(thetas: &[f64], log_probs: &[f64], stderrs: &[f64]) -> Result<FitResult> {
    let n = thetas.len();
    if log_probs.len() != n || stderrs.len() != n {
        return Err(Error::Domain(format!(
            "mismatched input lengths: {n}, {}, {}",
            log_probs.len(),
            stderrs.len()
        )));
    }
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "slope regression needs at least 3 usable grid points, got {n}"
        )));
    }
    if stderrs.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::Domain("standard errors must be finite and >= 0".into()));
    }
    let weighted = stderrs.iter().all(|&s| s > 0.0);
    let w: Vec<f64> = if weighted {
        stderrs.iter().map(|&s| 1.0 / (s * s)).collect()
    } else {
        vec![1.0; n]
    };
    let sw: f64 = w.iter().sum();
    let tbar: f64 = w.iter().zip(thetas).map(|(wi, t)| wi * t).sum::<f64>() / sw;
    let ybar: f64 = w.iter().zip(log_probs).map(|(wi, y)| wi * y).sum::<f64>() / sw;
    let sxx: f64 = w
        .iter()
        .zip(thetas)
        .map(|(wi, t)| wi * (t - tbar) * (t - tbar))
        .sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData(
            "theta grid points must not be all identical".into(),
        ));
    }
    let sxy: f64 = w
        .iter()
        .zip(thetas.iter().zip(log_probs))
        .map(|(wi, (t, y))| wi * (t - tbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let df = (n - 2) as f64;
    let rss: f64 = w
        .iter()
        .zip(thetas.iter().zip(log_probs))
        .map(|(wi, (t, y))| {
            let r = y - (ybar + slope * (t - tbar));
            wi * r * r
        })
        .sum();
    let mut sigma2 = rss / df;
    if weighted {
        sigma2 = sigma2.max(1.0);
    }
    let sigma_hat = sigma2.sqrt();
    let se = (sigma2 / sxx).sqrt();
    let tq = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Numeric(e.to_string()))?
        .inverse_cdf(0.975);
    let rate = (-slope).max(0.0);
    Ok(FitResult {
        rate,
        ci_low: rate - tq * se,
        ci_high: rate + tq * se,
        stderr: se,
        sigma_hat,
        points_used: n,
    })
}

/// Closed-form infimum of the rate over the event's closure, when known.
/// Returns `None` for events (weak balls) whose rate has no closed form;
/// those are reported as unavailable rather than approximated.
pub fn theoretical_event_rate(event: &EventSpec, alpha: f64) -> Result<Option<RateValue>> {
    match event {
        EventSpec::P1Ge { x } | EventSpec::FirstKSumGe { x, .. } | EventSpec::GemX1Ge { x } => {
            // infimum of log 1/(1 - sum) over {sum >= x} is attained at the
            // extreme point with total mass exactly x
            if *x >= 1.0 {
                Ok(Some(RateValue::Infinite))
            } else if *x <= 0.0 {
                Ok(Some(RateValue::Finite(0.0)))
            } else {
                Ok(Some(RateValue::finite(-(-x).ln_1p())))
            }
        }
        EventSpec::PartitionCellGe { cells, index, x } => {
            let a = cells.probs()[*index];
            if *x <= a {
                return Ok(Some(RateValue::Finite(0.0)));
            }
            if *x >= 1.0 {
                return Ok(Some(RateValue::Infinite));
            }
            // one-dimensional reduction: mass t in the chosen cell, the rest
            // spread proportionally (the inner minimization is attained
            // there), lumped into a two-cell partition
            let two = [a, 1.0 - a];
            let obj = |t: f64| -> f64 {
                if alpha == 0.0 {
                    discrete_relative_entropy(&two, &[t, 1.0 - t]).value()
                } else {
                    rate_partition_raw(&[t, 1.0 - t], alpha, &two)
                        .map(|r| r.value())
                        .unwrap_or(f64::INFINITY)
                }
            };
            let (_, v) = crate::opt::golden_section_min(obj, *x, 1.0 - 1e-12, 1e-12);
            // the rate is increasing beyond the mean, so the boundary value
            // is the infimum; keep the numeric minimum if it is smaller
            let at_x = obj(*x);
            Ok(Some(RateValue::finite(v.min(at_x))))
        }
        EventSpec::WeakBall { .. } => Ok(None),
    }
}

/// Sweep configuration: the event, parameters, theta grid, and sampling
/// budget.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub event: EventSpec,
    pub alpha: f64,
    pub thetas: Vec<f64>,
    pub samples_per_theta: u64,
    pub seed: u64,
    pub workers: usize,
    /// Verdict slack factor: PASS when |fit - theory| <=
    /// (factor-1)*theory + factor*ci_halfwidth.
    pub tolerance_factor: f64,
}

impl SweepConfig {
    pub fn new(event: EventSpec, alpha: f64, thetas: Vec<f64>, samples_per_theta: u64) -> Self {
        Self {
            event,
            alpha,
            thetas,
            samples_per_theta,
            seed: 0,
            workers: 1,
            tolerance_factor: 1.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub theta: f64,
    pub samples: u64,
    pub events: u64,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// No closed-form theoretical rate for this event.
    Unavailable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub event: String,
    pub alpha: f64,
    pub seed: u64,
    pub workers: usize,
    pub tolerance_factor: f64,
    pub points: Vec<SweepPoint>,
    pub fit: FitResult,
    pub theoretical: Option<f64>,
    pub verdict: Verdict,
}

/// Estimate across the theta grid, fit the decay slope, attach the
/// theoretical rate, and emit a verdict.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    if config.thetas.is_empty() {
        return Err(Error::InsufficientData("empty theta grid".into()));
    }
    if !(config.tolerance_factor >= 1.0) {
        return Err(Error::Domain(format!(
            "tolerance factor must be >= 1, got {}",
            config.tolerance_factor
        )));
    }
    let mut points = Vec::with_capacity(config.thetas.len());
    for (i, &theta) in config.thetas.iter().enumerate() {
        let base = (i as u64) * config.samples_per_theta;
        let est = estimate_event_prob_with_base(
            &config.event,
            theta,
            config.alpha,
            config.samples_per_theta,
            config.seed,
            base,
            config.workers,
        )
        .map_err(|e| Error::Numeric(format!("theta={theta}: {e}")))?;
        points.push(SweepPoint {
            theta,
            samples: est.samples,
            events: est.events,
            estimate: est.probability,
            stderr: est.stderr,
        });
    }
    let usable: Vec<&SweepPoint> = points
        .iter()
        .filter(|p| p.events > 0 && p.estimate < 1.0)
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} grid points with events strictly between 0 and all trials",
            usable.len()
        )));
    }
    let thetas: Vec<f64> = usable.iter().map(|p| p.theta).collect();
    let log_probs: Vec<f64> = usable.iter().map(|p| p.estimate.ln()).collect();
    let se_log: Vec<f64> = usable.iter().map(|p| p.stderr / p.estimate).collect();
    let fit = fit_rate_slope(&thetas, &log_probs, &se_log)?;
    let theoretical = theoretical_event_rate(&config.event, config.alpha)?;
    let (theoretical, verdict) = match theoretical {
        Some(RateValue::Finite(t)) => {
            let slack = (config.tolerance_factor - 1.0) * t
                + config.tolerance_factor * fit.ci_halfwidth();
            let v = if (fit.rate - t).abs() <= slack {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            (Some(t), v)
        }
        _ => (None, Verdict::Unavailable),
    };
    Ok(SweepResult {
        event: config.event.describe(),
        alpha: config.alpha,
        seed: config.seed,
        workers: config.workers,
        tolerance_factor: config.tolerance_factor,
        points,
        fit,
        theoretical,
        verdict,
    })
}
