//! Finite-dimensional Dirichlet-process marginals through the subordinator
//! representation: (Xi(A_1),...,Xi(A_n)) has the law of the normalized
//! increments of Y(t) = sigma(gamma(alpha,theta) t), where sigma is the
//! tempered stable subordinator (Levy density x^{-(1+alpha)}e^{-x}) and
//! gamma(alpha,theta) = alpha * tau(theta/alpha) / Gamma(1-alpha) for an
//! independent gamma subordinator tau.

use statrs::function::gamma::gamma;

use crate::dist::gamma_sample;
use crate::error::{Error, Result};
use crate::measure::{PartitionSpec, PartitionVector};
use crate::rng::RandomStream;
use crate::stable::{tilted_stable_increment, StableSpec};

/// One draw of the random time gamma(alpha, theta) = alpha*tau(theta/alpha)/Gamma(1-alpha).
pub fn gamma_time(theta: f64, alpha: f64, stream: &mut RandomStream) -> Result<f64> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::Domain(format!("theta must be positive, got {theta}")));
    }
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "the subordinator route needs alpha in (0,1), got {alpha} \
             (the one-parameter case is the stick-breaking route's job)"
        )));
    }
    Ok(alpha * gamma_sample(theta / alpha, stream)? / gamma(1.0 - alpha))
}

/// The normalization map F: increments to a point of the simplex.
pub fn normalize_mass(increments: &[f64]) -> Result<PartitionVector> {
    if increments.iter().any(|&y| !(y >= 0.0) || !y.is_finite()) {
        return Err(Error::Domain(format!(
            "increments must be nonnegative and finite, got {increments:?}"
        )));
    }
    let total: f64 = increments.iter().sum();
    if total <= 0.0 {
        return Err(Error::Numeric("total increment mass is zero".into()));
    }
    PartitionVector::new(increments.iter().map(|y| y / total).collect())
}

/// A partition draw plus the resample diagnostic counter.
#[derive(Clone, Debug, PartialEq)]
pub struct SubordinatorDraw {
    pub vector: PartitionVector,
    /// Number of whole-replicate resamples forced by total-mass underflow.
    pub resamples: u32,
}

const MAX_RESAMPLES: u32 = 100;

/// Draw (Xi(A_1),...,Xi(A_n)) via the subordinator representation: one
/// gamma time G per replicate, then independent tempered-stable increments
/// over durations G*a_j, normalized by their total.
pub fn sample_partition_via_subordinator(
    theta: f64,
    alpha: f64,
    cells: &PartitionSpec,
    stream: &mut RandomStream,
) -> Result<SubordinatorDraw> {
    let spec = StableSpec::tempered(alpha)?;
    let mut resamples = 0;
    loop {
        let g = gamma_time(theta, alpha, stream)?;
        let mut increments = Vec::with_capacity(cells.n());
        let mut ok = g > 0.0;
        if ok {
            for &a in cells.probs() {
                increments.push(tilted_stable_increment(&spec, g * a, stream)?);
            }
        }
        if ok {
            match normalize_mass(&increments) {
                Ok(vector) => return Ok(SubordinatorDraw { vector, resamples }),
                Err(Error::Numeric(_)) => ok = false,
                Err(e) => return Err(e),
            }
        }
        if !ok {
            resamples += 1;
            if resamples > MAX_RESAMPLES {
                return Err(Error::Numeric(format!(
                    "partition draw kept underflowing after {MAX_RESAMPLES} resamples \
                     (theta={theta}, alpha={alpha})"
                )));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::BaseMeasure;
    use crate::stats::{ks_critical, ks_statistic, mean, stderr_of_mean};
    use std::f64::consts::PI;

    #[test]
    fn gamma_time_mean() {
        // E[gamma(a,th)] = theta / Gamma(1-alpha); at theta=2, alpha=0.5
        // this is 2/sqrt(pi) = 1.1284
        let mut s = RandomStream::new(40, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| gamma_time(2.0, 0.5, &mut s).unwrap())
            .collect();
        let want = 2.0 / PI.sqrt();
        assert!((want - 1.1283792).abs() < 1e-6);
        assert!((mean(&xs) - want).abs() < 4.0 * stderr_of_mean(&xs));
    }

    #[test]
    fn gamma_time_exponential_case() {
        // theta/alpha = 1: exponential with mean alpha/Gamma(1-alpha) = 0.2821
        let mut s = RandomStream::new(41, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| gamma_time(0.5, 0.5, &mut s).unwrap())
            .collect();
        let want = 0.5 / PI.sqrt();
        assert!((want - 0.2820948).abs() < 1e-6);
        assert!((mean(&xs) - want).abs() < 4.0 * stderr_of_mean(&xs));
    }

    #[test]
    fn gamma_time_is_scaled_gamma() {
        // draws for (theta, alpha) match shape theta/alpha draws scaled by
        // alpha/Gamma(1-alpha)
        let (theta, alpha, n) = (1.5, 0.4, 10_000);
        let mut s = RandomStream::new(42, 0);
        let xs: Vec<f64> = (0..n)
            .map(|_| gamma_time(theta, alpha, &mut s).unwrap())
            .collect();
        let c = alpha / gamma(1.0 - alpha);
        let ys: Vec<f64> = (0..n)
            .map(|_| c * gamma_sample(theta / alpha, &mut s).unwrap())
            .collect();
        let d = ks_statistic(&xs, &ys);
        assert!(d < ks_critical(n, n, 0.001), "KS {d}");
    }

    #[test]
    fn gamma_time_rejects_alpha_zero() {
        let mut s = RandomStream::new(43, 0);
        assert!(gamma_time(1.0, 0.0, &mut s).is_err());
        assert!(gamma_time(0.0, 0.5, &mut s).is_err());
    }

    #[test]
    fn normalize_is_scale_invariant() {
        let incs = [0.3, 1.7, 0.01, 5.0];
        let a = normalize_mass(&incs).unwrap();
        let scaled: Vec<f64> = incs.iter().map(|y| y * 17.5).collect();
        let b = normalize_mass(&scaled).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn normalize_rejects_zero_mass() {
        assert!(matches!(
            normalize_mass(&[0.0, 0.0]),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn single_cell_draw_is_one() {
        let nu = BaseMeasure::uniform();
        let cells = PartitionSpec::from_cuts(&[1.0], &nu).unwrap();
        let mut s = RandomStream::new(44, 0);
        for _ in 0..50 {
            let d = sample_partition_via_subordinator(2.0, 0.5, &cells, &mut s).unwrap();
            assert_eq!(d.vector.values(), &[1.0]);
        }
    }

    #[test]
    fn draws_sum_to_one() {
        let nu = BaseMeasure::uniform();
        let cells = PartitionSpec::from_cuts(&[0.2, 0.7, 1.0], &nu).unwrap();
        let mut s = RandomStream::new(45, 0);
        for _ in 0..200 {
            let d = sample_partition_via_subordinator(1.0, 0.3, &cells, &mut s).unwrap();
            let sum: f64 = d.vector.values().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coordinate_means_match_cell_probabilities() {
        let nu = BaseMeasure::uniform();
        let cells = PartitionSpec::from_cuts(&[0.25, 1.0], &nu).unwrap();
        let mut s = RandomStream::new(46, 0);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| {
                sample_partition_via_subordinator(2.0, 0.5, &cells, &mut s)
                    .unwrap()
                    .vector
                    .values()[0]
            })
            .collect();
        assert!((mean(&xs) - 0.25).abs() < 4.0 * stderr_of_mean(&xs));
    }

    #[test]
    fn equal_cells_are_exchangeable() {
        // permuting equal-probability cells leaves the law of the sorted
        // coordinate vector invariant; compare max coordinates across two
        // independent runs
        let nu = BaseMeasure::uniform();
        let cells = PartitionSpec::from_cuts(&[1.0 / 3.0, 2.0 / 3.0, 1.0], &nu).unwrap();
        let n = 5_000;
        let mut s1 = RandomStream::new(47, 0);
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let v = sample_partition_via_subordinator(1.5, 0.4, &cells, &mut s1).unwrap();
                v.vector.values().iter().cloned().fold(0.0, f64::max)
            })
            .collect();
        let mut s2 = RandomStream::new(47, 1);
        let ys: Vec<f64> = (0..n)
            .map(|_| {
                let v = sample_partition_via_subordinator(1.5, 0.4, &cells, &mut s2).unwrap();
                // read coordinates in permuted order before sorting
                let w = v.vector.values();
                [w[2], w[0], w[1]].iter().cloned().fold(0.0, f64::max)
            })
            .collect();
        let d = ks_statistic(&xs, &ys);
        assert!(d < ks_critical(n, n, 0.001), "KS {d}");
    }
}
