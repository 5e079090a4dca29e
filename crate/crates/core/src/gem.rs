//! Stick-breaking construction of the two-parameter GEM distribution,
//! ranked top-k extraction, size-biased permutation, and cell assignment
//! for the Dirichlet-process route.
//!
//! Stick k is broken off with fraction U_k ~ Beta(1-alpha, theta + k*alpha):
//! X_1 = U_1, X_k = (1-U_1)...(1-U_{k-1}) U_k. The residual mass after N
//! sticks is prod (1-U_i), tracked in closed form along the path.

use crate::dist::beta_sample;
use crate::error::{Error, Result};
use crate::measure::{PartitionSpec, PartitionVector};
use crate::rng::RandomStream;

/// Safety cap on the number of sticks broken per path.
const MAX_STICKS: usize = 20_000_000;

/// When to stop breaking sticks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    /// Exactly this many sticks.
    FixedCount(usize),
    /// Stop once the residual mass drops below the tolerance.
    ResidualBelow(f64),
    /// Stop once the residual is below the current largest stick, so the
    /// largest stick is final (rank-exact).
    RankExact,
    /// Stop once the residual is below the current k-th largest stick, so
    /// the top-k prefix is final (top-k-exact).
    TopKExact(usize),
}

/// A finite prefix of GEM stick weights plus the exact residual mass.
#[derive(Clone, Debug)]
pub struct GemSample {
    theta: f64,
    alpha: f64,
    sticks: Vec<f64>,
    residual: f64,
}

impl GemSample {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sticks(&self) -> &[f64] {
        &self.sticks
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Continue breaking sticks on the same path until `stop` is satisfied
    /// (relative to the whole path, e.g. `FixedCount` counts all sticks).
    pub fn extend(&mut self, stop: StopRule, stream: &mut RandomStream) -> Result<()> {
        validate_stop(&stop)?;
        let mut top = TopTracker::for_rule(&stop, &self.sticks);
        while !stop_reached(&stop, &self.sticks, self.residual, &top) {
            if self.sticks.len() >= MAX_STICKS {
                return Err(Error::Accuracy(format!(
                    "stopping rule {stop:?} not reached after {MAX_STICKS} sticks \
                     (residual {:.3e})",
                    self.residual
                )));
            }
            let k = self.sticks.len() + 1;
            let u = beta_sample(1.0 - self.alpha, self.theta + k as f64 * self.alpha, stream)?;
            let stick = self.residual * u;
            self.sticks.push(stick);
            self.residual *= 1.0 - u;
            top.observe(stick);
        }
        Ok(())
    }
}

fn validate_stop(stop: &StopRule) -> Result<()> {
    match stop {
        StopRule::ResidualBelow(eps) if !(*eps > 0.0) => Err(Error::Domain(format!(
            "residual tolerance must be positive, got {eps}"
        ))),
        StopRule::TopKExact(0) => Err(Error::Domain("top-k stopping needs k >= 1".into())),
        _ => Ok(()),
    }
}

/// Running top-k view of the sticks seen so far (descending, length <= k).
pub(crate) struct TopTracker {
    k: usize,
    top: Vec<f64>,
}

impl TopTracker {
    pub(crate) fn new(k: usize) -> Self {
        Self { k, top: Vec::new() }
    }

    fn for_rule(stop: &StopRule, existing: &[f64]) -> Self {
        let k = match stop {
            StopRule::RankExact => 1,
            StopRule::TopKExact(k) => *k,
            _ => 0,
        };
        let mut t = Self::new(k);
        if k > 0 {
            for &s in existing {
                t.observe(s);
            }
        }
        t
    }

    pub(crate) fn observe(&mut self, stick: f64) {
        if self.k == 0 {
            return;
        }
        if self.top.len() < self.k || stick > *self.top.last().unwrap() {
            let pos = self
                .top
                .partition_point(|&s| s >= stick);
            self.top.insert(pos, stick);
            self.top.truncate(self.k);
        }
    }

    fn kth(&self) -> Option<f64> {
        if self.top.len() == self.k {
            self.top.last().copied()
        } else {
            None
        }
    }

    pub(crate) fn sum(&self) -> f64 {
        self.top.iter().sum()
    }

    pub(crate) fn is_full(&self) -> bool {
        self.top.len() == self.k
    }
}

fn stop_reached(stop: &StopRule, sticks: &[f64], residual: f64, top: &TopTracker) -> bool {
    match stop {
        StopRule::FixedCount(n) => sticks.len() >= *n,
        StopRule::ResidualBelow(eps) => residual < *eps,
        StopRule::RankExact | StopRule::TopKExact(_) => match top.kth() {
            Some(t) => residual < t,
            None => false,
        },
    }
}

/// Draw a GEM(theta, alpha) prefix under the given stopping rule.
pub fn sample_gem(
    theta: f64,
    alpha: f64,
    stop: StopRule,
    stream: &mut RandomStream,
) -> Result<GemSample> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::Domain(format!("theta must be positive, got {theta}")));
    }
    if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
        return Err(Error::Domain(format!("alpha must lie in [0,1), got {alpha}")));
    }
    let mut sample = GemSample {
        theta,
        alpha,
        sticks: Vec::new(),
        residual: 1.0,
    };
    sample.extend(stop, stream)?;
    Ok(sample)
}

/// The k largest sticks of a sample in descending order.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedPrefix {
    masses: Vec<f64>,
    exact: bool,
    k: usize,
}

impl RankedPrefix {
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// True when no unseen stick can displace this prefix (the residual is
    /// strictly below the k-th largest seen stick).
    pub fn exact(&self) -> bool {
        self.exact
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Extract the k largest sticks, flagging whether they are final.
/// Never fails: when fewer than k sticks exist (or the residual is too
/// large) the prefix simply comes back with `exact = false`.
pub fn rank_prefix(sample: &GemSample, k: usize) -> RankedPrefix {
    let mut sorted = sample.sticks().to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    sorted.truncate(k);
    let exact = sorted.len() == k && k >= 1 && sample.residual() < sorted[k - 1];
    RankedPrefix {
        masses: sorted,
        exact,
        k,
    }
}

/// Size-biased permutation of an exact ranked prefix: sequential draws
/// without replacement, selection probability proportional to mass.
///
/// Refuses when the unseen residual exceeds `residual_tol`, since missing
/// mass biases every selection step.
pub fn size_biased_permute(
    prefix: &RankedPrefix,
    residual: f64,
    residual_tol: f64,
    stream: &mut RandomStream,
) -> Result<Vec<f64>> {
    if residual > residual_tol {
        return Err(Error::Accuracy(format!(
            "residual {residual:.3e} exceeds the size-biasing tolerance {residual_tol:.3e}"
        )));
    }
    let mut pool = prefix.masses().to_vec();
    let mut out = Vec::with_capacity(pool.len());
    while !pool.is_empty() {
        let total: f64 = pool.iter().sum();
        let mut target = stream.uniform_open() * total;
        let mut idx = pool.len() - 1;
        for (i, &m) in pool.iter().enumerate() {
            if target < m {
                idx = i;
                break;
            }
            target -= m;
        }
        out.push(pool.remove(idx));
    }
    Ok(out)
}

/// Total stick mass landing in each cell when atom locations are drawn
/// i.i.d. from the partition's base measure. Atom positions are never
/// materialized; each stick picks cell i with probability a_i. The whole
/// residual is assigned to one drawn cell, which biases cell masses by at
/// most the residual, so the call refuses above `residual_tol`.
pub fn assign_to_partition(
    sample: &GemSample,
    cells: &PartitionSpec,
    residual_tol: f64,
    stream: &mut RandomStream,
) -> Result<PartitionVector> {
    if sample.residual() > residual_tol {
        return Err(Error::Accuracy(format!(
            "residual {:.3e} exceeds the assignment tolerance {residual_tol:.3e}",
            sample.residual()
        )));
    }
    let probs = cells.probs();
    let mut cum = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p;
        cum.push(acc);
    }
    let draw_cell = |u: f64, cum: &[f64]| -> usize {
        match cum.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
            Ok(i) => i,
            Err(i) => i.min(cum.len() - 1),
        }
    };
    let mut masses = vec![0.0; probs.len()];
    for &stick in sample.sticks() {
        let i = draw_cell(stream.uniform_open(), &cum);
        masses[i] += stick;
    }
    let i = draw_cell(stream.uniform_open(), &cum);
    masses[i] += sample.residual();
    PartitionVector::new(masses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_critical, ks_statistic, mean, stderr_of_mean};

    #[test]
    fn rejects_bad_parameters() {
        let mut s = RandomStream::new(0, 0);
        assert!(sample_gem(0.0, 0.5, StopRule::FixedCount(1), &mut s).is_err());
        assert!(sample_gem(1.0, 1.0, StopRule::FixedCount(1), &mut s).is_err());
        assert!(sample_gem(1.0, -0.1, StopRule::FixedCount(1), &mut s).is_err());
        assert!(sample_gem(1.0, 0.5, StopRule::ResidualBelow(0.0), &mut s).is_err());
        assert!(sample_gem(1.0, 0.5, StopRule::TopKExact(0), &mut s).is_err());
    }

    #[test]
    fn mass_conservation_along_paths() {
        let mut s = RandomStream::new(1, 0);
        for i in 0..200 {
            let theta = 0.5 + (i % 7) as f64;
            let alpha = (i % 5) as f64 * 0.2; // 0, 0.2, ..., 0.8
            let g = sample_gem(theta, alpha, StopRule::FixedCount(200), &mut s).unwrap();
            let total: f64 = g.sticks().iter().sum::<f64>() + g.residual();
            assert!((total - 1.0).abs() < 1e-12, "total {total}");
        }
    }

    #[test]
    fn residual_mean_alpha_zero() {
        // E[residual after N sticks] = (theta/(theta+1))^N at alpha = 0
        let (theta, n_sticks, paths) = (2.0, 10, 100_000);
        let mut s = RandomStream::new(2, 0);
        let xs: Vec<f64> = (0..paths)
            .map(|_| {
                sample_gem(theta, 0.0, StopRule::FixedCount(n_sticks), &mut s)
                    .unwrap()
                    .residual()
            })
            .collect();
        let want = (theta / (theta + 1.0)).powi(n_sticks as i32);
        assert!((mean(&xs) - want).abs() < 4.0 * stderr_of_mean(&xs));
    }

    #[test]
    fn residual_mean_two_parameter() {
        // E[residual after N] = prod_i (theta+i alpha)/(1-alpha+theta+i alpha)
        let (theta, alpha, n_sticks, paths) = (2.0, 0.5, 10, 100_000);
        let mut s = RandomStream::new(3, 0);
        let xs: Vec<f64> = (0..paths)
            .map(|_| {
                sample_gem(theta, alpha, StopRule::FixedCount(n_sticks), &mut s)
                    .unwrap()
                    .residual()
            })
            .collect();
        let want: f64 = (1..=n_sticks)
            .map(|i| (2.0 + 0.5 * i as f64) / (2.5 + 0.5 * i as f64))
            .product();
        assert!((mean(&xs) - want).abs() < 4.0 * stderr_of_mean(&xs));
    }

    #[test]
    fn first_stick_is_beta_distributed() {
        let (theta, alpha, n) = (2.0, 0.5, 10_000);
        let mut s = RandomStream::new(4, 0);
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_gem(theta, alpha, StopRule::FixedCount(1), &mut s).unwrap().sticks()[0])
            .collect();
        let ys: Vec<f64> = (0..n)
            .map(|_| beta_sample(1.0 - alpha, theta + alpha, &mut s).unwrap())
            .collect();
        let d = ks_statistic(&xs, &ys);
        assert!(d < ks_critical(n, n, 0.001), "KS {d}");
    }

    #[test]
    fn alpha_zero_first_stick_mean() {
        let theta = 3.0;
        let mut s = RandomStream::new(5, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_gem(theta, 0.0, StopRule::FixedCount(1), &mut s).unwrap().sticks()[0])
            .collect();
        // Beta(1, theta) mean
        assert!((mean(&xs) - 1.0 / (1.0 + theta)).abs() < 4.0 * stderr_of_mean(&xs));
    }

    #[test]
    fn rank_prefix_sorting_and_exactness() {
        let g = GemSample {
            theta: 1.0,
            alpha: 0.0,
            sticks: vec![0.2, 0.5, 0.1],
            residual: 0.2,
        };
        let p1 = rank_prefix(&g, 1);
        assert_eq!(p1.masses(), &[0.5]);
        assert!(p1.exact());
        let p3 = rank_prefix(&g, 3);
        assert_eq!(p3.masses(), &[0.5, 0.2, 0.1]);
        assert!(!p3.exact()); // residual 0.2 >= 0.1
        let p4 = rank_prefix(&g, 4);
        assert_eq!(p4.masses().len(), 3);
        assert!(!p4.exact());
    }

    #[test]
    fn exact_prefix_invariant_under_continuation() {
        let mut s = RandomStream::new(6, 0);
        for _ in 0..100 {
            let mut g = sample_gem(1.5, 0.4, StopRule::TopKExact(3), &mut s).unwrap();
            let before = rank_prefix(&g, 3);
            assert!(before.exact());
            let n = g.sticks().len();
            g.extend(StopRule::FixedCount(n + 50), &mut s).unwrap();
            let after = rank_prefix(&g, 3);
            assert_eq!(before.masses(), after.masses());
        }
    }

    #[test]
    fn rank_exact_stopping_fixes_the_top_stick() {
        let mut s = RandomStream::new(7, 0);
        for _ in 0..100 {
            let g = sample_gem(2.0, 0.5, StopRule::RankExact, &mut s).unwrap();
            let p = rank_prefix(&g, 1);
            assert!(p.exact());
            assert!(g.residual() < p.masses()[0]);
        }
    }

    #[test]
    fn size_biased_singleton() {
        let prefix = RankedPrefix {
            masses: vec![1.0],
            exact: true,
            k: 1,
        };
        let mut s = RandomStream::new(8, 0);
        let out = size_biased_permute(&prefix, 0.0, 1e-3, &mut s).unwrap();
        assert_eq!(out, vec![1.0]);
    }

    #[test]
    fn size_biased_refuses_inexact_prefix() {
        let prefix = RankedPrefix {
            masses: vec![0.5, 0.3],
            exact: false,
            k: 2,
        };
        let mut s = RandomStream::new(8, 1);
        assert!(matches!(
            size_biased_permute(&prefix, 0.2, 1e-3, &mut s),
            Err(Error::Accuracy(_))
        ));
    }

    #[test]
    fn size_biased_first_pick_probability() {
        let prefix = RankedPrefix {
            masses: vec![0.5, 0.3, 0.2],
            exact: true,
            k: 3,
        };
        let mut s = RandomStream::new(9, 0);
        let n = 100_000;
        let hits: Vec<f64> = (0..n)
            .map(|_| {
                let out = size_biased_permute(&prefix, 0.0, 1e-3, &mut s).unwrap();
                if out[0] == 0.5 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        assert!((mean(&hits) - 0.5).abs() < 4.0 * stderr_of_mean(&hits));
    }

    #[test]
    fn size_biased_first_pick_matches_stick_law() {
        // First size-biased pick from a PD(theta,alpha) draw ~ Beta(1-a, th+a)
        let (theta, alpha, n) = (2.0, 0.5, 10_000);
        let mut s = RandomStream::new(10, 0);
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let g = sample_gem(theta, alpha, StopRule::ResidualBelow(1e-3), &mut s).unwrap();
                let p = rank_prefix(&g, g.sticks().len());
                size_biased_permute(&p, g.residual(), 1e-3, &mut s).unwrap()[0]
            })
            .collect();
        let ys: Vec<f64> = (0..n)
            .map(|_| beta_sample(1.0 - alpha, theta + alpha, &mut s).unwrap())
            .collect();
        let d = ks_statistic(&xs, &ys);
        assert!(d < ks_critical(n, n, 0.001), "KS {d}");
    }

    #[test]
    fn assign_single_cell_is_total_mass() {
        let nu = crate::measure::BaseMeasure::uniform();
        let cells = PartitionSpec::from_cuts(&[1.0], &nu).unwrap();
        let mut s = RandomStream::new(11, 0);
        let g = sample_gem(2.0, 0.5, StopRule::ResidualBelow(1e-5), &mut s).unwrap();
        let v = assign_to_partition(&g, &cells, 1e-4, &mut s).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v.values()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn assign_refuses_large_residual() {
        let nu = crate::measure::BaseMeasure::uniform();
        let cells = PartitionSpec::from_cuts(&[0.5, 1.0], &nu).unwrap();
        let mut s = RandomStream::new(11, 1);
        let g = sample_gem(2.0, 0.5, StopRule::FixedCount(3), &mut s).unwrap();
        assert!(matches!(
            assign_to_partition(&g, &cells, 1e-4, &mut s),
            Err(Error::Accuracy(_))
        ));
    }

    #[test]
    fn assigned_cell_masses_have_base_measure_means() {
        let nu = crate::measure::BaseMeasure::uniform();
        let cells = PartitionSpec::from_cuts(&[0.5, 1.0], &nu).unwrap();
        let mut s = RandomStream::new(12, 0);
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let g = sample_gem(2.0, 0.5, StopRule::ResidualBelow(1e-4), &mut s).unwrap();
                assign_to_partition(&g, &cells, 1e-4, &mut s).unwrap().values()[0]
            })
            .collect();
        assert!((mean(&xs) - 0.5).abs() < 4.0 * stderr_of_mean(&xs));
    }
}
