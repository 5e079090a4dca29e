//! Probability measures on [0,1] and partitions of the unit interval.

use statrs::distribution::{Beta as BetaDist, ContinuousCDF};

use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, adaptive_simpson_split, QuadOpts};
use crate::rng::RandomStream;

/// Tolerance for "sums to one" checks on partition data.
pub const MASS_TOL: f64 = 1e-12;

/// A diffusive base measure with full support on [0,1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaseMeasure {
    Uniform,
    Beta { a: f64, b: f64 },
}

impl BaseMeasure {
    pub fn uniform() -> Self {
        BaseMeasure::Uniform
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(Error::Domain(format!(
                "beta base measure needs positive parameters, got ({a},{b})"
            )));
        }
        Ok(BaseMeasure::Beta { a, b })
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            BaseMeasure::Uniform => {
                if (0.0..=1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            BaseMeasure::Beta { a, b } => {
                if x <= 0.0 || x >= 1.0 {
                    return 0.0;
                }
                use statrs::function::gamma::ln_gamma;
                let ln_b = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
                ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_b).exp()
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            BaseMeasure::Uniform => x.clamp(0.0, 1.0),
            BaseMeasure::Beta { a, b } => BetaDist::new(a, b).unwrap().cdf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            BaseMeasure::Uniform => p.clamp(0.0, 1.0),
            BaseMeasure::Beta { a, b } => BetaDist::new(a, b).unwrap().inverse_cdf(p),
        }
    }

    /// nu-mass of the interval (lo, hi].
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    pub fn sample(&self, stream: &mut RandomStream) -> f64 {
        match *self {
            BaseMeasure::Uniform => stream.uniform_open(),
            BaseMeasure::Beta { a, b } => crate::dist::beta_sample(a, b, stream).unwrap(),
        }
    }
}

/// A partition 0 < t_1 < ... < t_n = 1 of [0,1], with cell A_1 = [0, t_1]
/// and A_i = (t_{i-1}, t_i], carrying the cell probabilities a_j = nu(A_j).
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSpec {
    cuts: Vec<f64>,
    probs: Vec<f64>,
}

impl PartitionSpec {
    pub fn from_cuts(cuts: &[f64], nu: &BaseMeasure) -> Result<Self> {
        if cuts.is_empty() {
            return Err(Error::Domain("partition needs at least one cell".into()));
        }
        let mut prev = 0.0;
        for &t in cuts {
            if !(t > prev && t <= 1.0) {
                return Err(Error::Domain(format!(
                    "cut points must be strictly increasing inside (0,1], got {cuts:?}"
                )));
            }
            prev = t;
        }
        if (cuts[cuts.len() - 1] - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain("last cut point must equal 1".into()));
        }
        let mut probs = Vec::with_capacity(cuts.len());
        let mut lo = 0.0;
        for &t in cuts {
            let p = nu.mass(lo, t);
            if p <= 0.0 {
                return Err(Error::Domain(format!(
                    "cell ({lo},{t}] has zero base-measure mass"
                )));
            }
            probs.push(p);
            lo = t;
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!("cell probabilities sum to {sum}")));
        }
        Ok(Self {
            cuts: cuts.to_vec(),
            probs,
        })
    }

    /// Build from explicit cell probabilities; cut points are placed at the
    /// cumulative probabilities (the uniform-base convention).
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("partition needs at least one cell".into()));
        }
        if probs.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Domain(
                "cell probabilities must all be positive (full support)".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!(
                "cell probabilities must sum to 1, got {sum}"
            )));
        }
        let mut cuts = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in probs {
            acc += p;
            cuts.push(acc);
        }
        *cuts.last_mut().unwrap() = 1.0;
        Ok(Self {
            cuts,
            probs: probs.to_vec(),
        })
    }

    /// The dyadic partition with 2^depth equal-width cells.
    pub fn dyadic(depth: u32, nu: &BaseMeasure) -> Result<Self> {
        let n = 1usize << depth;
        let cuts: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        Self::from_cuts(&cuts, nu)
    }

    pub fn n(&self) -> usize {
        self.cuts.len()
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Index of the cell containing x.
    pub fn cell_index(&self, x: f64) -> usize {
        match self
            .cuts
            .binary_search_by(|t| t.partial_cmp(&x).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.min(self.cuts.len() - 1),
        }
    }
}

/// A point of the probability simplex: nonnegative coordinates summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionVector {
    values: Vec<f64>,
}

impl PartitionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("empty partition vector".into()));
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Domain(format!(
                "partition vector entries must be nonnegative, got {values:?}"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!(
                "partition vector must sum to 1 within {MASS_TOL}, got {sum}"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A probability measure on [0,1], either by a density evaluator or by
/// piecewise cell masses.
pub enum MeasureSpec {
    Density {
        pdf: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    },
    Cells {
        cells: PartitionSpec,
        masses: PartitionVector,
    },
}

impl MeasureSpec {
    /// Wrap a density evaluator; the total mass is checked to 1e-10.
    pub fn from_density<F>(pdf: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let opts = QuadOpts {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_depth: 55,
        };
        let total = adaptive_simpson_split(
            &pdf,
            &[0.0, 1e-9, 1e-6, 1e-3, 0.5, 1.0 - 1e-3, 1.0 - 1e-6, 1.0],
            opts,
        );
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!(
                "density is not a probability measure on [0,1]: total mass {total}"
            )));
        }
        Ok(MeasureSpec::Density { pdf: Box::new(pdf) })
    }

    pub fn from_base(base: BaseMeasure) -> Self {
        MeasureSpec::Density {
            pdf: Box::new(move |x| base.density(x)),
        }
    }

    pub fn from_cells(cells: PartitionSpec, masses: PartitionVector) -> Result<Self> {
        if cells.n() != masses.len() {
            return Err(Error::Domain(format!(
                "cell count {} does not match mass count {}",
                cells.n(),
                masses.len()
            )));
        }
        Ok(MeasureSpec::Cells { cells, masses })
    }

    /// Density of the measure at x (piecewise-constant for cell-based specs).
    pub fn density(&self, x: f64) -> f64 {
        match self {
            MeasureSpec::Density { pdf } => pdf(x),
            MeasureSpec::Cells { cells, masses } => {
                if !(0.0..=1.0).contains(&x) {
                    return 0.0;
                }
                let i = cells.cell_index(x);
                let lo = if i == 0 { 0.0 } else { cells.cuts()[i - 1] };
                let w = cells.cuts()[i] - lo;
                masses.values()[i] / w
            }
        }
    }

    /// Mass of the interval (lo, hi].
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        match self {
            MeasureSpec::Density { pdf } => {
                let opts = QuadOpts {
                    abs_tol: 1e-13,
                    rel_tol: 1e-11,
                    max_depth: 45,
                };
                adaptive_simpson(pdf, lo, hi, opts)
            }
            MeasureSpec::Cells { cells, masses } => {
                // proportional overlap: mass spreads uniformly inside a cell
                let mut total = 0.0;
                let mut cell_lo = 0.0;
                for (i, &cut) in cells.cuts().iter().enumerate() {
                    let a = lo.max(cell_lo);
                    let b = hi.min(cut);
                    if b > a {
                        total += masses.values()[i] * (b - a) / (cut - cell_lo);
                    }
                    cell_lo = cut;
                }
                total
            }
        }
    }

    /// Masses of the cells of a partition given by cut points.
    pub fn masses_on(&self, cuts: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(cuts.len());
        let mut lo = 0.0;
        for &t in cuts {
            out.push(self.mass(lo, t));
            lo = t;
        }
        out
    }
}
