//! Beta and gamma variates on explicit random streams.

use rand_distr::{Beta, Distribution, Gamma};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// One draw from Beta(a, b).
pub fn beta_sample(a: f64, b: f64, stream: &mut RandomStream) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!(
            "beta parameters must be positive, got a={a}, b={b}"
        )));
    }
    let d = Beta::new(a, b).map_err(|e| Error::Domain(format!("beta({a},{b}): {e}")))?;
    Ok(d.sample(stream))
}

/// One draw from Gamma(shape) at unit rate.
pub fn gamma_sample(shape: f64, stream: &mut RandomStream) -> Result<f64> {
    if !(shape.is_finite() && shape > 0.0) {
        return Err(Error::Domain(format!(
            "gamma shape must be positive, got {shape}"
        )));
    }
    let d = Gamma::new(shape, 1.0).map_err(|e| Error::Domain(format!("gamma({shape}): {e}")))?;
    Ok(d.sample(stream))
}
