//! Interval estimates for simulated hit rates.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Two-sided Wilson score interval for a binomial proportion. Unlike the
/// normal approximation it stays inside [0, 1] and behaves at the
/// boundaries, which matters for near-deterministic protocols.
pub fn wilson_interval(hits: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::ConfigError(
            "cannot form an interval from zero trials".into(),
        ));
    }
    if hits > trials {
        return Err(Error::ConfigError(format!(
            "{hits} hits exceed {trials} trials"
        )));
    }
    let z = two_sided_z(confidence)?;
    let n = trials as f64;
    let p_hat = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p_hat + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt();
    // The interval contains p_hat mathematically; rounding must not break
    // that at the boundaries.
    let low = (center - half).min(p_hat).clamp(0.0, 1.0);
    let high = (center + half).max(p_hat).clamp(0.0, 1.0);
    Ok((low, high))
}

/// Standard normal quantile for a two-sided interval at `confidence`.
pub fn two_sided_z(confidence: f64) -> Result<f64> {
    if !confidence.is_finite() || !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::ConfigError(format!(
            "confidence must lie strictly between 0 and 1, got {confidence}"
        )));
    }
    let standard_normal = Normal::new(0.0, 1.0).expect("unit normal is well defined");
    Ok(standard_normal.inverse_cdf(0.5 + confidence / 2.0))
}
