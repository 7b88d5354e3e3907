//! Small statistics helpers shared by the experiment harnesses: seed
//! derivation, summary statistics, a paired t-test, and binomial
//! confidence intervals.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Derives an independent sub-stream seed from a base seed and a salt.
///
/// splitmix64 finalizer over `base ^ (salt * odd constant)`; cheap, and
/// distinct salts give uncorrelated streams for ChaCha-style generators.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n − 1 denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(x)
}

/// Two-sided standard-normal quantile for the given confidence level,
/// e.g. 0.99 -> z with P(|Z| <= z) = 0.99.
pub fn two_sided_z(confidence: f64) -> f64 {
    let tail = (1.0 - confidence) / 2.0;
    Normal::new(0.0, 1.0)
        .expect("unit normal")
        .inverse_cdf(1.0 - tail)
}

/// Normal-approximation half-width of a binomial proportion CI.
pub fn binomial_ci_halfwidth(p_hat: f64, trials: u64, confidence: f64) -> f64 {
    let n = trials as f64;
    two_sided_z(confidence) * (p_hat * (1.0 - p_hat) / n).sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct PairedTTest {
    pub mean_diff: f64,
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Paired two-sided t-test on matched samples `a` and `b` (diff = a − b).
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "paired t-test needs at least 2 pairs".into(),
        ));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = mean(&diffs);
    let var = sample_variance(&diffs);
    let n = diffs.len() as f64;
    let dof = n - 1.0;
    if var == 0.0 {
        // Degenerate: identical pairwise differences everywhere.
        let p = if m == 0.0 { 1.0 } else { 0.0 };
        return Ok(PairedTTest {
            mean_diff: m,
            t_statistic: if m == 0.0 { 0.0 } else { f64::INFINITY },
            degrees_of_freedom: dof,
            p_value: p,
        });
    }
    let t = m / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidArgument(format!("t distribution: {e}")))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(PairedTTest {
        mean_diff: m,
        t_statistic: t,
        degrees_of_freedom: dof,
        p_value: p.clamp(0.0, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_changes_with_salt() {
        let s0 = derive_seed(7, 0);
        let s1 = derive_seed(7, 1);
        assert_ne!(s0, s1);
        assert_eq!(s0, derive_seed(7, 0));
    }

    #[test]
    fn mean_and_variance() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((sample_variance(&xs) - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn z_99_matches_table() {
        assert!((two_sided_z(0.99) - 2.5758).abs() < 1e-3);
    }

    #[test]
    fn paired_t_detects_shift() {
        let a: Vec<f64> = (0..30).map(|i| 1.0 + 0.01 * (i % 5) as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| 0.5 + 0.01 * ((i + 2) % 5) as f64).collect();
        let r = paired_t_test(&a, &b).unwrap();
        assert!(r.mean_diff > 0.4);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn paired_t_symmetric_null() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = paired_t_test(&a, &a).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn paired_t_rejects_short_input() {
        assert!(paired_t_test(&[1.0], &[2.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[1.0]).is_err());
    }
}
