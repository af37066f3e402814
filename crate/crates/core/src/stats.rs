//! Order-stable aggregation helpers.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().copied().collect::<CompensatedSum>().value() / values.len() as f64
}

/// Mean, unbiased variance and a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub variance: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: u64,
}

impl Summary {
    /// Two-pass summary of per-trial values.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = compensated_mean(values);
        let variance = if n > 1 {
            values
                .iter()
                .map(|x| (x - mean) * (x - mean))
                .collect::<CompensatedSum>()
                .value()
                / (n - 1) as f64
        } else {
            0.0
        };
        Self::with_std_error(mean, variance, n as u64, (variance / n.max(1) as f64).sqrt())
    }

    /// Summary of a Bernoulli proportion `successes / n`.
    pub fn proportion(successes: u64, n: u64) -> Self {
        let p = successes as f64 / n as f64;
        let variance = p * (1.0 - p);
        Self::with_std_error(p, variance, n, (variance / n as f64).sqrt())
    }

    /// An exact (non-random) quantity.
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            variance: 0.0,
            ci_lo: value,
            ci_hi: value,
            n: 1,
        }
    }

    pub fn with_std_error(mean: f64, variance: f64, n: u64, std_error: f64) -> Self {
        Self {
            mean,
            variance,
            ci_lo: mean - Z95 * std_error,
            ci_hi: mean + Z95 * std_error,
            n,
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.ci_hi - self.ci_lo) / (2.0 * Z95)
    }
}

/// Discrepancy between an estimate and a reference in standard errors.
pub fn sigmas_off(estimate: f64, reference: f64, std_error: f64) -> f64 {
    let diff = estimate - reference;
    if std_error > 0.0 {
        diff / std_error
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Unbiased sample variance (about the sample mean).
pub fn sample_variance(values: &[f64]) -> f64 {
    Summary::from_values(values).variance
}
