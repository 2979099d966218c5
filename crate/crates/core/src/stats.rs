//! Confidence intervals used for reported metrics.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub const Z95_TWO_SIDED: f64 = 1.959_963_984_540_054;
pub const Z95_ONE_SIDED: f64 = 1.644_853_626_951_472_2;

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_err: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_err = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, std_err, n }
    }

    /// Student-t quantile for the given upper-tail probability.
    fn t_quantile(&self, upper_tail: f64) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        StudentsT::new(0.0, 1.0, (self.n - 1) as f64)
            .map(|t| t.inverse_cdf(1.0 - upper_tail))
            .unwrap_or(f64::NAN)
    }

    /// Two-sided 95% t-interval.
    pub fn ci95(&self) -> (f64, f64) {
        let q = self.t_quantile(0.025);
        (self.mean - q * self.std_err, self.mean + q * self.std_err)
    }

    /// One-sided 95% lower confidence bound.
    pub fn lower95(&self) -> f64 {
        self.mean - self.t_quantile(0.05) * self.std_err
    }

    pub fn upper95(&self) -> f64 {
        self.mean + self.t_quantile(0.05) * self.std_err
    }
}
