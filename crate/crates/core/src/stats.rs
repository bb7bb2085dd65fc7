//! Small statistics toolkit: Wilson score intervals, normal-approximation
//! intervals for means and weighted least squares.

use serde::{Deserialize, Serialize};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A binomial proportion with its 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(successes, trials, Z95);
        let estimate = if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        };
        Self {
            successes,
            trials,
            estimate,
            ci_low,
            ci_high,
        }
    }

    /// Plug-in standard error `sqrt(p(1-p)/n)`.
    pub fn standard_error(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        (self.estimate * (1.0 - self.estimate) / self.trials as f64).sqrt()
    }
}

/// Wilson score interval for `k` successes out of `n` trials.
///
/// Returns `(0, 1)` for an empty sample.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if k as f64 == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

/// Streaming mean/variance accumulator (plain sums; merged in a fixed order
/// by the callers so results do not depend on thread scheduling).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAcc {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(mut self, other: MeanAcc) -> MeanAcc {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    pub fn standard_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.mean();
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    /// Normal-approximation interval `mean ± z·SE`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        let half = z * self.standard_error();
        (self.mean() - half, self.mean() + half)
    }
}

/// Result of a weighted straight-line fit `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Weighted root-mean-square residual.
    pub residual: f64,
}

/// Weighted least squares. Returns `None` with fewer than two points or a
/// degenerate design.
pub fn weighted_line_fit(xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<LineFit> {
    assert_eq!(xs.len(), ys.len());
    assert_eq!(xs.len(), ws.len());
    if xs.len() < 2 {
        return None;
    }
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
    }
    if sxx <= 0.0 || !sxx.is_finite() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| {
            let r = y - intercept - slope * x;
            w * r * r
        })
        .sum();
    Some(LineFit {
        slope,
        intercept,
        residual: (ss / sw).sqrt(),
    })
}

pub fn line_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    weighted_line_fit(xs, ys, &vec![1.0; xs.len()])
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
