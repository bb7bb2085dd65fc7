//! Monte Carlo estimators for success probabilities, spatial suboptimality,
//! the step-size thresholds `ξ_p` / `η_p` and success-rate decay exponents.
//!
//! Sampling is split into fixed-size chunks; chunk `i` draws from substream
//! `i` of the caller's seed and chunk results are folded in index order, so
//! every estimate is a pure function of its inputs and seed regardless of the
//! size of the thread pool.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{check_dimension, norm, BoundingBox, Fitness};
use crate::rng::{self, Stream};
use crate::stats::{weighted_line_fit, wilson_interval, Proportion, Z95};

pub(crate) const CHUNK: u64 = 1 << 14;

/// Run `work(rng, count)` over `n` samples split into chunks, in parallel,
/// returning per-chunk results in chunk order.
pub(crate) fn chunked<T, F>(n: u64, seed: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Stream, u64) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|i| {
            let count = CHUNK.min(n - i * CHUNK);
            let mut rng = rng::substream(seed, i);
            work(&mut rng, count)
        })
        .collect()
}

/// Fill `x` with a draw from `N(m, σ² I)`.
#[inline]
pub(crate) fn gaussian_into(m: &[f64], sigma: f64, rng: &mut Stream, x: &mut [f64]) {
    for (xi, mi) in x.iter_mut().zip(m) {
        let z: f64 = rng.sample(StandardNormal);
        *xi = mi + sigma * z;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessMode {
    /// `f(x) < f(m)`
    Strict,
    /// `f(x) <= f(m)`
    Weak,
}

/// A Monte Carlo point estimate with its 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub estimate: f64,
    pub ci_halfwidth: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// Raw success count for proportion estimates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub successes: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl EstimationResult {
    fn from_proportion(k: u64, n: u64, seed: u64, scale: f64) -> Self {
        let p = Proportion::new(k, n);
        Self {
            estimate: scale * p.estimate,
            ci_halfwidth: scale * (p.ci_high - p.ci_low) / 2.0,
            ci_low: scale * p.ci_low,
            ci_high: scale * p.ci_high,
            n_samples: n,
            seed,
            successes: Some(k),
            warnings: Vec::new(),
        }
    }

    pub fn proportion(&self) -> Option<Proportion> {
        self.successes.map(|k| Proportion::new(k, self.n_samples))
    }

    /// Plug-in standard error of a proportion estimate.
    pub fn standard_error(&self) -> f64 {
        match self.proportion() {
            Some(p) => p.standard_error(),
            None => self.ci_halfwidth / Z95,
        }
    }
}

/// Strict and weak success counts from one shared sample of `n` offspring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuccessCounts {
    pub strict: u64,
    pub weak: u64,
    pub n: u64,
}

pub fn success_counts(
    m: &[f64],
    sigma: f64,
    f: &impl Fitness,
    n: u64,
    seed: u64,
) -> Result<SuccessCounts> {
    check_dimension(f, m)?;
    check_sigma(sigma)?;
    let f_m = f.evaluate(m);
    let parts = chunked(n, seed, |rng, count| {
        let mut x = vec![0.0; m.len()];
        let (mut strict, mut weak) = (0u64, 0u64);
        for _ in 0..count {
            gaussian_into(m, sigma, rng, &mut x);
            let y = f.evaluate(&x);
            strict += (y < f_m) as u64;
            weak += (y <= f_m) as u64;
        }
        (strict, weak)
    });
    let (strict, weak) = parts
        .into_iter()
        .fold((0, 0), |(a, b), (s, w)| (a + s, b + w));
    Ok(SuccessCounts { strict, weak, n })
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "sigma must be positive and finite, got {sigma}"
        )))
    }
}

/// Fraction of `N(m, σ² I)` offspring that improve on `m`, with a Wilson
/// interval.
pub fn estimate_success_prob(
    m: &[f64],
    sigma: f64,
    f: &impl Fitness,
    n: u64,
    mode: SuccessMode,
    seed: u64,
) -> Result<EstimationResult> {
    if n < 100 {
        return Err(Error::InvalidParameter(format!(
            "success estimates need n >= 100, got {n}"
        )));
    }
    let c = success_counts(m, sigma, f, n, seed)?;
    let k = match mode {
        SuccessMode::Strict => c.strict,
        SuccessMode::Weak => c.weak,
    };
    Ok(EstimationResult::from_proportion(k, n, seed, 1.0))
}

/// Hit-or-miss estimate of `Λ({y ∈ box : f(y) < f(x)})` (strict) or with
/// `<=` (weak).
///
/// Adds a warning when hits occur in the outer 1% shell of the box, which
/// suggests the sub-level set is clipped and the volume under-estimated.
pub fn estimate_suboptimality(
    x: &[f64],
    f: &impl Fitness,
    bbox: &BoundingBox,
    n: u64,
    mode: SuccessMode,
    seed: u64,
) -> Result<EstimationResult> {
    check_dimension(f, x)?;
    if bbox.dimension() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: bbox.dimension(),
        });
    }
    if n < 1000 {
        return Err(Error::InvalidParameter(format!(
            "suboptimality estimates need n >= 1000, got {n}"
        )));
    }
    let f_x = f.evaluate(x);
    let parts = chunked(n, seed, |rng, count| {
        let mut y = vec![0.0; x.len()];
        let (mut hits, mut edge) = (0u64, false);
        for _ in 0..count {
            let mut near_edge = false;
            for (i, yi) in y.iter_mut().enumerate() {
                let (lo, hi) = (bbox.lo[i], bbox.hi[i]);
                let u: f64 = rng.random();
                *yi = lo + (hi - lo) * u;
                near_edge |= !(0.01..=0.99).contains(&u);
            }
            let v = f.evaluate(&y);
            let hit = match mode {
                SuccessMode::Strict => v < f_x,
                SuccessMode::Weak => v <= f_x,
            };
            if hit {
                hits += 1;
                edge |= near_edge;
            }
        }
        (hits, edge)
    });
    let (hits, edge) = parts
        .into_iter()
        .fold((0, false), |(h, e), (hh, ee)| (h + hh, e || ee));
    let mut r = EstimationResult::from_proportion(hits, n, seed, bbox.volume());
    if edge {
        r.warnings
            .push("sub-level set reaches the box boundary; volume is a lower estimate".into());
    }
    Ok(r)
}

/// Geometric grid of step sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl SigmaGrid {
    /// `[1e-8, 1e2] · max(‖m‖, 1)` with 64 points.
    pub fn default_for(m: &[f64]) -> Self {
        let s = norm(m).max(1.0);
        Self {
            lo: 1e-8 * s,
            hi: 1e2 * s,
            points: 64,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        let (a, b) = (self.lo.ln(), self.hi.ln());
        (0..n)
            .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }

    /// Ratio between neighbouring grid points.
    pub fn ratio(&self) -> f64 {
        (self.hi / self.lo).powf(1.0 / (self.points - 1) as f64)
    }

    fn validate(&self) -> Result<()> {
        if self.points < 32 || !(self.lo > 0.0 && self.hi > self.lo && self.hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma grid needs 0 < lo < hi and at least 32 points, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Resolved,
    /// The condition already holds at the smallest grid step size.
    AtGridFloor,
    /// The condition still holds at the largest grid step size.
    AtGridCeiling,
    /// No grid step size satisfies the condition.
    EmptySet,
    /// Intervals straddle `p` everywhere; no point estimate.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub sigma: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Estimate of `ξ_p` or `η_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaBound {
    pub p: f64,
    pub status: BoundStatus,
    /// Finite point estimate. `None` for the infinite and inconclusive cases.
    pub value: Option<f64>,
    /// Final bisection bracket around the estimate.
    pub bracket: Option<(f64, f64)>,
    /// Range of step sizes consistent with the success curve: from the
    /// first (`ξ`) or last (`η`) grid point whose interval still admits `p`
    /// to the conservative estimate, widened by one grid step.
    pub ci: Option<(f64, f64)>,
    pub curve: Vec<CurvePoint>,
}

impl SigmaBound {
    /// The estimate under inf/sup conventions: `ξ` of an empty set is `+∞`,
    /// `η` of an empty set is `0`, grid-limit statuses map to `0` / `+∞`.
    /// `None` only when inconclusive.
    pub fn resolved(&self) -> Option<f64> {
        match self.status {
            BoundStatus::Inconclusive => None,
            BoundStatus::AtGridCeiling => Some(f64::INFINITY),
            BoundStatus::EmptySet => Some(self.value.unwrap_or(f64::INFINITY)),
            _ => self.value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaRangeEstimate {
    pub p_t: f64,
    pub p_h: f64,
    pub grid: SigmaGrid,
    pub xi: SigmaBound,
    pub eta: SigmaBound,
}

const BISECTIONS: usize = 10;

fn curve_point(
    m: &[f64],
    sigma: f64,
    f: &impl Fitness,
    budget: u64,
    mode: SuccessMode,
    seed: u64,
) -> Result<CurvePoint> {
    let r = estimate_success_prob(m, sigma, f, budget, mode, seed)?;
    Ok(CurvePoint {
        sigma,
        estimate: r.estimate,
        ci_low: r.ci_low,
        ci_high: r.ci_high,
    })
}

fn scan(
    m: &[f64],
    f: &impl Fitness,
    grid: &SigmaGrid,
    budget: u64,
    mode: SuccessMode,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    grid.validate()?;
    grid.values()
        .into_iter()
        .enumerate()
        .map(|(i, s)| curve_point(m, s, f, budget, mode, rng::derive_seed(seed, i as u64)))
        .collect()
}

/// `ξ_p(m) = inf{σ : p^<(m, σ) <= p}`, scanning the strict success curve
/// upward from the smallest grid step size.
pub fn estimate_xi(
    m: &[f64],
    p: f64,
    f: &impl Fitness,
    grid: &SigmaGrid,
    budget: u64,
    seed: u64,
) -> Result<SigmaBound> {
    check_p(p)?;
    let curve = scan(m, f, grid, budget, SuccessMode::Strict, seed)?;
    let first = curve.iter().position(|c| c.ci_high <= p);
    let (status, value, bracket) = match first {
        Some(0) => (BoundStatus::AtGridFloor, Some(0.0), None),
        Some(i) => {
            let (mut lo, mut hi) = (curve[i - 1].sigma, curve[i].sigma);
            for k in 0..BISECTIONS {
                let mid = (lo * hi).sqrt();
                let s = rng::derive_seed(seed, (grid.points + k) as u64);
                if curve_point(m, mid, f, budget, SuccessMode::Strict, s)?.ci_high <= p {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            (BoundStatus::Resolved, Some(hi), Some((lo, hi)))
        }
        None if curve.iter().all(|c| c.ci_low > p) => (BoundStatus::EmptySet, None, None),
        None => (BoundStatus::Inconclusive, None, None),
    };
    let ci = value.map(|v| {
        let j = curve.iter().position(|c| c.ci_low <= p).unwrap_or(0);
        let lo = if j == 0 { 0.0 } else { curve[j - 1].sigma };
        (lo.min(v), v)
    });
    Ok(SigmaBound {
        p,
        status,
        value,
        bracket,
        ci,
        curve,
    })
}

/// `η_p(m) = sup{σ : p^≤(m, σ) >= p}`, scanning the weak success curve
/// downward from the largest grid step size.
pub fn estimate_eta(
    m: &[f64],
    p: f64,
    f: &impl Fitness,
    grid: &SigmaGrid,
    budget: u64,
    seed: u64,
) -> Result<SigmaBound> {
    check_p(p)?;
    let curve = scan(m, f, grid, budget, SuccessMode::Weak, seed)?;
    let last = curve.iter().rposition(|c| c.ci_low >= p);
    let n = curve.len();
    let (status, value, bracket) = match last {
        Some(i) if i == n - 1 => (BoundStatus::AtGridCeiling, None, None),
        Some(i) => {
            let (mut lo, mut hi) = (curve[i].sigma, curve[i + 1].sigma);
            for k in 0..BISECTIONS {
                let mid = (lo * hi).sqrt();
                let s = rng::derive_seed(seed, (grid.points + k) as u64);
                if curve_point(m, mid, f, budget, SuccessMode::Weak, s)?.ci_low >= p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (BoundStatus::Resolved, Some(lo), Some((lo, hi)))
        }
        None if curve.iter().all(|c| c.ci_high < p) => (BoundStatus::EmptySet, Some(0.0), None),
        None => (BoundStatus::Inconclusive, None, None),
    };
    let ci = value.map(|v| {
        let j = curve.iter().rposition(|c| c.ci_high >= p);
        let hi = match j {
            Some(j) if j + 1 < n => curve[j + 1].sigma,
            Some(_) => f64::INFINITY,
            None => v,
        };
        (v, hi.max(v))
    });
    Ok(SigmaBound {
        p,
        status,
        value,
        bracket,
        ci,
        curve,
    })
}

/// Both thresholds at one point.
pub fn estimate_sigma_range(
    m: &[f64],
    p_t: f64,
    p_h: f64,
    f: &impl Fitness,
    grid: &SigmaGrid,
    budget: u64,
    seed: u64,
) -> Result<SigmaRangeEstimate> {
    Ok(SigmaRangeEstimate {
        p_t,
        p_h,
        grid: *grid,
        xi: estimate_xi(m, p_t, f, grid, budget, rng::derive_seed(seed, 0))?,
        eta: estimate_eta(m, p_h, f, grid, budget, rng::derive_seed(seed, 1))?,
    })
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "p must lie in (0, 1), got {p}"
        )))
    }
}

/// Weighted fit of `log p^≤(m, σ)` against `log σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub curve: Vec<CurvePoint>,
    /// Grid step sizes with no observed success, left out of the fit.
    pub dropped: Vec<f64>,
}

pub fn estimate_success_exponent(
    m: &[f64],
    f: &impl Fitness,
    sigma_min: f64,
    sigma_max: f64,
    points: usize,
    budget: u64,
    seed: u64,
) -> Result<ExponentFit> {
    if !(sigma_min > 0.0 && sigma_max >= 1e3 * sigma_min) {
        return Err(Error::InvalidParameter(
            "exponent fits need a sigma range spanning at least 3 decades".into(),
        ));
    }
    if points < 3 {
        return Err(Error::InvalidParameter(
            "exponent fits need at least 3 grid points".into(),
        ));
    }
    let grid = SigmaGrid {
        lo: sigma_min,
        hi: sigma_max,
        points,
    };
    let mut curve = Vec::with_capacity(points);
    let mut dropped = Vec::new();
    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    for (i, s) in grid.values().into_iter().enumerate() {
        let seed_i = rng::derive_seed(seed, i as u64);
        let r = estimate_success_prob(m, s, f, budget, SuccessMode::Weak, seed_i)?;
        let k = r.successes.unwrap_or(0);
        if k == 0 {
            dropped.push(s);
        } else {
            let (lo, hi) = wilson_interval(k, budget, Z95);
            xs.push(s.ln());
            ys.push(r.estimate.ln());
            ws.push(1.0 / (hi / lo).ln().max(1e-12));
        }
        curve.push(CurvePoint {
            sigma: s,
            estimate: r.estimate,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
        });
    }
    let fit = weighted_line_fit(&xs, &ys, &ws).ok_or_else(|| {
        Error::InvalidParameter("too few grid points with observed successes to fit".into())
    })?;
    Ok(ExponentFit {
        slope: fit.slope,
        intercept: fit.intercept,
        residual: fit.residual,
        curve,
        dropped,
    })
}
