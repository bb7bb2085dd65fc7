//! Empirical checks of the decrease bounds and step-size lemmas.
//!
//! Each check produces a [`BoundCheckReport`] made of one or more parts. A
//! part compares an empirical statistic with a theoretical bound; its slack
//! is oriented so that `slack >= -tolerance` means the part passes, with the
//! tolerance derived from the Monte Carlo error. Informational parts are
//! reported but do not affect the verdict.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::estimators::{
    chunked, estimate_eta, estimate_suboptimality, estimate_success_prob, estimate_xi,
    gaussian_into, SigmaGrid, SuccessMode,
};
use crate::objectives::{norm, BoundingBox, Fitness, JumpVariant, Objective, ObjectiveSpec};
use crate::rng;
use crate::stats::{wilson_interval, MeanAcc, Proportion, Z95};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckPart {
    pub label: String,
    pub empirical: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default)]
    pub informational: bool,
}

impl CheckPart {
    /// Part requiring `empirical >= bound` up to `tolerance`.
    fn at_least(
        label: impl Into<String>,
        empirical: f64,
        ci: (f64, f64),
        bound: f64,
        tolerance: f64,
    ) -> Self {
        let slack = empirical - bound;
        Self::finish(label.into(), empirical, ci, bound, slack, tolerance)
    }

    /// Part requiring `empirical <= bound` up to `tolerance`.
    fn at_most(
        label: impl Into<String>,
        empirical: f64,
        ci: (f64, f64),
        bound: f64,
        tolerance: f64,
    ) -> Self {
        let slack = bound - empirical;
        Self::finish(label.into(), empirical, ci, bound, slack, tolerance)
    }

    fn finish(
        label: String,
        empirical: f64,
        ci: (f64, f64),
        bound: f64,
        slack: f64,
        tolerance: f64,
    ) -> Self {
        // NaN slack only arises from ∞ - ∞, which no check produces on a pass.
        let pass = slack >= -tolerance;
        Self {
            label,
            empirical,
            ci_low: ci.0,
            ci_high: ci.1,
            bound,
            slack,
            tolerance,
            pass,
            informational: false,
        }
    }

    fn informational(mut self) -> Self {
        self.informational = true;
        self
    }
}

/// One instance of a bound or lemma checked against simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckReport {
    pub check: String,
    pub objective: String,
    pub inputs: Value,
    /// Statistic, bound, slack and tolerance of the binding (smallest-margin)
    /// part.
    pub empirical: f64,
    pub bound: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub parts: Vec<CheckPart>,
    pub n_samples: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau: Option<PlateauStats>,
}

impl BoundCheckReport {
    fn new(
        check: &str,
        objective: String,
        inputs: Value,
        parts: Vec<CheckPart>,
        n_samples: u64,
        seed: u64,
    ) -> Self {
        let binding = parts
            .iter()
            .filter(|p| !p.informational)
            .min_by(|a, b| (a.slack + a.tolerance).total_cmp(&(b.slack + b.tolerance)))
            .or_else(|| parts.first());
        let (empirical, bound, slack, tolerance) = binding
            .map(|p| (p.empirical, p.bound, p.slack, p.tolerance))
            .unwrap_or((0.0, 0.0, 0.0, 0.0));
        let pass = parts.iter().filter(|p| !p.informational).all(|p| p.pass);
        Self {
            check: check.to_string(),
            objective,
            inputs,
            empirical,
            bound,
            slack,
            tolerance,
            pass,
            parts,
            n_samples,
            seed,
            notes: Vec::new(),
            plateau: None,
        }
    }

    pub fn part(&self, label: &str) -> Option<&CheckPart> {
        self.parts.iter().find(|p| p.label == label)
    }
}

/// `(2π)^{d/2} σ^d`, the reciprocal of the Gaussian density's supremum.
pub fn gaussian_volume_scale(d: usize, sigma: f64) -> f64 {
    (2.0 * PI).powf(d as f64 / 2.0) * sigma.powi(d as i32)
}

/// Spatial suboptimality `f̂^<`: in closed form, by quadrature over the
/// bounding box, or estimated against a fixed cloud of uniform samples from
/// the box.
///
/// The box-relative oracles measure sub-level sets inside the box only. It is the
/// exact suboptimality of a modified objective that agrees with `f` on the
/// box and is worse than every box point outside it, so offspring leaving
/// the box count as non-improving.
pub enum SuboptimalityOracle<'a> {
    Analytic(&'a Objective),
    /// Box-restricted suboptimality by slice quadrature.
    BoxQuadrature(&'a Objective),
    Reference {
        bbox: BoundingBox,
        volume: f64,
        sorted: Vec<f64>,
    },
}

impl<'a> SuboptimalityOracle<'a> {
    /// Closed form where available, then box quadrature, otherwise a reference cloud of
    /// `reference_samples` points (zero disables the fallback).
    pub fn for_objective(f: &'a Objective, reference_samples: u64, seed: u64) -> Result<Self> {
        if f.analytic_suboptimality(&vec![0.0; f.dimension()])
            .is_some()
        {
            return Ok(SuboptimalityOracle::Analytic(f));
        }
        if f.box_suboptimality(&vec![0.0; f.dimension()]).is_some() {
            return Ok(SuboptimalityOracle::BoxQuadrature(f));
        }
        if reference_samples == 0 {
            return Err(Error::NoSuboptimalityOracle(f.id()));
        }
        Ok(Self::reference(f, reference_samples, seed))
    }

    /// Box-relative oracle from `samples` uniform points, regardless of
    /// whether a closed form exists.
    pub fn reference(f: &Objective, samples: u64, seed: u64) -> Self {
        let bbox = f.bounding_box().clone();
        let parts = chunked(samples, seed, |rng, count| {
            let mut y = vec![0.0; bbox.dimension()];
            let mut out = Vec::with_capacity(count as usize);
            for _ in 0..count {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = bbox.lo[i] + (bbox.hi[i] - bbox.lo[i]) * rng.random::<f64>();
                }
                out.push(f.evaluate(&y));
            }
            out
        });
        let mut sorted: Vec<f64> = parts.into_iter().flatten().collect();
        sorted.sort_by(f64::total_cmp);
        SuboptimalityOracle::Reference {
            volume: bbox.volume(),
            bbox,
            sorted,
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, SuboptimalityOracle::Analytic(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SuboptimalityOracle::Analytic(_) => "analytic",
            SuboptimalityOracle::BoxQuadrature(_) => "box_quadrature",
            SuboptimalityOracle::Reference { .. } => "reference_cloud",
        }
    }

    /// Whether `x` lies where the oracle is exact (everywhere for closed
    /// forms, inside the box for the cloud).
    pub fn in_domain(&self, x: &[f64]) -> bool {
        match self {
            SuboptimalityOracle::Analytic(_) => true,
            SuboptimalityOracle::BoxQuadrature(f) => f.bounding_box().contains(x),
            SuboptimalityOracle::Reference { bbox, .. } => bbox.contains(x),
        }
    }

    /// `f̂^<(x)` given `fx = f(x)`.
    pub fn strict(&self, x: &[f64], fx: f64) -> f64 {
        match self {
            SuboptimalityOracle::Analytic(f) => f.analytic_suboptimality(x).unwrap_or(f64::NAN),
            SuboptimalityOracle::BoxQuadrature(f) => {
                if f.bounding_box().contains(x) {
                    f.box_suboptimality(x).unwrap_or(f64::NAN)
                } else {
                    f.bounding_box().volume()
                }
            }
            SuboptimalityOracle::Reference {
                bbox,
                volume,
                sorted,
            } => {
                if !bbox.contains(x) {
                    return *volume;
                }
                // linear interpolation between order statistics keeps the
                // estimate strictly increasing in fx below the cloud's
                // resolution
                let n = sorted.len();
                let i = sorted.partition_point(|v| *v < fx);
                let rank = if i == 0 {
                    0.0
                } else if i == n {
                    n as f64
                } else {
                    let (lo, hi) = (sorted[i - 1], sorted[i]);
                    let frac = if hi > lo { (fx - lo) / (hi - lo) } else { 0.0 };
                    i as f64 - 0.5 + frac
                };
                volume * rank / n as f64
            }
        }
    }
}

fn require_null_level_sets(f: &Objective) -> Result<()> {
    if f.has_null_level_sets() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{} has plateaus; use the plateau check",
            f.id()
        )))
    }
}

/// Strict successes and raw decreases `f̂(m) - f̂(x)` of `n` offspring.
struct DecreaseSample {
    successes: u64,
    n: u64,
    decreases: Vec<f64>,
}

fn sample_decreases(
    m: &[f64],
    sigma: f64,
    f: &Objective,
    oracle: &SuboptimalityOracle,
    n: u64,
    seed: u64,
) -> DecreaseSample {
    let f_m = f.evaluate(m);
    let fhat_m = oracle.strict(m, f_m);
    let parts = chunked(n, seed, |rng, count| {
        let mut x = vec![0.0; m.len()];
        let mut out = Vec::with_capacity(count as usize);
        let mut k = 0u64;
        for _ in 0..count {
            gaussian_into(m, sigma, rng, &mut x);
            let fx = f.evaluate(&x);
            if fx < f_m && oracle.in_domain(&x) {
                k += 1;
            }
            out.push(fhat_m - oracle.strict(&x, fx));
        }
        (k, out)
    });
    let mut successes = 0;
    let mut decreases = Vec::with_capacity(n as usize);
    for (k, d) in parts {
        successes += k;
        decreases.extend(d);
    }
    DecreaseSample {
        successes,
        n,
        decreases,
    }
}

fn validate_probe(f: &Objective, m: &[f64], sigma: f64, n: u64) -> Result<()> {
    if m.len() != f.dimension() {
        return Err(Error::DimensionMismatch {
            expected: f.dimension(),
            found: m.len(),
        });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if n < 100 {
        return Err(Error::InvalidParameter(format!("need n >= 100, got {n}")));
    }
    Ok(())
}

/// `E[max(0, f̂(m) - f̂(x))] >= (2π)^{d/2} σ^d p² / 2` with `x ~ N(m, σ² I)`.
///
/// Passes iff the lower 95% bound of the empirical mean is at least the
/// bound evaluated at the lower Wilson bound of `p`.
pub fn check_expected_decrease(
    m: &[f64],
    sigma: f64,
    f: &Objective,
    oracle: &SuboptimalityOracle,
    n: u64,
    seed: u64,
) -> Result<BoundCheckReport> {
    validate_probe(f, m, sigma, n)?;
    require_null_level_sets(f)?;
    let s = sample_decreases(m, sigma, f, oracle, n, seed);
    let p = Proportion::new(s.successes, s.n);
    let mut acc = MeanAcc::default();
    for d in &s.decreases {
        acc.push(d.max(0.0));
    }
    let scale = gaussian_volume_scale(m.len(), sigma);
    let bound = scale * p.ci_low * p.ci_low / 2.0;
    let ci = acc.interval(Z95);
    let part = CheckPart::at_least(
        "expected_decrease",
        acc.mean(),
        ci,
        bound,
        acc.mean() - ci.0,
    );
    let plug_in = CheckPart::at_least(
        "expected_decrease_plug_in",
        acc.mean(),
        ci,
        scale * p.estimate * p.estimate / 2.0,
        acc.mean() - ci.0,
    )
    .informational();
    let mut r = BoundCheckReport::new(
        "expected_decrease",
        f.id(),
        json!({"m": m, "sigma": sigma, "p_hat": p.estimate, "p_low": p.ci_low,
               "oracle": oracle.kind()}),
        vec![part, plug_in],
        n,
        seed,
    );
    if !oracle.is_analytic() {
        r.notes
            .push("suboptimality measured inside the bounding box".into());
    }
    Ok(r)
}

/// `Pr(f̂(m) - f̂(x) >= (2π)^{d/2} σ^d (p - q)) >= q` for each `q` in
/// `q_fracs · p̂`. Passes iff every frequency is at least `q - 3·SE`.
pub fn check_quantile_bound(
    m: &[f64],
    sigma: f64,
    f: &Objective,
    oracle: &SuboptimalityOracle,
    n: u64,
    q_fracs: &[f64],
    seed: u64,
) -> Result<BoundCheckReport> {
    validate_probe(f, m, sigma, n)?;
    require_null_level_sets(f)?;
    if q_fracs.is_empty() || q_fracs.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(Error::InvalidParameter(
            "q fractions must be non-empty and lie in [0, 1]".into(),
        ));
    }
    let s = sample_decreases(m, sigma, f, oracle, n, seed);
    let p = s.successes as f64 / n as f64;
    let scale = gaussian_volume_scale(m.len(), sigma);
    let parts = q_fracs
        .iter()
        .map(|frac| {
            let q = frac * p;
            let threshold = scale * (p - q);
            let hits = if threshold == 0.0 {
                // f̂ decrease >= 0 means a weak improvement in f̂, which with
                // null level sets is a strict improvement in f
                s.successes
            } else {
                s.decreases.iter().filter(|d| **d >= threshold).count() as u64
            };
            let freq = hits as f64 / n as f64;
            let se = (q * (1.0 - q) / n as f64).sqrt();
            CheckPart::at_least(
                format!("q={q:.6}"),
                freq,
                wilson_interval(hits, n, Z95),
                q,
                3.0 * se,
            )
        })
        .collect();
    Ok(BoundCheckReport::new(
        "quantile_bound",
        f.id(),
        json!({"m": m, "sigma": sigma, "p_hat": p, "q_fracs": q_fracs}),
        parts,
        n,
        seed,
    ))
}

/// Per-level improvement probabilities of a stepped sphere around `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauStats {
    /// f-levels strictly below `f(m)` with at least `MIN_LEVEL_HITS` samples.
    pub levels: Vec<f64>,
    pub r_less: Vec<f64>,
    pub r_leq: Vec<f64>,
    /// Analytic volume of each listed level set.
    pub level_masses: Vec<f64>,
    /// Sum of squared jumps `r^≤ - r^<` over the listed levels.
    pub zeta: f64,
    /// Same sum over every sampled level, including `f(m)` and above.
    pub zeta_all_levels: f64,
    /// Volume of the level set through `m`.
    pub level_mass: f64,
    /// `(2π)^{-d/2} σ^{-d}`.
    pub density_sup: f64,
    /// Strict success probability `r^<(f(m))`.
    pub p: f64,
    /// Levels below `f(m)` with too few samples, merged into a residual.
    pub merged_levels: Vec<f64>,
    pub merged_mass: f64,
}

pub const MIN_LEVEL_HITS: u64 = 30;

/// Decrease theorem with plateaus, on `stepped_sphere`.
///
/// Gated parts:
/// * `strict`: `E[max(0, f̂^<(m) - f̂^<(x))] >= (p² + ζ)/(2u)`;
/// * `weak`: `E[max(0, f̂^≤(m) - f̂^≤(x))] >= (p² - ζ)/(2u) + p·Λ(L_f(m))`,
///   the bound obtained by integrating the weak quantile statement over
///   `q ∈ [0, p]`.
///
/// The informational part `weak_literal` compares against
/// `(p² + ζ)/(2u) + Λ(L_f(m))`. That form fails at small `σ` inside a
/// plateau, where the left side tends to zero while `Λ(L_f(m)) > 0`.
pub fn check_plateau_decrease(
    m: &[f64],
    sigma: f64,
    f: &Objective,
    n: u64,
    seed: u64,
) -> Result<(BoundCheckReport, PlateauStats)> {
    validate_probe(f, m, sigma, n)?;
    let (k, d) = match f.spec() {
        ObjectiveSpec::SteppedSphere { k, d, .. } => (*k as f64, *d),
        _ => {
            return Err(Error::InvalidParameter(
                "the plateau check needs a stepped_sphere objective".into(),
            ))
        }
    };
    let level = |x: &[f64]| (k * x.iter().map(|v| v * v).sum::<f64>()).ceil();
    let j_m = level(m);
    let vol = crate::objectives::unit_ball_volume(d);
    let weak_vol = |j: f64| vol * (j / k).max(0.0).powf(d as f64 / 2.0);
    let strict_vol = |j: f64| if j <= 0.0 { 0.0 } else { weak_vol(j - 1.0) };

    let parts = chunked(n, seed, |rng, count| {
        let mut x = vec![0.0; m.len()];
        let mut hist = std::collections::BTreeMap::<u64, u64>::new();
        let (mut s_acc, mut w_acc) = (MeanAcc::default(), MeanAcc::default());
        for _ in 0..count {
            gaussian_into(m, sigma, rng, &mut x);
            let j = level(&x);
            *hist.entry(j as u64).or_default() += 1;
            s_acc.push((strict_vol(j_m) - strict_vol(j)).max(0.0));
            w_acc.push((weak_vol(j_m) - weak_vol(j)).max(0.0));
        }
        (hist, s_acc, w_acc)
    });
    let mut hist = std::collections::BTreeMap::<u64, u64>::new();
    let (mut s_acc, mut w_acc) = (MeanAcc::default(), MeanAcc::default());
    for (h, s, w) in parts {
        for (j, c) in h {
            *hist.entry(j).or_default() += c;
        }
        s_acc = s_acc.merge(s);
        w_acc = w_acc.merge(w);
    }

    let nf = n as f64;
    let mut stats = PlateauStats {
        levels: Vec::new(),
        r_less: Vec::new(),
        r_leq: Vec::new(),
        level_masses: Vec::new(),
        zeta: 0.0,
        zeta_all_levels: 0.0,
        level_mass: weak_vol(j_m) - strict_vol(j_m),
        density_sup: 1.0 / gaussian_volume_scale(d, sigma),
        p: 0.0,
        merged_levels: Vec::new(),
        merged_mass: 0.0,
    };
    let mut below = 0u64;
    for (&j, &c) in &hist {
        let jf = j as f64;
        let jump = c as f64 / nf;
        // level j = 0 is the single point {0}: no plateau
        if j > 0 {
            stats.zeta_all_levels += jump * jump;
        }
        if jf < j_m {
            if j > 0 && c >= MIN_LEVEL_HITS {
                stats.levels.push(jf / k);
                stats.r_less.push(below as f64 / nf);
                stats.r_leq.push((below + c) as f64 / nf);
                stats.level_masses.push(weak_vol(jf) - strict_vol(jf));
                stats.zeta += jump * jump;
            } else if j > 0 {
                stats.merged_levels.push(jf / k);
                stats.merged_mass += jump;
            }
            below += c;
        }
    }
    let p = Proportion::new(below, n);
    stats.p = p.estimate;
    let u = stats.density_sup;
    let lam = stats.level_mass;
    let (p_lo, zeta) = (p.ci_low, stats.zeta);

    let s_ci = s_acc.interval(Z95);
    let w_ci = w_acc.interval(Z95);
    let parts = vec![
        CheckPart::at_least(
            "strict",
            s_acc.mean(),
            s_ci,
            (p_lo * p_lo + zeta) / (2.0 * u),
            s_acc.mean() - s_ci.0,
        ),
        CheckPart::at_least(
            "weak",
            w_acc.mean(),
            w_ci,
            ((p_lo * p_lo - zeta) / (2.0 * u)).max(0.0) + p_lo * lam,
            w_acc.mean() - w_ci.0,
        ),
        CheckPart::at_least(
            "weak_literal",
            w_acc.mean(),
            w_ci,
            (p_lo * p_lo + zeta) / (2.0 * u) + lam,
            w_acc.mean() - w_ci.0,
        )
        .informational(),
    ];
    let mut r = BoundCheckReport::new(
        "plateau_decrease",
        f.id(),
        json!({"m": m, "sigma": sigma, "p_hat": p.estimate, "p_low": p_lo,
               "zeta": zeta, "level_mass": lam, "u": u}),
        parts,
        n,
        seed,
    );
    if !stats.merged_levels.is_empty() {
        r.notes.push(format!(
            "{} sparsely sampled levels merged (mass {:.3e})",
            stats.merged_levels.len(),
            stats.merged_mass
        ));
    }
    r.plateau = Some(stats.clone());
    Ok((r, stats))
}

/// `p^<(m, aσ) >= a^{-d} p^<(m, σ)` for `a >= 1`, using common random
/// numbers for both step sizes. Tolerance is `3·SE` of the difference.
pub fn check_step_scaling(
    m: &[f64],
    sigma: f64,
    a: f64,
    f: &impl Fitness,
    n: u64,
    seed: u64,
) -> Result<BoundCheckReport> {
    if a < 1.0 || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("need a >= 1, got {a}")));
    }
    if m.len() != f.dimension() {
        return Err(Error::DimensionMismatch {
            expected: f.dimension(),
            found: m.len(),
        });
    }
    let f_m = f.evaluate(m);
    let counts = chunked(n, seed, |rng, count| {
        let mut z = vec![0.0; m.len()];
        let zero = vec![0.0; m.len()];
        let mut x = vec![0.0; m.len()];
        let (mut k1, mut ka) = (0u64, 0u64);
        for _ in 0..count {
            gaussian_into(&zero, 1.0, rng, &mut z);
            for i in 0..m.len() {
                x[i] = m[i] + sigma * z[i];
            }
            k1 += (f.evaluate(&x) < f_m) as u64;
            for i in 0..m.len() {
                x[i] = m[i] + a * sigma * z[i];
            }
            ka += (f.evaluate(&x) < f_m) as u64;
        }
        (k1, ka)
    });
    let (k1, ka) = counts
        .into_iter()
        .fold((0, 0), |(a, b), (c, d)| (a + c, b + d));
    let p1 = Proportion::new(k1, n);
    let pa = Proportion::new(ka, n);
    let factor = a.powi(-(m.len() as i32));
    let se = (pa.standard_error().powi(2) + (factor * p1.standard_error()).powi(2)).sqrt();
    let part = CheckPart::at_least(
        "scaled_success",
        pa.estimate,
        (pa.ci_low, pa.ci_high),
        factor * p1.estimate,
        3.0 * se,
    );
    Ok(BoundCheckReport::new(
        "step_scaling",
        f.id(),
        json!({"m": m, "sigma": sigma, "a": a, "p_sigma": p1.estimate, "p_a_sigma": pa.estimate}),
        vec![part],
        n,
        seed,
    ))
}

/// At `σ = (f̂(m) / (p (2π)^{d/2}))^{1/d}` the strict success probability is
/// at most `p`. Passes iff `p̂ <= p + 3·SE`.
///
/// Without a closed form, `f̂(m)` is estimated by hit-or-miss sampling and
/// the upper end of its interval is used, which can only enlarge `σ`.
pub fn check_sigma_upper_bound(
    m: &[f64],
    p: f64,
    f: &Objective,
    n: u64,
    seed: u64,
) -> Result<BoundCheckReport> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "p must lie in (0, 1], got {p}"
        )));
    }
    let d = m.len();
    let mut notes = Vec::new();
    let fhat = match f.analytic_suboptimality(m) {
        Some(v) => v,
        None => {
            let r = estimate_suboptimality(
                m,
                f,
                f.bounding_box(),
                n.max(1000),
                SuccessMode::Strict,
                rng::derive_seed(seed, 1),
            )?;
            notes.push(format!(
                "suboptimality estimated by sampling: {:.6} (upper bound {:.6} used)",
                r.estimate, r.ci_high
            ));
            notes.extend(r.warnings);
            r.ci_high
        }
    };
    let sigma = (fhat / (p * gaussian_volume_scale(d, 1.0))).powf(1.0 / d as f64);
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(
            "zero suboptimality at m; the bound is vacuous".into(),
        ));
    }
    let r = estimate_success_prob(
        m,
        sigma,
        f,
        n,
        SuccessMode::Strict,
        rng::derive_seed(seed, 0),
    )?;
    let se = (p * (1.0 - p) / n as f64).sqrt().max(r.standard_error());
    let part = CheckPart::at_most(
        "strict_success",
        r.estimate,
        (r.ci_low, r.ci_high),
        p,
        3.0 * se,
    );
    let mut report = BoundCheckReport::new(
        "sigma_upper_bound",
        f.id(),
        json!({"m": m, "p": p, "suboptimality": fhat, "sigma": sigma}),
        vec![part],
        n,
        seed,
    );
    report.notes = notes;
    Ok(report)
}

/// `p_H^{1/d} ξ_{p_T}(m) <= p_T^{1/d} η_{p_H}(m)` for `p_H <= p_T`.
///
/// Tolerance comes from the confidence ranges of both estimates. Grid-limit
/// and empty-set statuses resolve by the inf/sup conventions (`ξ = 0` or
/// `η = ∞` pass trivially).
#[allow(clippy::too_many_arguments)]
pub fn check_gap(
    m: &[f64],
    p_t: f64,
    p_h: f64,
    f: &impl Fitness,
    grid: &SigmaGrid,
    budget: u64,
    seed: u64,
) -> Result<BoundCheckReport> {
    if !(p_h <= p_t) {
        return Err(Error::InvalidParameter(format!(
            "need p_H <= p_T, got p_H={p_h}, p_T={p_t}"
        )));
    }
    let d = m.len() as f64;
    let xi = estimate_xi(m, p_t, f, grid, budget, rng::derive_seed(seed, 0))?;
    let eta = estimate_eta(m, p_h, f, grid, budget, rng::derive_seed(seed, 1))?;
    let (wl, wr) = (p_h.powf(1.0 / d), p_t.powf(1.0 / d));
    let mut notes = Vec::new();
    let part = match (xi.resolved(), eta.resolved()) {
        (Some(x), Some(e)) => {
            let lhs = wl * x;
            let rhs = wr * e;
            let x_lo = xi.ci.map_or(x, |c| c.0);
            let e_hi = eta.ci.map_or(e, |c| c.1);
            let tol = if lhs.is_finite() && rhs.is_finite() {
                (wl * (x - x_lo)) + wr * (e_hi - e)
            } else {
                0.0
            };
            let mut part = CheckPart::at_least("gap", rhs, (wr * e, wr * e_hi), lhs, tol);
            if x == 0.0 || e == f64::INFINITY {
                part.slack = if rhs.is_finite() { rhs - lhs } else { f64::MAX };
                part.pass = true;
                notes.push("trivially satisfied at a grid limit".into());
            }
            part
        }
        _ => {
            notes.push(format!(
                "inconclusive estimate: xi {:?}, eta {:?}",
                xi.status, eta.status
            ));
            let mut part =
                CheckPart::at_least("gap", f64::NAN, (f64::NAN, f64::NAN), f64::NAN, 0.0);
            part.pass = false;
            part
        }
    };
    let n = budget * (2 * grid.points as u64 + 20);
    let mut r = BoundCheckReport::new(
        "gap",
        f.id(),
        json!({"m": m, "p_t": p_t, "p_h": p_h, "grid": grid, "budget": budget,
               "xi": xi.resolved(), "xi_status": xi.status,
               "eta": eta.resolved(), "eta_status": eta.status}),
        vec![part],
        n,
        seed,
    );
    r.notes = notes;
    Ok(r)
}

/// `p^<(x, σ) -> limit` as `σ -> 0` along `sigmas` (decreasing).
///
/// Parts: the last estimate within `3·SE` of the limit, and a distance to
/// the limit that never grows by more than `3·SE` between consecutive step
/// sizes. The finite-difference gradient norm is reported as
/// informational.
pub fn check_regular_limit(
    x: &[f64],
    f: &impl Fitness,
    sigmas: &[f64],
    limit: f64,
    n: u64,
    seed: u64,
) -> Result<BoundCheckReport> {
    if sigmas.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one step size".into(),
        ));
    }
    let ests = sigmas
        .iter()
        .enumerate()
        .map(|(i, s)| {
            estimate_success_prob(
                x,
                *s,
                f,
                n,
                SuccessMode::Strict,
                rng::derive_seed(seed, i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut parts = Vec::new();
    let last = ests.last().expect("non-empty");
    let se = (limit * (1.0 - limit) / n as f64)
        .sqrt()
        .max(last.standard_error());
    parts.push(CheckPart::at_most(
        "limit",
        (last.estimate - limit).abs(),
        (last.ci_low, last.ci_high),
        0.0,
        3.0 * se,
    ));
    for (i, w) in ests.windows(2).enumerate() {
        let (a, b) = ((w[0].estimate - limit).abs(), (w[1].estimate - limit).abs());
        let tol = 3.0 * (w[0].standard_error().powi(2) + w[1].standard_error().powi(2)).sqrt();
        parts.push(CheckPart::at_most(
            format!("trend_{}", i + 1),
            b,
            (w[1].ci_low, w[1].ci_high),
            a,
            tol,
        ));
    }
    let grad = finite_difference_gradient(f, x);
    let gnorm = norm(&grad);
    parts.push(
        CheckPart::at_least("gradient_norm", gnorm, (gnorm, gnorm), 0.0, 0.0).informational(),
    );
    let curve: Vec<_> = sigmas
        .iter()
        .zip(&ests)
        .map(|(s, e)| json!({"sigma": s, "p_hat": e.estimate, "ci_low": e.ci_low, "ci_high": e.ci_high}))
        .collect();
    Ok(BoundCheckReport::new(
        "regular_limit",
        f.id(),
        json!({"x": x, "limit": limit, "gradient": grad, "curve": curve}),
        parts,
        n * sigmas.len() as u64,
        seed,
    ))
}

/// Central differences with step `1e-6·max(|x_i|, 1)`.
pub fn finite_difference_gradient(f: &impl Fitness, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1.0);
            y[i] = x[i] + h;
            let up = f.evaluate(&y);
            y[i] = x[i] - h;
            let down = f.evaluate(&y);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Named points whose limiting success rate has a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStudy {
    /// `a x1² - x2²` at the origin.
    QuadraticSaddle,
    /// `x1 + a|x2|` at the origin.
    LinearRidge,
    /// `‖x‖² + 1_S` with `S = (a, ∞) × (0, 1)`, at the corner `(a, 1)`.
    JumpCorner,
}

impl std::str::FromStr for CaseStudy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic_saddle" => Ok(CaseStudy::QuadraticSaddle),
            "linear_ridge" => Ok(CaseStudy::LinearRidge),
            "jump_corner" => Ok(CaseStudy::JumpCorner),
            _ => Err(Error::InvalidParameter(format!(
                "unknown case study `{s}`; valid: quadratic_saddle, linear_ridge, jump_corner"
            ))),
        }
    }
}

/// Closed-form limiting success rate:
/// `2·acot(√a)/π`, `acot(a)/π` or `atan(a)/(2π)`.
pub fn case_study_rate(kind: CaseStudy, a: f64) -> f64 {
    match kind {
        CaseStudy::QuadraticSaddle => 2.0 * (1.0 / a.sqrt()).atan() / PI,
        CaseStudy::LinearRidge => (1.0 / a).atan() / PI,
        CaseStudy::JumpCorner => a.atan() / (2.0 * PI),
    }
}

/// Objective and probe point of a case study.
pub fn case_study_setup(kind: CaseStudy, a: f64, eps: f64) -> Result<(Objective, Vec<f64>)> {
    let spec = match kind {
        CaseStudy::QuadraticSaddle => ObjectiveSpec::QuadraticSaddle { a, phi: false },
        CaseStudy::LinearRidge => ObjectiveSpec::LinearRidge { a, phi: false },
        CaseStudy::JumpCorner => ObjectiveSpec::SphereJump {
            variant: JumpVariant::Strip,
            d: 2,
            a,
            phi: false,
        },
    };
    let m = match kind {
        CaseStudy::JumpCorner => vec![a + eps, 1.0],
        _ => vec![0.0, 0.0],
    };
    Ok((crate::objectives::make_objective(&spec)?, m))
}

/// Monte Carlo success rate at the case-study point against its formula.
///
/// Saddle and ridge: `|p̂ - rate| <= 0.01`. Jump corner, where the formula
/// is exact only as `ε -> 0`: `p̂ >= rate - 0.005` and `p̂ <= rate + 0.02`.
pub fn check_case_study_rate(
    kind: CaseStudy,
    a: f64,
    sigma: f64,
    eps: f64,
    n: u64,
    seed: u64,
) -> Result<BoundCheckReport> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("need a > 0, got {a}")));
    }
    let (f, m) = case_study_setup(kind, a, eps)?;
    let rate = case_study_rate(kind, a);
    let r = estimate_success_prob(&m, sigma, &f, n, SuccessMode::Strict, seed)?;
    let ci = (r.ci_low, r.ci_high);
    let parts = match kind {
        CaseStudy::JumpCorner => vec![
            CheckPart::at_least("lower", r.estimate, ci, rate, 0.005),
            CheckPart::at_most("upper", r.estimate, ci, rate, 0.02),
        ],
        _ => vec![CheckPart::at_most(
            "abs_error",
            (r.estimate - rate).abs(),
            ci,
            0.0,
            0.01,
        )],
    };
    Ok(BoundCheckReport::new(
        "case_study_rate",
        f.id(),
        json!({"kind": kind, "a": a, "sigma": sigma, "eps": eps, "m": m,
               "rate": rate, "p_hat": r.estimate}),
        parts,
        n,
        seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(s: &str) -> Objective {
        Objective::parse(s).unwrap()
    }

    #[test]
    fn rates_match_closed_forms() {
        assert!((case_study_rate(CaseStudy::QuadraticSaddle, 1.0) - 0.5).abs() < 1e-15);
        assert!((case_study_rate(CaseStudy::QuadraticSaddle, 9.0) - 0.204_833).abs() < 1e-6);
        assert!((case_study_rate(CaseStudy::LinearRidge, 1.0) - 0.25).abs() < 1e-15);
        assert!((case_study_rate(CaseStudy::LinearRidge, 0.5) - 0.352_416).abs() < 1e-6);
        assert!((case_study_rate(CaseStudy::LinearRidge, 20.0) - 0.015_902).abs() < 1e-6);
        assert!((case_study_rate(CaseStudy::JumpCorner, 1.0) - 0.125).abs() < 1e-15);
        assert!((case_study_rate(CaseStudy::JumpCorner, 10.0) - 0.234_137).abs() < 1e-6);
        assert!((case_study_rate(CaseStudy::JumpCorner, 1e12) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rate_monotonicity() {
        let grid: Vec<f64> = (0..200)
            .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 199.0))
            .collect();
        for w in grid.windows(2) {
            assert!(
                case_study_rate(CaseStudy::QuadraticSaddle, w[1])
                    < case_study_rate(CaseStudy::QuadraticSaddle, w[0])
            );
            assert!(
                case_study_rate(CaseStudy::LinearRidge, w[1])
                    < case_study_rate(CaseStudy::LinearRidge, w[0])
            );
            // the corner rate grows with a, towards the 1/4 asymptote
            assert!(
                case_study_rate(CaseStudy::JumpCorner, w[1])
                    > case_study_rate(CaseStudy::JumpCorner, w[0])
            );
        }
    }

    #[test]
    fn expected_decrease_edge_cases() {
        let s = obj("sphere:d=2");
        let o = SuboptimalityOracle::for_objective(&s, 0, 0).unwrap();
        let r = check_expected_decrease(&[0.0, 0.0], 0.3, &s, &o, 10_000, 1).unwrap();
        assert!(r.pass);
        assert_eq!(r.empirical, 0.0);
        assert_eq!(r.bound, 0.0);
        let r = check_expected_decrease(&[1.0, 0.0], 5.0, &s, &o, 100_000, 1).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.bound > 0.0);
    }

    #[test]
    fn expected_decrease_needs_an_oracle_and_null_level_sets() {
        let r = obj("sphere_jump:variant=star,d=3");
        assert!(matches!(
            SuboptimalityOracle::for_objective(&r, 0, 0),
            Err(Error::NoSuboptimalityOracle(_))
        ));
        let st = obj("stepped_sphere:k=4,d=2");
        let o = SuboptimalityOracle::for_objective(&st, 0, 0).unwrap();
        assert!(check_expected_decrease(&[1.0, 0.0], 0.3, &st, &o, 1000, 1).is_err());
    }

    #[test]
    fn quantile_endpoints() {
        let s = obj("sphere:d=2");
        let o = SuboptimalityOracle::for_objective(&s, 0, 0).unwrap();
        let r = check_quantile_bound(&[1.0, 0.0], 0.3, &s, &o, 50_000, &[0.0, 1.0], 2).unwrap();
        assert!(r.pass);
        // q = p̂: threshold zero, frequency equals p̂ exactly
        let end = &r.parts[1];
        assert_eq!(end.empirical, end.bound);
    }

    #[test]
    fn reference_cloud_matches_closed_form() {
        let s = obj("sphere:d=2");
        let cloud = SuboptimalityOracle::reference(&s, 1 << 20, 4);
        assert!(!cloud.is_analytic());
        for x in [[1.0, 0.0], [0.3, -0.4], [0.0, 0.05]] {
            let truth = s.analytic_suboptimality(&x).unwrap();
            let est = cloud.strict(&x, s.evaluate(&x));
            let p = truth / 16.0;
            let se = 16.0 * (p * (1.0 - p) / (1u64 << 20) as f64).sqrt();
            assert!(
                (est - truth).abs() < 4.0 * se + 1e-12,
                "{x:?}: {est} vs {truth}"
            );
        }
        assert_eq!(cloud.strict(&[3.0, 0.0], 9.0), 16.0);
        assert!(!cloud.in_domain(&[3.0, 0.0]));
    }

    #[test]
    fn box_oracles_agree_with_reference_clouds() {
        let cases: [(&str, &[&[f64]]); 8] = [
            ("rosenbrock2d", &[&[0.0, 0.0], &[-1.0, 1.0], &[1.5, 0.5]]),
            ("cubic_saddle", &[&[0.0, 0.0], &[0.5, 0.5], &[-1.0, 2.0]]),
            (
                "sphere_jump:variant=star",
                &[&[1.5, 0.0], &[0.5, 0.0], &[0.9, 0.9]],
            ),
            (
                "sphere_jump:variant=closed_ball",
                &[&[1.5, 0.0], &[1.0, 0.0], &[0.0, 1.2]],
            ),
            (
                "sphere_jump:variant=strip,a=1",
                &[&[1.001, 0.5], &[1.5, 0.5], &[0.5, -0.5]],
            ),
            (
                "cantor_barrier:variant=fat",
                &[&[1e-3], &[-0.5], &[-0.3], &[0.5]],
            ),
            ("cantor_barrier:variant=null", &[&[1e-3], &[-0.5], &[0.5]]),
            ("linear_ridge:a=4", &[&[0.0, 1.0], &[1.0, 0.0]]),
        ];
        let n = 1u64 << 20;
        for (spec, points) in cases {
            let f = obj(spec);
            let exact = SuboptimalityOracle::for_objective(&f, 0, 0).unwrap();
            assert_eq!(exact.kind(), "box_quadrature", "{spec}");
            let cloud = SuboptimalityOracle::reference(&f, n, 8);
            let vol = f.bounding_box().volume();
            for x in points {
                let fx = f.evaluate(x);
                let (a, b) = (exact.strict(x, fx), cloud.strict(x, fx));
                let p = (a / vol).clamp(1e-6, 1.0 - 1e-6);
                let se = vol * (p * (1.0 - p) / n as f64).sqrt();
                assert!((a - b).abs() < 4.0 * se + 1e-9, "{spec} {x:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn plateau_check_forms() {
        let st = obj("stepped_sphere:k=4,d=2");
        // boundary probe with moderate step: every form holds
        let (r, stats) = check_plateau_decrease(&[2.0, 0.0], 0.5, &st, 100_000, 3).unwrap();
        assert!(r.pass, "{r:#?}");
        assert!(r.part("weak_literal").unwrap().pass);
        assert!(stats.zeta > 0.0);
        assert!(stats.level_masses.iter().sum::<f64>() <= st.bounding_box().volume());
        for (lo, hi) in stats.r_less.iter().zip(&stats.r_leq) {
            assert!(0.0 <= *lo && lo <= hi && *hi <= 1.0);
        }

        // interior point, small step: the gated bounds hold, the literal
        // form with the full Λ(L_f(m)) term does not
        let (r, stats) = check_plateau_decrease(&[0.8, 0.0], 1e-3, &st, 100_000, 3).unwrap();
        assert!(r.pass, "{r:#?}");
        assert!(stats.level_mass > 0.0);
        assert!(!r.part("weak_literal").unwrap().pass);

        // on the rim of a plateau with a moderate step the literal form
        // fails as well
        let (r, _) = check_plateau_decrease(&[1.0, 0.0], 0.5, &st, 100_000, 3).unwrap();
        assert!(r.pass, "{r:#?}");
        assert!(!r.part("weak_literal").unwrap().pass);
    }

    #[test]
    fn plateau_jumps_shrink_with_finer_steps() {
        let coarse = obj("stepped_sphere:k=4,d=2");
        let fine = obj("stepped_sphere:k=64,d=2");
        let (_, a) = check_plateau_decrease(&[1.0, 0.0], 0.5, &coarse, 100_000, 5).unwrap();
        let (_, b) = check_plateau_decrease(&[1.0, 0.0], 0.5, &fine, 100_000, 5).unwrap();
        assert!(b.zeta < a.zeta / 4.0, "{} vs {}", b.zeta, a.zeta);
    }

    #[test]
    fn step_scaling_identity_and_scale_invariance() {
        let s = obj("sphere:d=2");
        let r = check_step_scaling(&[1.0, 0.0], 0.1, 1.0, &s, 20_000, 1).unwrap();
        assert_eq!(r.empirical, r.bound);
        assert!(r.pass);
        let q = obj("quadratic_saddle:a=4");
        let r = check_step_scaling(&[0.0, 0.0], 0.1, 3.0, &q, 20_000, 1).unwrap();
        assert!(r.pass);
        assert!(check_step_scaling(&[0.0, 0.0], 0.1, 0.5, &q, 20_000, 1).is_err());
    }

    #[test]
    fn sigma_upper_bound_values() {
        let s = obj("sphere:d=2");
        let r = check_sigma_upper_bound(&[1.0, 0.0], 0.5, &s, 50_000, 1).unwrap();
        assert!((r.inputs["sigma"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!(r.pass, "{r:?}");
        let r = check_sigma_upper_bound(&[1.0, 0.0], 1.0, &s, 10_000, 1).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn gap_trivial_cases() {
        let c = obj("cubic_saddle");
        let z = [0.0, 0.0];
        let r = check_gap(&z, 0.3, 0.1, &c, &SigmaGrid::default_for(&z), 2000, 1).unwrap();
        assert!(r.pass, "{r:?}");
        let s = obj("sphere:d=2");
        let m = [1.0, 0.0];
        let r = check_gap(&m, 0.3, 0.3, &s, &SigmaGrid::default_for(&m), 4000, 1).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(check_gap(&m, 0.1, 0.3, &s, &SigmaGrid::default_for(&m), 4000, 1).is_err());
    }

    #[test]
    fn saddle_limit_is_not_critical() {
        let q = obj("quadratic_saddle:a=9");
        let limit = case_study_rate(CaseStudy::QuadraticSaddle, 9.0);
        let r =
            check_regular_limit(&[0.0, 0.0], &q, &[1e-1, 1e-3, 1e-5], limit, 100_000, 2).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(limit > 0.2);
    }

    #[test]
    fn gradient_by_differences() {
        let r = obj("rosenbrock2d");
        let g = finite_difference_gradient(&r, &[0.0, 0.0]);
        assert!((g[0] + 2.0).abs() < 1e-6 && g[1].abs() < 1e-6, "{g:?}");
    }
}
