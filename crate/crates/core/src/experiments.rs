//! Replicated ES runs: convergence, divergence, saddle traversal, premature
//! convergence, step-size band occupancy and dimension scaling.
//!
//! Replicate `i` of sweep point `j` runs with seed
//! `derive_seed(derive_seed(master, j), i)`. Replicates run in parallel and
//! are collected in index order, so reports are bit-identical for a given
//! config regardless of the worker count.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::es::{
    es_run, DivergenceMetric, EsParams, EsState, OutcomeLabel, RunTrace, StoppingRule,
};
use crate::estimators::{estimate_eta, estimate_xi, BoundStatus, SigmaGrid};
use crate::objectives::{
    make_objective, norm, CantorSpec, Fitness, JumpVariant, Objective, ObjectiveSpec,
};
use crate::rng;
use crate::stats::{line_fit, median, Proportion};

/// How replicates choose their starting state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitPolicy {
    Fixed {
        m0: Vec<f64>,
        sigma0: f64,
    },
    /// `m0` uniform on the box, `ln σ0` uniform on `[log_sigma_lo, log_sigma_hi]`.
    Uniform {
        lo: Vec<f64>,
        hi: Vec<f64>,
        log_sigma_lo: f64,
        log_sigma_hi: f64,
    },
}

impl InitPolicy {
    fn draw(&self, seed: u64) -> (Vec<f64>, f64) {
        match self {
            InitPolicy::Fixed { m0, sigma0 } => (m0.clone(), *sigma0),
            InitPolicy::Uniform {
                lo,
                hi,
                log_sigma_lo,
                log_sigma_hi,
            } => {
                let mut r = rng::stream(seed);
                let m0 = lo
                    .iter()
                    .zip(hi)
                    .map(|(l, h)| l + (h - l) * r.random::<f64>())
                    .collect();
                let ls = log_sigma_lo + (log_sigma_hi - log_sigma_lo) * r.random::<f64>();
                (m0, ls.exp())
            }
        }
    }

    fn dimension(&self) -> usize {
        match self {
            InitPolicy::Fixed { m0, .. } => m0.len(),
            InitPolicy::Uniform { lo, .. } => lo.len(),
        }
    }
}

/// Premature-convergence scenarios, each started at its critical point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrematureScenario {
    /// `x1³ + x2²` from the origin.
    CubicSaddle,
    /// Sphere with a closed-ball jump, from `1.5·e1`.
    JumpClosedBall,
    /// Fat Cantor barrier (depth 60) from `x = 1e-3`.
    FatCantor,
    /// Measure-zero Cantor barrier (depth 60) from `x = 1e-3`.
    NullCantor,
}

impl PrematureScenario {
    pub fn objective(self) -> ObjectiveSpec {
        match self {
            PrematureScenario::CubicSaddle => ObjectiveSpec::CubicSaddle { phi: false },
            PrematureScenario::JumpClosedBall => ObjectiveSpec::SphereJump {
                variant: JumpVariant::ClosedBall,
                d: 2,
                a: 1.0,
                phi: false,
            },
            PrematureScenario::FatCantor => ObjectiveSpec::CantorBarrier {
                cantor: CantorSpec::fat(60),
                phi: false,
            },
            PrematureScenario::NullCantor => ObjectiveSpec::CantorBarrier {
                cantor: CantorSpec::null(60),
                phi: false,
            },
        }
    }

    pub fn start(self) -> Vec<f64> {
        match self {
            PrematureScenario::CubicSaddle => vec![0.0, 0.0],
            PrematureScenario::JumpClosedBall => vec![1.5, 0.0],
            PrematureScenario::FatCantor | PrematureScenario::NullCantor => vec![1e-3],
        }
    }
}

/// Which experiment to run on top of the base configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Suite {
    /// Plain replicated runs of the configured objective.
    #[default]
    Replicates,
    /// Replicated runs on an objective with a known optimum.
    Convergence,
    /// Sphere in each dimension, started at `e1` with the configured `σ0`.
    RateVsDimension { dims: Vec<usize> },
    /// Quadratic saddle from `(delta, 0)`; success means reaching `f <= -1`.
    SaddleTraversal { a_values: Vec<f64>, delta: f64 },
    /// Start at the scenario's critical point with `σ0 = e^{K·c_minus}`.
    Premature {
        scenario: PrematureScenario,
        ks: Vec<u32>,
    },
    /// Linear ridge for each `a`, with the configured init.
    RidgeSweep { a_values: Vec<f64> },
    /// Sphere with strip jump for each `a`; `m0` is placed at
    /// `(a + offset[0], offset[1])`.
    StripSweep {
        a_values: Vec<f64>,
        offset: Vec<f64>,
    },
    /// Sphere run probing whether `σ` lies in `[ξ_{p_T}, η_{p_H}]`.
    Occupancy {
        p_t: f64,
        p_h: f64,
        probe_stride: u64,
        budget: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub objective: ObjectiveSpec,
    pub params: EsParams,
    pub init: InitPolicy,
    pub replicates: u64,
    pub stopping: StoppingRule,
    pub seed: u64,
    /// Keep every `record_stride`-th iteration in replicate histories.
    #[serde(default = "default_stride")]
    pub record_stride: u64,
    #[serde(default)]
    pub suite: Suite,
}

fn default_stride() -> u64 {
    100
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter("record_stride must be >= 1".into()));
        }
        self.objective.validate()
    }

    fn with(&self, objective: ObjectiveSpec, init: InitPolicy) -> Self {
        Self {
            objective,
            init,
            ..self.clone()
        }
    }
}

/// A thinned `(t, f(m), σ)` sample of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub t: u64,
    pub f: f64,
    pub log_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: u64,
    pub seed: u64,
    pub m0: Vec<f64>,
    pub sigma0: f64,
    pub outcome: OutcomeLabel,
    pub final_f: f64,
    pub final_m: Vec<f64>,
    pub final_log_sigma: f64,
    pub iterations: u64,
    pub accepted: u64,
    /// Slope of `ln f(m)` per iteration over the second half of the run.
    pub log_f_slope: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub history: Vec<HistoryPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub replicates: u64,
    pub outcomes: BTreeMap<String, Proportion>,
    pub median_iterations_to_target: Option<f64>,
    pub median_log_f_slope: Option<f64>,
    pub median_final_f: Option<f64>,
}

impl Aggregates {
    pub fn frequency(&self, label: OutcomeLabel) -> Proportion {
        self.outcomes[label.as_str()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub objective: String,
    pub value: Option<f64>,
    pub params: EsParams,
    pub replicates: Vec<ReplicateResult>,
    pub aggregates: Aggregates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyStats {
    pub p_t: f64,
    pub p_h: f64,
    /// `ξ_{p_T}` and `η_{p_H}` at a unit-norm point; the band at `m` is
    /// `‖m‖` times this.
    pub xi_unit: Option<f64>,
    pub eta_unit: Option<f64>,
    pub xi_status: BoundStatus,
    pub eta_status: BoundStatus,
    pub degenerate_band: bool,
    pub probes: u64,
    pub in_band: u64,
    pub in_band_fraction: f64,
    /// Transitions from outside the band to inside it.
    pub reentries: u64,
    pub first_entry: Option<u64>,
    /// Longest run of consecutive probes outside the band.
    pub max_excursion: u64,
    /// Log-ratio of `σ / ‖m‖` at the probes; kept for plotting.
    pub normalized_log_sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub points: Vec<SweepPoint>,
    /// `slope(last dim) / slope(first dim)` for dimension sweeps.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub slope_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub occupancy: Option<OccupancyStats>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn point(&self, label: &str) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.label == label)
    }

    /// `experiment,replicate,seed,outcome,final_f,final_log_sigma,iterations`
    pub fn write_replicates_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "experiment,replicate,seed,outcome,final_f,final_log_sigma,iterations,accepted"
        )?;
        for p in &self.points {
            for r in &p.replicates {
                writeln!(
                    w,
                    "{},{},{},{},{:e},{:e},{},{}",
                    p.label,
                    r.replicate,
                    r.seed,
                    r.outcome.as_str(),
                    r.final_f,
                    r.final_log_sigma,
                    r.iterations,
                    r.accepted
                )?;
            }
        }
        Ok(())
    }

    /// Long format for plotting: `experiment,replicate,t,f,sigma`.
    pub fn write_long_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "experiment,replicate,t,f,sigma")?;
        for p in &self.points {
            for r in &p.replicates {
                for h in &r.history {
                    writeln!(
                        w,
                        "{},{},{},{:e},{:e}",
                        p.label,
                        r.replicate,
                        h.t,
                        h.f,
                        h.log_sigma.exp()
                    )?;
                }
            }
        }
        Ok(())
    }
}

fn assert_elitist(trace: &RunTrace) {
    for w in trace.records.windows(2) {
        assert!(
            w[1].f_parent <= w[0].f_parent,
            "elitism violated at t={}",
            w[1].t
        );
    }
    if let Some(last) = trace.records.last() {
        assert!(
            trace.final_f <= last.f_parent,
            "elitism violated at the end"
        );
    }
}

fn tail_slope(history: &[HistoryPoint]) -> Option<f64> {
    let end = history.last()?.t;
    let (ts, ls): (Vec<f64>, Vec<f64>) = history
        .iter()
        .filter(|h| h.t * 2 >= end && h.f > 0.0)
        .map(|h| (h.t as f64, h.f.ln()))
        .unzip();
    if ts.len() < 3 {
        return None;
    }
    line_fit(&ts, &ls).map(|fit| fit.slope)
}

fn run_replicate(
    cfg: &ExperimentConfig,
    f: &Objective,
    master: u64,
    index: u64,
) -> Result<ReplicateResult> {
    let seed = rng::derive_seed(master, index);
    let (m0, sigma0) = cfg.init.draw(rng::derive_seed(seed, u64::MAX));
    let trace = es_run(
        &cfg.params,
        f,
        &m0,
        sigma0,
        &cfg.stopping,
        seed,
        cfg.record_stride,
    )?;
    assert_elitist(&trace);
    let mut history: Vec<HistoryPoint> = trace
        .records
        .iter()
        .map(|r| HistoryPoint {
            t: r.t,
            f: r.f_parent,
            log_sigma: r.sigma_before.ln(),
        })
        .collect();
    history.push(HistoryPoint {
        t: trace.iterations,
        f: trace.final_f,
        log_sigma: trace.final_state.log_sigma,
    });
    let log_f_slope = tail_slope(&history);
    Ok(ReplicateResult {
        replicate: index,
        seed,
        m0,
        sigma0,
        outcome: trace.outcome,
        final_f: trace.final_f,
        final_m: trace.final_state.m.clone(),
        final_log_sigma: trace.final_state.log_sigma,
        iterations: trace.iterations,
        accepted: trace.accepted,
        log_f_slope,
        history,
    })
}

fn aggregate(reps: &[ReplicateResult]) -> Aggregates {
    let n = reps.len() as u64;
    let outcomes = OutcomeLabel::ALL
        .iter()
        .map(|l| {
            let k = reps.iter().filter(|r| r.outcome == *l).count() as u64;
            (l.as_str().to_string(), Proportion::new(k, n))
        })
        .collect();
    let hits: Vec<f64> = reps
        .iter()
        .filter(|r| r.outcome == OutcomeLabel::ConvergedToOptimum)
        .map(|r| r.iterations as f64)
        .collect();
    let slopes: Vec<f64> = reps.iter().filter_map(|r| r.log_f_slope).collect();
    let finals: Vec<f64> = reps.iter().map(|r| r.final_f).collect();
    Aggregates {
        replicates: n,
        outcomes,
        median_iterations_to_target: median(&hits),
        median_log_f_slope: median(&slopes),
        median_final_f: median(&finals),
    }
}

/// Replicated runs of `cfg` as one sweep point.
pub fn run_point(
    cfg: &ExperimentConfig,
    label: &str,
    value: Option<f64>,
    master: u64,
) -> Result<SweepPoint> {
    cfg.validate()?;
    let f = make_objective(&cfg.objective)?;
    if cfg.init.dimension() != f.dimension() {
        return Err(Error::DimensionMismatch {
            expected: f.dimension(),
            found: cfg.init.dimension(),
        });
    }
    let replicates = (0..cfg.replicates)
        .into_par_iter()
        .map(|i| run_replicate(cfg, &f, master, i))
        .collect::<Result<Vec<_>>>()?;
    let aggregates = aggregate(&replicates);
    Ok(SweepPoint {
        label: label.to_string(),
        objective: f.id(),
        value,
        params: cfg.params,
        replicates,
        aggregates,
    })
}

fn report(config: &ExperimentConfig, points: Vec<SweepPoint>) -> ExperimentReport {
    ExperimentReport {
        config: config.clone(),
        points,
        slope_ratio: None,
        occupancy: None,
        notes: Vec::new(),
    }
}

/// Dispatch on `config.suite`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    match &config.suite {
        Suite::Replicates => {
            let p = run_point(config, &config.name, None, rng::derive_seed(config.seed, 0))?;
            Ok(report(config, vec![p]))
        }
        Suite::Convergence => run_convergence_suite(config),
        Suite::RateVsDimension { dims } => run_rate_vs_dimension(dims, config),
        Suite::SaddleTraversal { a_values, delta } => {
            run_saddle_traversal(a_values, *delta, config)
        }
        Suite::Premature { scenario, ks } => run_premature_suite(*scenario, ks, config),
        Suite::RidgeSweep { a_values } => run_ridge_sweep(a_values, config),
        Suite::StripSweep { a_values, offset } => run_strip_jump_sweep(a_values, offset, config),
        Suite::Occupancy {
            p_t,
            p_h,
            probe_stride,
            budget,
        } => run_occupancy(config, *p_t, *p_h, *probe_stride, *budget),
    }
}

/// Replicated runs on an objective with a known optimum.
pub fn run_convergence_suite(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let f = make_objective(&config.objective)?;
    if f.known_optimum().is_none() {
        return Err(Error::InvalidParameter(format!(
            "{} has no known optimum",
            f.id()
        )));
    }
    let p = run_point(config, &config.name, None, rng::derive_seed(config.seed, 0))?;
    Ok(report(config, vec![p]))
}

/// Sphere runs per dimension from `e1`; reports the median log-f slope per
/// dimension and the ratio between the last and the first dimension.
pub fn run_rate_vs_dimension(
    dims: &[usize],
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if dims.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one dimension".into(),
        ));
    }
    let sigma0 = match &config.init {
        InitPolicy::Fixed { sigma0, .. } => *sigma0,
        InitPolicy::Uniform { .. } => {
            return Err(Error::InvalidParameter(
                "dimension sweeps need a fixed sigma0".into(),
            ))
        }
    };
    let mut points = Vec::new();
    for (j, &d) in dims.iter().enumerate() {
        let mut m0 = vec![0.0; d];
        m0[0] = 1.0;
        let cfg = config.with(ObjectiveSpec::sphere(d), InitPolicy::Fixed { m0, sigma0 });
        points.push(run_point(
            &cfg,
            &format!("d={d}"),
            Some(d as f64),
            rng::derive_seed(config.seed, j as u64),
        )?);
    }
    let mut r = report(config, points);
    if r.points.len() >= 2 {
        let first = r.points[0].aggregates.median_log_f_slope;
        let last = r
            .points
            .last()
            .and_then(|p| p.aggregates.median_log_f_slope);
        r.slope_ratio = match (first, last) {
            (Some(a), Some(b)) if a != 0.0 => Some(b / a),
            _ => None,
        };
    }
    Ok(r)
}

/// Quadratic saddle from `(delta, 0)`. A replicate traverses the saddle when
/// it reaches `f(m) <= -1`, reported as `Diverged`.
pub fn run_saddle_traversal(
    a_values: &[f64],
    delta: f64,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let sigma0 = fixed_sigma0(config)?;
    let stopping = StoppingRule {
        divergence_radius: Some(1.0),
        divergence_metric: DivergenceMetric::NegativeF,
        ..config.stopping.clone()
    };
    let mut points = Vec::new();
    for (j, &a) in a_values.iter().enumerate() {
        let mut cfg = config.with(
            ObjectiveSpec::QuadraticSaddle { a, phi: false },
            InitPolicy::Fixed {
                m0: vec![delta, 0.0],
                sigma0,
            },
        );
        cfg.stopping = stopping.clone();
        points.push(run_point(
            &cfg,
            &format!("a={a}"),
            Some(a),
            rng::derive_seed(config.seed, j as u64),
        )?);
    }
    Ok(report(config, points))
}

fn fixed_sigma0(config: &ExperimentConfig) -> Result<f64> {
    match &config.init {
        InitPolicy::Fixed { sigma0, .. } => Ok(*sigma0),
        InitPolicy::Uniform {
            log_sigma_lo,
            log_sigma_hi,
            ..
        } => Ok((0.5 * (log_sigma_lo + log_sigma_hi)).exp()),
    }
}

/// Start at the scenario's critical point with `σ0 = e^{K·c_minus}` for each
/// `K`. Crossing below level `-1` counts as `Diverged`.
pub fn run_premature_suite(
    scenario: PrematureScenario,
    ks: &[u32],
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let stopping = StoppingRule {
        divergence_radius: Some(1.0),
        divergence_metric: DivergenceMetric::NegativeF,
        ..config.stopping.clone()
    };
    let mut points = Vec::new();
    for (j, &k) in ks.iter().enumerate() {
        let sigma0 = (k as f64 * config.params.c_minus()).exp();
        let mut cfg = config.with(
            scenario.objective(),
            InitPolicy::Fixed {
                m0: scenario.start(),
                sigma0,
            },
        );
        cfg.stopping = stopping.clone();
        points.push(run_point(
            &cfg,
            &format!("K={k}"),
            Some(k as f64),
            rng::derive_seed(config.seed, j as u64),
        )?);
    }
    let mut r = report(config, points);
    if matches!(
        scenario,
        PrematureScenario::FatCantor | PrematureScenario::NullCantor
    ) {
        r.notes
            .push("Cantor membership evaluated at depth 60".into());
    }
    Ok(r)
}

/// Linear ridge per `a` with the configured init and stopping rule.
pub fn run_ridge_sweep(a_values: &[f64], config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut points = Vec::new();
    for (j, &a) in a_values.iter().enumerate() {
        let cfg = config.with(
            ObjectiveSpec::LinearRidge { a, phi: false },
            config.init.clone(),
        );
        points.push(run_point(
            &cfg,
            &format!("a={a}"),
            Some(a),
            rng::derive_seed(config.seed, j as u64),
        )?);
    }
    Ok(report(config, points))
}

/// Sphere with a strip jump per `a`, started at `(a, 0) + offset`.
pub fn run_strip_jump_sweep(
    a_values: &[f64],
    offset: &[f64],
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if offset.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: offset.len(),
        });
    }
    let sigma0 = fixed_sigma0(config)?;
    let mut points = Vec::new();
    for (j, &a) in a_values.iter().enumerate() {
        let cfg = config.with(
            ObjectiveSpec::SphereJump {
                variant: JumpVariant::Strip,
                d: 2,
                a,
                phi: false,
            },
            InitPolicy::Fixed {
                m0: vec![a + offset[0], offset[1]],
                sigma0,
            },
        );
        points.push(run_point(
            &cfg,
            &format!("a={a}"),
            Some(a),
            rng::derive_seed(config.seed, j as u64),
        )?);
    }
    Ok(report(config, points))
}

/// Exact power-of-two rescaling keeps `m` away from underflow on the
/// sphere. `σ/‖m‖` and every acceptance decision are scale invariant.
const RESCALE_BELOW: f64 = 1e-100;
const RESCALE_EXP: i32 = 300;

/// A single sphere run (the configured dimension, init and params) that
/// checks every `probe_stride` iterations whether `σ` lies in
/// `[ξ_{p_T}(m), η_{p_H}(m)]`.
///
/// Both thresholds scale with `‖m‖` on the sphere, so they are estimated
/// once at a unit-norm point with `budget` samples per grid point.
pub fn run_occupancy(
    config: &ExperimentConfig,
    p_t: f64,
    p_h: f64,
    probe_stride: u64,
    budget: u64,
) -> Result<ExperimentReport> {
    let d = match config.objective {
        ObjectiveSpec::Sphere { d, .. } => d,
        _ => {
            return Err(Error::InvalidParameter(
                "occupancy runs use the sphere's scale invariance".into(),
            ))
        }
    };
    let probe_stride = probe_stride.max(1);
    let f = make_objective(&config.objective)?;
    let mut unit = vec![0.0; d];
    unit[0] = 1.0;
    let grid = SigmaGrid {
        lo: 1e-4,
        hi: 1e2,
        points: 64,
    };
    let xi = estimate_xi(
        &unit,
        p_t,
        &f,
        &grid,
        budget,
        rng::derive_seed(config.seed, 1),
    )?;
    let eta = estimate_eta(
        &unit,
        p_h,
        &f,
        &grid,
        budget,
        rng::derive_seed(config.seed, 2),
    )?;
    let (xi_u, eta_u) = (xi.resolved(), eta.resolved());
    let degenerate = match (xi_u, eta_u) {
        (Some(a), Some(b)) => a > b,
        _ => true,
    };

    let (m0, sigma0) = config.init.draw(rng::derive_seed(config.seed, 3));
    let mut state = EsState::new(m0, sigma0)?;
    let run_seed = rng::derive_seed(config.seed, 0);
    let mut stream = rng::stream(run_seed);
    let mut f_m = f.evaluate(&state.m);
    let mut x = vec![0.0; d];

    let (mut probes, mut inside, mut reentries, mut excursion, mut max_excursion) =
        (0u64, 0u64, 0u64, 0u64, 0u64);
    let mut accepted_total = 0u64;
    let mut first_entry = None;
    let mut was_inside: Option<bool> = None;
    let mut normalized = Vec::new();
    let mut history = Vec::new();
    let max_t = config.stopping.max_iterations;
    while state.t < max_t {
        let r = norm(&state.m);
        if r < RESCALE_BELOW && r > 0.0 {
            for v in state.m.iter_mut() {
                *v *= 2f64.powi(RESCALE_EXP);
            }
            state.log_sigma += RESCALE_EXP as f64 * std::f64::consts::LN_2;
            f_m = f.evaluate(&state.m);
        }
        if state.t % probe_stride == 0 {
            let rel = state.log_sigma - norm(&state.m).ln();
            normalized.push(rel);
            let now = match (xi_u, eta_u) {
                (Some(a), Some(b)) if !degenerate => rel >= a.ln() && rel <= b.ln(),
                _ => false,
            };
            probes += 1;
            if now {
                inside += 1;
                first_entry.get_or_insert(state.t);
                if was_inside == Some(false) {
                    reentries += 1;
                }
                excursion = 0;
            } else {
                excursion += 1;
                max_excursion = max_excursion.max(excursion);
            }
            was_inside = Some(now);
        }
        if state.t % config.record_stride == 0 {
            history.push(HistoryPoint {
                t: state.t,
                f: f_m,
                log_sigma: state.log_sigma,
            });
        }
        let sigma = state.sigma();
        for (xi, mi) in x.iter_mut().zip(&state.m) {
            let z: f64 = stream.sample(rand_distr::StandardNormal);
            *xi = mi + sigma * z;
        }
        let f_x = f.evaluate(&x);
        let accepted = f_x <= f_m;
        if accepted {
            std::mem::swap(&mut state.m, &mut x);
            f_m = f_x;
            accepted_total += 1;
        }
        state.log_sigma += if accepted {
            config.params.c_plus()
        } else {
            config.params.c_minus()
        };
        state.t += 1;
    }

    let occupancy = OccupancyStats {
        p_t,
        p_h,
        xi_unit: xi_u,
        eta_unit: eta_u,
        xi_status: xi.status,
        eta_status: eta.status,
        degenerate_band: degenerate,
        probes,
        in_band: inside,
        in_band_fraction: if probes == 0 {
            0.0
        } else {
            inside as f64 / probes as f64
        },
        reentries,
        first_entry,
        max_excursion,
        normalized_log_sigma: normalized,
    };
    let replicate = ReplicateResult {
        replicate: 0,
        seed: run_seed,
        m0: config.init.draw(rng::derive_seed(config.seed, 3)).0,
        sigma0,
        outcome: OutcomeLabel::BudgetExhausted,
        final_f: f_m,
        final_m: state.m.clone(),
        final_log_sigma: state.log_sigma,
        iterations: state.t,
        accepted: accepted_total,
        log_f_slope: None,
        history,
    };
    let aggregates = aggregate(std::slice::from_ref(&replicate));
    let point = SweepPoint {
        label: config.name.clone(),
        objective: f.id(),
        value: None,
        params: config.params,
        replicates: vec![replicate],
        aggregates,
    };
    let mut r = report(config, vec![point]);
    r.notes
        .push("f and m are reported after exact power-of-two rescaling of the sphere".into());
    r.occupancy = Some(occupancy);
    Ok(r)
}
