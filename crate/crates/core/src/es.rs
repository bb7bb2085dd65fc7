//! The (1+1)-ES with success-based multiplicative step-size control.
//!
//! The step size is kept as `log σ` so that long rejection streaks cannot
//! underflow it; `σ` itself is only materialized when sampling.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{check_dimension, norm, Fitness};
use crate::rng::{self, Stream};

/// Log step-size multipliers on success (`c_plus > 0`) and failure
/// (`c_minus < 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEsParams")]
pub struct EsParams {
    c_plus: f64,
    c_minus: f64,
}

#[derive(Deserialize)]
struct RawEsParams {
    c_plus: f64,
    c_minus: f64,
}

impl TryFrom<RawEsParams> for EsParams {
    type Error = Error;

    fn try_from(raw: RawEsParams) -> Result<Self> {
        Self::new(raw.c_plus, raw.c_minus)
    }
}

impl EsParams {
    pub fn new(c_plus: f64, c_minus: f64) -> Result<Self> {
        if !(c_plus.is_finite() && c_plus > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "c_plus must be positive, got {c_plus}"
            )));
        }
        if !(c_minus.is_finite() && c_minus < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "c_minus must be negative, got {c_minus}"
            )));
        }
        if c_plus <= -c_minus {
            return Err(Error::InvalidParameter(format!(
                "need c_plus > -c_minus (tau < 1/2), got c_plus={c_plus}, c_minus={c_minus}"
            )));
        }
        Ok(Self { c_plus, c_minus })
    }

    /// Params with target success rate `tau` and success multiplier `c_plus`.
    pub fn with_tau(c_plus: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "tau must lie in (0, 1/2), got {tau}"
            )));
        }
        Self::new(c_plus, -c_plus * tau / (1.0 - tau))
    }

    /// `c_plus = 2/d`, `c_minus = -1/(2d)`.
    pub fn dimension_scaled(d: usize) -> Self {
        let d = d.max(1) as f64;
        Self {
            c_plus: 2.0 / d,
            c_minus: -0.5 / d,
        }
    }

    pub fn c_plus(&self) -> f64 {
        self.c_plus
    }

    pub fn c_minus(&self) -> f64 {
        self.c_minus
    }

    /// Target success probability `c_minus / (c_minus - c_plus)`.
    pub fn tau(&self) -> f64 {
        // Same quantity, written so that c_plus = -4 c_minus gives 1/5 exactly.
        1.0 / (1.0 - self.c_plus / self.c_minus)
    }
}

impl Default for EsParams {
    /// `c_plus = ln 2`, `c_minus = -ln 2 / 4`: the 1/5 success rule.
    fn default() -> Self {
        let ln2 = std::f64::consts::LN_2;
        Self {
            c_plus: ln2,
            c_minus: -ln2 / 4.0,
        }
    }
}

/// Markov-chain state `(m, σ)` at iteration `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsState {
    pub m: Vec<f64>,
    pub log_sigma: f64,
    pub t: u64,
}

impl EsState {
    pub fn new(m: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("m must be finite".into()));
        }
        Ok(Self {
            m,
            log_sigma: sigma.ln(),
            t: 0,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    pub fn dimension(&self) -> usize {
        self.m.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub m_before: Vec<f64>,
    pub sigma_before: f64,
    pub x: Vec<f64>,
    pub f_parent: f64,
    pub f_offspring: f64,
    pub accepted: bool,
    pub sigma_after: f64,
}

/// Draw `m + σ z` with `z ~ N(0, I)`.
pub fn sample_offspring(state: &EsState, rng: &mut Stream) -> Vec<f64> {
    let mut x = vec![0.0; state.dimension()];
    sample_into(state, rng, &mut x);
    x
}

fn sample_into(state: &EsState, rng: &mut Stream, x: &mut [f64]) {
    let sigma = state.sigma();
    for (xi, mi) in x.iter_mut().zip(&state.m) {
        let z: f64 = rng.sample(StandardNormal);
        *xi = mi + sigma * z;
    }
}

/// One iteration: sample, compare, update.
pub fn es_step(
    params: &EsParams,
    state: &EsState,
    f: &impl Fitness,
    rng: &mut Stream,
) -> Result<(EsState, StepRecord)> {
    check_dimension(f, &state.m)?;
    let x = sample_offspring(state, rng);
    let f_parent = finite(f.evaluate(&state.m), state.t)?;
    apply_offspring(params, state, x, f_parent, f)
}

/// Selection and step-size update for a given offspring. `f_parent` must be
/// `f(state.m)`.
pub fn apply_offspring(
    params: &EsParams,
    state: &EsState,
    x: Vec<f64>,
    f_parent: f64,
    f: &impl Fitness,
) -> Result<(EsState, StepRecord)> {
    let f_offspring = finite(f.evaluate(&x), state.t)?;
    let accepted = f_offspring <= f_parent;
    let log_sigma = state.log_sigma
        + if accepted {
            params.c_plus
        } else {
            params.c_minus
        };
    let record = StepRecord {
        t: state.t,
        m_before: state.m.clone(),
        sigma_before: state.sigma(),
        x: x.clone(),
        f_parent,
        f_offspring,
        accepted,
        sigma_after: log_sigma.exp(),
    };
    let next = EsState {
        m: if accepted { x } else { state.m.clone() },
        log_sigma,
        t: state.t + 1,
    };
    Ok((next, record))
}

fn finite(value: f64, iteration: u64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteObjective { value, iteration })
    }
}

/// When to stop a run. Only `max_iterations` is mandatory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoppingRule {
    pub max_iterations: u64,
    /// Stop once `f(m) <= f_target`.
    pub f_target: Option<f64>,
    /// Stop once `σ < sigma_floor · max(‖m‖, 1)`. The floor is relative to
    /// the parent's magnitude because below `ulp(‖m‖)` offspring round back
    /// onto `m` and every step becomes an accepted tie.
    pub sigma_floor: Option<f64>,
    /// Additionally require this many trailing consecutive rejections before
    /// declaring a stall. Zero disables the requirement.
    pub stall_window: u64,
    /// Stop once the divergence metric exceeds this value.
    pub divergence_radius: Option<f64>,
    pub divergence_metric: DivergenceMetric,
}

/// What `divergence_radius` is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceMetric {
    /// `max(‖m‖, -f(m))`
    #[default]
    Either,
    /// `-f(m)`: the run has crossed below level `-radius`.
    NegativeF,
    /// `‖m‖`
    Norm,
}

impl DivergenceMetric {
    fn tripped(self, radius: f64, m: &[f64], f_m: f64) -> bool {
        match self {
            DivergenceMetric::Either => -f_m > radius || norm(m) > radius,
            DivergenceMetric::NegativeF => -f_m > radius,
            DivergenceMetric::Norm => norm(m) > radius,
        }
    }
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            f_target: None,
            sigma_floor: None,
            stall_window: 0,
            divergence_radius: None,
            divergence_metric: DivergenceMetric::Either,
        }
    }
}

impl StoppingRule {
    pub fn budget(max_iterations: u64) -> Self {
        Self {
            max_iterations,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeLabel {
    ConvergedToOptimum,
    Diverged,
    Stalled,
    BudgetExhausted,
}

impl OutcomeLabel {
    pub const ALL: [OutcomeLabel; 4] = [
        OutcomeLabel::ConvergedToOptimum,
        OutcomeLabel::Diverged,
        OutcomeLabel::Stalled,
        OutcomeLabel::BudgetExhausted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeLabel::ConvergedToOptimum => "converged_to_optimum",
            OutcomeLabel::Diverged => "diverged",
            OutcomeLabel::Stalled => "stalled",
            OutcomeLabel::BudgetExhausted => "budget_exhausted",
        }
    }
}

/// Which stopping condition ended the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetReached,
    Diverged,
    SigmaFloor,
    Budget,
}

/// Full history and summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub params: EsParams,
    pub objective: String,
    pub seed: u64,
    pub stopping: StoppingRule,
    /// Records are kept for iterations `t` with `t % stride == 0`; a stride
    /// of zero keeps none.
    pub stride: u64,
    pub records: Vec<StepRecord>,
    pub initial: EsState,
    pub final_state: EsState,
    pub final_f: f64,
    pub iterations: u64,
    pub accepted: u64,
    pub trailing_rejections: u64,
    pub stop_reason: StopReason,
    pub outcome: OutcomeLabel,
}

impl RunTrace {
    /// One JSON object per record, fields in declaration order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// CSV with header `t,m0,...,m{d-1},sigma,f,accepted`, describing the
    /// parent before each recorded step.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.initial.dimension();
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|i| format!("m{i}")));
        header.extend(["sigma", "f", "accepted"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for r in &self.records {
            write!(w, "{}", r.t)?;
            for v in &r.m_before {
                write!(w, ",{v:e}")?;
            }
            writeln!(w, ",{:e},{:e},{}", r.sigma_before, r.f_parent, r.accepted)?;
        }
        Ok(())
    }
}

/// Run the ES from `(m0, sigma0)` until `stopping` fires.
pub fn es_run(
    params: &EsParams,
    f: &impl Fitness,
    m0: &[f64],
    sigma0: f64,
    stopping: &StoppingRule,
    seed: u64,
    stride: u64,
) -> Result<RunTrace> {
    let initial = EsState::new(m0.to_vec(), sigma0)?;
    check_dimension(f, m0)?;
    let mut rng = rng::stream(seed);
    let mut state = initial.clone();
    let mut f_m = finite(f.evaluate(&state.m), 0)?;
    let mut records = Vec::new();
    let mut accepted_total = 0u64;
    let mut trailing = 0u64;
    let mut x = vec![0.0; m0.len()];
    let log_floor = stopping.sigma_floor.map(f64::ln);

    let stop_reason = loop {
        if stopping.f_target.is_some_and(|target| f_m <= target) {
            break StopReason::TargetReached;
        }
        if let Some(radius) = stopping.divergence_radius {
            if stopping.divergence_metric.tripped(radius, &state.m, f_m) {
                break StopReason::Diverged;
            }
        }
        if let Some(log_floor) = log_floor {
            let scale = norm(&state.m).max(1.0).ln();
            if state.log_sigma < log_floor + scale && trailing >= stopping.stall_window {
                break StopReason::SigmaFloor;
            }
        }
        if state.t >= stopping.max_iterations {
            break StopReason::Budget;
        }

        sample_into(&state, &mut rng, &mut x);
        let f_x = finite(f.evaluate(&x), state.t)?;
        let accepted = f_x <= f_m;
        let log_sigma_after = state.log_sigma
            + if accepted {
                params.c_plus
            } else {
                params.c_minus
            };
        if stride > 0 && state.t % stride == 0 {
            records.push(StepRecord {
                t: state.t,
                m_before: state.m.clone(),
                sigma_before: state.sigma(),
                x: x.clone(),
                f_parent: f_m,
                f_offspring: f_x,
                accepted,
                sigma_after: log_sigma_after.exp(),
            });
        }
        if accepted {
            std::mem::swap(&mut state.m, &mut x);
            f_m = f_x;
            accepted_total += 1;
            trailing = 0;
        } else {
            trailing += 1;
        }
        state.log_sigma = log_sigma_after;
        state.t += 1;
    };

    let mut trace = RunTrace {
        params: *params,
        objective: f.id(),
        seed,
        stopping: stopping.clone(),
        stride,
        records,
        initial,
        iterations: state.t,
        final_state: state,
        final_f: f_m,
        accepted: accepted_total,
        trailing_rejections: trailing,
        stop_reason,
        outcome: OutcomeLabel::BudgetExhausted,
    };
    trace.outcome = classify_outcome(&trace, f);
    Ok(trace)
}

/// Label a finished run.
///
/// A run counts as converged if it hit `f_target` or ended within the
/// objective's optimum tolerance, whatever stopping condition fired.
pub fn classify_outcome(trace: &RunTrace, f: &impl Fitness) -> OutcomeLabel {
    if trace.stop_reason == StopReason::TargetReached {
        return OutcomeLabel::ConvergedToOptimum;
    }
    if let Some(opt) = f.known_optimum() {
        let dist_sq: f64 = trace
            .final_state
            .m
            .iter()
            .zip(&opt.point)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if dist_sq.sqrt() <= opt.tolerance {
            return OutcomeLabel::ConvergedToOptimum;
        }
    }
    match trace.stop_reason {
        StopReason::Diverged => OutcomeLabel::Diverged,
        StopReason::SigmaFloor => OutcomeLabel::Stalled,
        _ => OutcomeLabel::BudgetExhausted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::Objective;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn sphere2() -> Objective {
        Objective::parse("sphere:d=2").unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(EsParams::new(1.0, -0.5).is_ok());
        assert!(EsParams::new(0.0, -0.5).is_err());
        assert!(EsParams::new(1.0, 0.0).is_err());
        assert!(EsParams::new(0.5, -0.5).is_err());
        assert!(EsParams::new(f64::NAN, -0.5).is_err());
        let p = EsParams::with_tau(1.0, 0.01).unwrap();
        assert!((p.tau() - 0.01).abs() < 1e-15);
        assert!(EsParams::with_tau(1.0, 0.5).is_err());
    }

    #[test]
    fn one_fifth_rule_is_exact() {
        assert_eq!(EsParams::default().tau(), 0.2);
        for d in 1..50 {
            assert_eq!(EsParams::dimension_scaled(d).tau(), 0.2);
        }
        for c in [1e-3, 0.1, 0.7, 1.0, 3.0, 17.5] {
            assert_eq!(EsParams::new(c, -c / 4.0).unwrap().tau(), 0.2);
        }
    }

    #[test]
    fn step_examples() {
        let p = EsParams::default();
        let f = sphere2();
        let s = EsState::new(vec![1.0, 0.0], 0.3).unwrap();

        let (next, rec) = apply_offspring(&p, &s, vec![0.5, 0.0], 1.0, &f).unwrap();
        assert!(rec.accepted);
        assert_eq!(next.m, vec![0.5, 0.0]);
        assert!((next.sigma() - 0.6).abs() < 1e-15);
        assert_eq!(next.t, 1);

        let (next, rec) = apply_offspring(&p, &s, vec![2.0, 0.0], 1.0, &f).unwrap();
        assert!(!rec.accepted);
        assert_eq!(next.m, vec![1.0, 0.0]);
        assert!((next.sigma() - 0.3 * (-LN_2 / 4.0).exp()).abs() < 1e-15);
        assert!((next.sigma() - 0.25225).abs() < 1e-4);

        // ties are accepted
        let (next, rec) = apply_offspring(&p, &s, vec![0.0, 1.0], 1.0, &f).unwrap();
        assert!(rec.accepted);
        assert!(next.sigma() > s.sigma());
    }

    #[test]
    fn offspring_moments() {
        let s = EsState::new(vec![1.0, 0.0], 0.3).unwrap();
        let mut rng = rng::stream(11);
        let n = 100_000;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = sample_offspring(&s, &mut rng);
            let (a, b) = (x[0] - 1.0, x[1]);
            sx += a;
            sy += b;
            sxx += a * a;
            syy += b * b;
            sxy += a * b;
        }
        let n = n as f64;
        let se_mean = 0.3 / n.sqrt();
        assert!((sx / n).abs() < 3.0 * se_mean);
        assert!((sy / n).abs() < 3.0 * se_mean);
        // Var of a squared N(0, 0.09) is 2·0.09², of a product 0.09²
        let v = 0.09;
        let se_var = (2.0 * v * v / n).sqrt();
        assert!((sxx / n - v).abs() < 3.0 * se_var);
        assert!((syy / n - v).abs() < 3.0 * se_var);
        assert!((sxy / n).abs() < 3.0 * v / n.sqrt());
    }

    #[test]
    fn symmetric_in_one_dimension() {
        let s = EsState::new(vec![0.0], 1.0).unwrap();
        let mut rng = rng::stream(5);
        let n = 100_000;
        let below = (0..n)
            .filter(|_| sample_offspring(&s, &mut rng)[0] < 0.0)
            .count();
        let se = (0.25 / n as f64).sqrt();
        assert!((below as f64 / n as f64 - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn es_step_matches_run() {
        let p = EsParams::default();
        let f = sphere2();
        let trace = es_run(&p, &f, &[1.0, 0.0], 0.3, &StoppingRule::budget(50), 9, 1).unwrap();
        let mut rng = rng::stream(9);
        let mut s = EsState::new(vec![1.0, 0.0], 0.3).unwrap();
        for r in &trace.records {
            let (next, rec) = es_step(&p, &s, &f, &mut rng).unwrap();
            assert_eq!(&rec, r);
            s = next;
        }
        assert_eq!(s, trace.final_state);
    }

    #[test]
    fn sphere_converges() {
        let stop = StoppingRule {
            max_iterations: 10_000,
            f_target: Some(1e-10),
            ..Default::default()
        };
        let t = es_run(
            &EsParams::default(),
            &sphere2(),
            &[1.0, 0.0],
            0.3,
            &stop,
            1,
            0,
        )
        .unwrap();
        assert_eq!(t.outcome, OutcomeLabel::ConvergedToOptimum);
        assert!(t.final_f <= 1e-10);
    }

    #[test]
    fn empty_run() {
        let t = es_run(
            &EsParams::default(),
            &sphere2(),
            &[1.0, 0.0],
            0.3,
            &StoppingRule::budget(0),
            1,
            1,
        )
        .unwrap();
        assert!(t.records.is_empty());
        assert_eq!(t.outcome, OutcomeLabel::BudgetExhausted);
        assert_eq!(t.iterations, 0);
    }

    #[test]
    fn ridge_diverges() {
        let f = Objective::parse("linear_ridge:a=0.5").unwrap();
        let stop = StoppingRule {
            max_iterations: 100_000,
            divergence_radius: Some(1e6),
            ..Default::default()
        };
        let t = es_run(&EsParams::default(), &f, &[0.0, 0.0], 1.0, &stop, 3, 0).unwrap();
        assert_eq!(t.outcome, OutcomeLabel::Diverged);
    }

    #[test]
    fn non_finite_values_abort() {
        let f = crate::objectives::FnFitness::new(
            1,
            |x: &[f64]| if x[0] > 3.0 { f64::NAN } else { -x[0] },
        );
        let err = es_run(
            &EsParams::default(),
            &f,
            &[0.0],
            1.0,
            &StoppingRule::budget(10_000),
            2,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteObjective { .. }));
        let g = crate::objectives::FnFitness::new(1, |_: &[f64]| f64::INFINITY);
        assert!(es_run(
            &EsParams::default(),
            &g,
            &[0.0],
            1.0,
            &StoppingRule::budget(5),
            2,
            0
        )
        .is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = es_run(
            &EsParams::default(),
            &sphere2(),
            &[1.0],
            0.3,
            &StoppingRule::budget(5),
            1,
            0,
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                found: 1
            }
        );
    }

    #[test]
    fn classification_without_optimum() {
        let f = Objective::parse("cubic_saddle").unwrap();
        let stop = StoppingRule {
            max_iterations: 20_000,
            sigma_floor: Some(1e-12),
            ..Default::default()
        };
        let t = es_run(&EsParams::default(), &f, &[0.0, 0.0], 1e-3, &stop, 4, 0).unwrap();
        assert!(matches!(
            t.outcome,
            OutcomeLabel::Stalled | OutcomeLabel::BudgetExhausted
        ));
    }

    #[test]
    fn csv_and_jsonl_shapes() {
        let t = es_run(
            &EsParams::default(),
            &sphere2(),
            &[1.0, 0.0],
            0.3,
            &StoppingRule::budget(4),
            1,
            1,
        )
        .unwrap();
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,m0,m1,sigma,f,accepted"));
        assert_eq!(lines.count(), 4);

        let mut jl = Vec::new();
        t.write_jsonl(&mut jl).unwrap();
        let jl = String::from_utf8(jl).unwrap();
        let first = jl.lines().next().unwrap();
        let keys: Vec<_> = [
            "\"t\"",
            "\"m_before\"",
            "\"sigma_before\"",
            "\"x\"",
            "\"f_parent\"",
            "\"f_offspring\"",
            "\"accepted\"",
            "\"sigma_after\"",
        ]
        .iter()
        .map(|k| first.find(k).unwrap())
        .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        let back: StepRecord = serde_json::from_str(first).unwrap();
        assert_eq!(back, t.records[0]);
    }

    fn arb_objective() -> impl Strategy<Value = Objective> {
        prop_oneof![
            Just("sphere:d=2"),
            Just("sphere:d=5"),
            Just("rosenbrock2d"),
            Just("quadratic_saddle:a=4"),
            Just("linear_ridge:a=2"),
            Just("sphere_jump:variant=star,d=2"),
            Just("stepped_sphere:k=4,d=2"),
            Just("cantor_barrier:variant=fat,depth=30"),
        ]
        .prop_map(|s| Objective::parse(s).unwrap())
    }

    fn start_for(f: &Objective, u: &[f64]) -> Vec<f64> {
        let b = f.bounding_box();
        (0..f.dimension())
            .map(|i| b.lo[i] + (b.hi[i] - b.lo[i]) * u[i])
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn elitism_and_ladder(
            f in arb_objective(),
            u in prop::collection::vec(0.0f64..1.0, 5),
            sigma0 in 1e-3f64..2.0,
            seed in any::<u64>(),
        ) {
            let p = EsParams::default();
            let m0 = start_for(&f, &u);
            let t = es_run(&p, &f, &m0, sigma0, &StoppingRule::budget(300), seed, 1).unwrap();
            for w in t.records.windows(2) {
                prop_assert!(w[1].f_parent <= w[0].f_parent);
            }
            let a = t.records.iter().filter(|r| r.accepted).count() as f64;
            let b = t.records.len() as f64 - a;
            let expect = a * p.c_plus() + b * p.c_minus();
            let got = t.final_state.log_sigma - t.initial.log_sigma;
            prop_assert!((got - expect).abs() < 1e-9 * (1.0 + expect.abs()));
            for r in &t.records {
                let ratio = (r.sigma_after / r.sigma_before).ln();
                let c = if r.accepted { p.c_plus() } else { p.c_minus() };
                prop_assert!((ratio - c).abs() < 1e-12);
                prop_assert_eq!(r.accepted, r.f_offspring <= r.f_parent);
            }
        }

        #[test]
        fn rank_invariance(
            f in arb_objective(),
            u in prop::collection::vec(0.0f64..1.0, 5),
            seed in any::<u64>(),
        ) {
            let p = EsParams::default();
            let g = f.monotone_transformed();
            let m0 = start_for(&f, &u);
            let a = es_run(&p, &f, &m0, 0.5, &StoppingRule::budget(200), seed, 1).unwrap();
            let b = es_run(&p, &g, &m0, 0.5, &StoppingRule::budget(200), seed, 1).unwrap();
            prop_assert_eq!(a.records.len(), b.records.len());
            for (ra, rb) in a.records.iter().zip(&b.records) {
                prop_assert_eq!(&ra.m_before, &rb.m_before);
                prop_assert_eq!(ra.accepted, rb.accepted);
            }
        }

        #[test]
        fn reproducible(
            f in arb_objective(),
            u in prop::collection::vec(0.0f64..1.0, 5),
            seed in any::<u64>(),
        ) {
            let m0 = start_for(&f, &u);
            let stop = StoppingRule { max_iterations: 200, sigma_floor: Some(1e-12), ..Default::default() };
            let a = es_run(&EsParams::default(), &f, &m0, 0.5, &stop, seed, 3).unwrap();
            let b = es_run(&EsParams::default(), &f, &m0, 0.5, &stop, seed, 3).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
