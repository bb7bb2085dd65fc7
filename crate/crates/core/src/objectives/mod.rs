//! Benchmark objectives with the analytic hooks the verification code needs.
//!
//! Objectives are addressed by string specs such as `sphere:d=2`,
//! `quadratic_saddle:a=9` or `cantor_barrier:variant=fat,depth=40`. Any spec
//! may carry `phi=cubic`, which composes the objective with the strictly
//! increasing map `y -> y^3 + 5y` (useful for rank-invariance tests).

mod cantor;
mod slices;
mod spec;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use cantor::cantor_measure_below;
pub use cantor::{cantor_contains, CantorSpec, CantorVariant};
pub use spec::{JumpVariant, ObjectiveSpec};

use crate::error::{Error, Result};

/// Anything the (1+1)-ES can minimize.
pub trait Fitness: Sync {
    fn dimension(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> f64;

    fn id(&self) -> String {
        "custom".to_string()
    }

    fn known_optimum(&self) -> Option<&KnownOptimum> {
        None
    }
}

/// Adapter turning a closure into a [`Fitness`].
pub struct FnFitness<F> {
    dimension: usize,
    f: F,
}

impl<F> FnFitness<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }
}

impl<F> Fitness for FnFitness<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn cube(d: usize, half_width: f64) -> Self {
        Self {
            lo: vec![-half_width; d],
            hi: vec![half_width; d],
        }
    }

    pub fn dimension(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownOptimum {
    pub point: Vec<f64>,
    /// Euclidean distance under which a point counts as the optimum.
    pub tolerance: f64,
}

/// A closed-form limiting success rate at a named point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedRate {
    pub point: String,
    pub location: Vec<f64>,
    pub rate: f64,
}

/// Default distance tolerance for known optima.
pub const OPTIMUM_TOLERANCE: f64 = 1e-6;

/// Evaluable benchmark function together with its analytic hooks.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    spec: ObjectiveSpec,
    dimension: usize,
    bounding_box: BoundingBox,
    known_optimum: Option<KnownOptimum>,
    rate_table: Vec<NamedRate>,
}

/// Build an objective from its spec.
pub fn make_objective(spec: &ObjectiveSpec) -> Result<Objective> {
    spec.validate()?;
    let d = spec.dimension();
    let origin = |d: usize| KnownOptimum {
        point: vec![0.0; d],
        tolerance: OPTIMUM_TOLERANCE,
    };
    let (bounding_box, known_optimum, rate_table) = match spec {
        ObjectiveSpec::Sphere { d, .. } => (
            BoundingBox::cube(*d, 2.0),
            Some(origin(*d)),
            vec![NamedRate {
                point: "regular".into(),
                location: unit_vector(*d),
                rate: 0.5,
            }],
        ),
        ObjectiveSpec::Rosenbrock2d { .. } => (
            BoundingBox {
                lo: vec![-2.0, -1.0],
                hi: vec![2.0, 3.0],
            },
            Some(KnownOptimum {
                point: vec![1.0, 1.0],
                tolerance: OPTIMUM_TOLERANCE,
            }),
            vec![NamedRate {
                point: "regular".into(),
                location: vec![0.0, 0.0],
                rate: 0.5,
            }],
        ),
        ObjectiveSpec::QuadraticSaddle { a, .. } => (
            BoundingBox::cube(2, 4.0),
            None,
            vec![NamedRate {
                point: "origin".into(),
                location: vec![0.0, 0.0],
                rate: 2.0 * acot(a.sqrt()) / PI,
            }],
        ),
        ObjectiveSpec::CubicSaddle { .. } => (
            BoundingBox::cube(2, 4.0),
            None,
            vec![NamedRate {
                point: "origin".into(),
                location: vec![0.0, 0.0],
                rate: 0.0,
            }],
        ),
        ObjectiveSpec::LinearRidge { a, .. } => (
            BoundingBox::cube(2, 4.0),
            None,
            vec![NamedRate {
                point: "origin".into(),
                location: vec![0.0, 0.0],
                rate: acot(*a) / PI,
            }],
        ),
        ObjectiveSpec::SphereJump { variant, d, a, .. } => {
            let half = match variant {
                JumpVariant::Strip => 2.0f64.max(a + 2.0),
                _ => 2.0,
            };
            let rates = match variant {
                JumpVariant::Strip => vec![NamedRate {
                    point: "corner".into(),
                    location: vec![*a, 1.0],
                    rate: a.atan() / (2.0 * PI),
                }],
                _ => Vec::new(),
            };
            (BoundingBox::cube(*d, half), Some(origin(*d)), rates)
        }
        ObjectiveSpec::SteppedSphere { d, .. } => {
            (BoundingBox::cube(*d, 2.0), Some(origin(*d)), Vec::new())
        }
        ObjectiveSpec::CantorBarrier { .. } => (
            BoundingBox {
                lo: vec![-2.0],
                hi: vec![1.0],
            },
            None,
            Vec::new(),
        ),
    };
    Ok(Objective {
        spec: spec.clone(),
        dimension: d,
        bounding_box,
        known_optimum,
        rate_table,
    })
}

impl Objective {
    /// Parse and build in one go.
    pub fn parse(spec: &str) -> Result<Self> {
        make_objective(&spec.parse()?)
    }

    pub fn id(&self) -> String {
        self.spec.to_string()
    }

    pub fn spec(&self) -> &ObjectiveSpec {
        &self.spec
    }

    pub fn bounding_box(&self) -> &BoundingBox {
        &self.bounding_box
    }

    pub fn known_optimum(&self) -> Option<&KnownOptimum> {
        self.known_optimum.as_ref()
    }

    pub fn rate_table(&self) -> &[NamedRate] {
        &self.rate_table
    }

    /// Same objective composed with `y -> y^3 + 5y`.
    pub fn monotone_transformed(&self) -> Objective {
        let mut out = self.clone();
        out.spec = out.spec.with_phi(true);
        out
    }

    /// Whether every level set has Lebesgue measure zero.
    pub fn has_null_level_sets(&self) -> bool {
        !matches!(self.spec, ObjectiveSpec::SteppedSphere { .. })
    }

    /// Closed-form strict spatial suboptimality `Λ({y : f(y) < f(x)})`, where
    /// one is known.
    pub fn analytic_suboptimality(&self, x: &[f64]) -> Option<f64> {
        match &self.spec {
            ObjectiveSpec::Sphere { d, .. } => Some(unit_ball_suboptimality(x, *d)),
            ObjectiveSpec::SphereJump {
                variant: JumpVariant::None,
                d,
                ..
            } => Some(unit_ball_suboptimality(x, *d)),
            ObjectiveSpec::SteppedSphere { k, d, .. } => {
                let j = stepped_level(*k, norm_sq(x));
                Some(stepped_volume(j - 1.0, *k, *d))
            }
            _ => None,
        }
    }

    /// `Λ({y ∈ B : f(y) < f(x)})` for the bounding box `B`: slice
    /// quadrature for the planar objectives, the exact cumulative measure for
    /// Cantor barriers.
    pub fn box_suboptimality(&self, x: &[f64]) -> Option<f64> {
        let c = self.raw_value(x);
        let b = &self.bounding_box;
        let h = b.hi[0];
        match self.spec {
            ObjectiveSpec::CubicSaddle { .. } => Some(slices::cubic_saddle_area(c, h)),
            ObjectiveSpec::QuadraticSaddle { a, .. } => {
                Some(slices::quadratic_saddle_area(a, c, h))
            }
            ObjectiveSpec::LinearRidge { a, .. } => Some(slices::linear_ridge_area(a, c, h)),
            ObjectiveSpec::Rosenbrock2d { .. } => Some(slices::rosenbrock_area(
                c,
                [b.lo[0], b.lo[1]],
                [b.hi[0], b.hi[1]],
            )),
            ObjectiveSpec::SphereJump {
                variant, d: 2, a, ..
            } => match variant {
                JumpVariant::None => None,
                JumpVariant::Star => Some(slices::jump_star_area(c, h)),
                JumpVariant::OpenBall | JumpVariant::ClosedBall => {
                    Some(slices::jump_ball_area(c, h))
                }
                JumpVariant::Strip => Some(slices::jump_strip_area(a, c, h)),
            },
            ObjectiveSpec::CantorBarrier { cantor, .. } => {
                // y ∉ C with y < c, plus y ∈ C with y + 1 < c
                let (lo, hi) = (b.lo[0], b.hi[0]);
                let t = c.clamp(lo, hi);
                Some(
                    t - lo - cantor_measure_below(t, &cantor)
                        + cantor_measure_below(c - 1.0, &cantor),
                )
            }
            _ => None,
        }
    }

    /// Closed-form weak spatial suboptimality `Λ({y : f(y) <= f(x)})`.
    pub fn analytic_weak_suboptimality(&self, x: &[f64]) -> Option<f64> {
        match &self.spec {
            ObjectiveSpec::SteppedSphere { k, d, .. } => {
                let j = stepped_level(*k, norm_sq(x));
                Some(stepped_volume(j, *k, *d))
            }
            _ if self.has_null_level_sets() => self.analytic_suboptimality(x),
            _ => None,
        }
    }

    /// Measure of the level set through `x`, where known.
    pub fn level_set_measure(&self, x: &[f64]) -> Option<f64> {
        if self.has_null_level_sets() {
            return Some(0.0);
        }
        Some(self.analytic_weak_suboptimality(x)? - self.analytic_suboptimality(x)?)
    }

    fn raw_value(&self, x: &[f64]) -> f64 {
        match &self.spec {
            ObjectiveSpec::Sphere { .. } => norm_sq(x),
            ObjectiveSpec::Rosenbrock2d { .. } => {
                let (x1, x2) = (x[0], x[1]);
                let t = x1 * x1 - x2;
                100.0 * t * t + (x1 - 1.0) * (x1 - 1.0)
            }
            ObjectiveSpec::QuadraticSaddle { a, .. } => a * x[0] * x[0] - x[1] * x[1],
            ObjectiveSpec::CubicSaddle { .. } => x[0] * x[0] * x[0] + x[1] * x[1],
            ObjectiveSpec::LinearRidge { a, .. } => x[0] + a * x[1].abs(),
            ObjectiveSpec::SphereJump { variant, a, .. } => {
                norm_sq(x) + indicator(jump_set_contains(*variant, *a, x))
            }
            ObjectiveSpec::SteppedSphere { k, .. } => stepped_level(*k, norm_sq(x)) / *k as f64,
            ObjectiveSpec::CantorBarrier { cantor, .. } => {
                x[0] + indicator(cantor_contains(x[0], cantor))
            }
        }
    }
}

impl Fitness for Objective {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension);
        let y = self.raw_value(x);
        if self.spec.phi() {
            y * y * y + 5.0 * y
        } else {
            y
        }
    }

    fn id(&self) -> String {
        self.spec.to_string()
    }

    fn known_optimum(&self) -> Option<&KnownOptimum> {
        self.known_optimum.as_ref()
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// `cot^-1` with range `(0, π)` restricted to positive arguments.
pub(crate) fn acot(a: f64) -> f64 {
    (1.0 / a).atan()
}

pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

fn unit_vector(d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[0] = 1.0;
    v
}

fn stepped_level(k: u32, r2: f64) -> f64 {
    (k as f64 * r2).ceil()
}

/// Volume of the ball `{‖y‖² <= j/k}`.
fn stepped_volume(j: f64, k: u32, d: usize) -> f64 {
    if j <= 0.0 {
        return 0.0;
    }
    unit_ball_volume(d) * (j / k as f64).powf(d as f64 / 2.0)
}

/// Radius function of the star-shaped neighborhood used by the `star` jump
/// variant: `1 + 0.3·(2u₁² - 1)` on the unit sphere.
pub(crate) fn star_radius(direction: &[f64]) -> f64 {
    let u1 = direction[0];
    1.0 + 0.3 * (2.0 * u1 * u1 - 1.0)
}

fn jump_set_contains(variant: JumpVariant, a: f64, x: &[f64]) -> bool {
    match variant {
        JumpVariant::None => false,
        JumpVariant::Star => {
            let r = norm(x);
            if r == 0.0 {
                return false;
            }
            let u: Vec<f64> = x.iter().map(|v| v / r).collect();
            r > star_radius(&u)
        }
        JumpVariant::OpenBall | JumpVariant::ClosedBall => {
            let mut dist_sq = 0.0;
            for (i, v) in x.iter().enumerate() {
                let c = if i == 0 { 1.0 } else { 0.0 };
                dist_sq += (v - c) * (v - c);
            }
            if variant == JumpVariant::OpenBall {
                dist_sq < 0.25
            } else {
                dist_sq <= 0.25
            }
        }
        JumpVariant::Strip => x[0] > a && x[1] > 0.0 && x[1] < 1.0,
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = 2π/d · V_{d-2}
    let mut v = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    v
}

/// Spatial suboptimality of the sphere function: `π^{d/2}/Γ(d/2+1) · ‖x‖^d`.
pub fn unit_ball_suboptimality(x: &[f64], d: usize) -> f64 {
    unit_ball_volume(d) * norm(x).powi(d as i32)
}

/// One registry row, as printed by `list-objectives`.
#[derive(Debug, Clone, Serialize)]
pub struct RegistryEntry {
    pub id: &'static str,
    pub parameters: Vec<RegistryParam>,
    pub default_spec: String,
    pub dimension: usize,
    pub known_optimum: Option<Vec<f64>>,
    pub hooks: Vec<&'static str>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegistryParam {
    pub name: &'static str,
    pub default: String,
    pub values: &'static str,
}

/// All objective families in a fixed order.
pub fn list_objectives() -> Vec<RegistryEntry> {
    let p = |name, default: &str, values| RegistryParam {
        name,
        default: default.to_string(),
        values,
    };
    spec::NAMES
        .iter()
        .map(|&name| {
            let spec: ObjectiveSpec = name.parse().expect("registry names parse");
            let obj = make_objective(&spec).expect("defaults are valid");
            let parameters = match name {
                "sphere" => vec![p("d", "2", "integer >= 1")],
                "rosenbrock2d" | "cubic_saddle" => Vec::new(),
                "quadratic_saddle" | "linear_ridge" => vec![p("a", "1", "real > 0")],
                "sphere_jump" => vec![
                    p("variant", "star", "star|open_ball|closed_ball|strip|none"),
                    p("d", "2", "integer >= 1 (strip: 2)"),
                    p("a", "1", "real > 0 (strip only)"),
                ],
                "stepped_sphere" => vec![p("k", "4", "integer >= 1"), p("d", "2", "integer >= 1")],
                "cantor_barrier" => vec![
                    p("variant", "fat", "fat|null"),
                    p("depth", "40", "integer >= 1"),
                ],
                _ => unreachable!(),
            };
            let mut hooks = vec!["evaluate", "bounding_box"];
            let probe = vec![0.5; obj.dimension()];
            if obj.analytic_suboptimality(&probe).is_some() {
                hooks.push("analytic_suboptimality");
            }
            if obj.known_optimum().is_some() {
                hooks.push("known_optimum");
            }
            if !obj.rate_table().is_empty() {
                hooks.push("rate_table");
            }
            RegistryEntry {
                id: name,
                parameters,
                default_spec: spec.to_string(),
                dimension: obj.dimension(),
                known_optimum: obj.known_optimum().map(|o| o.point.clone()),
                hooks,
            }
        })
        .collect()
}

pub(crate) fn check_dimension(f: &impl Fitness, x: &[f64]) -> Result<()> {
    if f.dimension() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: f.dimension(),
            found: x.len(),
        });
    }
    Ok(())
}
