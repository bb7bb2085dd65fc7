//! Named bound checks run at their default configuration, with optional
//! `key=value` overrides.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::checks::{
    check_case_study_rate, check_expected_decrease, check_gap, check_plateau_decrease,
    check_quantile_bound, check_regular_limit, check_sigma_upper_bound, check_step_scaling,
    BoundCheckReport, CaseStudy, SuboptimalityOracle,
};
use crate::defaults::{CaseStudyProbe, Defaults, Probe};
use crate::error::{Error, Result};
use crate::estimators::SigmaGrid;
use crate::objectives::{make_objective, JumpVariant, ObjectiveSpec};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    ExpectedDecrease,
    QuantileBound,
    PlateauDecrease,
    StepScaling,
    SigmaUpperBound,
    Gap,
    RegularLimit,
    CaseStudyRate,
}

impl CheckId {
    pub const ALL: [CheckId; 8] = [
        CheckId::ExpectedDecrease,
        CheckId::QuantileBound,
        CheckId::PlateauDecrease,
        CheckId::StepScaling,
        CheckId::SigmaUpperBound,
        CheckId::Gap,
        CheckId::RegularLimit,
        CheckId::CaseStudyRate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::ExpectedDecrease => "expected_decrease",
            CheckId::QuantileBound => "quantile_bound",
            CheckId::PlateauDecrease => "plateau_decrease",
            CheckId::StepScaling => "step_scaling",
            CheckId::SigmaUpperBound => "sigma_upper_bound",
            CheckId::Gap => "gap",
            CheckId::RegularLimit => "regular_limit",
            CheckId::CaseStudyRate => "case_study_rate",
        }
    }
}

impl std::fmt::Display for CheckId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckId::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::UnknownCheck {
                id: s.to_string(),
                valid: CheckId::ALL.map(CheckId::as_str).join(", "),
            })
    }
}

/// Per-invocation overrides of a check's default configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckOverrides {
    pub m: Option<Vec<f64>>,
    pub sigma: Option<f64>,
    pub n: Option<u64>,
    pub a: Option<f64>,
    pub p: Option<f64>,
    pub p_t: Option<f64>,
    pub p_h: Option<f64>,
    pub eps: Option<f64>,
    pub limit: Option<f64>,
    pub q_fracs: Option<Vec<f64>>,
    pub sigmas: Option<Vec<f64>>,
    pub reference_samples: Option<u64>,
}

/// Comma-separated decimals; scientific notation is accepted.
pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("`{t}` is not a number")))
        })
        .collect()
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("`{key}={v}`: not a valid number")))
}

impl CheckOverrides {
    pub const KEYS: [&'static str; 12] = [
        "m",
        "sigma",
        "n",
        "a",
        "p",
        "p_t",
        "p_h",
        "eps",
        "limit",
        "q_fracs",
        "sigmas",
        "reference_samples",
    ];

    /// Apply one `key=value` pair.
    pub fn set(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got `{pair}`")))?;
        let k = k.trim();
        match k {
            "m" | "x" => self.m = Some(parse_vector(v)?),
            "sigma" => self.sigma = Some(parse_num(k, v)?),
            "n" => self.n = Some(parse_num(k, v)?),
            "a" => self.a = Some(parse_num(k, v)?),
            "p" => self.p = Some(parse_num(k, v)?),
            "p_t" => self.p_t = Some(parse_num(k, v)?),
            "p_h" => self.p_h = Some(parse_num(k, v)?),
            "eps" => self.eps = Some(parse_num(k, v)?),
            "limit" => self.limit = Some(parse_num(k, v)?),
            "q_fracs" => self.q_fracs = Some(parse_vector(v)?),
            "sigmas" => self.sigmas = Some(parse_vector(v)?),
            "reference_samples" => self.reference_samples = Some(parse_num(k, v)?),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown parameter `{k}`; valid: {}",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn from_pairs<S: AsRef<str>>(pairs: &[S]) -> Result<Self> {
        let mut o = Self::default();
        for p in pairs {
            o.set(p.as_ref())?;
        }
        Ok(o)
    }

    fn probes(&self, fallback: Option<&[Probe]>, what: &ObjectiveSpec) -> Result<Vec<Probe>> {
        match (&self.m, self.sigma) {
            (Some(m), Some(sigma)) => Ok(vec![Probe {
                m: m.clone(),
                sigma,
            }]),
            (Some(_), None) | (None, Some(_)) => Err(Error::InvalidParameter(
                "pass both m and sigma, or neither".into(),
            )),
            (None, None) => fallback.map(<[Probe]>::to_vec).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "no default probes for `{what}`; pass m= and sigma="
                ))
            }),
        }
    }
}

/// Run `check` with the shipped defaults. `objective` replaces the
/// check's default objective where that makes sense.
pub fn run_check(
    check: CheckId,
    objective: Option<&ObjectiveSpec>,
    overrides: &CheckOverrides,
    seed: u64,
) -> Result<Vec<BoundCheckReport>> {
    run_check_with(Defaults::shipped(), check, objective, overrides, seed)
}

/// Run every check at its default configuration.
pub fn run_all_checks(seed: u64) -> Result<Vec<BoundCheckReport>> {
    let mut out = Vec::new();
    for (i, c) in CheckId::ALL.into_iter().enumerate() {
        out.extend(run_check(
            c,
            None,
            &CheckOverrides::default(),
            rng::derive_seed(seed, i as u64),
        )?);
    }
    Ok(out)
}

fn probe_seed(seed: u64, i: usize) -> u64 {
    rng::derive_seed(seed, i as u64)
}

pub fn run_check_with(
    d: &Defaults,
    check: CheckId,
    objective: Option<&ObjectiveSpec>,
    o: &CheckOverrides,
    seed: u64,
) -> Result<Vec<BoundCheckReport>> {
    let c = &d.checks;
    let b = &d.budgets;
    match check {
        CheckId::ExpectedDecrease | CheckId::QuantileBound => {
            let default = if check == CheckId::ExpectedDecrease {
                &c.expected_decrease.objective
            } else {
                &c.quantile_bound.objective
            };
            let spec = objective.unwrap_or(default);
            let f = make_objective(spec)?;
            let probes = o.probes(d.probes_for(spec), spec)?;
            let oracle = SuboptimalityOracle::for_objective(
                &f,
                o.reference_samples.unwrap_or(d.reference_samples),
                rng::derive_seed(seed, u64::MAX),
            )?;
            probes
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let s = probe_seed(seed, i);
                    if check == CheckId::ExpectedDecrease {
                        let n = o.n.unwrap_or(b.expected_decrease);
                        check_expected_decrease(&p.m, p.sigma, &f, &oracle, n, s)
                    } else {
                        let n = o.n.unwrap_or(b.quantile_bound);
                        let q = o.q_fracs.as_deref().unwrap_or(&d.quantile_fracs);
                        check_quantile_bound(&p.m, p.sigma, &f, &oracle, n, q, s)
                    }
                })
                .collect()
        }
        CheckId::PlateauDecrease => {
            let pd = &c.plateau_decrease;
            let spec = objective.unwrap_or(&pd.objective);
            let f = make_objective(spec)?;
            let m = o.m.clone().unwrap_or_else(|| pd.m.clone());
            let sigma = o.sigma.unwrap_or(pd.sigma);
            let n = o.n.unwrap_or(b.plateau_decrease);
            let (report, _) = check_plateau_decrease(&m, sigma, &f, n, seed)?;
            Ok(vec![report])
        }
        CheckId::StepScaling => {
            let sd = &c.step_scaling;
            let spec = objective.unwrap_or(&sd.objective);
            let f = make_objective(spec)?;
            let m = o.m.clone().unwrap_or_else(|| sd.m.clone());
            let sigma = o.sigma.unwrap_or(sd.sigma);
            let n = o.n.unwrap_or(b.step_scaling);
            let a_values = o.a.map(|a| vec![a]).unwrap_or_else(|| sd.a_values.clone());
            a_values
                .iter()
                .map(|a| check_step_scaling(&m, sigma, *a, &f, n, seed))
                .collect()
        }
        CheckId::SigmaUpperBound => {
            let sd = &c.sigma_upper_bound;
            let spec = objective.unwrap_or(&sd.objective);
            let f = make_objective(spec)?;
            let m = o.m.clone().unwrap_or_else(|| sd.m.clone());
            let p = o.p.unwrap_or(sd.p);
            let n = o.n.unwrap_or(b.sigma_upper_bound);
            Ok(vec![check_sigma_upper_bound(&m, p, &f, n, seed)?])
        }
        CheckId::Gap => {
            let gd = &c.gap;
            let spec = objective.unwrap_or(&gd.objective);
            let f = make_objective(spec)?;
            let m = o.m.clone().unwrap_or_else(|| gd.m.clone());
            let grid = if objective.is_some() && o.m.is_some() {
                SigmaGrid::default_for(&m)
            } else {
                gd.grid
            };
            let n = o.n.unwrap_or(b.gap);
            let p_t = o.p_t.unwrap_or(gd.p_t);
            let p_h = o.p_h.unwrap_or(gd.p_h);
            Ok(vec![check_gap(&m, p_t, p_h, &f, &grid, n, seed)?])
        }
        CheckId::RegularLimit => {
            let rd = &c.regular_limit;
            let sigmas = o.sigmas.as_deref().unwrap_or(&rd.sigmas);
            let limit = o.limit.unwrap_or(rd.limit);
            let n = o.n.unwrap_or(b.regular_limit);
            let probes: Vec<(ObjectiveSpec, Vec<f64>)> = match (objective, &o.m) {
                (Some(spec), Some(x)) => vec![(spec.clone(), x.clone())],
                (Some(spec), None) => {
                    let x = rd
                        .probes
                        .iter()
                        .find(|p| &p.objective == spec)
                        .map(|p| p.x.clone())
                        .ok_or_else(|| {
                            Error::InvalidParameter(format!(
                                "no default regular point for `{spec}`; pass m="
                            ))
                        })?;
                    vec![(spec.clone(), x)]
                }
                (None, _) => rd
                    .probes
                    .iter()
                    .map(|p| (p.objective.clone(), p.x.clone()))
                    .collect(),
            };
            probes
                .iter()
                .enumerate()
                .map(|(i, (spec, x))| {
                    let f = make_objective(spec)?;
                    check_regular_limit(x, &f, sigmas, limit, n, probe_seed(seed, i))
                })
                .collect()
        }
        CheckId::CaseStudyRate => {
            let n = o.n.unwrap_or(b.case_study_rate);
            let cases = match objective {
                Some(spec) => vec![case_for(spec, o, &c.case_study_rate.cases)?],
                None => c.case_study_rate.cases.clone(),
            };
            cases
                .iter()
                .enumerate()
                .map(|(i, k)| {
                    check_case_study_rate(k.kind, k.a, k.sigma, k.eps, n, probe_seed(seed, i))
                })
                .collect()
        }
    }
}

fn case_for(
    spec: &ObjectiveSpec,
    o: &CheckOverrides,
    defaults: &[CaseStudyProbe],
) -> Result<CaseStudyProbe> {
    let (kind, a) = match *spec {
        ObjectiveSpec::QuadraticSaddle { a, .. } => (CaseStudy::QuadraticSaddle, a),
        ObjectiveSpec::LinearRidge { a, .. } => (CaseStudy::LinearRidge, a),
        ObjectiveSpec::SphereJump {
            variant: JumpVariant::Strip,
            d: 2,
            a,
            ..
        } => (CaseStudy::JumpCorner, a),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "`{spec}` has no closed-form rate; use quadratic_saddle, linear_ridge \
                 or sphere_jump:variant=strip"
            )))
        }
    };
    let base = defaults.iter().find(|c| c.kind == kind);
    let sigma = o.sigma.or(base.map(|c| c.sigma)).unwrap_or(1e-3);
    let eps = o.eps.or(base.map(|c| c.eps)).unwrap_or(0.0);
    Ok(CaseStudyProbe {
        kind,
        a: o.a.unwrap_or(a),
        sigma,
        eps,
    })
}

/// One summary row per report: check id, objective, pass, slack, n.
pub fn summary_csv(reports: &[BoundCheckReport]) -> String {
    let mut s = String::from("check,objective,pass,slack,n\n");
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{:e},{}\n",
            r.check, r.objective, r.pass, r.slack, r.n_samples
        ));
    }
    s
}

/// Pass counts per check id.
pub fn pass_counts(reports: &[BoundCheckReport]) -> BTreeMap<String, (usize, usize)> {
    let mut m: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in reports {
        let e = m.entry(r.check.clone()).or_default();
        e.0 += r.pass as usize;
        e.1 += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip_and_unknown_lists_valid() {
        for c in CheckId::ALL {
            assert_eq!(c.as_str().parse::<CheckId>().unwrap(), c);
        }
        let err = "nope".parse::<CheckId>().unwrap_err().to_string();
        assert!(err.contains("expected_decrease") && err.contains("case_study_rate"));
    }

    #[test]
    fn overrides_parse_vectors_and_scientific_notation() {
        let o = CheckOverrides::from_pairs(&["m=1,0", "sigma=1e-3", "n=1000"]).unwrap();
        assert_eq!(o.m, Some(vec![1.0, 0.0]));
        assert_eq!(o.sigma, Some(1e-3));
        assert_eq!(o.n, Some(1000));
        assert!(CheckOverrides::from_pairs(&["bogus=1"]).is_err());
        assert!(CheckOverrides::from_pairs(&["sigma"]).is_err());
        assert!(CheckOverrides::from_pairs(&["m=1,x"]).is_err());
    }

    #[test]
    fn half_a_probe_is_rejected() {
        let o = CheckOverrides::from_pairs(&["sigma=0.1"]).unwrap();
        let spec = ObjectiveSpec::sphere(2);
        assert!(run_check(CheckId::ExpectedDecrease, Some(&spec), &o, 1).is_err());
    }

    #[test]
    fn case_study_maps_objectives() {
        let o = CheckOverrides::default();
        let d = &Defaults::shipped().checks.case_study_rate.cases;
        let c = case_for(&"quadratic_saddle:a=9".parse().unwrap(), &o, d).unwrap();
        assert_eq!((c.kind, c.a), (CaseStudy::QuadraticSaddle, 9.0));
        let c = case_for(&"sphere_jump:variant=strip,a=2".parse().unwrap(), &o, d).unwrap();
        assert_eq!(
            (c.kind, c.a, c.sigma, c.eps),
            (CaseStudy::JumpCorner, 2.0, 1e-5, 1e-3)
        );
        assert!(case_for(&ObjectiveSpec::sphere(2), &o, d).is_err());
    }
}
