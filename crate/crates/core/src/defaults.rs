//! The shipped defaults file: step-size parameters, check budgets, probe
//! lists and experiment configurations. Every default verification and
//! experiment run reads its configuration from here.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::checks::CaseStudy;
use crate::error::{Error, Result};
use crate::es::EsParams;
use crate::estimators::SigmaGrid;
use crate::experiments::ExperimentConfig;
use crate::objectives::ObjectiveSpec;

/// Raw contents of `defaults.json`.
pub const DEFAULTS_JSON: &str = include_str!("../defaults.json");

/// Version of the defaults schema this build understands.
pub const DEFAULTS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub m: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckBudgets {
    pub expected_decrease: u64,
    pub quantile_bound: u64,
    pub plateau_decrease: u64,
    pub step_scaling: u64,
    pub sigma_upper_bound: u64,
    pub gap: u64,
    pub regular_limit: u64,
    pub case_study_rate: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveDefault {
    pub objective: ObjectiveSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauDefault {
    pub objective: ObjectiveSpec,
    pub m: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepScalingDefault {
    pub objective: ObjectiveSpec,
    pub m: Vec<f64>,
    pub sigma: f64,
    pub a_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaUpperBoundDefault {
    pub objective: ObjectiveSpec,
    pub m: Vec<f64>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapDefault {
    pub objective: ObjectiveSpec,
    pub m: Vec<f64>,
    pub p_t: f64,
    pub p_h: f64,
    pub grid: SigmaGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularProbe {
    pub objective: ObjectiveSpec,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularLimitDefault {
    pub probes: Vec<RegularProbe>,
    pub sigmas: Vec<f64>,
    pub limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyProbe {
    pub kind: CaseStudy,
    pub a: f64,
    pub sigma: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyDefault {
    pub cases: Vec<CaseStudyProbe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckDefaults {
    pub expected_decrease: ObjectiveDefault,
    pub quantile_bound: ObjectiveDefault,
    pub plateau_decrease: PlateauDefault,
    pub step_scaling: StepScalingDefault,
    pub sigma_upper_bound: SigmaUpperBoundDefault,
    pub gap: GapDefault,
    pub regular_limit: RegularLimitDefault,
    pub case_study_rate: CaseStudyDefault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub version: u32,
    pub seed: u64,
    pub params: EsParams,
    /// Size of the uniform reference cloud for objectives without a
    /// closed-form suboptimality.
    pub reference_samples: u64,
    pub budgets: CheckBudgets,
    pub quantile_fracs: Vec<f64>,
    /// Probe lists keyed by objective spec string.
    pub probes: BTreeMap<String, Vec<Probe>>,
    pub checks: CheckDefaults,
    pub experiments: BTreeMap<String, ExperimentConfig>,
}

impl Defaults {
    /// Parse and validate a defaults document.
    pub fn from_json(text: &str) -> Result<Self> {
        let d: Defaults = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if d.version != DEFAULTS_VERSION {
            return Err(Error::Config(format!(
                "defaults version {} is not supported (expected {DEFAULTS_VERSION})",
                d.version
            )));
        }
        for key in d.probes.keys() {
            key.parse::<ObjectiveSpec>()?;
        }
        for cfg in d.experiments.values() {
            cfg.validate()?;
        }
        Ok(d)
    }

    /// The shipped defaults, parsed once.
    pub fn shipped() -> &'static Defaults {
        static CELL: OnceLock<Defaults> = OnceLock::new();
        CELL.get_or_init(|| Defaults::from_json(DEFAULTS_JSON).expect("shipped defaults are valid"))
    }

    /// Default probes for `spec`, matched on the parsed spec rather than the
    /// key text.
    pub fn probes_for(&self, spec: &ObjectiveSpec) -> Option<&[Probe]> {
        self.probes.iter().find_map(|(k, v)| {
            let parsed: ObjectiveSpec = k.parse().ok()?;
            (parsed == spec.clone().with_phi(false)).then_some(v.as_slice())
        })
    }

    pub fn experiment(&self, name: &str) -> Result<&ExperimentConfig> {
        self.experiments.get(name).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "unknown experiment `{name}`; valid: {}",
                self.experiments
                    .keys()
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_defaults_parse_and_round_trip() {
        let d = Defaults::shipped();
        assert_eq!(d.params, EsParams::default());
        let text = serde_json::to_string(d).unwrap();
        assert_eq!(&Defaults::from_json(&text).unwrap(), d);
    }

    #[test]
    fn every_probe_matches_its_objective() {
        let d = Defaults::shipped();
        for (key, probes) in &d.probes {
            let spec: ObjectiveSpec = key.parse().unwrap();
            assert!(probes.len() >= 3 && probes.len() <= 5, "{key}");
            assert_eq!(d.probes_for(&spec).unwrap().len(), probes.len());
            for p in probes {
                assert_eq!(p.m.len(), spec.dimension(), "{key}");
            }
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = DEFAULTS_JSON.replacen("\"version\": 1", "\"version\": 99", 1);
        assert!(Defaults::from_json(&text).is_err());
    }
}
