use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::cantor::{CantorSpec, CantorVariant};
use crate::error::{Error, Result};

pub(crate) const NAMES: [&str; 8] = [
    "sphere",
    "rosenbrock2d",
    "quadratic_saddle",
    "cubic_saddle",
    "linear_ridge",
    "sphere_jump",
    "stepped_sphere",
    "cantor_barrier",
];

/// Which penalty set `S` a `sphere_jump` objective adds to `‖x‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpVariant {
    /// Complement of a star-shaped open neighborhood of the origin.
    Star,
    /// Open ball of radius 1/2 around `e1`.
    OpenBall,
    /// Closed ball of radius 1/2 around `e1`.
    ClosedBall,
    /// `(a, ∞) × (0, 1)`, two-dimensional only.
    Strip,
    /// No jump; plain sphere.
    None,
}

impl JumpVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            JumpVariant::Star => "star",
            JumpVariant::OpenBall => "open_ball",
            JumpVariant::ClosedBall => "closed_ball",
            JumpVariant::Strip => "strip",
            JumpVariant::None => "none",
        }
    }
}

impl FromStr for JumpVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "star" => JumpVariant::Star,
            "open_ball" => JumpVariant::OpenBall,
            "closed_ball" => JumpVariant::ClosedBall,
            "strip" => JumpVariant::Strip,
            "none" => JumpVariant::None,
            _ => return Err(format!("unknown jump variant `{s}`")),
        })
    }
}

/// Parsed objective spec. `phi` marks composition with `y -> y^3 + 5y`.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    Sphere {
        d: usize,
        phi: bool,
    },
    Rosenbrock2d {
        phi: bool,
    },
    QuadraticSaddle {
        a: f64,
        phi: bool,
    },
    CubicSaddle {
        phi: bool,
    },
    LinearRidge {
        a: f64,
        phi: bool,
    },
    SphereJump {
        variant: JumpVariant,
        d: usize,
        a: f64,
        phi: bool,
    },
    SteppedSphere {
        k: u32,
        d: usize,
        phi: bool,
    },
    CantorBarrier {
        cantor: CantorSpec,
        phi: bool,
    },
}

impl ObjectiveSpec {
    pub fn sphere(d: usize) -> Self {
        ObjectiveSpec::Sphere { d, phi: false }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveSpec::Sphere { .. } => NAMES[0],
            ObjectiveSpec::Rosenbrock2d { .. } => NAMES[1],
            ObjectiveSpec::QuadraticSaddle { .. } => NAMES[2],
            ObjectiveSpec::CubicSaddle { .. } => NAMES[3],
            ObjectiveSpec::LinearRidge { .. } => NAMES[4],
            ObjectiveSpec::SphereJump { .. } => NAMES[5],
            ObjectiveSpec::SteppedSphere { .. } => NAMES[6],
            ObjectiveSpec::CantorBarrier { .. } => NAMES[7],
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ObjectiveSpec::Sphere { d, .. }
            | ObjectiveSpec::SphereJump { d, .. }
            | ObjectiveSpec::SteppedSphere { d, .. } => *d,
            ObjectiveSpec::CantorBarrier { .. } => 1,
            _ => 2,
        }
    }

    pub fn phi(&self) -> bool {
        match self {
            ObjectiveSpec::Sphere { phi, .. }
            | ObjectiveSpec::Rosenbrock2d { phi }
            | ObjectiveSpec::QuadraticSaddle { phi, .. }
            | ObjectiveSpec::CubicSaddle { phi }
            | ObjectiveSpec::LinearRidge { phi, .. }
            | ObjectiveSpec::SphereJump { phi, .. }
            | ObjectiveSpec::SteppedSphere { phi, .. }
            | ObjectiveSpec::CantorBarrier { phi, .. } => *phi,
        }
    }

    pub fn with_phi(mut self, on: bool) -> Self {
        match &mut self {
            ObjectiveSpec::Sphere { phi, .. }
            | ObjectiveSpec::Rosenbrock2d { phi }
            | ObjectiveSpec::QuadraticSaddle { phi, .. }
            | ObjectiveSpec::CubicSaddle { phi }
            | ObjectiveSpec::LinearRidge { phi, .. }
            | ObjectiveSpec::SphereJump { phi, .. }
            | ObjectiveSpec::SteppedSphere { phi, .. }
            | ObjectiveSpec::CantorBarrier { phi, .. } => *phi = on,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::MalformedSpec {
                spec: self.to_string(),
                reason,
            })
        };
        match self {
            ObjectiveSpec::Sphere { d, .. } | ObjectiveSpec::SteppedSphere { d, .. } if *d == 0 => {
                bad("d must be >= 1".into())
            }
            ObjectiveSpec::SteppedSphere { k: 0, .. } => bad("k must be >= 1".into()),
            ObjectiveSpec::QuadraticSaddle { a, .. } | ObjectiveSpec::LinearRidge { a, .. }
                if !(a.is_finite() && *a > 0.0) =>
            {
                bad("a must be a finite positive number".into())
            }
            ObjectiveSpec::SphereJump { variant, d, a, .. } => {
                if *d == 0 {
                    bad("d must be >= 1".into())
                } else if *variant == JumpVariant::Strip && *d != 2 {
                    bad("the strip variant is two-dimensional".into())
                } else if !(a.is_finite() && *a > 0.0) {
                    bad("a must be a finite positive number".into())
                } else {
                    Ok(())
                }
            }
            ObjectiveSpec::CantorBarrier { cantor, .. } if cantor.depth == 0 => {
                bad("depth must be >= 1".into())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut params: Vec<String> = match self {
            ObjectiveSpec::Sphere { d, .. } => vec![format!("d={d}")],
            ObjectiveSpec::Rosenbrock2d { .. } | ObjectiveSpec::CubicSaddle { .. } => Vec::new(),
            ObjectiveSpec::QuadraticSaddle { a, .. } | ObjectiveSpec::LinearRidge { a, .. } => {
                vec![format!("a={a}")]
            }
            ObjectiveSpec::SphereJump { variant, d, a, .. } => {
                let mut p = vec![format!("variant={}", variant.as_str()), format!("d={d}")];
                if *variant == JumpVariant::Strip || *a != 1.0 {
                    p.push(format!("a={a}"));
                }
                p
            }
            ObjectiveSpec::SteppedSphere { k, d, .. } => vec![format!("k={k}"), format!("d={d}")],
            ObjectiveSpec::CantorBarrier { cantor, .. } => vec![
                format!("variant={}", cantor.variant.as_str()),
                format!("depth={}", cantor.depth),
            ],
        };
        if self.phi() {
            params.push("phi=cubic".into());
        }
        f.write_str(self.name())?;
        if !params.is_empty() {
            write!(f, ":{}", params.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for ObjectiveSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let malformed = |reason: String| Error::MalformedSpec {
            spec: s.to_string(),
            reason,
        };
        let s_trim = s.trim();
        let (name, rest) = s_trim.split_once(':').unwrap_or((s_trim, ""));
        let name = name.trim();
        let mut kv = BTreeMap::new();
        for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| malformed(format!("expected key=value, got `{pair}`")))?;
            if kv.insert(k.trim(), v.trim()).is_some() {
                return Err(malformed(format!("duplicate key `{}`", k.trim())));
            }
        }

        let phi = match kv.remove("phi") {
            None | Some("none") => false,
            Some("cubic") => true,
            Some(other) => return Err(malformed(format!("unknown phi `{other}`"))),
        };
        let mut take = |key: &str| kv.remove(key);
        let num = |key: &str, v: Option<&str>, default: f64| -> Result<f64> {
            v.map_or(Ok(default), |v| {
                v.parse()
                    .map_err(|_| malformed(format!("`{key}` is not a number: `{v}`")))
            })
        };
        let int = |key: &str, v: Option<&str>, default: u64| -> Result<u64> {
            v.map_or(Ok(default), |v| {
                v.parse()
                    .map_err(|_| malformed(format!("`{key}` is not a nonnegative integer: `{v}`")))
            })
        };

        let spec = match name {
            "sphere" => ObjectiveSpec::Sphere {
                d: int("d", take("d"), 2)? as usize,
                phi,
            },
            "rosenbrock2d" => ObjectiveSpec::Rosenbrock2d { phi },
            "quadratic_saddle" => ObjectiveSpec::QuadraticSaddle {
                a: num("a", take("a"), 1.0)?,
                phi,
            },
            "cubic_saddle" => ObjectiveSpec::CubicSaddle { phi },
            "linear_ridge" => ObjectiveSpec::LinearRidge {
                a: num("a", take("a"), 1.0)?,
                phi,
            },
            "sphere_jump" => {
                let variant = match take("variant") {
                    None => JumpVariant::Star,
                    Some(v) => v.parse().map_err(|_| Error::UnknownObjective {
                        id: format!("sphere_jump:variant={v}"),
                        valid: "star, open_ball, closed_ball, strip, none".into(),
                    })?,
                };
                ObjectiveSpec::SphereJump {
                    variant,
                    d: int("d", take("d"), 2)? as usize,
                    a: num("a", take("a"), 1.0)?,
                    phi,
                }
            }
            "stepped_sphere" => ObjectiveSpec::SteppedSphere {
                k: u32::try_from(int("k", take("k"), 4)?)
                    .map_err(|_| malformed("k out of range".into()))?,
                d: int("d", take("d"), 2)? as usize,
                phi,
            },
            "cantor_barrier" => {
                let variant = match take("variant") {
                    None | Some("fat") => CantorVariant::Fat,
                    Some("null") => CantorVariant::Null,
                    Some(v) => {
                        return Err(Error::UnknownObjective {
                            id: format!("cantor_barrier:variant={v}"),
                            valid: "fat, null".into(),
                        })
                    }
                };
                let depth = u32::try_from(int("depth", take("depth"), 40)?)
                    .map_err(|_| malformed("depth out of range".into()))?;
                ObjectiveSpec::CantorBarrier {
                    cantor: CantorSpec { variant, depth },
                    phi,
                }
            }
            _ => {
                return Err(Error::UnknownObjective {
                    id: name.to_string(),
                    valid: NAMES.join(", "),
                })
            }
        };
        if let Some(k) = kv.keys().next() {
            return Err(malformed(format!("unknown parameter `{k}` for {name}")));
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl Serialize for ObjectiveSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObjectiveSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_and_canonical_form() {
        let s: ObjectiveSpec = "cantor_barrier".parse().unwrap();
        assert_eq!(s.to_string(), "cantor_barrier:variant=fat,depth=40");
        let s: ObjectiveSpec = " quadratic_saddle : a = 9 ".parse().unwrap();
        assert_eq!(s.to_string(), "quadratic_saddle:a=9");
        let s: ObjectiveSpec = "sphere_jump:variant=strip,a=10,d=2".parse().unwrap();
        assert_eq!(s.to_string(), "sphere_jump:variant=strip,d=2,a=10");
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in [
            "sphere:d=0",
            "linear_ridge:a=-1",
            "linear_ridge:a=nan",
            "sphere:d=2,d=3",
            "sphere:q=1",
            "sphere:d",
            "sphere_jump:variant=strip,d=3",
            "stepped_sphere:k=0",
            "cantor_barrier:depth=0",
            "sphere:phi=exp",
        ] {
            assert!(bad.parse::<ObjectiveSpec>().is_err(), "{bad}");
        }
        assert!(matches!(
            "sphere_jump:variant=cube".parse::<ObjectiveSpec>(),
            Err(Error::UnknownObjective { .. })
        ));
        assert!(matches!(
            "griewank".parse::<ObjectiveSpec>(),
            Err(Error::UnknownObjective { .. })
        ));
    }

    #[test]
    fn serde_uses_the_string_form() {
        let s: ObjectiveSpec = "stepped_sphere:k=4,d=2".parse().unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "\"stepped_sphere:k=4,d=2\"");
        assert_eq!(serde_json::from_str::<ObjectiveSpec>(&json).unwrap(), s);
    }

    fn arb_spec() -> impl Strategy<Value = ObjectiveSpec> {
        let a = 1e-3f64..1e3;
        let d = 1usize..12;
        let jump = prop_oneof![
            Just(JumpVariant::Star),
            Just(JumpVariant::OpenBall),
            Just(JumpVariant::ClosedBall),
            Just(JumpVariant::None),
        ];
        let base = prop_oneof![
            d.clone().prop_map(ObjectiveSpec::sphere),
            Just(ObjectiveSpec::Rosenbrock2d { phi: false }),
            a.clone()
                .prop_map(|a| ObjectiveSpec::QuadraticSaddle { a, phi: false }),
            Just(ObjectiveSpec::CubicSaddle { phi: false }),
            a.clone()
                .prop_map(|a| ObjectiveSpec::LinearRidge { a, phi: false }),
            (jump, d.clone()).prop_map(|(variant, d)| ObjectiveSpec::SphereJump {
                variant,
                d,
                a: 1.0,
                phi: false
            }),
            a.prop_map(|a| ObjectiveSpec::SphereJump {
                variant: JumpVariant::Strip,
                d: 2,
                a,
                phi: false
            }),
            (1u32..50, d).prop_map(|(k, d)| ObjectiveSpec::SteppedSphere { k, d, phi: false }),
            (any::<bool>(), 1u32..80).prop_map(|(fat, depth)| ObjectiveSpec::CantorBarrier {
                cantor: CantorSpec {
                    variant: if fat {
                        CantorVariant::Fat
                    } else {
                        CantorVariant::Null
                    },
                    depth
                },
                phi: false
            }),
        ];
        (base, any::<bool>()).prop_map(|(s, phi)| s.with_phi(phi))
    }

    proptest! {
        #[test]
        fn display_round_trips(spec in arb_spec()) {
            let text = spec.to_string();
            let back: ObjectiveSpec = text.parse().unwrap();
            prop_assert_eq!(back, spec);
        }
    }
}
