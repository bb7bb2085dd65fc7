//! Truncated Cantor-type sets on `[-1, 0]`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CantorVariant {
    /// Smith–Volterra–Cantor set: stage `n` removes an open middle interval of
    /// length `4^-n` from each surviving interval. Limit measure 1/2.
    Fat,
    /// Middle-thirds construction. Limit measure 0.
    Null,
}

impl CantorVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            CantorVariant::Fat => "fat",
            CantorVariant::Null => "null",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CantorSpec {
    pub variant: CantorVariant,
    /// Number of removal stages applied.
    pub depth: u32,
}

impl CantorSpec {
    pub fn fat(depth: u32) -> Self {
        Self {
            variant: CantorVariant::Fat,
            depth,
        }
    }

    pub fn null(depth: u32) -> Self {
        Self {
            variant: CantorVariant::Null,
            depth,
        }
    }

    /// Exact Lebesgue measure of the stage-`depth` approximation.
    pub fn measure(&self) -> f64 {
        match self.variant {
            // 1 - sum_{n<=D} 2^{n-1} 4^{-n} = 1/2 + 2^{-D}/2
            CantorVariant::Fat => 0.5 + 0.5 * 0.5f64.powi(self.depth as i32),
            CantorVariant::Null => (2.0f64 / 3.0).powi(self.depth as i32),
        }
    }
}

/// Membership of `x` in the stage-`depth` approximation of the set.
///
/// The set is closed: endpoints of removed intervals belong to it, and so do
/// `-1` and `0`. Points outside `[-1, 0]` are never members.
pub fn cantor_contains(x: f64, spec: &CantorSpec) -> bool {
    if !(-1.0..=0.0).contains(&x) {
        return false;
    }
    let (mut lo, mut hi) = (-1.0f64, 0.0f64);
    let mut fat_gap = 1.0f64;
    for _ in 0..spec.depth {
        let gap = match spec.variant {
            CantorVariant::Fat => {
                fat_gap *= 0.25;
                fat_gap
            }
            CantorVariant::Null => (hi - lo) / 3.0,
        };
        let mid = 0.5 * (lo + hi);
        let gap_lo = mid - 0.5 * gap;
        let gap_hi = mid + 0.5 * gap;
        if x > gap_lo && x < gap_hi {
            return false;
        }
        if x <= gap_lo {
            hi = gap_lo;
        } else {
            lo = gap_hi;
        }
    }
    true
}

/// `Λ(C ∩ (-∞, t))` for the stage-`depth` set `C`.
///
/// Every surviving interval at stage `n` holds `measure / 2^n` of the set,
/// so one descent along the path of `t` suffices.
pub(crate) fn cantor_measure_below(t: f64, spec: &CantorSpec) -> f64 {
    let total = spec.measure();
    if t <= -1.0 {
        return 0.0;
    }
    if t >= 0.0 {
        return total;
    }
    let (mut lo, mut hi) = (-1.0f64, 0.0f64);
    let mut fat_gap = 1.0f64;
    let mut mass = total;
    let mut acc = 0.0;
    for _ in 0..spec.depth {
        let gap = match spec.variant {
            CantorVariant::Fat => {
                fat_gap *= 0.25;
                fat_gap
            }
            CantorVariant::Null => (hi - lo) / 3.0,
        };
        let mid = 0.5 * (lo + hi);
        let gap_lo = mid - 0.5 * gap;
        let gap_hi = mid + 0.5 * gap;
        mass *= 0.5;
        if t <= gap_lo {
            hi = gap_lo;
        } else if t < gap_hi {
            return acc + mass;
        } else {
            acc += mass;
            lo = gap_hi;
        }
    }
    acc + (t - lo).clamp(0.0, mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn first_stage_gap() {
        let s = CantorSpec::fat(1);
        assert!(!cantor_contains(-0.5, &s));
        assert!(!cantor_contains(-0.6249, &s));
        assert!(cantor_contains(-0.625, &s));
        assert!(cantor_contains(-0.375, &s));
        let n = CantorSpec::null(1);
        assert!(!cantor_contains(-0.5, &n));
        assert!(cantor_contains(-2.0 / 3.0, &n));
    }

    #[test]
    fn endpoints_are_members() {
        for spec in [
            CantorSpec::fat(40),
            CantorSpec::null(40),
            CantorSpec::fat(60),
        ] {
            assert!(cantor_contains(-1.0, &spec));
            assert!(cantor_contains(0.0, &spec));
            assert!(!cantor_contains(0.1, &spec));
            assert!(!cantor_contains(-1.1, &spec));
        }
    }

    #[test]
    fn fat_measure_matches_direct_summation() {
        for depth in [1u32, 5, 20] {
            let direct: f64 = 1.0
                - (1..=depth)
                    .map(|n| 2f64.powi(n as i32 - 1) * 4f64.powi(-(n as i32)))
                    .sum::<f64>();
            assert!((CantorSpec::fat(depth).measure() - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn monte_carlo_measure_at_depth_20() {
        let spec = CantorSpec::fat(20);
        let truth = spec.measure();
        let n = 400_000;
        let mut rng = crate::rng::stream(11);
        let hits = (0..n)
            .filter(|_| cantor_contains(-rng.random::<f64>(), &spec))
            .count() as f64;
        let p = hits / n as f64;
        let se = (truth * (1.0 - truth) / n as f64).sqrt();
        assert!((p - truth).abs() < 3.0 * se, "p={p} truth={truth}");
    }

    #[test]
    fn consecutive_depths_differ_on_small_mass() {
        // stage D+1 removes 2^D intervals of length 4^-(D+1)
        let depth = 6u32;
        let (a, b) = (CantorSpec::fat(depth), CantorSpec::fat(depth + 1));
        let bound = 2f64.powi(depth as i32) * 4f64.powi(-(depth as i32 + 1));
        let n = 200_000;
        let mut rng = crate::rng::stream(5);
        let diff = (0..n)
            .filter(|_| {
                let x = -rng.random::<f64>();
                cantor_contains(x, &a) != cantor_contains(x, &b)
            })
            .count() as f64
            / n as f64;
        let se = (bound / n as f64).sqrt();
        assert!(diff <= bound + 3.0 * se, "diff={diff} bound={bound}");
        assert!(diff > 0.0);
    }

    #[test]
    fn measure_below_matches_interval_enumeration() {
        // exact rational enumeration of the 2^10 stage-10 intervals
        let ts = [-0.9, -0.5, -0.3, -0.123456, -0.01, -1e-3];
        let fat = [
            0.076_171_493_530_273_42,
            0.250_244_140_625,
            0.312_805_175_781_25,
            0.406_237_603_515_625,
            0.490_852_584_838_867_2,
            0.499_493_049_621_582,
        ];
        let null = [
            0.003_469_999_491_947_343_6,
            0.008_670_764_957_916_306,
            0.010_403_224_440_718_737,
            0.013_006_147_436_874_46,
            0.016_528_645_701_027_96,
            0.017_172_179_037_748_31,
        ];
        for (i, t) in ts.iter().enumerate() {
            let f = cantor_measure_below(*t, &CantorSpec::fat(10));
            let n = cantor_measure_below(*t, &CantorSpec::null(10));
            assert!((f - fat[i]).abs() < 1e-14, "fat t={t}: {f}");
            assert!((n - null[i]).abs() < 1e-14, "null t={t}: {n}");
        }
        for spec in [CantorSpec::fat(60), CantorSpec::null(60)] {
            assert_eq!(cantor_measure_below(-1.5, &spec), 0.0);
            assert_eq!(cantor_measure_below(0.5, &spec), spec.measure());
            let mut prev = 0.0;
            for i in 0..=1000 {
                let g = cantor_measure_below(-1.0 + i as f64 / 1000.0, &spec);
                assert!(g >= prev);
                prev = g;
            }
        }
    }
}
