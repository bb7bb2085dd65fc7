//! Box-restricted sublevel-set areas of the planar case-study objectives,
//! `Λ({y ∈ B : f(y) < c})`, as one-dimensional slice integrals.
//!
//! Every integrand here is even in the outer coordinate, so only `[0, h]`
//! is integrated. Kinks of the slice length are passed as breakpoints; the
//! pieces in between are smooth up to endpoint singularities, which the
//! double-exponential rule handles well.

use quadrature::double_exponential;

const PIECE_TOLERANCE: f64 = 1e-13;

/// `2·∫_0^h g`, split at every breakpoint inside `(0, h)` and at a
/// geometric ladder from `scale` up to `h`, for integrands that change
/// character at a small length scale.
fn even_integral(g: impl Fn(f64) -> f64, h: f64, breaks: &[f64], scale: Option<f64>) -> f64 {
    let mut cuts: Vec<f64> = breaks.to_vec();
    if let Some(mut s) = scale.filter(|s| *s > 0.0) {
        while s < h {
            cuts.push(s);
            s *= 4.0;
        }
    }
    cuts.retain(|b| b.is_finite() && *b > 0.0 && *b < h);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    let mut lo = 0.0;
    for hi in cuts.into_iter().chain(std::iter::once(h)) {
        if hi > lo {
            total += double_exponential::integrate(&g, lo, hi, PIECE_TOLERANCE).integral;
        }
        lo = hi;
    }
    2.0 * total
}

fn sqrt_pos(v: f64) -> f64 {
    if v > 0.0 {
        v.sqrt()
    } else {
        f64::NAN
    }
}

/// `x1³ + x2² < c` on `[-h, h]²`: the `x1`-slice at `x2` is
/// `(-h, cbrt(c - x2²))`. The slice length changes character at
/// `|x2| ≈ sqrt(|c|)`.
pub(crate) fn cubic_saddle_area(c: f64, h: f64) -> f64 {
    let w = 2.0 * h;
    let len = |y: f64| ((c - y * y).cbrt() + h).clamp(0.0, w);
    let h3 = h * h * h;
    even_integral(
        len,
        h,
        &[sqrt_pos(c), sqrt_pos(c + h3), sqrt_pos(c - h3)],
        Some(c.abs().sqrt()),
    )
}

/// `a·x1² - x2² < c` on `[-h, h]²`: the `x2`-slice at `x1` is
/// `|x2| > sqrt(a·x1² - c)`.
pub(crate) fn quadratic_saddle_area(a: f64, c: f64, h: f64) -> f64 {
    let len = |y: f64| {
        let r = (a * y * y - c).max(0.0).sqrt();
        2.0 * (h - r.min(h))
    };
    even_integral(
        len,
        h,
        &[sqrt_pos(c / a), sqrt_pos((c + h * h) / a)],
        Some((c.abs() / a).sqrt()),
    )
}

/// `x1 + a·|x2| < c` on `[-h, h]²`: the `x1`-slice at `x2` is
/// `(-h, c - a·|x2|)`.
pub(crate) fn linear_ridge_area(a: f64, c: f64, h: f64) -> f64 {
    let w = 2.0 * h;
    let len = |y: f64| (c - a * y + h).clamp(0.0, w);
    even_integral(len, h, &[(c + h) / a, (c - h) / a], None)
}

/// `∫_lo^hi g`, split at every breakpoint inside `(lo, hi)`.
fn integral(g: impl Fn(f64) -> f64, lo: f64, hi: f64, breaks: &[f64]) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    let mut a = lo;
    for b in cuts.into_iter().chain(std::iter::once(hi)) {
        if b > a {
            total += double_exponential::integrate(&g, a, b, PIECE_TOLERANCE).integral;
        }
        a = b;
    }
    total
}

/// Real roots of `x³ + p·x + q`.
fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc > 0.0 {
        let s = disc.sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        if m == 0.0 {
            return vec![0.0];
        }
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect()
    }
}

/// Roots of `g` on `[lo, hi]` given points that split it into monotone
/// pieces.
fn monotone_roots(g: impl Fn(f64) -> f64, lo: f64, hi: f64, turns: &[f64]) -> Vec<f64> {
    let mut knots: Vec<f64> = turns
        .iter()
        .copied()
        .filter(|t| *t > lo && *t < hi)
        .collect();
    knots.push(lo);
    knots.push(hi);
    knots.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for w in knots.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (ga, gb) = (g(a), g(b));
        if (ga < 0.0) == (gb < 0.0) {
            continue;
        }
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if (g(mid) < 0.0) == (ga < 0.0) {
                a = mid;
            } else {
                b = mid;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

fn sqrt0(v: f64) -> f64 {
    v.max(0.0).sqrt()
}

/// `Λ({y ∈ [-h, h]² : ‖y‖ < r})`.
fn disc_area(r: f64, h: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let w = r.min(h);
    let len = |x: f64| 2.0 * sqrt0(r * r - x * x).min(h);
    2.0 * integral(len, 0.0, w, &[sqrt_pos(r * r - h * h)])
}

/// Area of the disc of radius `r` inside the ball of radius 1/2 around
/// `(1, 0)`.
fn disc_in_jump_ball(r: f64) -> f64 {
    if r <= 0.5 {
        return 0.0;
    }
    let len = |x: f64| {
        let u = 1.0 - x;
        2.0 * sqrt0(0.25 - u * u).min(sqrt0(r * r - x * x))
    };
    // the two circles cross at x = (r² + 3/4)/2
    integral(len, 0.5, r.min(1.5), &[(r * r + 0.75) / 2.0, 1.0])
}

/// Area of the disc of radius `r` inside the strip `(a, ∞) × (0, 1)`,
/// clipped to `x1 <= h`.
fn disc_in_strip(a: f64, r: f64, h: f64) -> f64 {
    if r <= a {
        return 0.0;
    }
    let len = |x: f64| sqrt0(r * r - x * x).min(1.0);
    integral(len, a, r.min(h), &[sqrt_pos(r * r - 1.0)])
}

/// `‖y‖² + 1_S(y) < c` on `[-h, h]²` for the ball and strip jump sets:
/// the disc of radius `√c` outside `S` plus the disc of radius `√(c-1)`
/// inside `S`.
pub(crate) fn jump_ball_area(c: f64, h: f64) -> f64 {
    let (r, r1) = (sqrt0(c), sqrt0(c - 1.0));
    disc_area(r, h) - disc_in_jump_ball(r) + disc_in_jump_ball(r1)
}

pub(crate) fn jump_strip_area(a: f64, c: f64, h: f64) -> f64 {
    let (r, r1) = (sqrt0(c), sqrt0(c - 1.0));
    disc_area(r, h) - disc_in_strip(a, r, h) + disc_in_strip(a, r1, h)
}

/// Star variant, in polar coordinates: `S` is the exterior of
/// `ρ(θ) = 1 + 0.3·cos 2θ`. Along each ray the sublevel set is
/// `[0, min(r, ρ, R))` plus `[ρ, min(r1, R))`, with `R(θ)` the distance to
/// the box edge.
pub(crate) fn jump_star_area(c: f64, h: f64) -> f64 {
    let (r, r1) = (sqrt0(c), sqrt0(c - 1.0));
    let rho = |t: f64| 1.0 + 0.3 * (2.0 * t).cos();
    let edge = |t: f64| h / t.cos().max(t.sin());
    let g = |t: f64| {
        let (p, e) = (rho(t), edge(t));
        let inner = r.min(p).min(e);
        let outer = r1.min(e);
        0.5 * inner * inner + 0.5 * (outer * outer - p * p).max(0.0)
    };
    let quarter = std::f64::consts::FRAC_PI_2;
    let mut breaks = vec![quarter / 2.0];
    for radius in [r, r1] {
        // ρ(θ) = radius and R(θ) = radius
        let cos2 = (radius - 1.0) / 0.3;
        if cos2.abs() < 1.0 {
            breaks.push(0.5 * cos2.acos());
        }
        if radius > h {
            let t = (h / radius).acos();
            breaks.extend([t, quarter - t]);
        }
    }
    // ρ is symmetric under θ -> -θ and θ -> π - θ
    4.0 * integral(g, 0.0, quarter, &breaks)
}

/// `100 (x1² - x2)² + (x1 - 1)² < c` on the box `[lo1, hi1] × [lo2, hi2]`.
/// The `x2`-slice at `x1` is `|x2 - x1²| < w(x1)`.
pub(crate) fn rosenbrock_area(c: f64, lo: [f64; 2], hi: [f64; 2]) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    let half = |x: f64| sqrt0((c - (x - 1.0) * (x - 1.0)) / 100.0);
    let len = |x: f64| {
        let (w, q) = (half(x), x * x);
        ((q + w).min(hi[1]) - (q - w).max(lo[1])).max(0.0)
    };
    let (a, b) = ((1.0 - c.sqrt()).max(lo[0]), (1.0 + c.sqrt()).min(hi[0]));
    if !(b > a) {
        return 0.0;
    }
    // the slice meets the box edge `e` where
    // P(x) = 100 (x² - e)² + (x - 1)² - c vanishes; P' is a depressed cubic
    let mut breaks = vec![0.0];
    for e in [lo[1], hi[1]] {
        let p = |x: f64| 100.0 * (x * x - e).powi(2) + (x - 1.0).powi(2) - c;
        let turns = depressed_cubic_roots((2.0 - 400.0 * e) / 400.0, -2.0 / 400.0);
        breaks.extend(monotone_roots(p, a, b, &turns));
    }
    integral(len, a, b, &breaks)
}

#[cfg(test)]
// reference digits are kept as printed by the independent computation
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // Reference areas from an independent high-precision quadrature that
    // slices along the other coordinate.
    const CUBIC: [(f64, f64); 6] = [
        (-50.0, 1.550_155_645_633_205_6),
        (-3.0, 16.372_251_813_379_997),
        (0.0, 19.904_757_921_009_218),
        (0.4, 21.752_471_668_228_824),
        (7.0, 36.418_999_733_945_731),
        (70.0, 63.692_239_563_833_094),
    ];
    const QUADRATIC_A9: [(f64, f64); 5] = [
        (-20.0, 0.0),
        (-1.0, 8.952_330_877_289_404_7),
        (0.0, 32.0 / 3.0),
        (2.0, 13.664_038_064_370_208),
        (100.0, 54.723_233_622_765_04),
    ];
    const RIDGE_A1_5: [(f64, f64); 5] = [
        (-9.0, 0.0),
        (-2.0, 8.0 / 3.0),
        (0.0, 32.0 / 3.0),
        (3.0, 32.0),
        (20.0, 64.0),
    ];

    #[test]
    fn slice_areas_match_reference_values() {
        for (c, want) in CUBIC {
            let got = cubic_saddle_area(c, 4.0);
            assert!((got - want).abs() < 1e-9, "cubic c={c}: {got} vs {want}");
        }
        for (c, want) in QUADRATIC_A9 {
            let got = quadratic_saddle_area(9.0, c, 4.0);
            assert!(
                (got - want).abs() < 1e-9,
                "quadratic c={c}: {got} vs {want}"
            );
        }
        for (c, want) in RIDGE_A1_5 {
            let got = linear_ridge_area(1.5, c, 4.0);
            assert!((got - want).abs() < 1e-9, "ridge c={c}: {got} vs {want}");
        }
    }

    #[test]
    fn closed_forms_at_special_levels() {
        // x1³ + x2² < 0 is x1 < -|x2|^{2/3}: area 32 - 2·∫_0^4 y^{2/3} dy
        let want = 32.0 - 2.0 * 0.6 * 4f64.powf(5.0 / 3.0);
        assert!((cubic_saddle_area(0.0, 4.0) - want).abs() < 1e-10);
        // ridge a=1, c=0: ∫_{-4}^{4} (4 - |y|) dy = 16
        assert!((linear_ridge_area(1.0, 0.0, 4.0) - 16.0).abs() < 1e-10);
        // quadratic saddle a=1, c=0: |x2| > |x1| covers half the box
        assert!((quadratic_saddle_area(1.0, 0.0, 4.0) - 32.0).abs() < 1e-10);
    }

    #[test]
    fn tiny_level_differences_are_resolved() {
        // near c = 0 the cubic area grows like |c|^{5/6}; differences far
        // below any sampling resolution must stay positive and ordered
        let a0 = cubic_saddle_area(0.0, 4.0);
        let a1 = cubic_saddle_area(-1e-9, 4.0);
        let a2 = cubic_saddle_area(-1e-8, 4.0);
        assert!(a0 > a1 && a1 > a2, "{a0} {a1} {a2}");
        let d9 = a0 - a1;
        let d6 = a0 - cubic_saddle_area(-1e-6, 4.0);
        assert!((d9 / 9.090_089_120_812_92e-8 - 1.0).abs() < 1e-5, "{d9}");
        assert!((d6 / 2.788_388_672_850_587e-5 - 1.0).abs() < 1e-6, "{d6}");
    }

    // Reference areas from independent high-precision quadratures: the
    // Rosenbrock kinks from polynomial roots (unclipped, the area is πc/10),
    // the ball variant in polar coordinates, the strip in x2 slices and the
    // star by a 4e7-point midpoint rule in polar coordinates.
    const ROSENBROCK: [(f64, f64); 5] = [
        (0.5, PI * 0.05),
        (1.0, 0.289_036_706_392_949_72),
        (5.0, 1.106_554_983_334_811_9),
        (50.0, 4.786_660_158_115_379_6),
        (1000.0, 15.069_578_696_505_229),
    ];
    const JUMP_BALL: [(f64, f64); 6] = [
        (0.1, PI * 0.1),
        (0.5, 1.477_484_201_187_229_9),
        (1.2, 3.321_079_919_536_413_7),
        (2.0, 5.887_877_644_062_715_8),
        (2.5, 7.649_896_368_811_847),
        (5.0, 14.435_011_087_932_844),
    ];
    const JUMP_STRIP_A1: [(f64, f64); 5] = [
        (0.5, PI * 0.5),
        (1.5, 4.604_332_589_475_173_1),
        (2.5, 7.493_766_585_435_351_7),
        (5.0, 15.462_067_200_427_987),
        (12.0, 33.350_980_305_185_7),
    ];
    const JUMP_STAR: [(f64, f64); 6] = [
        (0.3, PI * 0.3),
        (0.8, 2.263_217_245_683_282_7),
        (1.5, 3.194_076_083_222_808_9),
        (2.0, 3.812_278_488_295_563_6),
        (3.0, PI * 2.0),
        (5.0, PI * 4.0),
    ];

    fn close(got: f64, want: f64) -> bool {
        (got - want).abs() <= 1e-9 * want.max(1.0)
    }

    #[test]
    fn rosenbrock_and_jump_areas_match_reference_values() {
        for (c, want) in ROSENBROCK {
            let got = rosenbrock_area(c, [-2.0, -1.0], [2.0, 3.0]);
            assert!(close(got, want), "rosenbrock c={c}: {got} vs {want}");
        }
        for (c, want) in JUMP_BALL {
            let got = jump_ball_area(c, 2.0);
            assert!(close(got, want), "ball c={c}: {got} vs {want}");
        }
        for (c, want) in JUMP_STRIP_A1 {
            let got = jump_strip_area(1.0, c, 3.0);
            assert!(close(got, want), "strip c={c}: {got} vs {want}");
        }
        for (c, want) in JUMP_STAR {
            let got = jump_star_area(c, 2.0);
            assert!(close(got, want), "star c={c}: {got} vs {want}");
        }
    }

    #[test]
    fn cubic_roots() {
        // (x - 1)(x - 2)(x + 3) = x³ - 7x + 6
        let mut r = depressed_cubic_roots(-7.0, 6.0);
        r.sort_by(f64::total_cmp);
        for (got, want) in r.iter().zip([-3.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-12, "{r:?}");
        }
        let r = depressed_cubic_roots(1.0, -2.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-12);
    }
}
