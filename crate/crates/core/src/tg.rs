//! Truncated-Gaussian tail machinery for post-selection tests and intervals.
//!
//! Conditional on the selection event `{Gamma y >= w}` and on the sufficient
//! statistic for the nuisance directions, a linear contrast `v' y` follows a
//! one-dimensional Gaussian truncated to an interval `[vlo, vup]` computable
//! from the polyhedron. Everything here reduces to evaluating that truncated
//! distribution far into its tails without catastrophic cancellation, which
//! drives three implementation choices:
//!
//! * the normal survival function is computed in log space, switching from a
//!   complementary-error-function form to a Mills-ratio continued fraction
//!   deep in the tail;
//! * truncated CDF and survival values are formed from ratios of
//!   `exp_m1` differences of log tails, never as differences of CDFs;
//! * confidence limits come from monotone bisection in the mean, which only
//!   needs those stable evaluations.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};
use crate::polytope::Polyhedron;

/// `0.5 * ln(2 * pi)`.
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_741_8;
/// Above this standardized tail point the survival function switches to the
/// Mills-ratio continued fraction.
const TAIL_SWITCH: f64 = 8.0;
/// Rows whose direction is this close to orthogonal to the contrast (as a
/// cosine) put no constraint on the line `y + t v`.
const RHO_TOL: f64 = 1e-12;

/// `ln P(Z > t)` for standard normal `Z`, accurate over the whole real line.
pub fn log_norm_sf(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    if t < 0.0 {
        // ln(1 - P(Z > -t)), safe because P(Z > -t) <= 1/2 here.
        return (-log_norm_sf(-t).exp()).ln_1p();
    }
    if t < TAIL_SWITCH {
        (0.5 * erfc(t / std::f64::consts::SQRT_2)).ln()
    } else {
        // P(Z > t) = phi(t) * R(t), with the Mills ratio from the Laplace
        // continued fraction R(t) = 1/(t + 1/(t + 2/(t + 3/(...)))).
        let mut tail = 0.0;
        for k in (1..=60u32).rev() {
            tail = k as f64 / (t + tail);
        }
        let mills = 1.0 / (t + tail);
        -0.5 * t * t - HALF_LN_2PI + mills.ln()
    }
}

/// `P(Z > t)` for standard normal `Z`.
pub fn norm_sf(t: f64) -> f64 {
    log_norm_sf(t).exp()
}

/// Standard normal quantile via the Acklam rational approximation polished
/// with one Halley step. Requires `0 < p < 1`.
pub fn norm_ppf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::BadParameter(format!("normal quantile needs p in (0,1), got {p}")));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    };
    // One Halley step on f(x) = Phi(x) - p; f''/f' = -x.
    let f = 0.5 * erfc(-x / std::f64::consts::SQRT_2) - p;
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if pdf > 0.0 {
        let u = f / pdf;
        return Ok(x - u / (1.0 + x * u / 2.0));
    }
    Ok(x)
}

/// CDF and survival of a standardized Gaussian truncated to `[alpha, beta]`,
/// evaluated at `xi` (clamped into the window). Both values are accurate in
/// relative terms even when one of them is astronomically small.
fn tg_both_std(xi: f64, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    if !(alpha < beta) {
        return Err(Error::EmptyTruncation { vlo: alpha, vup: beta });
    }
    let xi = xi.clamp(alpha, beta);
    if alpha >= 0.0 {
        // Right tail: work with L(t) = ln P(Z > t), all exponents <= 0.
        let la = log_norm_sf(alpha);
        let lb = log_norm_sf(beta);
        let lx = log_norm_sf(xi);
        let den = (lb - la).exp_m1();
        if den == 0.0 {
            return Err(Error::EmptyTruncation { vlo: alpha, vup: beta });
        }
        let f = (lx - la).exp_m1() / den;
        let s = (lx - la).exp() * (lb - lx).exp_m1() / den;
        Ok((f.clamp(0.0, 1.0), s.clamp(0.0, 1.0)))
    } else if beta <= 0.0 {
        let (f, s) = tg_both_std(-xi, -beta, -alpha)?;
        Ok((s, f))
    } else {
        // Window straddles zero, so the denominator is well conditioned.
        let pa = 0.5 * erfc(-alpha / std::f64::consts::SQRT_2);
        let pb = 0.5 * erfc(-beta / std::f64::consts::SQRT_2);
        let px = 0.5 * erfc(-xi / std::f64::consts::SQRT_2);
        let den = pb - pa;
        if !(den > 0.0) {
            return Err(Error::EmptyTruncation { vlo: alpha, vup: beta });
        }
        Ok((((px - pa) / den).clamp(0.0, 1.0), ((pb - px) / den).clamp(0.0, 1.0)))
    }
}

/// CDF at `x` of a `N(mu, sd^2)` truncated to `[vlo, vup]`.
pub fn tg_cdf(x: f64, mu: f64, sd: f64, vlo: f64, vup: f64) -> Result<f64> {
    let (f, _) = tg_both(x, mu, sd, vlo, vup)?;
    Ok(f)
}

/// Survival `P(X > x)` of a `N(mu, sd^2)` truncated to `[vlo, vup]`,
/// accurate in relative terms deep in the upper tail.
pub fn tg_sf(x: f64, mu: f64, sd: f64, vlo: f64, vup: f64) -> Result<f64> {
    let (_, s) = tg_both(x, mu, sd, vlo, vup)?;
    Ok(s)
}

fn tg_both(x: f64, mu: f64, sd: f64, vlo: f64, vup: f64) -> Result<(f64, f64)> {
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::BadParameter(format!("truncated normal needs sd > 0, got {sd}")));
    }
    tg_both_std((x - mu) / sd, (vlo - mu) / sd, (vup - mu) / sd)
}

/// Truncation interval for the contrast `v` at `y`: the set of values `t`
/// such that replacing `v' y` by `t` (moving `y` along `v / ||v||^2`) keeps
/// the point inside the polyhedron.
pub fn truncation_limits(poly: &Polyhedron, y: &DVector<f64>, v: &DVector<f64>) -> Result<(f64, f64)> {
    if y.len() != poly.dim() || v.len() != poly.dim() {
        return Err(Error::Dimension(format!(
            "polyhedron dimension {} against y of {} and v of {}",
            poly.dim(),
            y.len(),
            v.len()
        )));
    }
    let vv = v.norm_squared();
    if vv <= 0.0 {
        return Err(Error::BadParameter("contrast vector is zero".into()));
    }
    let vnorm = vv.sqrt();
    let stat = v.dot(y);
    let rho = poly.gamma() * v / vv;
    let margins = poly.margins(y);
    let mut vlo = f64::NEG_INFINITY;
    let mut vup = f64::INFINITY;
    for j in 0..rho.len() {
        // rho_j * vnorm is the cosine between the row and the contrast.
        if rho[j].abs() * vnorm <= RHO_TOL {
            continue;
        }
        let t = stat - margins[j] / rho[j];
        if rho[j] > 0.0 {
            vlo = vlo.max(t);
        } else {
            vup = vup.min(t);
        }
    }
    if !(vlo < vup) {
        return Err(Error::EmptyTruncation { vlo, vup });
    }
    Ok((vlo, vup))
}

/// Equal-tailed `1 - alpha` confidence interval for `mu = E[v' y]` from the
/// truncated-Gaussian pivot: bisection in `mu` of `F_mu(stat)`, which is
/// strictly decreasing in `mu`.
pub fn tg_interval(stat: f64, sd: f64, vlo: f64, vup: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::BadParameter(format!("interval needs alpha in (0,1), got {alpha}")));
    }
    let lo = solve_mu(stat, sd, vlo, vup, 1.0 - alpha / 2.0)?;
    let hi = solve_mu(stat, sd, vlo, vup, alpha / 2.0)?;
    Ok((lo, hi))
}

/// Solve `F_mu(stat) = target` for `mu` by bisection.
fn solve_mu(stat: f64, sd: f64, vlo: f64, vup: f64, target: f64) -> Result<f64> {
    let cdf = |mu: f64| tg_cdf(stat, mu, sd, vlo, vup);
    let mut lo = stat - 10.0 * sd;
    let mut hi = stat + 10.0 * sd;
    // F is decreasing in mu: expand until F(lo) >= target >= F(hi).
    let mut width = 10.0 * sd;
    for _ in 0..60 {
        if cdf(lo)? >= target {
            break;
        }
        width *= 2.0;
        lo -= width;
    }
    let mut width = 10.0 * sd;
    for _ in 0..60 {
        if cdf(hi)? <= target {
            break;
        }
        width *= 2.0;
        hi += width;
    }
    if cdf(lo)? < target || cdf(hi)? > target {
        return Err(Error::Degenerate(format!(
            "confidence bound did not bracket: target {target} on [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-11 * sd.max(stat.abs()).max(1.0) {
            break;
        }
        if cdf(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Full post-selection summary for one contrast.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TgInference {
    /// Observed statistic `v' y`.
    pub stat: f64,
    /// Null standard deviation `sigma * ||v||`.
    pub sd: f64,
    pub vlo: f64,
    pub vup: f64,
    /// One-sided p-value `P_0(v' y > stat | selection)`.
    pub p_one: f64,
    /// Two-sided selective p-value `2 min(F, 1 - F)`.
    pub p_two: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// Interval miscoverage level.
    pub alpha: f64,
}

/// Test and interval for the contrast `v` under noise level `sigma`, given
/// the selection polyhedron that `y` satisfies.
pub fn tg_inference(
    poly: &Polyhedron,
    y: &DVector<f64>,
    v: &DVector<f64>,
    sigma: f64,
    alpha: f64,
) -> Result<TgInference> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::BadParameter(format!("sigma must be positive, got {sigma}")));
    }
    let (vlo, vup) = truncation_limits(poly, y, v)?;
    let stat = v.dot(y);
    let sd = sigma * v.norm();
    let (f, s) = tg_both(stat, 0.0, sd, vlo, vup)?;
    let p_two = (2.0 * f.min(s)).min(1.0);
    let (ci_lower, ci_upper) = tg_interval(stat, sd, vlo, vup, alpha)?;
    Ok(TgInference { stat, sd, vlo, vup, p_one: s, p_two, ci_lower, ci_upper, alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::run_path;
    use crate::penalty::PenaltyMatrix;
    use crate::polytope::selection_polyhedron;
    use approx::assert_relative_eq;

    // Reference values computed with 500-digit arithmetic.
    #[test]
    fn log_survival_matches_references() {
        assert_relative_eq!(log_norm_sf(1.0), -1.841_021_645_009_263_505_771, max_relative = 1e-14);
        assert_relative_eq!(log_norm_sf(8.5), -39.197_396_428_217_669_288_51, max_relative = 1e-14);
        assert_relative_eq!(log_norm_sf(40.0), -804.608_442_013_753_788_166_6, max_relative = 1e-14);
        assert_relative_eq!(
            log_norm_sf(-3.0),
            -1.350_809_964_748_193_798_841e-3,
            max_relative = 1e-12
        );
        assert_relative_eq!(norm_sf(4.0), 3.167_124_183_311_992_125_4e-5, max_relative = 1e-13);
        assert_relative_eq!(norm_sf(5.0), 2.866_515_718_791_939_116_7e-7, max_relative = 1e-13);
        // The two tail regimes agree where they meet.
        let below = log_norm_sf(8.0 - 1e-12);
        let above = log_norm_sf(8.0);
        assert_relative_eq!(below, above, max_relative = 1e-12);
    }

    #[test]
    fn quantile_matches_references() {
        assert_relative_eq!(
            norm_ppf(0.975).unwrap(),
            1.959_963_984_540_054_235_5,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            norm_ppf(1e-10).unwrap(),
            -6.361_340_902_404_056_204_7,
            max_relative = 1e-12
        );
        // Round trip through the survival function.
        for &p in &[1e-8, 1e-3, 0.2, 0.5, 0.9, 1.0 - 1e-6] {
            let x = norm_ppf(p).unwrap();
            assert_relative_eq!(norm_sf(-x), p, max_relative = 1e-11);
        }
        assert!(norm_ppf(0.0).is_err());
        assert!(norm_ppf(1.0).is_err());
    }

    #[test]
    fn truncated_cdf_matches_references() {
        let cases: [(f64, f64, f64, f64, f64, f64); 7] = [
            (5.0, 0.0, 1.0, 4.0, f64::INFINITY, 0.990_949_152_755_373_470_59),
            (10.5, 0.0, 1.0, 10.0, 12.0, 0.994_331_903_610_904_926_32),
            (38.2, 0.0, 1.0, 38.0, 39.0, 0.999_512_022_933_517_958_78),
            (-37.8, 0.0, 1.0, -39.0, -37.5, 1.233_639_197_927_405_453_9e-5),
            (5.5, 3.0, 2.0, 5.0, 6.0, 0.577_099_663_281_003_960_27),
            (1.0, 0.0, 1.0, -2.0, 1.5, 0.899_117_148_159_210_420_13),
            (4.5, 0.0, 1.0, 4.0, f64::INFINITY, 0.892_720_558_839_060_937_66),
        ];
        for &(x, mu, sd, lo, up, want) in &cases {
            let got = tg_cdf(x, mu, sd, lo, up).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn truncated_survival_is_stable_deep_in_the_tail() {
        assert_relative_eq!(
            tg_sf(200.0, 0.0, 1.0, 199.0, 201.0).unwrap(),
            2.270_251_913_654_850_879_6e-87,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            tg_sf(199.02, 0.0, 1.0, 199.0, 201.0).unwrap(),
            0.018_680_025_288_875_354_141,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            tg_sf(0.8, -1.0, 1.0, 0.5, f64::INFINITY).unwrap(),
            0.537_821_049_684_872_693_37,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cdf_survival_symmetry_and_complement() {
        let grid = [
            (0.3, 0.1, 1.3, -0.5, 2.0),
            (6.2, 0.0, 2.0, 6.0, 7.5),
            (-1.0, 0.5, 0.7, -3.0, 0.0),
        ];
        for &(x, mu, sd, lo, up) in &grid {
            let f = tg_cdf(x, mu, sd, lo, up).unwrap();
            let s = tg_sf(x, mu, sd, lo, up).unwrap();
            assert_relative_eq!(f + s, 1.0, max_relative = 1e-12);
            // Reflection: X ~ TG(mu, [lo, up]) iff -X ~ TG(-mu, [-up, -lo]).
            let fr = tg_cdf(-x, -mu, sd, -up, -lo).unwrap();
            assert_relative_eq!(fr, s, max_relative = 1e-10);
        }
        assert!(tg_cdf(0.0, 0.0, 1.0, 2.0, 2.0).is_err());
        assert!(tg_cdf(0.0, 0.0, -1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn pivot_interval_matches_reference() {
        // stat = 2 truncated to [0, inf), sd = 1.
        let p = tg_sf(2.0, 0.0, 1.0, 0.0, f64::INFINITY).unwrap();
        assert_relative_eq!(p, 0.045_500_263_896_358_414_401, max_relative = 1e-12);
        let (lo, hi) = tg_interval(2.0, 1.0, 0.0, f64::INFINITY, 0.10).unwrap();
        assert_relative_eq!(lo, 0.060_153_297_206_662_009_945, max_relative = 1e-7);
        assert_relative_eq!(hi, 3.643_616_749_467_383_014_2, max_relative = 1e-7);
        // Defining property of the equal-tailed limits.
        assert_relative_eq!(
            tg_cdf(2.0, lo, 1.0, 0.0, f64::INFINITY).unwrap(),
            0.95,
            max_relative = 1e-8
        );
        assert_relative_eq!(
            tg_cdf(2.0, hi, 1.0, 0.0, f64::INFINITY).unwrap(),
            0.05,
            max_relative = 1e-8
        );
    }

    #[test]
    fn interval_covers_iff_pivot_inside() {
        // Coherence between the interval and the pivot on a deterministic
        // sweep of statistics and windows.
        for i in 0..24 {
            let stat = 0.25 * i as f64 - 2.0;
            let vlo = -0.5 - 0.1 * i as f64;
            let vup = stat.max(0.0) + 1.5;
            if !(vlo < stat && stat < vup) {
                continue;
            }
            let (lo, hi) = tg_interval(stat, 0.8, vlo, vup, 0.1).unwrap();
            assert!(lo <= hi);
            let covers_zero = lo <= 0.0 && 0.0 <= hi;
            let f0 = tg_cdf(stat, 0.0, 0.8, vlo, vup).unwrap();
            let inside = f0 >= 0.05 - 1e-9 && f0 <= 0.95 + 1e-9;
            assert_eq!(covers_zero, inside, "stat {stat} window [{vlo}, {vup}]");
        }
    }

    #[test]
    fn golden_two_block_inference() {
        // Two-block data, first-difference penalty, one step; the segment
        // contrast has stat 1, sd 1, truncation [0, inf), so the one-sided
        // p-value is exactly 2 * P(Z > 1).
        let y = DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]);
        let d = PenaltyMatrix::diff1(4).unwrap();
        let trace = run_path(&y, &d, None).unwrap();
        let poly = selection_polyhedron(&trace, 1).unwrap();
        let v = DVector::from_vec(vec![-0.5, -0.5, 0.5, 0.5]);
        let (vlo, vup) = truncation_limits(&poly, &y, &v).unwrap();
        assert_relative_eq!(vlo, 0.0, epsilon = 1e-12);
        assert_eq!(vup, f64::INFINITY);
        let out = tg_inference(&poly, &y, &v, 1.0, 0.10).unwrap();
        assert_relative_eq!(out.stat, 1.0, max_relative = 1e-12);
        assert_relative_eq!(out.sd, 1.0, max_relative = 1e-12);
        assert_relative_eq!(out.p_one, 0.317_310_507_862_914_102_83, max_relative = 1e-10);
        assert!(out.ci_lower < 1.0 && out.ci_upper > 1.0);
    }
}
