//! Small statistical utilities for the simulation harness: the one-sample
//! Kolmogorov-Smirnov test against Unif[0,1] and Monte Carlo standard
//! errors for proportions.

/// Two-sided KS statistic of a sample against the Unif[0,1] CDF:
/// `D = max_i max(i/n - x_(i), x_(i) - (i-1)/n)`.
pub fn ks_statistic(sample: &[f64]) -> f64 {
    assert!(!sample.is_empty(), "KS statistic of an empty sample");
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("p-values must not be NaN"));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let hi = (i as f64 + 1.0) / n - x;
        let lo = x - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Survival function of the Kolmogorov distribution,
/// `Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2)`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..200u32 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        sum += sign * term;
        if term < 1e-18 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Approximate p-value of the two-sided KS test with Stephens' finite-sample
/// adjustment: `p = Q(D * (sqrt(n) + 0.12 + 0.11 / sqrt(n)))`.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let rn = (n as f64).sqrt();
    kolmogorov_sf(d * (rn + 0.12 + 0.11 / rn))
}

/// KS test of uniformity on [0,1]: returns `(statistic, p_value)`.
pub fn ks_uniform_test(sample: &[f64]) -> (f64, f64) {
    let d = ks_statistic(sample);
    (d, ks_pvalue(d, sample.len()))
}

/// One-sided KS test against Unif[0,1] in the anti-conservative direction:
/// `D+ = max_i (i/n - x_(i))`, the largest amount by which the empirical CDF
/// exceeds the uniform CDF.  Returns `(D+, p)` with the asymptotic tail
/// `P(D+ >= t) = exp(-2 n t^2)`.  Super-uniform (conservative) samples score
/// a small `D+` no matter how far above the diagonal they sit.
pub fn ks_plus_uniform(sample: &[f64]) -> (f64, f64) {
    assert!(!sample.is_empty(), "KS statistic of an empty sample");
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("p-values must not be NaN"));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        d = d.max((i as f64 + 1.0) / n - x);
    }
    (d, (-2.0 * n * d * d).exp().min(1.0))
}

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of an empirical proportion `phat` over `n` trials.
pub fn proportion_se(phat: f64, n: usize) -> f64 {
    (phat * (1.0 - phat) / n as f64).sqrt()
}

/// Fraction of p-values at or below `level` (Monte Carlo power / size).
pub fn rejection_rate(pvals: &[f64], level: f64) -> f64 {
    if pvals.is_empty() {
        return 0.0;
    }
    pvals.iter().filter(|&&p| p <= level).count() as f64 / pvals.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values computed with 50-digit arithmetic from the theta
    // series above.
    #[test]
    fn kolmogorov_survival_matches_references() {
        assert_relative_eq!(kolmogorov_sf(0.5), 0.963_945_243_664_875_094_4, max_relative = 1e-13);
        assert_relative_eq!(kolmogorov_sf(1.0), 0.269_999_671_677_354_521_2, max_relative = 1e-13);
        assert_relative_eq!(kolmogorov_sf(1.5), 0.022_217_962_616_525_128_72, max_relative = 1e-13);
        assert_relative_eq!(kolmogorov_sf(2.0), 6.709_252_557_796_953_465e-4, max_relative = 1e-12);
        // 1% and 5% critical points of the asymptotic distribution.
        assert_relative_eq!(kolmogorov_sf(1.627_623_611_518_950_346_5), 0.01, max_relative = 1e-10);
        assert_relative_eq!(kolmogorov_sf(1.358_098_639_322_550_604_3), 0.05, max_relative = 1e-10);
    }

    #[test]
    fn statistic_on_a_perfect_grid_is_half_a_cell() {
        // x_(i) = (i - 1/2)/n gives D = 1/(2n) exactly.
        let n = 40;
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert_relative_eq!(ks_statistic(&grid), 0.5 / n as f64, epsilon = 1e-15);
    }

    #[test]
    fn statistic_detects_a_point_mass() {
        let clumped = vec![0.5; 100];
        let d = ks_statistic(&clumped);
        assert!(d >= 0.5, "point mass should give D >= 1/2, got {d}");
        assert!(ks_pvalue(d, 100) < 1e-6);
    }

    #[test]
    fn shifted_sample_fails_and_grid_passes_at_one_percent() {
        let n = 500;
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let (_, p_ok) = ks_uniform_test(&grid);
        assert!(p_ok > 0.99);

        let squeezed: Vec<f64> = grid.iter().map(|x| x * 0.8).collect();
        let (_, p_bad) = ks_uniform_test(&squeezed);
        assert!(p_bad < 0.01, "squeezed sample should fail, p = {p_bad}");
    }

    #[test]
    fn one_sided_statistic_ignores_conservative_shift() {
        let n = 500;
        // Stochastically larger than uniform: empirical CDF below diagonal.
        let above: Vec<f64> = (0..n).map(|i| ((i as f64 + 0.5) / n as f64).powf(0.5)).collect();
        let (d_plus, p) = ks_plus_uniform(&above);
        assert!(d_plus < 0.01, "conservative sample should have tiny D+, got {d_plus}");
        assert!(p > 0.5);

        // Anti-conservative sample is caught.
        let below: Vec<f64> = (0..n).map(|i| ((i as f64 + 0.5) / n as f64).powi(2)).collect();
        let (d_bad, p_bad) = ks_plus_uniform(&below);
        assert!(d_bad > 0.2);
        assert!(p_bad < 1e-6);
    }

    #[test]
    fn helper_aggregates() {
        assert_relative_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_relative_eq!(rejection_rate(&[0.01, 0.2, 0.04, 0.9], 0.05), 0.5);
        assert_relative_eq!(proportion_se(0.5, 100), 0.05);
    }
}
