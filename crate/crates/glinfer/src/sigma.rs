//! Noise-level estimation for ordered data by cross-validation along the
//! path, with the one-standard-error rule.
//!
//! Folds are structured (every `folds`-th point) so each training set is
//! still an ordered sequence; the path is fit on the training subsequence
//! under its own first-difference penalty, held-out points are predicted by
//! averaging the fitted values of their nearest training neighbors, and the
//! CV curve is indexed by step count (step 0 is the constant fit).  After
//! the one-SE backtrack picks a step, sigma^2 is the full-data residual sum
//! of squares of the projection fit at that step divided by `n - df`, with
//! `df` the dimension of the selected model subspace.

use glinfer_core::linalg::Factors;
use glinfer_core::path::{primal_at, run_path};
use glinfer_core::{Error, PenaltyMatrix, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub sigma: f64,
    /// Chosen step count after the one-SE backtrack (0 = constant model).
    pub step: usize,
    /// Dimension of the model subspace at the chosen step.
    pub df: usize,
    /// CV curve indexed by step count.
    pub cv: Vec<f64>,
    /// Standard error of each CV value across folds.
    pub cv_se: Vec<f64>,
}

/// Cross-validated noise estimate for an ordered sequence under the
/// first-difference penalty.
pub fn estimate_sigma_cv(y: &DVector<f64>, folds: usize, max_steps: usize) -> Result<SigmaEstimate> {
    let n = y.len();
    if folds < 2 {
        return Err(Error::BadParameter(format!("need at least 2 folds, got {folds}")));
    }
    if max_steps == 0 {
        return Err(Error::BadParameter("max_steps must be at least 1".into()));
    }
    let min_train = n - n.div_ceil(folds);
    if min_train < 3 {
        return Err(Error::BadParameter(format!(
            "n = {n} is too short for {folds} structured folds"
        )));
    }

    // Per-fold mean squared prediction error, indexed by step count.
    let mut fold_mse: Vec<Vec<f64>> = Vec::with_capacity(folds);
    let mut common_steps = max_steps;
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|i| i % folds != f).collect();
        let test: Vec<usize> = (0..n).filter(|i| i % folds == f).collect();
        let y_train = DVector::from_fn(train.len(), |r, _| y[train[r]]);
        let d_train = PenaltyMatrix::diff1(train.len())?;
        let trace = run_path(&y_train, &d_train, Some(max_steps))?;
        let knots = trace.knots();
        common_steps = common_steps.min(trace.k_max());

        let mut errs = Vec::with_capacity(trace.k_max() + 1);
        for k in 0..=trace.k_max() {
            let fit = primal_at(&trace, knots[k])?;
            let mut sse = 0.0;
            for &i in &test {
                // Nearest training neighbors on each side of i.
                let pos = train.partition_point(|&t| t < i);
                let pred = match (pos.checked_sub(1), (pos < train.len()).then_some(pos)) {
                    (Some(l), Some(r)) => 0.5 * (fit[l] + fit[r]),
                    (Some(l), None) => fit[l],
                    (None, Some(r)) => fit[r],
                    (None, None) => unreachable!("training set is nonempty"),
                };
                let e = y[i] - pred;
                sse += e * e;
            }
            errs.push(sse / test.len() as f64);
        }
        fold_mse.push(errs);
    }
    if common_steps < 1 {
        return Err(Error::Degenerate("path too short for a CV curve".into()));
    }

    let n_curve = common_steps + 1;
    let mut cv = vec![0.0; n_curve];
    let mut cv_se = vec![0.0; n_curve];
    for k in 0..n_curve {
        let vals: Vec<f64> = fold_mse.iter().map(|e| e[k]).collect();
        let m = vals.iter().sum::<f64>() / folds as f64;
        let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (folds as f64 - 1.0);
        cv[k] = m;
        cv_se[k] = (var / folds as f64).sqrt();
    }

    // Minimizer (smallest step on ties), then the contiguous one-SE walk
    // toward more regularization.
    let mut k_min = 0;
    for k in 1..n_curve {
        if cv[k] < cv[k_min] {
            k_min = k;
        }
    }
    let band = cv[k_min] + cv_se[k_min];
    let mut chosen = k_min;
    while chosen > 0 && cv[chosen - 1] <= band {
        chosen -= 1;
    }

    // Full-data fit at the chosen step: projection onto the model subspace.
    let d = PenaltyMatrix::diff1(n)?;
    let factors = if chosen == 0 {
        Factors::new(&d.to_dense())
    } else {
        let trace = run_path(y, &d, Some(chosen))?;
        if trace.k_max() < chosen {
            return Err(Error::Degenerate(format!(
                "full path ended after {} steps, CV chose {chosen}",
                trace.k_max()
            )));
        }
        let boundary = &trace.steps[chosen - 1].boundary;
        let complement: Vec<usize> = (0..d.m()).filter(|r| !boundary.contains(r)).collect();
        Factors::new(&d.dense_rows(&complement))
    };
    let df = factors.nullity();
    if n <= df {
        return Err(Error::Degenerate(format!("no residual degrees of freedom (n = {n}, df = {df})")));
    }
    let resid = factors.row_space_project(y);
    let sigma = (resid.norm_squared() / (n - df) as f64).sqrt();
    Ok(SigmaEstimate { sigma, step: chosen, df, cv, cv_se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn noiseless_piecewise_constant_gives_near_zero_sigma() {
        let mut vals = vec![0.0; 10];
        vals.extend(vec![4.0; 10]);
        let y = DVector::from_vec(vals);
        let est = estimate_sigma_cv(&y, 5, 6).unwrap();
        assert!(est.sigma < 1e-8, "sigma = {}", est.sigma);
        assert!(est.step >= 1, "needs the jump in the model, step = {}", est.step);
    }

    #[test]
    fn pure_noise_recovers_sigma_within_fifteen_percent_in_median() {
        // Monte Carlo oracle: the median estimate over 50 replications of
        // N(0,1) noise should land within 15% of the truth.
        let n = 60;
        let mut estimates = Vec::with_capacity(50);
        for rep in 0..50 {
            let mut rng = CounterRng::new(515, rep);
            let y = rng.normal_vector(n);
            let est = estimate_sigma_cv(&y, 5, 8).unwrap();
            estimates.push(est.sigma);
        }
        estimates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (estimates[24] + estimates[25]);
        assert!(
            (median - 1.0).abs() < 0.15,
            "median sigma estimate {median} is off by more than 15%"
        );
    }

    #[test]
    fn the_procedure_is_scale_equivariant() {
        // Every quantity in the CV loop scales with the data, so the chosen
        // step is unchanged and sigma scales exactly.
        let mut rng = CounterRng::new(99, 0);
        let y = rng.normal_vector(45);
        let a = estimate_sigma_cv(&y, 5, 6).unwrap();
        let y3 = &y * 3.0;
        let b = estimate_sigma_cv(&y3, 5, 6).unwrap();
        assert_eq!(a.step, b.step);
        assert!((b.sigma / a.sigma - 3.0).abs() < 1e-6, "{} vs {}", a.sigma, b.sigma);
    }

    #[test]
    fn rejects_unusable_configurations() {
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert!(estimate_sigma_cv(&y, 1, 5).is_err());
        // Two folds on four points leave two training points, below the
        // three needed for a usable training path.
        assert!(estimate_sigma_cv(&y, 2, 5).is_err());
        let y2 = DVector::from_vec(vec![0.0; 30]);
        // Flat data: the training paths are empty, no CV curve.
        assert!(estimate_sigma_cv(&y2, 5, 5).is_err());
    }
}
