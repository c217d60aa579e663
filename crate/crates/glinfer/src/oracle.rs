//! Independent fixed-lambda reference solver used to validate the path.
//!
//! The path solver is checked against the box-constrained dual
//!
//! ```text
//!     minimize  (1/2) ||y - D'u||^2   subject to  ||u||_inf <= lambda,
//! ```
//!
//! solved here by accelerated projected gradient descent with function
//! restarts.  The dual solution need not be unique when `D` is row rank
//! deficient, so agreement is always judged on the primal fit
//! `beta = y - D'u`, which is unique.  Convergence is certified by the
//! duality gap `lambda * ||D beta||_1 - u' D beta`, which bounds
//! `(1/2) ||beta - beta*||^2` because the primal objective is 1-strongly
//! convex in `beta`.

use glinfer_core::{Error, PenaltyMatrix, Result};
use nalgebra::DVector;

#[derive(Clone, Debug)]
pub struct BoxQpSolution {
    pub u: DVector<f64>,
    pub fit: DVector<f64>,
    pub gap: f64,
    pub iterations: usize,
}

/// Solve the dual box problem at a fixed `lambda`; `tol` bounds the final
/// duality gap relative to `max(1, ||y||^2)`.
pub fn dual_box_qp(
    d: &PenaltyMatrix,
    y: &DVector<f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<BoxQpSolution> {
    if y.len() != d.n() {
        return Err(Error::Dimension(format!(
            "y has {} entries, penalty acts on {}",
            y.len(),
            d.n()
        )));
    }
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::BadParameter(format!("lambda = {lambda}")));
    }
    let m = d.m();
    if m == 0 || lambda == 0.0 {
        return Ok(BoxQpSolution { u: DVector::zeros(m), fit: y.clone(), gap: 0.0, iterations: 0 });
    }

    // Lipschitz constant of the gradient u -> D (D'u - y).
    let lip = {
        let sv = d.to_dense().svd(false, false);
        let s0 = sv.singular_values.max();
        (s0 * s0).max(f64::MIN_POSITIVE)
    };
    // The computable gap has a floating-point floor proportional to lambda
    // (each |D beta|_1 term carries roundoff of order eps * ||y|| that the
    // multiplication by lambda amplifies), so the tolerance scales with it.
    let gap_tol = tol * y.norm_squared().max(1.0) * (1.0 + lambda);

    let clip = |u: &mut DVector<f64>| {
        for v in u.iter_mut() {
            *v = v.clamp(-lambda, lambda);
        }
    };
    let objective = |u: &DVector<f64>| {
        let r = y - d.apply_t(u);
        0.5 * r.norm_squared()
    };

    let mut u = DVector::zeros(m);
    let mut momentum = u.clone();
    let mut t = 1.0f64;
    let mut f_prev = objective(&u);
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    for it in 1..=max_iter {
        iterations = it;
        // Gradient step from the momentum point, projected onto the box.
        let resid = d.apply_t(&momentum) - y;
        let grad = d.apply(&resid);
        let mut u_next = &momentum - grad / lip;
        clip(&mut u_next);

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        momentum = &u_next + ((t - 1.0) / t_next) * (&u_next - &u);
        u = u_next;
        t = t_next;

        if it % 10 == 0 {
            let f_cur = objective(&u);
            if f_cur > f_prev {
                // Function restart: drop the momentum.
                momentum = u.clone();
                t = 1.0;
            }
            f_prev = f_cur;

            let beta = y - d.apply_t(&u);
            let dbeta = d.apply(&beta);
            gap = lambda * dbeta.iter().map(|v| v.abs()).sum::<f64>() - u.dot(&dbeta);
            if gap.abs() <= gap_tol {
                break;
            }
        }
    }

    if !(gap.abs() <= gap_tol) {
        return Err(Error::Degenerate(format!(
            "box QP did not converge: gap {gap:.3e} after {iterations} iterations"
        )));
    }
    let fit = y - d.apply_t(&u);
    Ok(BoxQpSolution { u, fit, gap, iterations })
}
