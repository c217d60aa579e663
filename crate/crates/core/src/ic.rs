//! Information-criterion stopping along the path, with its selection event.
//!
//! The path visits a nested sequence of models: at step `k` the fit lives in
//! `null(D_{-B_k})`, whose dimension only moves when a boundary change
//! actually frees or removes a degree of freedom. The stopping rule
//! evaluates a criterion
//!
//! ```text
//!     J(M) = ||y - P_M y||^2 + pen(dim M)
//! ```
//!
//! at each *candidate* step (the steps where the dimension changed), walks
//! the pairwise differences, and stops at the first candidate followed by
//! `q` consecutive rises. Because consecutive candidate models are nested
//! with a rank-one gap `w w'`, each rise or fall is a statement about
//! `(w' y)^2` against a deterministic penalty gap, so the stopping decision
//! adds finitely many affine rows to the selection polyhedron (conditioning
//! additionally on `sign(w' y)` where a fall would otherwise be a union of
//! two half-spaces).

use libm::lgamma;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rank1_null_basis, Factors};
use crate::path::PathTrace;
use crate::polytope::{selection_polyhedron, PolyBuilder, Polyhedron, RowFamily, RowTag};

/// Model-complexity penalty `pen(dim)` added to the residual sum of squares.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IcPenalty {
    Aic,
    Bic,
    /// Extended BIC with weight `gamma` on the log-binomial model-count term.
    Ebic { gamma: f64 },
}

/// `ln C(n, k)` via log-gamma.
pub(crate) fn ln_choose(n: usize, k: usize) -> f64 {
    lgamma((n + 1) as f64) - lgamma((k + 1) as f64) - lgamma((n - k + 1) as f64)
}

impl IcPenalty {
    /// Penalty for a `dim`-dimensional model on `n` observations at noise
    /// level `sigma`.
    pub fn value(&self, n: usize, dim: usize, sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        match *self {
            IcPenalty::Aic => 2.0 * s2 * dim as f64,
            IcPenalty::Bic => s2 * dim as f64 * (n as f64).ln(),
            IcPenalty::Ebic { gamma } => {
                s2 * (dim as f64 * (n as f64).ln() + 2.0 * gamma * ln_choose(n, dim.min(n)))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IcConfig {
    pub penalty: IcPenalty,
    /// Number of consecutive rises that triggers the stop.
    pub q: usize,
    /// Noise standard deviation used inside the criterion.
    pub sigma: f64,
}

/// Where the forward scan stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IcStop {
    /// 1-based position of the chosen candidate in the candidate list.
    pub candidate_index: usize,
    /// The chosen path step `k_hat`.
    pub step: usize,
    /// True when `q` consecutive rises fired; false when the path completed
    /// without firing and the last candidate was taken.
    pub fired: bool,
    /// Number of leading sign comparisons the stopping event conditions on.
    pub comparisons_used: usize,
    /// Deepest path step referenced by those comparisons; the selection
    /// event must be pinned through this step.
    pub step_needed: usize,
}

/// Criterion values along the candidate steps and the stop decision.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IcReport {
    /// 1-based path steps where the model dimension changed (step 1 always).
    pub candidates: Vec<usize>,
    /// Model dimension at each candidate.
    pub dims: Vec<usize>,
    /// Criterion value at each candidate.
    pub values: Vec<f64>,
    /// `sign(J(c_{l+1}) - J(c_l))` for consecutive candidates; +1 is a rise.
    pub signs: Vec<i8>,
    /// `None` when the trace was truncated before the rule could decide.
    pub stop: Option<IcStop>,
}

fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Forward-stop scan: smallest `j` with `q` consecutive rises starting at
/// `S_j`. Falls back to the last candidate when the list is complete.
fn stop_scan(signs: &[i8], n_candidates: usize, q: usize, complete: bool) -> Option<(usize, bool)> {
    if n_candidates == 0 {
        return None;
    }
    let mut run = 0usize;
    for (idx, &s) in signs.iter().enumerate() {
        if s > 0 {
            run += 1;
            if run == q {
                // Rises S_j..S_{j+q-1} with j = idx+2-q in 1-based terms.
                return Some((idx + 2 - q, true));
            }
        } else {
            run = 0;
        }
    }
    if complete {
        Some((n_candidates, false))
    } else {
        None
    }
}

/// Factors of `D_{-B_k}` for the configuration at 1-based path step `k`.
fn complement_factors(trace: &PathTrace, k: usize) -> Factors {
    let step = &trace.steps[k - 1];
    let m = trace.d.m();
    let mut inb = vec![false; m];
    for &i in &step.boundary {
        inb[i] = true;
    }
    let rows: Vec<usize> = (0..m).filter(|&i| !inb[i]).collect();
    Factors::new(&trace.d.dense_rows(&rows))
}

/// Evaluate the criterion along the path and run the forward-stop scan.
pub fn ic_scan(trace: &PathTrace, cfg: &IcConfig) -> Result<IcReport> {
    if cfg.q == 0 {
        return Err(Error::BadParameter("stopping rule needs q >= 1".into()));
    }
    if !(cfg.sigma > 0.0) || !cfg.sigma.is_finite() {
        return Err(Error::BadParameter(format!("sigma must be positive, got {}", cfg.sigma)));
    }
    if trace.degenerate || trace.steps.is_empty() {
        return Err(Error::Degenerate("empty path has no models to stop over".into()));
    }
    let n = trace.y.len();
    let mut candidates = Vec::new();
    let mut dims = Vec::new();
    let mut values = Vec::new();
    let mut prev_dim: Option<usize> = None;
    for k in 1..=trace.k_max() {
        let f = complement_factors(trace, k);
        let dim = f.nullity();
        if prev_dim == Some(dim) {
            continue;
        }
        prev_dim = Some(dim);
        let rss = f.row_space_project(&trace.y).norm_squared();
        candidates.push(k);
        dims.push(dim);
        values.push(rss + cfg.penalty.value(n, dim, cfg.sigma));
    }
    let signs: Vec<i8> = values.windows(2).map(|w| sign_of(w[1] - w[0])).collect();
    let stop = stop_scan(&signs, candidates.len(), cfg.q, !trace.truncated).map(|(j, fired)| {
        let comparisons_used = if fired { (j + cfg.q - 1).min(signs.len()) } else { signs.len() };
        IcStop {
            candidate_index: j,
            step: candidates[j - 1],
            fired,
            comparisons_used,
            step_needed: candidates[comparisons_used],
        }
    });
    // `step_needed` indexes candidates[comparisons_used], which exists because
    // comparison l references candidates l and l+1; guard the empty case.
    let stop = stop.map(|mut s| {
        if s.comparisons_used == 0 {
            s.step_needed = s.step;
        }
        s
    });
    Ok(IcReport { candidates, dims, values, signs, stop })
}

/// Rows encoding the observed rise/fall pattern over the first
/// `stop.comparisons_used` comparisons. Tag `step` holds the 1-based
/// comparison index.
pub fn ic_polyhedron(trace: &PathTrace, report: &IcReport, cfg: &IcConfig) -> Result<Polyhedron> {
    let stop = report
        .stop
        .ok_or_else(|| Error::Invalid("stopping rule did not decide on this trace".into()))?;
    let n = trace.y.len();
    let mut b = PolyBuilder::new(n);
    let mut factors: Vec<Option<Factors>> = vec![None; report.candidates.len()];
    let factor_at = |idx: usize, cache: &mut Vec<Option<Factors>>| -> Factors {
        if cache[idx].is_none() {
            cache[idx] = Some(complement_factors(trace, report.candidates[idx]));
        }
        cache[idx].clone().unwrap()
    };
    for l in 1..=stop.comparisons_used {
        let (da, db) = (report.dims[l - 1], report.dims[l]);
        if da.abs_diff(db) != 1 {
            return Err(Error::CodimensionMismatch { defect: da.abs_diff(db) as f64 });
        }
        let up = db > da;
        let fa = factor_at(l - 1, &mut factors);
        let fb = factor_at(l, &mut factors);
        let w = if up { rank1_null_basis(&fb, &fa)? } else { rank1_null_basis(&fa, &fb)? };
        let dpen = cfg.penalty.value(n, db, cfg.sigma) - cfg.penalty.value(n, da, cfg.sigma);
        let s = report.signs[l - 1];
        let wy_sign = if w.dot(&trace.y) >= 0.0 { 1.0 } else { -1.0 };
        // J(c_{l+1}) - J(c_l) = -(w'y)^2 + dpen when the dimension grew,
        //                       +(w'y)^2 + dpen when it shrank.
        match (up, s > 0) {
            (true, true) => {
                if dpen <= 0.0 {
                    return Err(Error::Invalid(format!(
                        "comparison {l}: observed rise is impossible with penalty gap {dpen}"
                    )));
                }
                let off = -dpen.sqrt();
                b.push(w.clone(), off, RowTag { step: l, family: RowFamily::IcRise })?;
                b.push(-w, off, RowTag { step: l, family: RowFamily::IcRise })?;
            }
            (true, false) => {
                if dpen > 0.0 {
                    b.push(w * wy_sign, dpen.sqrt(), RowTag { step: l, family: RowFamily::IcFall })?;
                }
            }
            (false, true) => {
                if dpen < 0.0 {
                    b.push(
                        w * wy_sign,
                        (-dpen).sqrt(),
                        RowTag { step: l, family: RowFamily::IcRise },
                    )?;
                }
            }
            (false, false) => {
                if dpen >= 0.0 {
                    return Err(Error::Invalid(format!(
                        "comparison {l}: observed fall is impossible with penalty gap {dpen}"
                    )));
                }
                let off = -(-dpen).sqrt();
                b.push(w.clone(), off, RowTag { step: l, family: RowFamily::IcFall })?;
                b.push(-w, off, RowTag { step: l, family: RowFamily::IcFall })?;
            }
        }
    }
    Ok(b.finish())
}

/// Full conditioning event for inference after IC stopping: the path events
/// pinned through the deepest step the scan looked at, plus the rise/fall
/// rows.
pub fn ic_stopped_polyhedron(
    trace: &PathTrace,
    report: &IcReport,
    cfg: &IcConfig,
) -> Result<Polyhedron> {
    let stop = report
        .stop
        .ok_or_else(|| Error::Invalid("stopping rule did not decide on this trace".into()))?;
    let through = if stop.fired { stop.step_needed } else { trace.k_max() };
    let mut poly = selection_polyhedron(trace, through)?;
    poly.append(&ic_polyhedron(trace, report, cfg)?)?;
    Ok(poly)
}
