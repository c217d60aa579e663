//! The simulation geometries used throughout the experiments, with their
//! parameters exposed: a one-jump piecewise-constant mean, a two-jump
//! plateau, one slope change for the second-difference penalty, a square
//! patch on a 2d grid, and a synthetic varying-coefficient regression.
//!
//! Every scenario owns its mean vector, penalty, and default noise level;
//! data draws are deterministic functions of `(seed, rep)` through
//! [`CounterRng`].  The regression scenario draws its design once from a
//! reserved stream (`u64::MAX`), so the design is shared by all
//! replications of one seed while the noise varies.

use glinfer_core::{PenaltyKind, PenaltyMatrix};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::rng::CounterRng;

/// Stream index reserved for scenario-level randomness (the regression
/// design); replication noise uses streams `0..reps`.
const DESIGN_STREAM: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Piecewise-constant mean: 0 on `1..=loc`, `delta` on `loc+1..=n`.
    OneJump { n: usize, delta: f64, loc: usize },
    /// Plateau: `delta` on `loc1+1..=loc2`, 0 elsewhere.
    TwoJump { n: usize, delta: f64, loc1: usize, loc2: usize },
    /// Piecewise-linear mean: 0 on `1..=loc`, then slope `delta / loc`
    /// (so the change in slope at the knot is `delta / loc`).
    TfOneKnot { n: usize, delta: f64, loc: usize },
    /// `rows x cols` 4-neighbor grid, `delta` on the `patch x patch`
    /// lower-left corner block.
    GridPatch { rows: usize, cols: usize, delta: f64, patch: usize },
    /// Synthetic varying-coefficient model with 3 Gaussian predictors and
    /// piecewise-constant coefficient vectors: changepoints at 83 and 166
    /// (levels -1, 1, -1), at 125 (levels -1, 1), and none (level 1).
    RegressionStocks { n: usize, sigma: f64, rho: f64 },
}

/// One simulated data set plus everything needed to analyze it.
#[derive(Clone, Debug)]
pub struct Draw {
    pub y: DVector<f64>,
    /// Mean of `y` (for regression, the noiseless `X beta*`).
    pub mean: DVector<f64>,
    /// Stacked design matrix; regression scenario only.
    pub design: Option<DMatrix<f64>>,
}

impl Scenario {
    /// Observation count.
    pub fn n(&self) -> usize {
        match *self {
            Scenario::OneJump { n, .. }
            | Scenario::TwoJump { n, .. }
            | Scenario::TfOneKnot { n, .. }
            | Scenario::RegressionStocks { n, .. } => n,
            Scenario::GridPatch { rows, cols, .. } => rows * cols,
        }
    }

    /// Noise standard deviation the scenario was calibrated for.
    pub fn default_sigma(&self) -> f64 {
        match *self {
            Scenario::RegressionStocks { sigma, .. } => sigma,
            _ => 1.0,
        }
    }

    /// The penalty the path runs under.  For the regression scenario this
    /// is the block first-difference penalty on the stacked coefficient
    /// vector; the caller combines it with the drawn design through the
    /// regression transform.
    pub fn penalty(&self) -> PenaltyMatrix {
        match *self {
            Scenario::OneJump { n, .. } | Scenario::TwoJump { n, .. } => {
                PenaltyMatrix::diff1(n).expect("scenario sizes are validated")
            }
            Scenario::TfOneKnot { n, .. } => {
                PenaltyMatrix::diff2(n).expect("scenario sizes are validated")
            }
            Scenario::GridPatch { rows, cols, .. } => {
                PenaltyMatrix::graph_incidence(rows * cols, &grid_edges(rows, cols))
                    .expect("grid edges are valid")
            }
            Scenario::RegressionStocks { n, .. } => stacked_diff1(n, 3),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Scenario::OneJump { n, loc, .. } => {
                if n < 2 || loc == 0 || loc >= n {
                    return Err(format!("one_jump needs 1 <= loc < n, got n={n} loc={loc}"));
                }
            }
            Scenario::TwoJump { n, loc1, loc2, .. } => {
                if n < 3 || loc1 == 0 || loc1 >= loc2 || loc2 >= n {
                    return Err(format!(
                        "two_jump needs 1 <= loc1 < loc2 < n, got n={n} loc1={loc1} loc2={loc2}"
                    ));
                }
            }
            Scenario::TfOneKnot { n, loc, .. } => {
                if n < 3 || loc == 0 || loc >= n {
                    return Err(format!("tf_one_knot needs 1 <= loc < n, got n={n} loc={loc}"));
                }
            }
            Scenario::GridPatch { rows, cols, patch, .. } => {
                if rows < 2 || cols < 2 || patch == 0 || patch > rows || patch > cols {
                    return Err(format!(
                        "grid_patch needs patch <= min(rows, cols), got {rows}x{cols} patch={patch}"
                    ));
                }
            }
            Scenario::RegressionStocks { n, sigma, rho } => {
                if n < 4 || !(sigma > 0.0) || rho <= 0.0 {
                    return Err(format!(
                        "regression_stocks needs n >= 4, sigma > 0, rho > 0, got n={n} sigma={sigma} rho={rho}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Mean vector of the signal scenarios (regression handled in `draw`).
    pub fn mean(&self) -> DVector<f64> {
        match *self {
            Scenario::OneJump { n, delta, loc } => {
                DVector::from_fn(n, |i, _| if i + 1 > loc { delta } else { 0.0 })
            }
            Scenario::TwoJump { n, delta, loc1, loc2 } => DVector::from_fn(n, |i, _| {
                if i + 1 > loc1 && i + 1 <= loc2 {
                    delta
                } else {
                    0.0
                }
            }),
            Scenario::TfOneKnot { n, delta, loc } => {
                let slope = delta / loc as f64;
                DVector::from_fn(n, |i, _| {
                    let t = i + 1;
                    if t > loc {
                        slope * (t - loc) as f64
                    } else {
                        0.0
                    }
                })
            }
            Scenario::GridPatch { rows, cols, delta, patch } => {
                let members = grid_patch_members(rows, cols, patch);
                let mut theta = DVector::zeros(rows * cols);
                for i in members {
                    theta[i] = delta;
                }
                theta
            }
            Scenario::RegressionStocks { .. } => {
                panic!("regression mean depends on the drawn design; use draw()")
            }
        }
    }

    /// Simulate one replication.  Deterministic in `(seed, rep)`.
    pub fn draw(&self, seed: u64, rep: u64) -> Draw {
        let mut noise = CounterRng::new(seed, rep);
        match *self {
            Scenario::RegressionStocks { n, sigma, .. } => {
                let x = regression_design(n, seed);
                let beta = regression_coefficients(n);
                let mut mean = DVector::zeros(n);
                for t in 0..n {
                    for j in 0..3 {
                        mean[t] += x[(t, j)] * beta[(t, j)];
                    }
                }
                let y = &mean + sigma * noise.normal_vector(n);
                Draw { y, mean, design: Some(x) }
            }
            _ => {
                let mean = self.mean();
                let sigma = self.default_sigma();
                let y = &mean + sigma * noise.normal_vector(mean.len());
                Draw { y, mean, design: None }
            }
        }
    }
}

/// Edges of a `rows x cols` 4-neighbor grid; vertex `(r, c)` is index
/// `r * cols + c`, edges returned with the smaller endpoint first.
pub fn grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((i, i + 1));
            }
            if r + 1 < rows {
                edges.push((i, i + cols));
            }
        }
    }
    edges
}

/// Indices of the `patch x patch` block in the lower-left corner (largest
/// row indices, smallest column indices).
pub fn grid_patch_members(rows: usize, cols: usize, patch: usize) -> Vec<usize> {
    let mut members = Vec::with_capacity(patch * patch);
    for r in rows - patch..rows {
        for c in 0..patch {
            members.push(r * cols + c);
        }
    }
    members
}

/// Block first-difference penalty on `p` stacked coefficient vectors of
/// length `n` each (predictor-major layout): rows `j * (n-1) + i` penalize
/// `beta_j[i+1] - beta_j[i]`.
pub fn stacked_diff1(n: usize, p: usize) -> PenaltyMatrix {
    assert!(n >= 2 && p >= 1);
    let mut rows = Vec::with_capacity(p * (n - 1));
    for j in 0..p {
        let off = j * n;
        for i in 0..n - 1 {
            rows.push(vec![(off + i, -1.0), (off + i + 1, 1.0)]);
        }
    }
    PenaltyMatrix::from_rows(p * n, rows, PenaltyKind::Custom).expect("valid stacked rows")
}

/// Inverse of the stacked row layout: 0-based penalty row to
/// `(predictor, 1-based changepoint location within that predictor)`.
pub fn stacked_row_location(row: usize, n: usize) -> (usize, usize) {
    (row / (n - 1), row % (n - 1) + 1)
}

/// Expand an `n x p` pointwise design into the `n x (p*n)` stacked form in
/// which coefficient `j*n + t` multiplies predictor `j` at time `t` only.
pub fn stacked_design(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mut xs = DMatrix::zeros(n, p * n);
    for t in 0..n {
        for j in 0..p {
            xs[(t, j * n + t)] = x[(t, j)];
        }
    }
    xs
}

/// Synthetic stand-in for the log daily returns: i.i.d. N(0, 0.01^2)
/// entries, drawn once per seed from the reserved design stream.
pub fn regression_design(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = CounterRng::new(seed, DESIGN_STREAM);
    DMatrix::from_fn(n, 3, |_, _| 0.01 * rng.normal())
}

/// The three piecewise-constant coefficient vectors, scaled to `n` points:
/// changepoints at `floor(n/3)` and `2 floor(n/3)` (levels -1, 1, -1), at
/// `floor(n/2)` (levels -1, 1), and a constant 1.  At the calibrated
/// `n = 251` these are the documented locations 83, 166, and 125.
pub fn regression_coefficients(n: usize) -> DMatrix<f64> {
    let (a, b, c) = (n / 3, 2 * (n / 3), n / 2);
    DMatrix::from_fn(n, 3, |t, j| {
        let t1 = t + 1;
        match j {
            0 => {
                if t1 <= a || t1 > b {
                    -1.0
                } else {
                    1.0
                }
            }
            1 => {
                if t1 <= c {
                    -1.0
                } else {
                    1.0
                }
            }
            _ => 1.0,
        }
    })
}

/// Scenario calibrated to the documented stock example.
pub fn default_regression_stocks() -> Scenario {
    Scenario::RegressionStocks { n: 251, sigma: 0.002, rho: 1e-6 }
}
