//! Builders for the structured penalty matrices the path solver consumes:
//! first and second discrete differences, graph edge incidence, the sparse
//! augmentation that row-binds a penalty over a scaled identity, and the
//! transform that turns a regression problem into signal-approximation form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Factors;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PenaltyKind {
    /// First differences: row i is `x[i+1] - x[i]`.
    Diff1,
    /// Second differences: row i is `x[i] - 2 x[i+1] + x[i+2]`.
    Diff2,
    /// Edge incidence of an undirected graph; row per edge `(i, j)`, `i < j`,
    /// with `-1` at `i` and `+1` at `j`. Edges are stored 0-based.
    Graph { edges: Vec<(usize, usize)> },
    /// Rows of a base penalty stacked over `alpha * I`.
    SparseAugmented { alpha: f64, base: Box<PenaltyKind> },
    /// Penalty carried through a regression transform (dense rows).
    Regression,
    /// Caller-supplied rows.
    Custom,
}

/// Sparse row-major penalty matrix. Row entries are `(column, value)` pairs
/// sorted by column.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PenaltyMatrix {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    pub kind: PenaltyKind,
}

impl PenaltyMatrix {
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>, kind: PenaltyKind) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            for &(c, v) in row {
                if c >= n {
                    return Err(Error::Dimension(format!(
                        "row {r} references column {c} of an n={n} penalty"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::BadParameter(format!("row {r} has non-finite entry")));
                }
            }
        }
        Ok(PenaltyMatrix { n, rows, kind })
    }

    /// First-difference penalty on `n` ordered positions (`n-1` rows).
    pub fn diff1(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::BadParameter("diff1 needs n >= 2".into()));
        }
        let rows = (0..n - 1).map(|i| vec![(i, -1.0), (i + 1, 1.0)]).collect();
        Ok(PenaltyMatrix { n, rows, kind: PenaltyKind::Diff1 })
    }

    /// Second-difference penalty on `n` ordered positions (`n-2` rows).
    pub fn diff2(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::BadParameter("diff2 needs n >= 3".into()));
        }
        let rows = (0..n - 2)
            .map(|i| vec![(i, 1.0), (i + 1, -2.0), (i + 2, 1.0)])
            .collect();
        Ok(PenaltyMatrix { n, rows, kind: PenaltyKind::Diff2 })
    }

    /// Edge incidence matrix of an undirected graph on `n` nodes. Edges must
    /// satisfy `i < j < n`; duplicates are rejected.
    pub fn graph_incidence(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        let mut rows = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i >= j {
                return Err(Error::InvalidEdge { i, j, reason: "requires i < j" });
            }
            if j >= n {
                return Err(Error::InvalidEdge { i, j, reason: "node out of range" });
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidEdge { i, j, reason: "duplicate edge" });
            }
            rows.push(vec![(i, -1.0), (j, 1.0)]);
        }
        Ok(PenaltyMatrix { n, rows, kind: PenaltyKind::Graph { edges: edges.to_vec() } })
    }

    /// Stack `base` over `alpha * I`, which adds a sparsity penalty on the
    /// coordinates themselves and guarantees a full-rank column space.
    pub fn sparse_augmented(base: &PenaltyMatrix, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::BadParameter(format!("sparse_augmented: alpha = {alpha}")));
        }
        let mut rows = base.rows.clone();
        rows.extend((0..base.n).map(|i| vec![(i, alpha)]));
        Ok(PenaltyMatrix {
            n: base.n,
            rows,
            kind: PenaltyKind::SparseAugmented { alpha, base: Box::new(base.kind.clone()) },
        })
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.m(), self.n);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                d[(r, c)] += v;
            }
        }
        d
    }

    /// Dense stack of the rows listed in `idx`, in that order.
    pub fn dense_rows(&self, idx: &[usize]) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(idx.len(), self.n);
        for (r, &i) in idx.iter().enumerate() {
            for &(c, v) in &self.rows[i] {
                d[(r, c)] += v;
            }
        }
        d
    }

    /// `D x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n, "apply: length mismatch");
        DVector::from_iterator(
            self.m(),
            self.rows.iter().map(|row| row.iter().map(|&(c, v)| v * x[c]).sum()),
        )
    }

    /// `D^T u`.
    pub fn apply_t(&self, u: &DVector<f64>) -> DVector<f64> {
        assert_eq!(u.len(), self.m(), "apply_t: length mismatch");
        let mut out = DVector::zeros(self.n);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out[c] += v * u[r];
            }
        }
        out
    }

    /// Dot product of row `i` with `x`.
    pub fn row_dot(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.rows[i].iter().map(|&(c, v)| v * x[c]).sum()
    }

    /// `sum_k coef[k] * row(idx[k])` as a dense n-vector.
    pub fn combine_rows(&self, idx: &[usize], coef: &[f64]) -> DVector<f64> {
        assert_eq!(idx.len(), coef.len());
        let mut out = DVector::zeros(self.n);
        for (&i, &w) in idx.iter().zip(coef) {
            for &(c, v) in &self.rows[i] {
                out[c] += w * v;
            }
        }
        out
    }
}

/// A regression problem `y ~ X beta` rewritten in signal-approximation form.
///
/// With `rho > 0` the design is first augmented with `sqrt(2 rho) * I`, which
/// makes it full column rank and is equivalent to adding a ridge term
/// `rho * ||beta||^2` to the objective. The path then runs on
/// `(y_t, d_t) = (X X^+ y_aug, D X^+)` in the augmented observation space.
#[derive(Clone, Debug)]
pub struct RegressionTransform {
    /// Transformed response (length `n`, or `n + p` when `rho > 0`).
    pub y_t: DVector<f64>,
    /// Transformed penalty `D X^+`.
    pub d_t: PenaltyMatrix,
    /// Pseudoinverse of the (augmented) design, `p x N`.
    pub x_pinv: DMatrix<f64>,
    /// Number of genuine observations (rows of the original design).
    pub n_obs: usize,
    /// Column-space projector of the (augmented) design, `N x N`.
    proj: DMatrix<f64>,
}

impl RegressionTransform {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>, d: &PenaltyMatrix, rho: f64) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(Error::Dimension(format!("y has {} entries, X has {n} rows", y.len())));
        }
        if d.n() != p {
            return Err(Error::Dimension(format!(
                "penalty acts on {} coefficients, X has {p} columns",
                d.n()
            )));
        }
        if rho < 0.0 || !rho.is_finite() {
            return Err(Error::BadParameter(format!("rho = {rho}")));
        }
        let (xa, ya) = if rho > 0.0 {
            let mut xa = DMatrix::zeros(n + p, p);
            xa.view_mut((0, 0), (n, p)).copy_from(x);
            let s = (2.0 * rho).sqrt();
            for j in 0..p {
                xa[(n + j, j)] = s;
            }
            let mut ya = DVector::zeros(n + p);
            ya.rows_mut(0, n).copy_from(y);
            (xa, ya)
        } else {
            (x.clone(), y.clone())
        };
        let f = Factors::new(&xa);
        if rho == 0.0 && f.rank() < p {
            return Err(Error::Degenerate(
                "design is column rank deficient; use rho > 0".into(),
            ));
        }
        let x_pinv = f.pinv();
        let proj = f.col_projector();
        let y_t = &proj * ya;
        let dd = d.to_dense() * &x_pinv;
        let rows = (0..dd.nrows())
            .map(|r| (0..dd.ncols()).map(|c| (c, dd[(r, c)])).collect())
            .collect();
        let d_t = PenaltyMatrix::from_rows(dd.ncols(), rows, PenaltyKind::Regression)?;
        Ok(RegressionTransform { y_t, d_t, x_pinv, n_obs: n, proj })
    }

    /// Coefficients recovered from a fitted signal of the transformed
    /// problem: `beta = X^+ theta`.
    pub fn beta_from_theta(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.x_pinv * theta
    }

    /// Linear map from the original observations to the transformed signal
    /// space (`N x n`): composing selection-event rows with this map
    /// re-expresses them as constraints on the raw `y`.
    pub fn observation_map(&self) -> DMatrix<f64> {
        self.proj.columns(0, self.n_obs).into_owned()
    }
}
