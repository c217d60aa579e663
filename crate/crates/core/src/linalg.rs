//! Dense SVD-backed kernels shared by the path solver and the inference
//! layer: pseudoinverse application, null-space projectors, and the rank-one
//! basis of the gap between two nested null spaces.
//!
//! Everything funnels through one factorization type so the numerical rank
//! is decided in exactly one place, with a single relative tolerance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for the numerical rank cut: singular values below
/// `REL_TOL * s_max` are treated as zero.
pub const REL_TOL: f64 = 1e-10;

/// Thin SVD of a real matrix with the rank decided at construction time.
#[derive(Clone, Debug)]
pub struct Factors {
    nrows: usize,
    ncols: usize,
    rank: usize,
    /// `nrows x r` left singular vectors, rank columns only.
    u: DMatrix<f64>,
    /// Singular values, largest first, rank entries only.
    s: DVector<f64>,
    /// `r x ncols` right singular vectors (transposed), rank rows only.
    v_t: DMatrix<f64>,
}

impl Factors {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let (nrows, ncols) = a.shape();
        if nrows == 0 || ncols == 0 {
            return Factors {
                nrows,
                ncols,
                rank: 0,
                u: DMatrix::zeros(nrows, 0),
                s: DVector::zeros(0),
                v_t: DMatrix::zeros(0, ncols),
            };
        }
        let svd = a.clone().svd(true, true);
        let u = svd.u.expect("svd requested u");
        let v_t = svd.v_t.expect("svd requested v_t");
        let s = svd.singular_values;
        let smax = s.iter().cloned().fold(0.0f64, f64::max);
        let cut = REL_TOL * smax;
        let rank = s.iter().filter(|&&sv| sv > cut).count();
        // nalgebra does not guarantee ordering of equal singular values, but
        // returns them sorted descending; keep only the rank-leading block.
        Factors {
            nrows,
            ncols,
            rank,
            u: u.columns(0, rank).into_owned(),
            s: s.rows(0, rank).into_owned(),
            v_t: v_t.rows(0, rank).into_owned(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Dimension of the null space (of the matrix as a map on column space).
    pub fn nullity(&self) -> usize {
        self.ncols - self.rank
    }

    /// `A^+ b`.
    pub fn pinv_apply(&self, b: &DVector<f64>) -> DVector<f64> {
        assert_eq!(b.len(), self.nrows, "pinv_apply: length mismatch");
        if self.rank == 0 {
            return DVector::zeros(self.ncols);
        }
        let mut t = self.u.tr_mul(b);
        for i in 0..self.rank {
            t[i] /= self.s[i];
        }
        self.v_t.tr_mul(&t)
    }

    /// `(A^+)^T x` for an `ncols`-vector `x`; equals `(A A^T)^+ A x`.
    pub fn pinv_t_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols, "pinv_t_apply: length mismatch");
        if self.rank == 0 {
            return DVector::zeros(self.nrows);
        }
        let mut t = &self.v_t * x;
        for i in 0..self.rank {
            t[i] /= self.s[i];
        }
        &self.u * t
    }

    /// Dense `A^+` (`ncols x nrows`).
    pub fn pinv(&self) -> DMatrix<f64> {
        if self.rank == 0 {
            return DMatrix::zeros(self.ncols, self.nrows);
        }
        let mut vs = self.v_t.transpose();
        for i in 0..self.rank {
            let mut col = vs.column_mut(i);
            col /= self.s[i];
        }
        vs * self.u.transpose()
    }

    /// `(A A^T)^+ A`, the row-space kernel used by the dual path
    /// (`ncols`-wide, one row per row of `A`). Equal to `(A^+)^T`.
    pub fn pinv_t(&self) -> DMatrix<f64> {
        if self.rank == 0 {
            return DMatrix::zeros(self.nrows, self.ncols);
        }
        let mut us = self.u.clone();
        for i in 0..self.rank {
            let mut col = us.column_mut(i);
            col /= self.s[i];
        }
        us * &self.v_t
    }

    /// `V_r (V_r^T x)`: projection of `x` onto the row space.
    pub fn row_space_project(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols, "row_space_project: length mismatch");
        if self.rank == 0 {
            return DVector::zeros(self.ncols);
        }
        self.v_t.tr_mul(&(&self.v_t * x))
    }

    /// `x - V_r (V_r^T x)`: projection of `x` onto `null(A)`.
    pub fn null_project(&self, x: &DVector<f64>) -> DVector<f64> {
        x - self.row_space_project(x)
    }

    /// Orthogonal projector onto `null(A)` (`ncols x ncols`): `I - V_r V_r^T`.
    pub fn null_projector(&self) -> DMatrix<f64> {
        let mut p = DMatrix::identity(self.ncols, self.ncols);
        if self.rank > 0 {
            p -= self.v_t.tr_mul(&self.v_t);
        }
        p
    }

    /// Orthogonal projector onto the column space (`nrows x nrows`): `U_r U_r^T`.
    pub fn col_projector(&self) -> DMatrix<f64> {
        if self.rank == 0 {
            return DMatrix::zeros(self.nrows, self.nrows);
        }
        &self.u * self.u.transpose()
    }
}

pub fn pinv_apply(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    Factors::new(a).pinv_apply(b)
}

pub fn rank(a: &DMatrix<f64>) -> usize {
    Factors::new(a).rank()
}

pub fn nullity(a: &DMatrix<f64>) -> usize {
    Factors::new(a).nullity()
}

pub fn null_projector(a: &DMatrix<f64>) -> DMatrix<f64> {
    Factors::new(a).null_projector()
}

/// Unit vector `w` spanning the one-dimensional gap between two nested null
/// spaces: requires `null(narrow) ⊂ null(wide)` with codimension one, and
/// returns `w` with `w w^T = P_null(wide) - P_null(narrow)`.
///
/// The sign is canonicalized so the entry of largest magnitude is positive.
pub fn rank1_null_basis(wide: &Factors, narrow: &Factors) -> Result<DVector<f64>> {
    if wide.ncols() != narrow.ncols() {
        return Err(Error::Dimension(format!(
            "rank1_null_basis: {} vs {} columns",
            wide.ncols(),
            narrow.ncols()
        )));
    }
    let delta = wide.null_projector() - narrow.null_projector();
    // A genuine codimension-one gap makes `delta` a rank-one orthogonal
    // projector; extract its defining vector from the largest column.
    let (best_col, best_norm) = (0..delta.ncols())
        .map(|j| (j, delta.column(j).norm()))
        .fold((0, 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
    let scale = 1.0f64.max(delta.norm());
    if best_norm <= 1e-8 * scale {
        return Err(Error::CodimensionMismatch { defect: delta.norm() });
    }
    let mut w: DVector<f64> = delta.column(best_col).into_owned() / best_norm;
    let defect = (&delta - &w * w.transpose()).norm();
    if defect > 1e-7 * scale {
        return Err(Error::CodimensionMismatch { defect });
    }
    let lead = w
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, &x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc })
        .0;
    if w[lead] < 0.0 {
        w = -w;
    }
    Ok(w)
}
