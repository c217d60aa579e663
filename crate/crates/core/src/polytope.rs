//! Polyhedral representation of path selection events.
//!
//! Conditioning exact inference on "the path produced this model sequence"
//! requires the selection event to be a polyhedron `{y : Gamma y >= w}` in
//! the data. Every decision the solver makes along the way is an affine
//! comparison in `y` once the boundary configuration is fixed: the first-knot
//! arg-max, the sign of each hitting candidate, the viability of each leaving
//! candidate, the arg-max within each branch, and the comparison between the
//! two branch winners. This module replays a recorded [`PathTrace`] and emits
//! one inequality row per such decision.
//!
//! Rows are unit-normalized, so a single absolute membership tolerance is
//! meaningful across penalties and scales. Each row carries a [`RowTag`]
//! naming the step it came from and the decision family it encodes, which
//! lets callers slice the polyhedron by step (information-criterion stopping
//! appends its own tagged rows to the same system).

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{PathTrace, StepAction, StepKernel, DENOM_TOL};

/// A unit-normalized row may fall short of its offset by at most this much
/// before the point is declared outside the polyhedron.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Rows with norm at or below this encode structural ties (two candidates
/// whose times agree for every `y`); the comparison is vacuous and dropped.
const ZERO_ROW_TOL: f64 = 1e-12;

/// Which solver decision a polyhedron row encodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFamily {
    /// Step 1: the first boundary coordinate dominates every other row.
    FirstArgmax,
    /// Sign of a hitting candidate `a_i = (M y)_i`.
    HitSign,
    /// The winning hit time beats another viable hitting candidate.
    HitArgmax,
    /// Viability (or not) of a leaving candidate, `c_i <= 0` vs `c_i > 0`.
    LeaveSign,
    /// The winning leave time beats another viable leaving candidate.
    LeaveArgmax,
    /// The winning branch's time beats the other branch's best time.
    HitVsLeave,
    /// Information criterion rose across a comparison.
    IcRise,
    /// Information criterion fell across a comparison.
    IcFall,
}

/// Provenance of one polyhedron row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowTag {
    /// 1-based path step (for IC rows, the 1-based comparison index).
    pub step: usize,
    pub family: RowFamily,
}

/// The affine selection event `{y : Gamma y >= w}` with unit-normalized rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Polyhedron {
    gamma: DMatrix<f64>,
    offset: DVector<f64>,
    tags: Vec<RowTag>,
}

impl Polyhedron {
    pub fn nrows(&self) -> usize {
        self.gamma.nrows()
    }

    /// Ambient dimension (length of `y`).
    pub fn dim(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn tags(&self) -> &[RowTag] {
        &self.tags
    }

    /// Slack of every inequality at `y`: `Gamma y - w`.
    pub fn margins(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.gamma * y - &self.offset
    }

    /// Smallest slack at `y`; `+inf` for an empty system.
    pub fn min_margin(&self, y: &DVector<f64>) -> f64 {
        self.margins(y).iter().fold(f64::INFINITY, |acc, &v| acc.min(v))
    }

    /// Membership up to [`MEMBERSHIP_TOL`].
    pub fn contains(&self, y: &DVector<f64>) -> bool {
        self.min_margin(y) >= -MEMBERSHIP_TOL
    }

    /// Stack another system on the same space (used to append stopping-rule
    /// rows to a selection event).
    pub fn append(&mut self, other: &Polyhedron) -> Result<()> {
        if other.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "cannot append a {}-dim polyhedron to a {}-dim one",
                other.dim(),
                self.dim()
            )));
        }
        let mut gamma = self.gamma.clone().insert_rows(self.nrows(), other.nrows(), 0.0);
        gamma.rows_mut(self.nrows(), other.nrows()).copy_from(&other.gamma);
        let mut offset = self.offset.clone().insert_rows(self.nrows(), other.nrows(), 0.0);
        offset.rows_mut(self.nrows(), other.nrows()).copy_from(&other.offset);
        self.gamma = gamma;
        self.offset = offset;
        self.tags.extend_from_slice(&other.tags);
        Ok(())
    }

    /// Express the event in terms of a pre-image variable: if the path ran on
    /// `t = A z`, the event in `z`-space is `(Gamma A) z >= w`. Rows are
    /// re-normalized; rows that vanish on the range of `A` must be vacuous.
    pub fn pullback(&self, map: &DMatrix<f64>) -> Result<Polyhedron> {
        if map.nrows() != self.dim() {
            return Err(Error::Dimension(format!(
                "pullback map has {} rows, polyhedron lives in dimension {}",
                map.nrows(),
                self.dim()
            )));
        }
        let mut b = PolyBuilder::new(map.ncols());
        let pulled = &self.gamma * map;
        for j in 0..self.nrows() {
            b.push(pulled.row(j).transpose(), self.offset[j], self.tags[j])?;
        }
        Ok(b.finish())
    }
}

/// Accumulates rows, normalizing each and dropping structural-tie rows.
pub(crate) struct PolyBuilder {
    n: usize,
    rows: Vec<RowDVector<f64>>,
    offsets: Vec<f64>,
    tags: Vec<RowTag>,
}

impl PolyBuilder {
    pub fn new(n: usize) -> Self {
        PolyBuilder { n, rows: Vec::new(), offsets: Vec::new(), tags: Vec::new() }
    }

    pub fn push(&mut self, row: DVector<f64>, offset: f64, tag: RowTag) -> Result<()> {
        debug_assert_eq!(row.len(), self.n);
        let norm = row.norm();
        if norm <= ZERO_ROW_TOL {
            // `0 >= w` is vacuously true for w <= 0 and impossible otherwise.
            if offset <= MEMBERSHIP_TOL {
                return Ok(());
            }
            return Err(Error::Degenerate(format!(
                "selection row vanished but requires offset {offset}"
            )));
        }
        self.rows.push(row.transpose() / norm);
        self.offsets.push(offset / norm);
        self.tags.push(tag);
        Ok(())
    }

    pub fn finish(self) -> Polyhedron {
        let gamma = DMatrix::from_rows(&self.rows);
        let gamma = if self.rows.is_empty() { DMatrix::zeros(0, self.n) } else { gamma };
        Polyhedron { gamma, offset: DVector::from_vec(self.offsets), tags: self.tags }
    }
}

/// Polyhedron of the event "the path's first `through_step` steps happened
/// exactly as recorded in `trace`".
pub fn selection_polyhedron(trace: &PathTrace, through_step: usize) -> Result<Polyhedron> {
    if trace.degenerate {
        return Err(Error::Degenerate("path is empty, no selection event to encode".into()));
    }
    if through_step == 0 || through_step > trace.k_max() {
        return Err(Error::StepOutOfRange { step: through_step, have: trace.k_max() });
    }
    let mut b = PolyBuilder::new(trace.y.len());
    first_step_rows(trace, &mut b)?;
    for j in 1..through_step {
        transition_rows(trace, j, &mut b)?;
    }
    Ok(b.finish())
}

/// Step 1: `r1 * (M y)_{i1} >= |(M y)_i|` for all other rows, with
/// `M = (D D^T)^+ D`. When the penalty has a single row the event reduces to
/// the sign of that coordinate.
fn first_step_rows(trace: &PathTrace, b: &mut PolyBuilder) -> Result<()> {
    let kern = StepKernel::new(&trace.d, &trace.y, &[], &[]);
    let m_mat = kern.f.pinv_t();
    let step = &trace.steps[0];
    let i1 = step.boundary[0];
    let r1 = step.signs[0] as f64;
    let tag = RowTag { step: 1, family: RowFamily::FirstArgmax };
    let lead = m_mat.row(i1).transpose() * r1;
    if m_mat.nrows() == 1 {
        b.push(lead, 0.0, tag)?;
        return Ok(());
    }
    for i in 0..m_mat.nrows() {
        if i == i1 {
            continue;
        }
        let other = m_mat.row(i).transpose();
        b.push(&lead - &other, 0.0, tag)?;
        b.push(&lead + &other, 0.0, tag)?;
    }
    Ok(())
}

/// Rows for the transition out of configuration `steps[j-1]` into `steps[j]`.
fn transition_rows(trace: &PathTrace, j: usize, b: &mut PolyBuilder) -> Result<()> {
    let prev = &trace.steps[j - 1];
    let ev = &trace.steps[j];
    let d = &trace.d;
    let kern = StepKernel::new(d, &trace.y, &prev.boundary, &prev.signs);
    let m_mat = kern.f.pinv_t();
    let local_of: std::collections::HashMap<usize, usize> =
        kern.rows.iter().enumerate().map(|(l, &r)| (r, l)).collect();
    let step_no = j + 1;

    // Hit branch: candidate signs, then the winner's dominance over every
    // other viable candidate. Viability is deterministic once the signs are
    // fixed: the denominator `r_i + b_i` must agree with `r_i` and stay away
    // from zero.
    let hit_time_vec = |row: usize, sign: i8| -> Option<DVector<f64>> {
        let &local = local_of.get(&row)?;
        let denom = sign as f64 + kern.b[local];
        if sign == 0 || denom.abs() < DENOM_TOL || (denom > 0.0) != (sign > 0) {
            return None;
        }
        Some(m_mat.row(local).transpose() / denom)
    };
    for &(row, sign) in &ev.hit_signs {
        if sign == 0 {
            continue;
        }
        let local = *local_of.get(&row).ok_or_else(|| {
            Error::Invalid(format!("hit candidate row {row} not outside boundary at step {step_no}"))
        })?;
        b.push(
            m_mat.row(local).transpose() * sign as f64,
            0.0,
            RowTag { step: step_no, family: RowFamily::HitSign },
        )?;
    }
    let hit_winner_vec = match ev.hit_winner {
        Some((row, sign)) => {
            let win = hit_time_vec(row, sign).ok_or_else(|| {
                Error::Invalid(format!("recorded hit winner {row} is not viable at step {step_no}"))
            })?;
            for &(row_i, sign_i) in &ev.hit_signs {
                if row_i == row {
                    continue;
                }
                if let Some(vi) = hit_time_vec(row_i, sign_i) {
                    b.push(&win - &vi, 0.0, RowTag { step: step_no, family: RowFamily::HitArgmax })?;
                }
            }
            Some(win)
        }
        None => None,
    };

    // Leave branch: each leavable boundary coordinate contributes a sign row
    // (`c_i <= 0` if it was viable, `c_i > 0` otherwise), the winner
    // dominates the other viable candidates. Coordinates that cannot leave
    // (boundary row inside rowspace of `D_{-B}`, or `d_i` not genuinely
    // negative) contribute nothing; that test never involves `y`.
    let mut leave_time_of: Vec<Option<DVector<f64>>> = vec![None; prev.boundary.len()];
    for (local, (&row, &s)) in prev.boundary.iter().zip(&prev.signs).enumerate() {
        if !kern.leavable(local) {
            continue;
        }
        let mut dense = DVector::zeros(d.n());
        for &(col, v) in d.row(row) {
            dense[col] += v;
        }
        let q = kern.f.null_project(&dense) * s as f64;
        let viable = ev.leave_viable.contains(&row);
        b.push(
            if viable { -&q } else { q.clone() },
            0.0,
            RowTag { step: step_no, family: RowFamily::LeaveSign },
        )?;
        if viable {
            leave_time_of[local] = Some(q / kern.dvec[local]);
        }
    }
    let leave_winner_vec = match ev.leave_winner {
        Some(row) => {
            let local = prev.boundary.iter().position(|&r| r == row).ok_or_else(|| {
                Error::Invalid(format!("recorded leave winner {row} not on boundary at step {step_no}"))
            })?;
            let win = leave_time_of[local].clone().ok_or_else(|| {
                Error::Invalid(format!("recorded leave winner {row} is not viable at step {step_no}"))
            })?;
            for (local_i, vi) in leave_time_of.iter().enumerate() {
                if local_i == local {
                    continue;
                }
                if let Some(vi) = vi {
                    b.push(&win - vi, 0.0, RowTag { step: step_no, family: RowFamily::LeaveArgmax })?;
                }
            }
            Some(win)
        }
        None => None,
    };

    // Branch comparison, oriented by the recorded action.
    if let (Some(h), Some(l)) = (hit_winner_vec, leave_winner_vec) {
        let row = match ev.action {
            StepAction::Hit => &h - &l,
            StepAction::Leave => &l - &h,
        };
        b.push(row, 0.0, RowTag { step: step_no, family: RowFamily::HitVsLeave })?;
    }
    Ok(())
}
