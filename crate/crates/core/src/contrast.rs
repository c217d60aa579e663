//! Contrast vectors for the selected features of a fitted path.
//!
//! Each selected feature (a changepoint, a curvature knot, a cut edge, a
//! coefficient break) comes with two natural linear contrasts of the data:
//!
//! * a *spike* contrast, the local stencil of the penalty row itself, which
//!   asks whether the feature is visible in the raw neighboring values; and
//! * a *segment* contrast, which compares the model fits on the two sides of
//!   the feature (segment means, cut-component means, per-segment regression
//!   coefficients, or the rank-one gap between nested model subspaces).
//!
//! Locations follow the 1-based convention used throughout: first-difference
//! row `r` (0-based) is the changepoint at location `I = r + 1` (between
//! positions `I` and `I + 1`), and second-difference row `r` is the slope
//! knot at location `I = r + 2`, the middle point of its stencil.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{rank1_null_basis, Factors};
use crate::path::PathTrace;
use crate::penalty::{PenaltyKind, PenaltyMatrix};

fn check_sign(sign: i8) -> Result<f64> {
    match sign {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        other => Err(Error::BadParameter(format!("contrast sign must be +-1, got {other}"))),
    }
}

/// Spike contrast for a changepoint at 1-based location `I` under the
/// first-difference penalty: `s * (1_{I+1} - 1_I)`.
pub fn fl_spike(n: usize, location: usize, sign: i8) -> Result<DVector<f64>> {
    let s = check_sign(sign)?;
    if location == 0 || location >= n {
        return Err(Error::LocationNotSelected(location));
    }
    let mut v = DVector::zeros(n);
    v[location - 1] = -s;
    v[location] = s;
    Ok(v)
}

/// Segment contrast for a changepoint at `location` within a model holding
/// all selected changepoints: the difference between the mean over the
/// segment right of the cut and the mean over the segment left of it.
pub fn fl_segment(n: usize, model: &[usize], location: usize, sign: i8) -> Result<DVector<f64>> {
    let s = check_sign(sign)?;
    if location == 0 || location >= n {
        return Err(Error::LocationNotSelected(location));
    }
    if !model.contains(&location) {
        return Err(Error::LocationNotSelected(location));
    }
    let mut cuts: Vec<usize> = model.to_vec();
    cuts.sort_unstable();
    cuts.dedup();
    if cuts.iter().any(|&c| c == 0 || c >= n) {
        return Err(Error::BadParameter("model contains out-of-range locations".into()));
    }
    let pos = cuts.iter().position(|&c| c == location).unwrap();
    let left_start = if pos == 0 { 1 } else { cuts[pos - 1] + 1 };
    let right_end = if pos + 1 < cuts.len() { cuts[pos + 1] } else { n };
    let left = left_start..=location;
    let right = (location + 1)..=right_end;
    let (nl, nr) = (left.clone().count() as f64, right.clone().count() as f64);
    let mut v = DVector::zeros(n);
    for i in left {
        v[i - 1] = -s / nl;
    }
    for i in right {
        v[i - 1] = s / nr;
    }
    Ok(v)
}

/// Spike contrast for a curvature knot at 1-based location `I` under the
/// second-difference penalty: `s * (1_{I-1} - 2 * 1_I + 1_{I+1})`.  The knot
/// is labeled by the middle point of the stencil, the position where the
/// fitted slope changes.
pub fn tf_spike(n: usize, location: usize, sign: i8) -> Result<DVector<f64>> {
    let s = check_sign(sign)?;
    if location < 2 || location >= n {
        return Err(Error::LocationNotSelected(location));
    }
    let mut v = DVector::zeros(n);
    v[location - 2] = s;
    v[location - 1] = -2.0 * s;
    v[location] = s;
    Ok(v)
}

/// Segment contrast for one boundary row of an arbitrary penalty: the unit
/// vector spanning the gap between the selected model subspace
/// `null(D_{-B})` and the subspace with `row` removed from the model,
/// oriented so the penalty row evaluates it with sign `s`.
///
/// For the second-difference penalty this is the piecewise-linear "hinge"
/// direction of the knot within the fitted segmentation.
pub fn penalty_gap_contrast(
    d: &PenaltyMatrix,
    boundary: &[usize],
    row: usize,
    sign: i8,
) -> Result<DVector<f64>> {
    let s = check_sign(sign)?;
    if !boundary.contains(&row) {
        return Err(Error::LocationNotSelected(row + 1));
    }
    let m = d.m();
    let mut keep = vec![true; m];
    for &b in boundary {
        if b >= m {
            return Err(Error::BadParameter(format!("boundary row {b} out of range")));
        }
        keep[b] = false;
    }
    let complement: Vec<usize> = (0..m).filter(|&i| keep[i]).collect();
    let wide = Factors::new(&d.dense_rows(&complement));
    let mut with_row = complement.clone();
    with_row.push(row);
    with_row.sort_unstable();
    let narrow = Factors::new(&d.dense_rows(&with_row));
    let w = rank1_null_basis(&wide, &narrow)?;
    let orient = d.row_dot(row, &w);
    if orient == 0.0 {
        return Err(Error::Degenerate(format!(
            "penalty row {row} does not see the model gap direction"
        )));
    }
    Ok(w * (s * orient.signum()))
}

/// Alias for the trend-filtering segment contrast.
pub fn tf_segment(
    d: &PenaltyMatrix,
    boundary: &[usize],
    row: usize,
    sign: i8,
) -> Result<DVector<f64>> {
    penalty_gap_contrast(d, boundary, row, sign)
}

/// Vertex partition induced by deleting the selected cut edges from a graph.
#[derive(Clone, Debug)]
pub struct GraphPartition {
    /// Component label per vertex, labels dense from 0.
    pub component: Vec<usize>,
    pub n_components: usize,
}

impl GraphPartition {
    /// Union-find over the edges that remain after removing `cut_rows`.
    pub fn new(n: usize, edges: &[(usize, usize)], cut_rows: &[usize]) -> Self {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut cut = vec![false; edges.len()];
        for &r in cut_rows {
            if r < edges.len() {
                cut[r] = true;
            }
        }
        for (e, &(i, j)) in edges.iter().enumerate() {
            if cut[e] {
                continue;
            }
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri] = rj;
            }
        }
        let mut label = vec![usize::MAX; n];
        let mut component = vec![0usize; n];
        let mut next = 0usize;
        for v in 0..n {
            let root = find(&mut parent, v);
            if label[root] == usize::MAX {
                label[root] = next;
                next += 1;
            }
            component[v] = label[root];
        }
        GraphPartition { component, n_components: next }
    }

    pub fn members(&self, label: usize) -> Vec<usize> {
        (0..self.component.len()).filter(|&v| self.component[v] == label).collect()
    }
}

/// Segment contrast for a cut edge of a graph fused lasso: difference of
/// component means across the cut, `s * (1_{C_head}/|C_head| -
/// 1_{C_tail}/|C_tail|)`, where components come from the graph minus all
/// selected cut edges.
pub fn gfl_segment(d: &PenaltyMatrix, boundary: &[usize], row: usize, sign: i8) -> Result<DVector<f64>> {
    let s = check_sign(sign)?;
    let PenaltyKind::Graph { ref edges } = d.kind else {
        return Err(Error::BadParameter("gfl_segment needs a graph incidence penalty".into()));
    };
    if !boundary.contains(&row) || row >= edges.len() {
        return Err(Error::LocationNotSelected(row + 1));
    }
    let n = d.n();
    let part = GraphPartition::new(n, edges, boundary);
    let (tail, head) = edges[row];
    let (ca, cb) = (part.component[tail], part.component[head]);
    if ca == cb {
        return Err(Error::Degenerate(format!(
            "cut edge {row} does not separate its endpoints; the remaining graph reconnects them"
        )));
    }
    let (la, lb) = (part.members(ca), part.members(cb));
    let mut v = DVector::zeros(n);
    for &i in &la {
        v[i] = -s / la.len() as f64;
    }
    for &i in &lb {
        v[i] = s / lb.len() as f64;
    }
    Ok(v)
}

/// Design matrix for piecewise-constant coefficients: one column per
/// predictor and segment, the predictor column masked to the segment's rows.
/// `breaks[j]` holds the 1-based break locations of predictor `j`; segment
/// columns are ordered predictor-major, segments ascending.
pub fn effective_design(x: &DMatrix<f64>, breaks: &[Vec<usize>]) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let p = x.ncols();
    if breaks.len() != p {
        return Err(Error::Dimension(format!(
            "{} break lists for {} predictors",
            breaks.len(),
            p
        )));
    }
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for j in 0..p {
        let mut cuts = breaks[j].clone();
        cuts.sort_unstable();
        cuts.dedup();
        if cuts.iter().any(|&c| c == 0 || c >= n) {
            return Err(Error::BadParameter(format!(
                "predictor {j} has a break outside 1..{}",
                n - 1
            )));
        }
        cuts.push(n);
        let mut start = 0usize;
        for &end in &cuts {
            let mut col = DVector::zeros(n);
            for t in start..end {
                col[t] = x[(t, j)];
            }
            cols.push(col);
            start = end;
        }
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Contrast estimating the jump of predictor `predictor`'s coefficient
/// across its break at `location`, in a model with per-predictor breaks:
/// `s * (X_B^+)' (e_right - e_left)` over the effective design.
pub fn reg_segment(
    x: &DMatrix<f64>,
    breaks: &[Vec<usize>],
    predictor: usize,
    location: usize,
    sign: i8,
) -> Result<DVector<f64>> {
    let s = check_sign(sign)?;
    if predictor >= x.ncols() {
        return Err(Error::BadParameter(format!("predictor {predictor} out of range")));
    }
    let xb = effective_design(x, breaks)?;
    // Column offset of this predictor's segment block, then the index of the
    // segment ending at `location`.
    let mut offset = 0usize;
    for j in 0..predictor {
        let mut cuts = breaks[j].clone();
        cuts.sort_unstable();
        cuts.dedup();
        offset += cuts.len() + 1;
    }
    let mut cuts = breaks[predictor].clone();
    cuts.sort_unstable();
    cuts.dedup();
    let seg = cuts
        .iter()
        .position(|&c| c == location)
        .ok_or(Error::LocationNotSelected(location))?;
    let f = Factors::new(&xb);
    if f.rank() < xb.ncols() {
        return Err(Error::Degenerate(format!(
            "effective design is column rank deficient (rank {} of {})",
            f.rank(),
            xb.ncols()
        )));
    }
    let mut e = DVector::zeros(xb.ncols());
    e[offset + seg] = -1.0;
    e[offset + seg + 1] = 1.0;
    Ok(f.pinv_t_apply(&e) * s)
}

/// Thin the locations of a 1-D model: scan ascending and drop any location
/// strictly closer than `min_gap` to the last kept one.
pub fn declutter(locations: &[usize], min_gap: usize) -> Vec<usize> {
    let mut sorted = locations.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut kept: Vec<usize> = Vec::new();
    for loc in sorted {
        match kept.last() {
            Some(&last) if loc - last < min_gap => {}
            _ => kept.push(loc),
        }
    }
    kept
}

/// The 1-D model selected at a path step: 1-based locations with the signs
/// of their fitted differences, sorted by location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectedModel1D {
    pub n: usize,
    pub locations: Vec<usize>,
    pub signs: Vec<i8>,
}

impl SelectedModel1D {
    /// Read the model off a trace at 1-based step `k`. Supported for the
    /// first- and second-difference penalties. A first-difference row `r`
    /// (0-based) is the changepoint at location `r + 1`; a second-difference
    /// row is the knot at `r + 2`, the middle point of its stencil.
    pub fn from_step(trace: &PathTrace, k: usize) -> Result<Self> {
        let shift = match trace.d.kind {
            PenaltyKind::Diff1 => 1,
            PenaltyKind::Diff2 => 2,
            ref other => {
                return Err(Error::BadParameter(format!(
                    "1-D model extraction expects a difference penalty, got {other:?}"
                )))
            }
        };
        let step = trace.step(k)?;
        let mut pairs: Vec<(usize, i8)> = step
            .boundary
            .iter()
            .zip(&step.signs)
            .map(|(&r, &s)| (r + shift, s))
            .collect();
        pairs.sort_unstable_by_key(|&(loc, _)| loc);
        Ok(SelectedModel1D {
            n: trace.y.len(),
            locations: pairs.iter().map(|&(l, _)| l).collect(),
            signs: pairs.iter().map(|&(_, s)| s).collect(),
        })
    }

    /// Sign attached to a location, if selected.
    pub fn sign_at(&self, location: usize) -> Option<i8> {
        self.locations.iter().position(|&l| l == location).map(|i| self.signs[i])
    }
}
