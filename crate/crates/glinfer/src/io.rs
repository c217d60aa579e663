//! File formats spoken by the command-line tool: column CSV inputs, the
//! JSON trace document, and the JSON inference report.
//!
//! External JSON uses 1-based indices for penalty rows (boundary sets,
//! winners, viability lists) to match the location conventions of the
//! plots and reports; the in-memory structures stay 0-based.  Conversion
//! happens only here.

use std::fs;
use std::path::Path;

use glinfer_core::path::{ModelStep, PathTrace, StepAction};
use glinfer_core::tg::TgInference;
use glinfer_core::PenaltyMatrix;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] glinfer_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Input(String),
}

impl HarnessError {
    /// Process exit code: 2 for input or configuration problems, 3 for
    /// numerical degeneracy discovered while solving.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Core(e) => match e {
                glinfer_core::Error::Degenerate(_)
                | glinfer_core::Error::EmptyTruncation { .. }
                | glinfer_core::Error::CodimensionMismatch { .. }
                | glinfer_core::Error::Infeasible { .. } => 3,
                _ => 2,
            },
            _ => 2,
        }
    }
}

pub type HResult<T> = std::result::Result<T, HarnessError>;

/// Read a one-column numeric CSV (header line optional).
pub fn read_column_csv(path: &Path) -> HResult<DVector<f64>> {
    let text = fs::read_to_string(path)?;
    let values = parse_column(&text)
        .map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
    Ok(DVector::from_vec(values))
}

fn parse_column(text: &str) -> Result<Vec<f64>, String> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            // A single unparseable first line is an optional header.
            Err(_) if lineno == 0 => continue,
            Err(e) => return Err(format!("line {}: {e}", lineno + 1)),
        }
    }
    if values.is_empty() {
        return Err("no numeric values found".into());
    }
    Ok(values)
}

/// Read a graph edge list: two 1-indexed integer columns `(i, j)` with
/// `i < j` (header optional).  Returns 0-based endpoint pairs.
pub fn read_edges_csv(path: &Path) -> HResult<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (a, b) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
        match (a.parse::<usize>(), b.parse::<usize>()) {
            (Ok(i), Ok(j)) => {
                if i == 0 || j == 0 || i >= j {
                    return Err(HarnessError::Input(format!(
                        "{}: line {}: edges are 1-indexed with i < j, got ({i}, {j})",
                        path.display(),
                        lineno + 1
                    )));
                }
                edges.push((i - 1, j - 1));
            }
            _ if lineno == 0 => continue,
            _ => {
                return Err(HarnessError::Input(format!(
                    "{}: line {}: expected two integers",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    if edges.is_empty() {
        return Err(HarnessError::Input(format!("{}: no edges found", path.display())));
    }
    Ok(edges)
}

/// One step of the serialized trace; all row indices are 1-based.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepDoc {
    pub step: usize,
    pub knot: f64,
    pub action: String,
    pub boundary: Vec<usize>,
    pub signs: Vec<i8>,
    pub hit_signs: Vec<(usize, i8)>,
    pub leave_viable: Vec<usize>,
    pub hit_winner: Option<(usize, i8)>,
    pub leave_winner: Option<usize>,
    pub dual_a: Vec<f64>,
    pub dual_b: Vec<f64>,
}

/// The JSON trace document written by `path` and consumed by `infer` and
/// `stepsign`: knots, 1-indexed boundary sets, signs, actions, and the
/// dual segment coefficients, plus the data and penalty needed to rebuild
/// the selection event exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceDoc {
    pub n: usize,
    pub penalty: PenaltyMatrix,
    pub y: Vec<f64>,
    pub knots: Vec<f64>,
    pub truncated: bool,
    pub lower_knot: f64,
    pub u_free: Vec<f64>,
    pub steps: Vec<StepDoc>,
}

fn plus1(rows: &[usize]) -> Vec<usize> {
    rows.iter().map(|&r| r + 1).collect()
}

fn minus1(rows: &[usize], m: usize, what: &str) -> HResult<Vec<usize>> {
    rows.iter()
        .map(|&r| {
            if r == 0 || r > m {
                Err(HarnessError::Input(format!("{what}: row {r} outside 1..={m}")))
            } else {
                Ok(r - 1)
            }
        })
        .collect()
}

impl TraceDoc {
    pub fn from_trace(t: &PathTrace) -> Self {
        TraceDoc {
            n: t.y.len(),
            penalty: t.d.clone(),
            y: t.y.iter().copied().collect(),
            knots: t.knots(),
            truncated: t.truncated,
            lower_knot: t.lower_knot,
            u_free: t.u_free.iter().copied().collect(),
            steps: t
                .steps
                .iter()
                .enumerate()
                .map(|(k, s)| StepDoc {
                    step: k + 1,
                    knot: s.knot,
                    action: match s.action {
                        StepAction::Hit => "hit".into(),
                        StepAction::Leave => "leave".into(),
                    },
                    boundary: plus1(&s.boundary),
                    signs: s.signs.clone(),
                    hit_signs: s.hit_signs.iter().map(|&(r, sg)| (r + 1, sg)).collect(),
                    leave_viable: plus1(&s.leave_viable),
                    hit_winner: s.hit_winner.map(|(r, sg)| (r + 1, sg)),
                    leave_winner: s.leave_winner.map(|r| r + 1),
                    dual_a: s.dual_a.iter().copied().collect(),
                    dual_b: s.dual_b.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn into_trace(self) -> HResult<PathTrace> {
        let m = self.penalty.m();
        if self.penalty.n() != self.n {
            return Err(HarnessError::Input(format!(
                "penalty acts on {} points but document says n = {}",
                self.penalty.n(),
                self.n
            )));
        }
        if self.y.len() != self.n {
            return Err(HarnessError::Input("y length disagrees with n".into()));
        }
        let mut steps = Vec::with_capacity(self.steps.len());
        for s in &self.steps {
            let action = match s.action.as_str() {
                "hit" => StepAction::Hit,
                "leave" => StepAction::Leave,
                other => return Err(HarnessError::Input(format!("unknown action {other:?}"))),
            };
            if s.signs.len() != s.boundary.len() {
                return Err(HarnessError::Input(format!(
                    "step {}: {} signs for {} boundary rows",
                    s.step,
                    s.signs.len(),
                    s.boundary.len()
                )));
            }
            steps.push(ModelStep {
                knot: s.knot,
                action,
                boundary: minus1(&s.boundary, m, "boundary")?,
                signs: s.signs.clone(),
                hit_signs: s
                    .hit_signs
                    .iter()
                    .map(|&(r, sg)| {
                        if r == 0 || r > m {
                            Err(HarnessError::Input(format!("hit_signs: row {r} outside 1..={m}")))
                        } else {
                            Ok((r - 1, sg))
                        }
                    })
                    .collect::<HResult<_>>()?,
                leave_viable: minus1(&s.leave_viable, m, "leave_viable")?,
                hit_winner: s.hit_winner.map(|(r, sg)| (r - 1, sg)),
                leave_winner: s.leave_winner.map(|r| r - 1),
                dual_a: DVector::from_vec(s.dual_a.clone()),
                dual_b: DVector::from_vec(s.dual_b.clone()),
            });
        }
        let degenerate = steps.is_empty();
        Ok(PathTrace {
            y: DVector::from_vec(self.y),
            d: self.penalty,
            steps,
            u_free: DVector::from_vec(self.u_free),
            lower_knot: self.lower_knot,
            truncated: self.truncated,
            degenerate,
        })
    }
}

pub fn write_trace_json(path: &Path, trace: &PathTrace) -> HResult<()> {
    let doc = TraceDoc::from_trace(trace);
    fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

pub fn read_trace_json(path: &Path) -> HResult<PathTrace> {
    let doc: TraceDoc = serde_json::from_str(&fs::read_to_string(path)?)?;
    doc.into_trace()
}

/// Write experiment records as CSV, one row per test.
pub fn write_rows_csv<W: std::io::Write>(
    w: W,
    rows: &[crate::experiment::TestRow],
) -> HResult<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read a custom contrast vector: one coefficient per line (header optional).
pub fn read_contrast_file(path: &Path, n: usize) -> HResult<DVector<f64>> {
    let v = read_column_csv(path)?;
    if v.len() != n {
        return Err(HarnessError::Input(format!(
            "contrast has {} entries but the trace has n = {n}",
            v.len()
        )));
    }
    Ok(v)
}

/// The inference report printed by `infer`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InferDoc {
    pub stat: f64,
    pub sd: f64,
    pub vlo: f64,
    pub vup: f64,
    pub p_one: f64,
    pub p_two: f64,
    pub ci: [f64; 2],
    pub alpha: f64,
    pub step: usize,
    pub contrast: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign: Option<i8>,
}

impl InferDoc {
    pub fn new(inf: &TgInference, step: usize, contrast: &str) -> Self {
        InferDoc {
            stat: inf.stat,
            sd: inf.sd,
            vlo: inf.vlo,
            vup: inf.vup,
            p_one: inf.p_one,
            p_two: inf.p_two,
            ci: [inf.ci_lower, inf.ci_upper],
            alpha: inf.alpha,
            step,
            contrast: contrast.to_string(),
            location: None,
            sign: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use glinfer_core::path::run_path;
    use glinfer_core::polytope::selection_polyhedron;
    use std::io::Write;

    fn tempdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("glinfer-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn column_csv_accepts_optional_header_and_rejects_garbage() {
        assert_eq!(parse_column("y\n1.0\n2.5\n").unwrap(), vec![1.0, 2.5]);
        assert_eq!(parse_column("1.0\n2.5\n").unwrap(), vec![1.0, 2.5]);
        assert_eq!(parse_column("1.5,extra\n2.5\n").unwrap(), vec![1.5, 2.5]);
        assert!(parse_column("y\n1.0\nbad\n").is_err());
        assert!(parse_column("\n\n").is_err());
    }

    #[test]
    fn edge_csv_round_trip_and_validation() {
        let dir = tempdir();
        let p = dir.join("edges.csv");
        let mut f = fs::File::create(&p).unwrap();
        writeln!(f, "i,j").unwrap();
        writeln!(f, "1,2").unwrap();
        writeln!(f, "2,4").unwrap();
        drop(f);
        assert_eq!(read_edges_csv(&p).unwrap(), vec![(0, 1), (1, 3)]);

        let bad = dir.join("bad.csv");
        fs::write(&bad, "2,1\n").unwrap();
        assert!(read_edges_csv(&bad).is_err());
    }

    #[test]
    fn trace_document_round_trips_and_uses_one_based_rows() {
        let d = PenaltyMatrix::diff1(4).unwrap();
        let y = DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]);
        let trace = run_path(&y, &d, None).unwrap();

        let doc = TraceDoc::from_trace(&trace);
        // The first boundary row is penalty row 1 (0-based), reported as 2.
        assert_eq!(doc.steps[0].boundary, vec![2]);

        let json = serde_json::to_string(&doc).unwrap();
        let back: TraceDoc = serde_json::from_str(&json).unwrap();
        let rebuilt = back.into_trace().unwrap();
        assert!(rebuilt.same_events_through(&trace, trace.k_max()));

        // The rebuilt trace drives the polyhedron exactly as the original.
        let a = selection_polyhedron(&trace, 1).unwrap();
        let b = selection_polyhedron(&rebuilt, 1).unwrap();
        assert_eq!(a.nrows(), b.nrows());
        assert!((a.gamma() - b.gamma()).amax() < 1e-15);
    }

    #[test]
    fn identical_seeds_give_byte_identical_result_csvs() {
        use crate::experiment::{run_experiment, ExperimentConfig, Filter, StopRule};
        let cfg = ExperimentConfig {
            scenario: crate::scenario::Scenario::OneJump { n: 12, delta: 1.5, loc: 6 },
            reps: 6,
            seed: 99,
            stop: StopRule::FixedSteps { steps: 1 },
            filter: Filter::None,
            tests: vec![
                crate::experiment::ContrastKind::Spike,
                crate::experiment::ContrastKind::Segment,
            ],
            test_location: None,
            alpha: 0.1,
            sigma: None,
            naive: false,
            min_gap: None,
        };
        let mut bufs = Vec::new();
        for threads in [1usize, 3] {
            let res = run_experiment(&cfg, threads).unwrap();
            let mut buf = Vec::new();
            write_rows_csv(&mut buf, &res.rows).unwrap();
            bufs.push(buf);
        }
        assert!(!bufs[0].is_empty());
        assert_eq!(bufs[0], bufs[1]);
    }

    #[test]
    fn trace_document_rejects_out_of_range_rows() {
        let d = PenaltyMatrix::diff1(4).unwrap();
        let y = DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]);
        let trace = run_path(&y, &d, None).unwrap();
        let mut doc = TraceDoc::from_trace(&trace);
        doc.steps[0].boundary = vec![0];
        assert!(doc.into_trace().is_err());
    }
}
