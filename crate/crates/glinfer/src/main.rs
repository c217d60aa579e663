//! Command-line front end: path solving, selective inference, Monte Carlo
//! simulation, step-sign plots, and noise estimation.
//!
//! Exit codes: 0 on success, 2 on input or configuration errors, 3 on
//! numerical degeneracy.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use glinfer::experiment::{default_threads, run_experiment, ExperimentConfig};
use glinfer::io::{
    read_column_csv, read_contrast_file, read_edges_csv, read_trace_json, write_rows_csv,
    write_trace_json, HResult, HarnessError, InferDoc,
};
use glinfer::sigma::estimate_sigma_cv;
use glinfer::stepsign;
use glinfer_core::contrast::{declutter, gfl_segment, SelectedModel1D};
use glinfer_core::contrast::{fl_segment, fl_spike, tf_segment, tf_spike};
use glinfer_core::ic::{ic_scan, ic_stopped_polyhedron, IcConfig, IcPenalty};
use glinfer_core::path::{run_path, PathTrace};
use glinfer_core::polytope::{selection_polyhedron, Polyhedron};
use glinfer_core::tg::tg_inference;
use glinfer_core::{Error, PenaltyKind, PenaltyMatrix};

#[derive(Parser)]
#[command(
    name = "glinfer",
    version,
    about = "Exact post-selection inference for generalized lasso problems"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PenaltyArg {
    /// First differences (fused lasso).
    D1,
    /// Second differences (linear trend filtering).
    D2,
    /// Graph edge incidence; requires --edges.
    Graph,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ContrastArg {
    Spike,
    Segment,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StopArg {
    Aic,
    Bic,
    Ebic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Txt,
    Svg,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the dual solution path and write a JSON trace.
    Path {
        /// Input data: CSV, one numeric value per line (header optional).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "d1")]
        penalty: PenaltyArg,
        /// Edge list CSV (two 1-indexed integer columns, i < j).
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Augment the penalty with alpha-weighted identity rows
        /// (sparse fused lasso).
        #[arg(long)]
        sparse_alpha: Option<f64>,
        #[arg(long)]
        max_steps: Option<usize>,
        /// Trace JSON destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Truncated-Gaussian inference for a contrast, conditional on the
    /// selection event of a trace.
    Infer {
        #[arg(long)]
        trace: PathBuf,
        /// Path step to read the model from; defaults to the last step.
        #[arg(long)]
        step: Option<usize>,
        #[arg(long, value_enum)]
        contrast: Option<ContrastArg>,
        /// 1-based location of the tested feature.
        #[arg(long)]
        location: Option<usize>,
        /// Declutter the model with this minimum gap before testing.
        #[arg(long)]
        min_gap: Option<usize>,
        /// Custom contrast vector: CSV, one coefficient per line.
        #[arg(long)]
        contrast_file: Option<PathBuf>,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Condition on an information-criterion stop instead of a fixed
        /// step.
        #[arg(long, value_enum)]
        stop: Option<StopArg>,
        /// Consecutive rises required by the stopping rule.
        #[arg(long, default_value_t = 1)]
        q: usize,
        /// Extended BIC weight (with --stop ebic).
        #[arg(long)]
        gamma: Option<f64>,
        /// Also write the conditioning polyhedron as JSON.
        #[arg(long)]
        polytope_out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Results CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Summary JSON destination; stdout when omitted.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Worker threads (default: GLINFER_THREADS or all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Render the step-sign plot of the model selected at a path step.
    Stepsign {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        step: Option<usize>,
        #[arg(long, value_enum, default_value = "txt")]
        format: FormatArg,
        /// Plot destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the noise level by cross-validation along the path.
    EstimateSigma {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 20)]
        max_steps: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> HResult<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> HResult<()> {
    match cli.cmd {
        Cmd::Path { input, penalty, edges, sparse_alpha, max_steps, out } => {
            let y = read_column_csv(&input)?;
            let d = build_penalty(penalty, y.len(), edges.as_deref(), sparse_alpha)?;
            let trace = run_path(&y, &d, max_steps)?;
            match out {
                Some(p) => write_trace_json(&p, &trace)?,
                None => {
                    let doc = glinfer::io::TraceDoc::from_trace(&trace);
                    println!("{}", serde_json::to_string_pretty(&doc)?);
                }
            }
            Ok(())
        }
        Cmd::Infer {
            trace,
            step,
            contrast,
            location,
            min_gap,
            contrast_file,
            sigma,
            alpha,
            stop,
            q,
            gamma,
            polytope_out,
        } => {
            let trace = read_trace_json(&trace)?;
            if trace.k_max() == 0 {
                return Err(HarnessError::Core(Error::Degenerate(
                    "the trace has no path steps; nothing was selected".into(),
                )));
            }
            let (step_used, poly) = conditioning(&trace, step, stop, q, gamma, sigma)?;
            let (v, loc, sign, name) = build_contrast(
                &trace,
                step_used,
                contrast,
                location,
                min_gap,
                contrast_file.as_deref(),
            )?;
            let inf = tg_inference(&poly, &trace.y, &v, sigma, alpha)?;
            let mut doc = InferDoc::new(&inf, step_used, &name);
            doc.location = loc;
            doc.sign = sign;
            println!("{}", serde_json::to_string_pretty(&doc)?);
            if let Some(p) = polytope_out {
                fs::write(p, serde_json::to_string(&poly)?)?;
            }
            Ok(())
        }
        Cmd::Simulate { config, out, summary, threads } => {
            let cfg: ExperimentConfig = serde_json::from_str(&fs::read_to_string(&config)?)?;
            let threads = threads.unwrap_or_else(default_threads);
            let result = run_experiment(&cfg, threads)?;
            match out {
                Some(p) => write_rows_csv(fs::File::create(p)?, &result.rows)?,
                None => write_rows_csv(std::io::stdout().lock(), &result.rows)?,
            }
            let summary_text = serde_json::to_string_pretty(&result.summary_json())?;
            match summary {
                Some(p) => fs::write(p, summary_text)?,
                None => println!("{summary_text}"),
            }
            Ok(())
        }
        Cmd::Stepsign { trace, step, format, out } => {
            let trace = read_trace_json(&trace)?;
            if trace.k_max() == 0 {
                return Err(HarnessError::Core(Error::Degenerate(
                    "the trace has no path steps; nothing was selected".into(),
                )));
            }
            let step = step.unwrap_or_else(|| trace.k_max());
            let model = SelectedModel1D::from_step(&trace, step)?;
            let text = match format {
                FormatArg::Txt => stepsign::render_txt(&model),
                FormatArg::Svg => stepsign::render_svg(&model),
            };
            emit(&out, &text)
        }
        Cmd::EstimateSigma { input, folds, max_steps } => {
            let y = read_column_csv(&input)?;
            let est = estimate_sigma_cv(&y, folds, max_steps)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "sigma": est.sigma,
                    "step": est.step,
                    "df": est.df,
                    "cv": est.cv,
                    "cv_se": est.cv_se,
                }))?
            );
            Ok(())
        }
    }
}

fn build_penalty(
    kind: PenaltyArg,
    n: usize,
    edges: Option<&std::path::Path>,
    sparse_alpha: Option<f64>,
) -> HResult<PenaltyMatrix> {
    let base = match kind {
        PenaltyArg::D1 => PenaltyMatrix::diff1(n)?,
        PenaltyArg::D2 => PenaltyMatrix::diff2(n)?,
        PenaltyArg::Graph => {
            let path = edges.ok_or_else(|| {
                HarnessError::Input("--penalty graph requires --edges".into())
            })?;
            let edges = read_edges_csv(path)?;
            PenaltyMatrix::graph_incidence(n, &edges)?
        }
    };
    Ok(match sparse_alpha {
        Some(a) => PenaltyMatrix::sparse_augmented(&base, a)?,
        None => base,
    })
}

/// Resolve the conditioning event: either the selection event of a fixed
/// step, or the combined selection and stopping event of an IC rule.
fn conditioning(
    trace: &PathTrace,
    step: Option<usize>,
    stop: Option<StopArg>,
    q: usize,
    gamma: Option<f64>,
    sigma: f64,
) -> HResult<(usize, Polyhedron)> {
    match stop {
        None => {
            let step = step.unwrap_or_else(|| trace.k_max());
            let poly = selection_polyhedron(trace, step)?;
            Ok((step, poly))
        }
        Some(rule) => {
            let penalty = match rule {
                StopArg::Aic => IcPenalty::Aic,
                StopArg::Bic => IcPenalty::Bic,
                StopArg::Ebic => IcPenalty::Ebic {
                    gamma: gamma.ok_or_else(|| {
                        HarnessError::Input("--stop ebic requires --gamma".into())
                    })?,
                },
            };
            let cfg = IcConfig { penalty, q, sigma };
            let report = ic_scan(trace, &cfg)?;
            let stop = report.stop.ok_or_else(|| {
                HarnessError::Core(Error::Degenerate(
                    "the stopping rule did not decide on this trace".into(),
                ))
            })?;
            let poly = ic_stopped_polyhedron(trace, &report, &cfg)?;
            Ok((stop.step, poly))
        }
    }
}

type ContrastOut = (DVector<f64>, Option<usize>, Option<i8>, String);

fn build_contrast(
    trace: &PathTrace,
    step: usize,
    contrast: Option<ContrastArg>,
    location: Option<usize>,
    min_gap: Option<usize>,
    contrast_file: Option<&std::path::Path>,
) -> HResult<ContrastOut> {
    if let Some(path) = contrast_file {
        if contrast.is_some() || location.is_some() {
            return Err(HarnessError::Input(
                "--contrast-file replaces --contrast/--location".into(),
            ));
        }
        let v = read_contrast_file(path, trace.y.len())?;
        return Ok((v, None, None, "custom".to_string()));
    }
    let kind = contrast
        .ok_or_else(|| HarnessError::Input("need --contrast or --contrast-file".into()))?;
    let loc = location
        .ok_or_else(|| HarnessError::Input("--contrast requires --location".into()))?;

    if let PenaltyKind::Graph { .. } = trace.d.kind {
        let model_step = trace.step(step)?;
        if matches!(kind, ContrastArg::Spike) {
            return Err(HarnessError::Input(
                "spike contrasts are only defined for 1-D penalties".into(),
            ));
        }
        if loc == 0 || loc > trace.d.m() {
            return Err(HarnessError::Input(format!(
                "--location {loc} is not a 1-based penalty row"
            )));
        }
        let row = loc - 1;
        let sign = model_step
            .boundary
            .iter()
            .position(|&r| r == row)
            .map(|i| model_step.signs[i])
            .ok_or(Error::LocationNotSelected(loc))?;
        let v = gfl_segment(&trace.d, &model_step.boundary, row, sign)?;
        return Ok((v, Some(loc), Some(sign), "segment".to_string()));
    }

    let model = SelectedModel1D::from_step(trace, step)?;
    let kept = match min_gap {
        Some(g) => declutter(&model.locations, g),
        None => model.locations.clone(),
    };
    if !kept.contains(&loc) {
        return Err(HarnessError::Core(Error::LocationNotSelected(loc)));
    }
    let sign = model.sign_at(loc).expect("kept locations come from the model");
    let n = model.n;
    let is_tf = matches!(trace.d.kind, PenaltyKind::Diff2);
    let v = match (kind, is_tf) {
        (ContrastArg::Spike, false) => fl_spike(n, loc, sign)?,
        (ContrastArg::Segment, false) => fl_segment(n, &kept, loc, sign)?,
        (ContrastArg::Spike, true) => tf_spike(n, loc, sign)?,
        (ContrastArg::Segment, true) => {
            let rows: Vec<usize> = kept.iter().map(|&l| l - 2).collect();
            tf_segment(&trace.d, &rows, loc - 2, sign)?
        }
    };
    let name = match kind {
        ContrastArg::Spike => "spike",
        ContrastArg::Segment => "segment",
    };
    Ok((v, Some(loc), Some(sign), name.to_string()))
}
