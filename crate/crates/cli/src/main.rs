use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use deeptrack::geometry::BoundingBox;
use deeptrack::gesture::{classify_with, Trajectory};
use deeptrack::kalman::MotionModel;
use deeptrack::metrics::{compare, evaluate, EvalReport};
use deeptrack::simkit::generate;
use deeptrack::tracker::Tracker;

mod config;
mod records;
mod render;

use config::{Overrides, RunConfig};
use records::*;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration.
    Usage(String),
    Malformed {
        path: String,
        line: usize,
        msg: String,
    },
    /// Inputs that parse but do not belong together.
    Inconsistent(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Malformed { .. } => 3,
            CliError::Inconsistent(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Inconsistent(m) | CliError::Io(m) => f.write_str(m),
            CliError::Malformed { path, line, msg } => write!(f, "{path}:{line}: {msg}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "deeptrack",
    version,
    about = "Multi-object tracking on synthetic detection streams"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a scenario: detections, ground truth and target metadata
    Simulate {
        #[arg(long, value_name = "PATH")]
        detections: PathBuf,
        #[arg(long, value_name = "PATH")]
        truth: PathBuf,
        /// Per-target kinds, one JSON object per line
        #[arg(long, value_name = "PATH")]
        meta: Option<PathBuf>,
    },
    /// Run the tracker over a detections file
    Track {
        #[arg(long, short, value_name = "PATH")]
        input: PathBuf,
        #[arg(long, short, value_name = "PATH")]
        output: PathBuf,
    },
    /// Score a tracks file against ground truth
    Evaluate {
        #[arg(long, value_name = "PATH")]
        tracks: PathBuf,
        #[arg(long, value_name = "PATH")]
        truth: PathBuf,
        /// Report file; standard output when omitted
        #[arg(long, short, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Difference of two evaluation reports, a minus b
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, short, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Label every track as swipe, click, zoom or unknown
    Classify {
        #[arg(long, value_name = "PATH")]
        tracks: PathBuf,
        #[arg(long, short, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Draw the trajectories of a tracks or ground-truth file as SVG
    Render {
        #[arg(long, short, value_name = "PATH")]
        input: PathBuf,
        #[arg(long, short, value_name = "PATH")]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("deeptrack: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.overrides)?;
    if cli.overrides.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Usage(
            "no subcommand given; see `deeptrack --help`".into(),
        ));
    };
    match command {
        Command::Simulate {
            detections,
            truth,
            meta,
        } => simulate(&cfg, &detections, &truth, meta.as_deref()),
        Command::Track { input, output } => track(&cfg, &input, &output),
        Command::Evaluate {
            tracks,
            truth,
            output,
        } => {
            let report = evaluate_files(&cfg, &tracks, &truth)?;
            emit(output.as_deref(), &pretty(&report))
        }
        Command::Compare { a, b, output } => {
            let a = read_report(&a)?;
            let b = read_report(&b)?;
            let c = compare(&a, &b);
            emit(output.as_deref(), &pretty(&c))
        }
        Command::Classify { tracks, output } => {
            let labels = classify_file(&cfg, &tracks)?;
            emit(output.as_deref(), &to_jsonl(&labels))
        }
        Command::Render { input, output } => {
            let svg = render_file(&cfg, &input)?;
            write_atomic(&output, &svg)
        }
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn simulate(
    cfg: &RunConfig,
    detections: &Path,
    truth: &Path,
    meta: Option<&Path>,
) -> Result<(), CliError> {
    let out = generate(&cfg.scenario()).map_err(|e| CliError::Usage(e.to_string()))?;
    let det: Vec<DetectionFrame> = out
        .detections
        .iter()
        .enumerate()
        .map(|(f, d)| DetectionFrame::from_detections(f as u64, d))
        .collect();
    let gt: Vec<TruthFrame> = out
        .ground_truth
        .frames
        .iter()
        .enumerate()
        .map(|(f, s)| TruthFrame::from_states(f as u64, s))
        .collect();
    write_atomic(detections, &to_jsonl(&det))?;
    write_atomic(truth, &to_jsonl(&gt))?;
    if let Some(meta) = meta {
        let targets: Vec<TargetRecord> = out.targets.iter().map(TargetRecord::from).collect();
        write_atomic(meta, &to_jsonl(&targets))?;
    }
    Ok(())
}

fn track(cfg: &RunConfig, input: &Path, output: &Path) -> Result<(), CliError> {
    let frames = read_frames(input, DetectionFrame::to_detections)?;
    let mut tracker = Tracker::new(cfg.tracker_config(), MotionModel::default());
    let out: Vec<TrackFrame> = frames
        .iter()
        .map(|(rec, dets)| TrackFrame::from_result(rec.frame, &tracker.step(dets)))
        .collect();
    write_atomic(output, &to_jsonl(&out))
}

fn evaluate_files(cfg: &RunConfig, tracks: &Path, truth: &Path) -> Result<EvalReport, CliError> {
    let results = read_frames(tracks, TrackFrame::to_result)?;
    let gt = read_frames(truth, TruthFrame::to_states)?;
    if results.len() != gt.len() {
        return Err(CliError::Inconsistent(format!(
            "{} has {} frames but {} has {}",
            tracks.display(),
            results.len(),
            truth.display(),
            gt.len()
        )));
    }
    if let Some(((r, _), (g, _))) = results
        .iter()
        .zip(&gt)
        .find(|(r, g)| r.0.frame != g.0.frame)
    {
        return Err(CliError::Inconsistent(format!(
            "frame {} in {} lines up with frame {} in {}",
            r.frame,
            tracks.display(),
            g.frame,
            truth.display()
        )));
    }
    let results: Vec<_> = results.into_iter().map(|(_, r)| r).collect();
    evaluate(&results, &truth_from_frames(&gt), cfg.evaluation.iou_thresh)
        .map_err(|e| CliError::Inconsistent(e.to_string()))
}

fn read_report(path: &Path) -> Result<EvalReport, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed {
        path: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })
}

/// Per-identity `(frame, box)` samples, ordered by identity.
fn collect_series<'a>(
    items: impl Iterator<Item = (u64, u64, BoundingBox)> + 'a,
) -> BTreeMap<u64, Vec<(u64, BoundingBox)>> {
    let mut by_id: BTreeMap<u64, Vec<(u64, BoundingBox)>> = BTreeMap::new();
    for (id, frame, b) in items {
        by_id.entry(id).or_default().push((frame, b));
    }
    by_id
}

fn classify_file(cfg: &RunConfig, tracks: &Path) -> Result<Vec<GestureRecord>, CliError> {
    let frames = read_frames(tracks, TrackFrame::to_result)?;
    let series = collect_series(
        frames
            .iter()
            .flat_map(|(_, r)| r.tracks.iter().map(move |t| (t.id, r.frame, t.bbox))),
    );
    let mut labels = Vec::new();
    for (id, samples) in series {
        match Trajectory::new(samples) {
            Ok(t) => {
                let g = classify_with(&t, &cfg.gesture);
                labels.push(GestureRecord {
                    id,
                    label: g.label,
                    features: g.features,
                });
            }
            Err(e) => eprintln!("warning: skipping track {id}: {e}"),
        }
    }
    Ok(labels)
}

fn render_file(cfg: &RunConfig, input: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", input.display())))?;
    let first = text.lines().find(|l| !l.trim().is_empty());
    let is_truth = first.is_some_and(|l| {
        serde_json::from_str::<serde_json::Value>(l)
            .map(|v| v.get("targets").is_some())
            .unwrap_or(false)
    });
    let series = if is_truth {
        let frames = read_frames(input, TruthFrame::to_states)?;
        collect_series(
            frames
                .iter()
                .flat_map(|(r, s)| s.iter().map(move |t| (t.gid, r.frame, t.bbox))),
        )
    } else {
        let frames = read_frames(input, TrackFrame::to_result)?;
        collect_series(
            frames
                .iter()
                .flat_map(|(_, r)| r.tracks.iter().map(move |t| (t.id, r.frame, t.bbox))),
        )
    };
    let series: Vec<render::Series> = series
        .into_iter()
        .map(|(id, samples)| render::Series { id, samples })
        .collect();
    let s = &cfg.simulation;
    Ok(render::render_svg(
        &series,
        (s.frame_width, s.frame_height),
        cfg.gesture.stationary_speed,
    ))
}
