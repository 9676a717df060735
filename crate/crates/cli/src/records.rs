//! Line-delimited JSON file formats and atomic output.

use std::io::Write;
use std::path::Path;

use deeptrack::appearance::Embedding;
use deeptrack::geometry::BoundingBox;
use deeptrack::gesture::{Features, Gesture};
use deeptrack::simkit::{GroundTruth, ScenarioKind, TargetInfo, TargetState};
use deeptrack::tracker::{Detection, FrameResult, TrackOutput, TrackStatus};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionFrame {
    pub frame: u64,
    pub detections: Vec<DetectionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub conf: f64,
    pub emb: Option<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFrame {
    pub frame: u64,
    pub targets: Vec<TruthRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthRecord {
    pub gid: u64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackFrame {
    pub frame: u64,
    pub tracks: Vec<TrackRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackRecord {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub status: TrackStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GestureRecord {
    pub id: u64,
    pub label: Gesture,
    pub features: Features,
}

/// Generator metadata: what each ground-truth identity is doing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetRecord {
    pub gid: u64,
    pub kind: ScenarioKind,
}

impl From<&TargetInfo> for TargetRecord {
    fn from(t: &TargetInfo) -> Self {
        Self {
            gid: t.gid,
            kind: t.kind,
        }
    }
}

/// Something carrying a frame index.
pub trait Framed {
    fn frame(&self) -> u64;
}

impl Framed for DetectionFrame {
    fn frame(&self) -> u64 {
        self.frame
    }
}

impl Framed for TruthFrame {
    fn frame(&self) -> u64 {
        self.frame
    }
}

impl Framed for TrackFrame {
    fn frame(&self) -> u64 {
        self.frame
    }
}

fn bbox(x: f64, y: f64, w: f64, h: f64) -> Result<BoundingBox, String> {
    BoundingBox::new(x, y, w, h).map_err(|e| e.to_string())
}

impl DetectionFrame {
    pub fn from_detections(frame: u64, dets: &[Detection]) -> Self {
        Self {
            frame,
            detections: dets
                .iter()
                .map(|d| {
                    let b = d.bbox();
                    DetectionRecord {
                        x: b.x(),
                        y: b.y(),
                        w: b.w(),
                        h: b.h(),
                        conf: d.confidence(),
                        emb: d.embedding().map(|e| e.as_slice().to_vec()),
                    }
                })
                .collect(),
        }
    }

    pub fn to_detections(&self) -> Result<Vec<Detection>, String> {
        self.detections
            .iter()
            .map(|r| {
                let embedding = r
                    .emb
                    .clone()
                    .map(Embedding::new)
                    .transpose()
                    .map_err(|e| e.to_string())?;
                Detection::new(bbox(r.x, r.y, r.w, r.h)?, r.conf, embedding)
                    .map_err(|e| e.to_string())
            })
            .collect()
    }
}

impl TruthFrame {
    pub fn from_states(frame: u64, states: &[TargetState]) -> Self {
        Self {
            frame,
            targets: states
                .iter()
                .map(|t| TruthRecord {
                    gid: t.gid,
                    x: t.bbox.x(),
                    y: t.bbox.y(),
                    w: t.bbox.w(),
                    h: t.bbox.h(),
                    visible: t.visible,
                })
                .collect(),
        }
    }

    pub fn to_states(&self) -> Result<Vec<TargetState>, String> {
        self.targets
            .iter()
            .map(|t| {
                Ok(TargetState {
                    gid: t.gid,
                    bbox: bbox(t.x, t.y, t.w, t.h)?,
                    visible: t.visible,
                })
            })
            .collect()
    }
}

impl TrackFrame {
    pub fn from_result(frame: u64, r: &FrameResult) -> Self {
        Self {
            frame,
            tracks: r
                .tracks
                .iter()
                .map(|t| TrackRecord {
                    id: t.id,
                    x: t.bbox.x(),
                    y: t.bbox.y(),
                    w: t.bbox.w(),
                    h: t.bbox.h(),
                    status: t.status,
                })
                .collect(),
        }
    }

    pub fn to_result(&self) -> Result<FrameResult, String> {
        let mut seen = std::collections::BTreeSet::new();
        let tracks = self
            .tracks
            .iter()
            .map(|t| {
                if !seen.insert(t.id) {
                    return Err(format!("track id {} repeated within a frame", t.id));
                }
                Ok(TrackOutput {
                    id: t.id,
                    bbox: bbox(t.x, t.y, t.w, t.h)?,
                    status: t.status,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(FrameResult {
            frame: self.frame,
            tracks,
        })
    }
}

/// Parse a JSONL file whose records carry consecutive frame indices.
/// Blank lines are ignored.
pub fn read_frames<T, U>(
    path: &Path,
    convert: impl Fn(&T) -> Result<U, String>,
) -> Result<Vec<(T, U)>, CliError>
where
    T: DeserializeOwned + Framed,
{
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut out: Vec<(T, U)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: String| CliError::Malformed {
            path: path.display().to_string(),
            line: n + 1,
            msg,
        };
        let record: T = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        if let Some((prev, _)) = out.last() {
            if record.frame() != prev.frame() + 1 {
                return Err(malformed(format!(
                    "frame {} does not follow frame {}",
                    record.frame(),
                    prev.frame()
                )));
            }
        }
        let value = convert(&record).map_err(malformed)?;
        out.push((record, value));
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn truth_from_frames(frames: &[(TruthFrame, Vec<TargetState>)]) -> GroundTruth {
    GroundTruth {
        frames: frames.iter().map(|(_, s)| s.clone()).collect(),
    }
}

/// Write through a temporary file in the same directory and rename it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
