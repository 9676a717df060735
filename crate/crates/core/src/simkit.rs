//! Seeded synthetic scenarios: ground-truth trajectories and a degraded
//! detection stream.
//!
//! Every random draw for a scenario comes from a single ChaCha8 stream seeded
//! with [`ScenarioSpec::seed`], consumed in a fixed order (trajectories first,
//! then per-frame degradation), so a spec always regenerates the same output.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appearance::{splitmix64, synth_embedding};
use crate::geometry::{iou, BoundingBox};
use crate::tracker::Detection;

/// Upper bound on per-frame ground-truth displacement, px/frame.
pub const MAX_SPEED: f64 = 40.0;
/// Ground-truth pairs overlapping more than this occlude the smaller box.
pub const OCCLUSION_IOU: f64 = 0.3;
/// Displacement above which detection noise doubles (motion blur), px/frame.
pub const BLUR_SPEED: f64 = 20.0;
pub const CLICK_DASH_FRAMES: usize = 5;
pub const CLICK_HOLD_FRAMES: usize = 10;
/// Accepted range of the occlusion gap in crossing scenarios, frames.
pub const CROSSING_GAP: (usize, usize) = (5, 10);

const CLUTTER_ID_BIT: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Swipe,
    Click,
    Zoom,
    Fixation,
    Crossing,
    Occlusion,
    Mixed,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::Swipe,
        ScenarioKind::Click,
        ScenarioKind::Zoom,
        ScenarioKind::Fixation,
        ScenarioKind::Crossing,
        ScenarioKind::Occlusion,
        ScenarioKind::Mixed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Swipe => "swipe",
            ScenarioKind::Click => "click",
            ScenarioKind::Zoom => "zoom",
            ScenarioKind::Fixation => "fixation",
            ScenarioKind::Crossing => "crossing",
            ScenarioKind::Occlusion => "occlusion",
            ScenarioKind::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SimError::InvalidSpec(format!("unknown scenario kind `{s}`")))
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub n_targets: usize,
    pub duration: usize,
    /// `(width, height)` in pixels.
    pub frame_size: (f64, f64),
    /// Per-component standard deviation of detection box noise, px.
    pub noise_std: f64,
    /// Probability that a visible target produces no detection.
    pub p_miss: f64,
    /// Expected number of false positives per frame.
    pub clutter_rate: f64,
    pub embedding_noise_std: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Defaults for `kind`: one target (two for crossing, four for
    /// occlusion), 60 frames on a 1920×1080 frame, no degradation.
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        let n_targets = match kind {
            ScenarioKind::Crossing => 2,
            ScenarioKind::Occlusion => 4,
            ScenarioKind::Mixed => 3,
            _ => 1,
        };
        let duration = match kind {
            ScenarioKind::Click => CLICK_DASH_FRAMES + CLICK_HOLD_FRAMES,
            _ => 60,
        };
        Self {
            kind,
            n_targets,
            duration,
            frame_size: (1920.0, 1080.0),
            noise_std: 0.0,
            p_miss: 0.0,
            clutter_rate: 0.0,
            embedding_noise_std: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidSpec(msg));
        if self.duration < 1 {
            return bad("duration must be at least 1 frame".into());
        }
        if self.n_targets < 1 {
            return bad("n_targets must be at least 1".into());
        }
        let (w, h) = self.frame_size;
        if !(w.is_finite() && h.is_finite() && w >= 200.0 && h >= 200.0) {
            return bad(format!("frame size {w}x{h} must be at least 200x200"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!(
                "noise_std {} must be finite and >= 0",
                self.noise_std
            ));
        }
        if !(0.0..=1.0).contains(&self.p_miss) {
            return bad(format!("p_miss {} must lie in [0, 1]", self.p_miss));
        }
        if !(self.clutter_rate.is_finite() && self.clutter_rate >= 0.0) {
            return bad(format!(
                "clutter_rate {} must be finite and >= 0",
                self.clutter_rate
            ));
        }
        if !(self.embedding_noise_std.is_finite() && self.embedding_noise_std >= 0.0) {
            return bad(format!(
                "embedding_noise_std {} must be finite and >= 0",
                self.embedding_noise_std
            ));
        }
        match self.kind {
            ScenarioKind::Crossing if self.n_targets != 2 => {
                bad("a crossing scenario has exactly 2 targets".into())
            }
            ScenarioKind::Occlusion if !self.n_targets.is_multiple_of(2) => {
                bad("an occlusion scenario needs an even number of targets".into())
            }
            ScenarioKind::Crossing | ScenarioKind::Occlusion if self.duration < 30 => {
                bad("crossing scenarios need at least 30 frames".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetState {
    pub gid: u64,
    pub bbox: BoundingBox,
    pub visible: bool,
}

/// Ground truth per frame; a target is listed only in frames where it exists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub frames: Vec<Vec<TargetState>>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(frame, box)` samples of one target, in frame order.
    pub fn trajectory(&self, gid: u64) -> Vec<(u64, BoundingBox)> {
        self.frames
            .iter()
            .enumerate()
            .filter_map(|(f, targets)| {
                targets
                    .iter()
                    .find(|t| t.gid == gid)
                    .map(|t| (f as u64, t.bbox))
            })
            .collect()
    }
}

/// What a generated target is doing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetInfo {
    pub gid: u64,
    pub kind: ScenarioKind,
}

/// Where a detection came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionOrigin {
    Target(u64),
    /// False positive, with the appearance identity it was rendered with.
    Clutter(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub spec: ScenarioSpec,
    pub targets: Vec<TargetInfo>,
    pub ground_truth: GroundTruth,
    pub detections: Vec<Vec<Detection>>,
    /// Parallel to `detections`.
    pub origins: Vec<Vec<DetectionOrigin>>,
}

/// Appearance identity of a true target in a given scenario.
pub fn target_appearance_id(seed: u64, gid: u64) -> u64 {
    splitmix64(seed ^ splitmix64(gid)) & !CLUTTER_ID_BIT
}

/// Generate the scenario described by `spec`.
pub fn generate(spec: &ScenarioSpec) -> Result<ScenarioOutput, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let paths = build_paths(spec, &mut rng);
    let targets: Vec<TargetInfo> = paths
        .iter()
        .enumerate()
        .map(|(k, p)| TargetInfo {
            gid: k as u64 + 1,
            kind: p.kind,
        })
        .collect();

    let (w, h) = spec.frame_size;
    let mut frames: Vec<Vec<TargetState>> = Vec::with_capacity(spec.duration);
    for f in 0..spec.duration {
        let mut present: Vec<TargetState> = paths
            .iter()
            .enumerate()
            .filter_map(|(k, p)| {
                p.boxes.get(f).copied().flatten().map(|b| TargetState {
                    gid: k as u64 + 1,
                    bbox: clamp_to_frame(b, w, h),
                    visible: true,
                })
            })
            .collect();
        apply_occlusion(&mut present);
        frames.push(present);
    }
    let ground_truth = GroundTruth { frames };

    let (detections, origins) = degrade(spec, &ground_truth, &mut rng);
    Ok(ScenarioOutput {
        spec: *spec,
        targets,
        ground_truth,
        detections,
        origins,
    })
}

/// Clear the visibility flag of the smaller box in every pair overlapping
/// more than [`OCCLUSION_IOU`]. Equal areas occlude the higher gid.
pub fn apply_occlusion(targets: &mut [TargetState]) {
    for t in targets.iter_mut() {
        t.visible = true;
    }
    for a in 0..targets.len() {
        for b in (a + 1)..targets.len() {
            if iou(&targets[a].bbox, &targets[b].bbox) > OCCLUSION_IOU {
                let (area_a, area_b) = (targets[a].bbox.area(), targets[b].bbox.area());
                let hidden = if area_a < area_b {
                    a
                } else if area_b < area_a {
                    b
                } else if targets[a].gid > targets[b].gid {
                    a
                } else {
                    b
                };
                targets[hidden].visible = false;
            }
        }
    }
}

/// Two targets crossing mid-frame, one of them hidden for 5–10 frames.
pub fn crossing_spec(seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        noise_std: 1.0,
        embedding_noise_std: 0.05,
        ..ScenarioSpec::new(ScenarioKind::Crossing, seed)
    }
}

pub fn crossing_scenario(seed: u64) -> ScenarioOutput {
    generate(&crossing_spec(seed)).expect("crossing spec is valid")
}

/// Longest run of consecutive frames in which `gid` exists but is not visible.
pub fn occlusion_gap(gt: &GroundTruth, gid: u64) -> usize {
    let mut best = 0;
    let mut run = 0;
    for frame in &gt.frames {
        match frame.iter().find(|t| t.gid == gid) {
            Some(t) if !t.visible => {
                run += 1;
                best = best.max(run);
            }
            _ => run = 0,
        }
    }
    best
}

fn clamp_to_frame(b: BoundingBox, w: f64, h: f64) -> BoundingBox {
    let bw = b.w().min(w);
    let bh = b.h().min(h);
    let x = b.x().clamp(bw / 2.0, w - bw / 2.0);
    let y = b.y().clamp(bh / 2.0, h - bh / 2.0);
    BoundingBox::new(x, y, bw, bh).expect("clamped box stays valid")
}

struct Path {
    kind: ScenarioKind,
    /// Indexed by frame; `None` where the target does not exist.
    boxes: Vec<Option<BoundingBox>>,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
}

fn grid(n: usize, frame: (f64, f64)) -> Vec<Cell> {
    let (fw, fh) = frame;
    let cols = ((n as f64 * fw / fh).sqrt().ceil() as usize).clamp(1, n);
    let rows = n.div_ceil(cols);
    let (cw, ch) = (fw / cols as f64, fh / rows as f64);
    (0..n)
        .map(|k| Cell {
            cx: (k % cols) as f64 * cw + cw / 2.0,
            cy: (k / cols) as f64 * ch + ch / 2.0,
            w: cw,
            h: ch,
        })
        .collect()
}

fn lanes(n: usize, frame: (f64, f64)) -> Vec<Cell> {
    let (fw, fh) = frame;
    let lh = fh / n as f64;
    (0..n)
        .map(|k| Cell {
            cx: fw / 2.0,
            cy: k as f64 * lh + lh / 2.0,
            w: fw,
            h: lh,
        })
        .collect()
}

fn build_paths(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Vec<Path> {
    let n = spec.n_targets;
    let d = spec.duration;
    match spec.kind {
        ScenarioKind::Swipe => lanes(n, spec.frame_size)
            .into_iter()
            .map(|cell| gesture_path(ScenarioKind::Swipe, cell, d, rng))
            .collect(),
        ScenarioKind::Click | ScenarioKind::Zoom | ScenarioKind::Fixation => {
            grid(n, spec.frame_size)
                .into_iter()
                .map(|cell| gesture_path(spec.kind, cell, d, rng))
                .collect()
        }
        ScenarioKind::Mixed => {
            const CYCLE: [ScenarioKind; 3] =
                [ScenarioKind::Swipe, ScenarioKind::Click, ScenarioKind::Zoom];
            grid(n, spec.frame_size)
                .into_iter()
                .enumerate()
                .map(|(k, cell)| gesture_path(CYCLE[k % 3], cell, d, rng))
                .collect()
        }
        ScenarioKind::Crossing => {
            let (fw, fh) = spec.frame_size;
            let cell = Cell {
                cx: fw / 2.0,
                cy: fh / 2.0,
                w: fw,
                h: fh,
            };
            crossing_pair(cell, d, rng).into()
        }
        ScenarioKind::Occlusion => grid(n / 2, spec.frame_size)
            .into_iter()
            .flat_map(|cell| crossing_pair(cell, d, rng))
            .collect(),
    }
}

fn gesture_path(kind: ScenarioKind, cell: Cell, duration: usize, rng: &mut ChaCha8Rng) -> Path {
    match kind {
        ScenarioKind::Swipe => {
            let (w, h) = (rng.random_range(40.0..60.0), rng.random_range(40.0..60.0));
            let speed: f64 = rng.random_range(6.0..14.0);
            let span = (cell.w - w - 40.0).max(0.0);
            let length = (speed * duration.saturating_sub(1) as f64).min(span);
            let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let start_x = cell.cx - dir * length / 2.0;
            let mean_speed = if duration > 1 {
                length / (duration - 1) as f64
            } else {
                0.0
            };
            let boxes = swipe_path((start_x, cell.cy), (dir, 0.0), mean_speed, duration, (w, h));
            Path {
                kind,
                boxes: boxes.into_iter().map(Some).collect(),
            }
        }
        ScenarioKind::Click => {
            let (w, h) = (rng.random_range(40.0..60.0), rng.random_range(40.0..60.0));
            let dist: f64 = rng.random_range(40.0..80.0);
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let (dx, dy) = (dist * angle.cos(), dist * angle.sin());
            let start = (cell.cx - dx / 2.0, cell.cy - dy / 2.0);
            let len = duration.min(CLICK_DASH_FRAMES + CLICK_HOLD_FRAMES);
            let boxes = click_path(start, (dx, dy), len, (w, h));
            Path {
                kind,
                boxes: boxes.into_iter().map(Some).collect(),
            }
        }
        ScenarioKind::Zoom => {
            let (w, h) = (rng.random_range(40.0..60.0), rng.random_range(40.0..60.0));
            let boxes = zoom_path((cell.cx, cell.cy), (w, h), 2.0, duration);
            Path {
                kind,
                boxes: boxes.into_iter().map(Some).collect(),
            }
        }
        ScenarioKind::Fixation => {
            let (w, h) = (rng.random_range(30.0..50.0), rng.random_range(30.0..50.0));
            let boxes = fixation_path((cell.cx, cell.cy), (w, h), duration, cell, rng);
            Path {
                kind,
                boxes: boxes.into_iter().map(Some).collect(),
            }
        }
        other => unreachable!("{other} is not a single-target gesture"),
    }
}

/// `3u² − 2u³`.
fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Straight path of `(duration − 1)·speed` pixels along `dir`, eased in and
/// out with a smooth-step profile.
pub fn swipe_path(
    start: (f64, f64),
    dir: (f64, f64),
    speed: f64,
    duration: usize,
    size: (f64, f64),
) -> Vec<BoundingBox> {
    let norm = dir.0.hypot(dir.1);
    let (ux, uy) = if norm > 0.0 {
        (dir.0 / norm, dir.1 / norm)
    } else {
        (1.0, 0.0)
    };
    let steps = duration.saturating_sub(1).max(1) as f64;
    let length = speed * duration.saturating_sub(1) as f64;
    (0..duration)
        .map(|t| {
            let s = length * smoothstep(t as f64 / steps);
            BoundingBox::new(start.0 + ux * s, start.1 + uy * s, size.0, size.1)
                .expect("positive size")
        })
        .collect()
}

/// Linear dash of `offset` over [`CLICK_DASH_FRAMES`] frames, then hold.
pub fn click_path(
    start: (f64, f64),
    offset: (f64, f64),
    duration: usize,
    size: (f64, f64),
) -> Vec<BoundingBox> {
    (0..duration)
        .map(|t| {
            let u = (t as f64 / CLICK_DASH_FRAMES as f64).min(1.0);
            BoundingBox::new(
                start.0 + u * offset.0,
                start.1 + u * offset.1,
                size.0,
                size.1,
            )
            .expect("positive size")
        })
        .collect()
}

/// Fixed center, width and height growing linearly to `factor` times their
/// initial values over the duration.
pub fn zoom_path(
    center: (f64, f64),
    size: (f64, f64),
    factor: f64,
    duration: usize,
) -> Vec<BoundingBox> {
    let steps = duration.saturating_sub(1).max(1) as f64;
    (0..duration)
        .map(|t| {
            let s = 1.0 + (factor - 1.0) * t as f64 / steps;
            BoundingBox::new(center.0, center.1, size.0 * s, size.1 * s).expect("positive size")
        })
        .collect()
}

/// Radius of the gaze random walk around a fixation point, px.
pub const FIXATION_RADIUS: f64 = 15.0;
const SACCADE_PROBABILITY: f64 = 0.03;

/// Small random walk around a fixation point, with occasional one-frame
/// saccades to a new fixation point at most [`MAX_SPEED`] away.
fn fixation_path(
    center: (f64, f64),
    size: (f64, f64),
    duration: usize,
    cell: Cell,
    rng: &mut ChaCha8Rng,
) -> Vec<BoundingBox> {
    let step = Normal::new(0.0, 1.5).expect("valid normal");
    let mut anchor = center;
    let mut pos = center;
    let mut out = Vec::with_capacity(duration);
    for t in 0..duration {
        if t > 0 {
            if rng.random_bool(SACCADE_PROBABILITY) {
                let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let dist: f64 = rng.random_range(20.0..MAX_SPEED - FIXATION_RADIUS);
                let mut next = (anchor.0 + dist * angle.cos(), anchor.1 + dist * angle.sin());
                // Stay inside the cell so neighbouring fixations don't merge.
                let (hx, hy) = (cell.w / 2.0 - size.0, cell.h / 2.0 - size.1);
                if (next.0 - cell.cx).abs() > hx.max(0.0) || (next.1 - cell.cy).abs() > hy.max(0.0)
                {
                    next = (2.0 * anchor.0 - next.0, 2.0 * anchor.1 - next.1);
                    if (next.0 - cell.cx).abs() > hx.max(0.0)
                        || (next.1 - cell.cy).abs() > hy.max(0.0)
                    {
                        next = (cell.cx, cell.cy);
                    }
                }
                // Jump keeps the same offset from the anchor, so the move is
                // |next - anchor| <= MAX_SPEED - FIXATION_RADIUS plus clamping slack.
                let off = (pos.0 - anchor.0, pos.1 - anchor.1);
                anchor = next;
                pos = (anchor.0 + off.0, anchor.1 + off.1);
            } else {
                pos.0 += step.sample(rng);
                pos.1 += step.sample(rng);
                let (ox, oy) = (pos.0 - anchor.0, pos.1 - anchor.1);
                let r = ox.hypot(oy);
                if r > FIXATION_RADIUS {
                    pos = (
                        anchor.0 + ox * FIXATION_RADIUS / r,
                        anchor.1 + oy * FIXATION_RADIUS / r,
                    );
                }
            }
        }
        out.push(BoundingBox::new(pos.0, pos.1, size.0, size.1).expect("positive size"));
    }
    out
}

/// Two straight paths meeting at the cell center at mid-duration. The
/// smaller target is hidden while the boxes overlap; parameters are redrawn
/// until that gap lasts [`CROSSING_GAP`] frames.
fn crossing_pair(cell: Cell, duration: usize, rng: &mut ChaCha8Rng) -> [Path; 2] {
    let mid = (duration / 2) as f64;
    loop {
        let base: f64 = rng.random_range(45.0..60.0);
        let aspect: f64 = rng.random_range(0.9..1.1);
        let big = (base, base * aspect);
        let shrink: f64 = rng.random_range(0.96..0.99);
        let small = (big.0 * shrink, big.1 * shrink);

        let speed_a: f64 = rng.random_range(4.0..8.0);
        let speed_b: f64 = rng.random_range(4.0..8.0);
        let heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let turn: f64 = rng.random_range(60f64.to_radians()..120f64.to_radians());
        let va = (speed_a * heading.cos(), speed_a * heading.sin());
        let vb = (
            speed_b * (heading + turn).cos(),
            speed_b * (heading + turn).sin(),
        );

        let line = |v: (f64, f64), size: (f64, f64)| -> Option<Vec<BoundingBox>> {
            (0..duration)
                .map(|t| {
                    let dt = t as f64 - mid;
                    let (x, y) = (cell.cx + v.0 * dt, cell.cy + v.1 * dt);
                    let inside = (x - cell.cx).abs() + size.0 / 2.0 <= cell.w / 2.0
                        && (y - cell.cy).abs() + size.1 / 2.0 <= cell.h / 2.0;
                    inside.then(|| BoundingBox::new(x, y, size.0, size.1).expect("positive size"))
                })
                .collect()
        };
        let (Some(a), Some(b)) = (line(va, small), line(vb, big)) else {
            continue;
        };
        let gap = a
            .iter()
            .zip(&b)
            .filter(|(p, q)| iou(p, q) > OCCLUSION_IOU)
            .count();
        if (CROSSING_GAP.0..=CROSSING_GAP.1).contains(&gap) {
            return [
                Path {
                    kind: ScenarioKind::Crossing,
                    boxes: a.into_iter().map(Some).collect(),
                },
                Path {
                    kind: ScenarioKind::Crossing,
                    boxes: b.into_iter().map(Some).collect(),
                },
            ];
        }
    }
}

type Degraded = (Vec<Vec<Detection>>, Vec<Vec<DetectionOrigin>>);

fn degrade(spec: &ScenarioSpec, gt: &GroundTruth, rng: &mut ChaCha8Rng) -> Degraded {
    let (fw, fh) = spec.frame_size;
    let clutter_count =
        (spec.clutter_rate > 0.0).then(|| Poisson::new(spec.clutter_rate).expect("positive rate"));
    let mut detections = Vec::with_capacity(gt.len());
    let mut origins = Vec::with_capacity(gt.len());

    for (f, frame) in gt.frames.iter().enumerate() {
        let mut items: Vec<(Detection, DetectionOrigin)> = Vec::new();
        for target in frame {
            if !target.visible {
                continue;
            }
            if spec.p_miss > 0.0 && rng.random_bool(spec.p_miss) {
                continue;
            }
            let speed = f
                .checked_sub(1)
                .and_then(|p| gt.frames[p].iter().find(|t| t.gid == target.gid))
                .map_or(0.0, |prev| {
                    (target.bbox.x() - prev.bbox.x()).hypot(target.bbox.y() - prev.bbox.y())
                });
            let std = if speed > BLUR_SPEED {
                2.0 * spec.noise_std
            } else {
                spec.noise_std
            };
            let b = target.bbox;
            let bbox = if std > 0.0 {
                let noise = Normal::new(0.0, std).expect("valid normal");
                BoundingBox::new(
                    b.x() + noise.sample(rng),
                    b.y() + noise.sample(rng),
                    (b.w() + noise.sample(rng)).max(1.0),
                    (b.h() + noise.sample(rng)).max(1.0),
                )
                .expect("noisy box stays valid")
            } else {
                b
            };
            let confidence = rng.random_range(0.5..1.0);
            let embedding = synth_embedding(
                target_appearance_id(spec.seed, target.gid),
                spec.embedding_noise_std,
                rng,
            );
            let det = Detection::new(bbox, confidence, Some(embedding)).expect("valid confidence");
            items.push((det, DetectionOrigin::Target(target.gid)));
        }

        if let Some(dist) = &clutter_count {
            let count = dist.sample(rng) as usize;
            for _ in 0..count {
                let w: f64 = rng.random_range(20.0..80.0);
                let h: f64 = rng.random_range(20.0..80.0);
                let x = rng.random_range(w / 2.0..fw - w / 2.0);
                let y = rng.random_range(h / 2.0..fh - h / 2.0);
                let identity = rng.random::<u64>() | CLUTTER_ID_BIT;
                let embedding = synth_embedding(identity, spec.embedding_noise_std, rng);
                let det = Detection::new(
                    BoundingBox::new(x, y, w, h).expect("positive size"),
                    rng.random_range(0.0..1.0),
                    Some(embedding),
                )
                .expect("valid confidence");
                items.push((det, DetectionOrigin::Clutter(identity)));
            }
        }

        items.shuffle(rng);
        let (d, o): (Vec<_>, Vec<_>) = items.into_iter().unzip();
        detections.push(d);
        origins.push(o);
    }
    (detections, origins)
}
