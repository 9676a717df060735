//! Rule-based classification of finished track trajectories.
//!
//! Spatial thresholds are multiples of the trajectory's mean box diagonal so
//! the result does not depend on image resolution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BoundingBox;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("a trajectory needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("frame {next} does not follow frame {prev}")]
    NotIncreasing { prev: u64, next: u64 },
}

/// Boxes of one track in strictly increasing frame order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<(u64, BoundingBox)>,
}

impl Trajectory {
    pub fn new(samples: Vec<(u64, BoundingBox)>) -> Result<Self, TrajectoryError> {
        if samples.len() < 2 {
            return Err(TrajectoryError::TooShort(samples.len()));
        }
        for w in samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(TrajectoryError::NotIncreasing {
                    prev: w[0].0,
                    next: w[1].0,
                });
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(u64, BoundingBox)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_diagonal(&self) -> f64 {
        self.samples.iter().map(|(_, b)| b.diagonal()).sum::<f64>() / self.samples.len() as f64
    }

    /// Center displacement per frame between consecutive samples.
    fn step_speeds(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.windows(2).map(|w| {
            let (a, b) = (w[0].1.center(), w[1].1.center());
            (b.0 - a.0).hypot(b.1 - a.1) / (w[1].0 - w[0].0) as f64
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gesture {
    Swipe,
    Click,
    Zoom,
    Unknown,
}

impl Gesture {
    pub fn name(&self) -> &'static str {
        match self {
            Gesture::Swipe => "swipe",
            Gesture::Click => "click",
            Gesture::Zoom => "zoom",
            Gesture::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub net_displacement: f64,
    pub path_length: f64,
    /// `net_displacement / path_length`, 1 for a motionless trajectory.
    pub straightness: f64,
    /// Last box area over first box area.
    pub scale_ratio: f64,
    /// Frame span.
    pub duration: u64,
}

pub fn extract_features(t: &Trajectory) -> Features {
    let s = t.samples();
    let (first, last) = (s[0], s[s.len() - 1]);
    let (a, b) = (first.1.center(), last.1.center());
    let net_displacement = (b.0 - a.0).hypot(b.1 - a.1);
    let path_length: f64 = s
        .windows(2)
        .map(|w| {
            let (p, q) = (w[0].1.center(), w[1].1.center());
            (q.0 - p.0).hypot(q.1 - p.1)
        })
        .sum();
    let straightness = if path_length > 0.0 {
        (net_displacement / path_length).min(1.0)
    } else {
        1.0
    };
    Features {
        net_displacement,
        path_length,
        straightness,
        scale_ratio: last.1.area() / first.1.area(),
        duration: last.0 - first.0,
    }
}

/// Thresholds of the rule cascade. Distances are in mean box diagonals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GestureConfig {
    /// Minimum `|scale_ratio − 1|` for a zoom; swipes must stay at or below it.
    pub zoom_scale_change: f64,
    pub zoom_max_displacement: f64,
    pub click_max_duration: u64,
    pub click_max_path: f64,
    /// Samples at the end of a click that must be stationary (at most half
    /// the trajectory).
    pub click_hold_frames: usize,
    /// Per-frame center motion below which a sample counts as stationary.
    pub stationary_speed: f64,
    pub swipe_min_displacement: f64,
    pub swipe_min_straightness: f64,
}

impl Default for GestureConfig {
    fn default() -> Self {
        Self {
            zoom_scale_change: 0.5,
            zoom_max_displacement: 0.5,
            click_max_duration: 20,
            click_max_path: 2.0,
            click_hold_frames: 10,
            // About 4 px on a 70 px box: frame-to-frame jitter of a still
            // target under 1 px detection noise stays below it.
            stationary_speed: 0.06,
            swipe_min_displacement: 2.0,
            swipe_min_straightness: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GestureLabel {
    pub label: Gesture,
    pub features: Features,
}

pub fn classify(t: &Trajectory) -> GestureLabel {
    classify_with(t, &GestureConfig::default())
}

pub fn classify_with(t: &Trajectory, cfg: &GestureConfig) -> GestureLabel {
    let features = extract_features(t);
    let diag = t.mean_diagonal();
    let scale_change = (features.scale_ratio - 1.0).abs();

    let label = if scale_change > cfg.zoom_scale_change
        && features.net_displacement < cfg.zoom_max_displacement * diag
    {
        Gesture::Zoom
    } else if features.duration <= cfg.click_max_duration
        && features.path_length <= cfg.click_max_path * diag
        && holds_still(t, cfg, diag)
    {
        Gesture::Click
    } else if features.net_displacement > cfg.swipe_min_displacement * diag
        && features.straightness > cfg.swipe_min_straightness
        && scale_change <= cfg.zoom_scale_change
    {
        Gesture::Swipe
    } else {
        Gesture::Unknown
    };
    GestureLabel { label, features }
}

fn holds_still(t: &Trajectory, cfg: &GestureConfig, diag: f64) -> bool {
    let tail = cfg.click_hold_frames.min(t.len() / 2).max(1);
    let speeds: Vec<f64> = t.step_speeds().collect();
    let start = t.len() - tail;
    speeds[start.min(speeds.len())..]
        .iter()
        .all(|&v| v < cfg.stationary_speed * diag)
}
