//! Per-frame tracking loop: predict, associate, update, manage lifecycle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appearance::{Embedding, Gallery, DEFAULT_GALLERY_CAPACITY};
use crate::assoc::{build_cost_matrix, solve_assignment, stage2_iou_cost, CostWeights};
use crate::geometry::BoundingBox;
use crate::kalman::{KalmanTrackState, MotionModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectionError {
    #[error("confidence {0} is outside [0, 1]")]
    Confidence(f64),
}

/// One detector output for a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    bbox: BoundingBox,
    confidence: f64,
    embedding: Option<Embedding>,
}

impl Detection {
    pub fn new(
        bbox: BoundingBox,
        confidence: f64,
        embedding: Option<Embedding>,
    ) -> Result<Self, DetectionError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(DetectionError::Confidence(confidence));
        }
        Ok(Self {
            bbox,
            confidence,
            embedding,
        })
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        self.embedding.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

/// A persistent identity and its filter state.
#[derive(Debug, Clone)]
pub struct Track {
    id: u64,
    state: KalmanTrackState,
    gallery: Gallery,
    status: TrackStatus,
    hits: u32,
    misses: u32,
    age: u32,
}

impl Track {
    pub fn id(&self) -> u64 {
        self.id
    }

    /// Current filter state: predicted during association, posterior after
    /// a step completes for matched tracks.
    pub fn state(&self) -> &KalmanTrackState {
        &self.state
    }

    pub fn gallery(&self) -> &Gallery {
        &self.gallery
    }

    pub fn status(&self) -> TrackStatus {
        self.status
    }

    /// Consecutive frames with a matched detection.
    pub fn hits(&self) -> u32 {
        self.hits
    }

    /// Consecutive frames without a matched detection.
    pub fn misses(&self) -> u32 {
        self.misses
    }

    /// Frames since birth.
    pub fn age(&self) -> u32 {
        self.age
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Consecutive matches needed to confirm a track.
    pub n_init: u32,
    /// Consecutive misses a confirmed track survives.
    pub max_age: u32,
    /// Detections below this confidence are ignored.
    pub min_confidence: f64,
    /// Report tentative tracks as well as confirmed ones.
    pub emit_tentative: bool,
    pub gallery_capacity: usize,
    pub weights: CostWeights,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            n_init: 3,
            max_age: 30,
            min_confidence: 0.1,
            emit_tentative: false,
            gallery_capacity: DEFAULT_GALLERY_CAPACITY,
            weights: CostWeights::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackOutput {
    pub id: u64,
    pub bbox: BoundingBox,
    pub status: TrackStatus,
}

/// Tracks reported for one frame, ordered by id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameResult {
    pub frame: u64,
    pub tracks: Vec<TrackOutput>,
}

/// Sequential multi-object tracker.
///
/// Each [`step`](Tracker::step) runs one frame:
///
/// 1. every live track is predicted one frame ahead;
/// 2. confirmed tracks are matched to detections on the gated
///    motion/appearance cost;
/// 3. tentative tracks and stage-one leftovers are matched to the remaining
///    detections on `1 − iou`;
/// 4. matched tracks are updated, unmatched ones age and may be deleted, and
///    unmatched detections start tentative tracks.
///
/// Only tracks matched in the current frame are reported.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    model: MotionModel,
    tracks: Vec<Track>,
    next_id: u64,
    frame: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig, model: MotionModel) -> Self {
        Self {
            config,
            model,
            tracks: Vec::new(),
            next_id: 1,
            frame: 0,
        }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Live (non-deleted) tracks.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Index of the next frame to be processed.
    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn step(&mut self, detections: &[Detection]) -> FrameResult {
        let detections: Vec<&Detection> = detections
            .iter()
            .filter(|d| d.confidence >= self.config.min_confidence)
            .collect();

        self.predict_all();

        let mut track_match: Vec<Option<usize>> = vec![None; self.tracks.len()];
        let mut det_used = vec![false; detections.len()];

        // Stage 1: confirmed tracks on motion + appearance.
        let confirmed: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].status == TrackStatus::Confirmed)
            .collect();
        if !confirmed.is_empty() && !detections.is_empty() {
            let rows: Vec<&Track> = confirmed.iter().map(|&i| &self.tracks[i]).collect();
            let cost = build_cost_matrix(&self.model, &rows, &detections, &self.config.weights);
            for (r, d) in solve_assignment(&cost).pairs {
                track_match[confirmed[r]] = Some(d);
                det_used[d] = true;
            }
        }

        // Stage 2: everything still unmatched, on box overlap.
        let leftover_tracks: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| track_match[i].is_none())
            .collect();
        let leftover_dets: Vec<usize> = (0..detections.len()).filter(|&d| !det_used[d]).collect();
        if !leftover_tracks.is_empty() && !leftover_dets.is_empty() {
            let track_boxes: Vec<BoundingBox> = leftover_tracks
                .iter()
                .map(|&i| {
                    self.tracks[i]
                        .state
                        .to_box()
                        .expect("predicted boxes are validated in predict_all")
                })
                .collect();
            let det_boxes: Vec<BoundingBox> =
                leftover_dets.iter().map(|&d| detections[d].bbox).collect();
            let cost = stage2_iou_cost(&track_boxes, &det_boxes);
            for (r, c) in solve_assignment(&cost).pairs {
                track_match[leftover_tracks[r]] = Some(leftover_dets[c]);
                det_used[leftover_dets[c]] = true;
            }
        }

        for (i, m) in track_match.iter().enumerate() {
            match m {
                Some(d) => self.apply_match(i, detections[*d]),
                None => self.apply_miss(i),
            }
        }
        self.tracks.retain(|t| t.status != TrackStatus::Deleted);

        for (d, used) in det_used.iter().enumerate() {
            if !used {
                self.spawn(detections[d]);
            }
        }

        let result = FrameResult {
            frame: self.frame,
            tracks: self.report(),
        };
        self.frame += 1;
        result
    }

    /// Step through a whole detection stream.
    pub fn run<I, D>(&mut self, frames: I) -> Vec<FrameResult>
    where
        I: IntoIterator<Item = D>,
        D: AsRef<[Detection]>,
    {
        frames.into_iter().map(|f| self.step(f.as_ref())).collect()
    }

    fn predict_all(&mut self) {
        let model = &self.model;
        self.tracks.retain_mut(|t| {
            t.age += 1;
            match model.predict(&t.state) {
                Ok(s) if s.to_box().is_ok() => {
                    t.state = s;
                    true
                }
                // Numerical blow-up or a collapsed box: drop the track.
                _ => false,
            }
        });
    }

    fn apply_match(&mut self, i: usize, det: &Detection) {
        let t = &mut self.tracks[i];
        match self.model.update(&t.state, &det.bbox.to_measurement()) {
            Ok(s) if s.to_box().is_ok() => t.state = s,
            Ok(_) | Err(crate::kalman::KalmanError::NonFinite) => {
                t.status = TrackStatus::Deleted;
                return;
            }
            Err(_) => {
                Self::miss(t, &self.config);
                return;
            }
        }
        if let Some(e) = &det.embedding {
            // A detection with a different embedding size just isn't remembered.
            let _ = t.gallery.push(e.clone());
        }
        t.hits += 1;
        t.misses = 0;
        if t.status == TrackStatus::Tentative && t.hits >= self.config.n_init {
            t.status = TrackStatus::Confirmed;
        }
    }

    fn apply_miss(&mut self, i: usize) {
        Self::miss(&mut self.tracks[i], &self.config);
    }

    fn miss(t: &mut Track, config: &TrackerConfig) {
        t.misses += 1;
        t.hits = 0;
        match t.status {
            TrackStatus::Tentative => t.status = TrackStatus::Deleted,
            TrackStatus::Confirmed if t.misses > config.max_age => t.status = TrackStatus::Deleted,
            _ => {}
        }
    }

    fn spawn(&mut self, det: &Detection) {
        let mut gallery = Gallery::new(self.config.gallery_capacity);
        if let Some(e) = &det.embedding {
            gallery
                .push(e.clone())
                .expect("fresh gallery accepts any dimension");
        }
        let status = if self.config.n_init <= 1 {
            TrackStatus::Confirmed
        } else {
            TrackStatus::Tentative
        };
        self.tracks.push(Track {
            id: self.next_id,
            state: self.model.initiate(&det.bbox.to_measurement()),
            gallery,
            status,
            hits: 1,
            misses: 0,
            age: 0,
        });
        self.next_id += 1;
    }

    fn report(&self) -> Vec<TrackOutput> {
        let mut out: Vec<TrackOutput> = self
            .tracks
            .iter()
            .filter(|t| t.misses == 0)
            .filter(|t| match t.status {
                TrackStatus::Confirmed => true,
                TrackStatus::Tentative => self.config.emit_tentative,
                TrackStatus::Deleted => false,
            })
            .filter_map(|t| {
                t.state.to_box().ok().map(|bbox| TrackOutput {
                    id: t.id,
                    bbox,
                    status: t.status,
                })
            })
            .collect();
        out.sort_by_key(|t| t.id);
        out
    }
}
