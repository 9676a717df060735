//! Effective run configuration: built-in defaults, then an optional TOML
//! file, then command-line flags.

use std::path::Path;

use clap::Args;
use deeptrack::assoc::CostWeights;
use deeptrack::gesture::GestureConfig;
use deeptrack::metrics::DEFAULT_IOU_THRESHOLD;
use deeptrack::simkit::{ScenarioKind, ScenarioSpec};
use deeptrack::tracker::TrackerConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub tracker: TrackerSection,
    pub association: AssociationSection,
    pub simulation: SimulationSection,
    pub evaluation: EvaluationSection,
    pub gesture: GestureConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerSection {
    pub n_init: u32,
    pub max_age: u32,
    pub min_confidence: f64,
    pub emit_tentative: bool,
    pub gallery_capacity: usize,
}

impl Default for TrackerSection {
    fn default() -> Self {
        let d = TrackerConfig::default();
        Self {
            n_init: d.n_init,
            max_age: d.max_age,
            min_confidence: d.min_confidence,
            emit_tentative: d.emit_tentative,
            gallery_capacity: d.gallery_capacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssociationSection {
    pub lambda: f64,
    pub gate: f64,
}

impl Default for AssociationSection {
    fn default() -> Self {
        let d = CostWeights::default();
        Self {
            lambda: d.lambda,
            gate: d.gate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub kind: ScenarioKind,
    pub seed: u64,
    /// Defaults depend on the kind when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_targets: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<usize>,
    pub frame_width: f64,
    pub frame_height: f64,
    pub noise_std: f64,
    pub p_miss: f64,
    pub clutter_rate: f64,
    pub embedding_noise_std: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::Swipe,
            seed: 0,
            n_targets: None,
            duration: None,
            frame_width: 1920.0,
            frame_height: 1080.0,
            noise_std: 0.0,
            p_miss: 0.0,
            clutter_rate: 0.0,
            embedding_noise_std: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub iou_thresh: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            iou_thresh: DEFAULT_IOU_THRESHOLD,
        }
    }
}

/// Flags that override configuration values. Accepted by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<std::path::PathBuf>,
    /// Print the effective configuration as TOML and exit
    #[arg(long, global = true)]
    pub print_config: bool,

    /// Scenario kind: swipe, click, zoom, fixation, crossing, occlusion, mixed
    #[arg(long, global = true)]
    pub kind: Option<ScenarioKind>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Scenario length in frames
    #[arg(long, global = true)]
    pub duration: Option<usize>,
    #[arg(long, global = true)]
    pub n_targets: Option<usize>,
    /// Detection box noise, px
    #[arg(long, global = true)]
    pub noise_std: Option<f64>,
    /// Probability of a missed detection
    #[arg(long, global = true)]
    pub p_miss: Option<f64>,
    /// Expected false positives per frame
    #[arg(long, global = true)]
    pub clutter: Option<f64>,
    #[arg(long, global = true)]
    pub embedding_noise_std: Option<f64>,

    /// Motion weight of the association cost, in [0, 1]
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Mahalanobis gate
    #[arg(long, global = true)]
    pub gate: Option<f64>,
    #[arg(long, global = true)]
    pub n_init: Option<u32>,
    #[arg(long, global = true)]
    pub max_age: Option<u32>,
    #[arg(long, global = true)]
    pub min_confidence: Option<f64>,
    /// Also report tentative tracks
    #[arg(long, global = true)]
    pub emit_tentative: bool,

    /// Minimum overlap for a track to count as matching the truth
    #[arg(long, global = true)]
    pub iou_thresh: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Defaults, then the config file, then flags; validated and with
    /// kind-dependent simulation values filled in.
    pub fn resolve(o: &Overrides) -> Result<Self, CliError> {
        let mut c = match &o.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        let s = &mut c.simulation;
        if let Some(k) = o.kind {
            if s.kind != k {
                s.n_targets = None;
                s.duration = None;
            }
            s.kind = k;
        }
        set(&mut s.seed, o.seed);
        s.duration = o.duration.or(s.duration);
        s.n_targets = o.n_targets.or(s.n_targets);
        set(&mut s.noise_std, o.noise_std);
        set(&mut s.p_miss, o.p_miss);
        set(&mut s.clutter_rate, o.clutter);
        set(&mut s.embedding_noise_std, o.embedding_noise_std);
        let base = ScenarioSpec::new(s.kind, s.seed);
        s.duration.get_or_insert(base.duration);
        s.n_targets.get_or_insert(base.n_targets);

        set(&mut c.association.lambda, o.lambda);
        set(&mut c.association.gate, o.gate);
        set(&mut c.tracker.n_init, o.n_init);
        set(&mut c.tracker.max_age, o.max_age);
        set(&mut c.tracker.min_confidence, o.min_confidence);
        c.tracker.emit_tentative |= o.emit_tentative;
        set(&mut c.evaluation.iou_thresh, o.iou_thresh);

        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        let a = &self.association;
        if !(0.0..=1.0).contains(&a.lambda) {
            return bad(format!("lambda {} must lie in [0, 1]", a.lambda));
        }
        if !(a.gate.is_finite() && a.gate > 0.0) {
            return bad(format!("gate {} must be positive", a.gate));
        }
        let t = &self.tracker;
        if t.n_init < 1 {
            return bad("n_init must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&t.min_confidence) {
            return bad(format!(
                "min_confidence {} must lie in [0, 1]",
                t.min_confidence
            ));
        }
        if t.gallery_capacity < 1 {
            return bad("gallery_capacity must be at least 1".into());
        }
        let iou = self.evaluation.iou_thresh;
        if !(iou > 0.0 && iou < 1.0) {
            return bad(format!(
                "iou_thresh {iou} must lie strictly between 0 and 1"
            ));
        }
        self.scenario()
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn tracker_config(&self) -> TrackerConfig {
        TrackerConfig {
            n_init: self.tracker.n_init,
            max_age: self.tracker.max_age,
            min_confidence: self.tracker.min_confidence,
            emit_tentative: self.tracker.emit_tentative,
            gallery_capacity: self.tracker.gallery_capacity,
            weights: CostWeights {
                lambda: self.association.lambda,
                gate: self.association.gate,
            },
        }
    }

    pub fn scenario(&self) -> ScenarioSpec {
        let s = &self.simulation;
        let base = ScenarioSpec::new(s.kind, s.seed);
        ScenarioSpec {
            n_targets: s.n_targets.unwrap_or(base.n_targets),
            duration: s.duration.unwrap_or(base.duration),
            frame_size: (s.frame_width, s.frame_height),
            noise_std: s.noise_std,
            p_miss: s.p_miss,
            clutter_rate: s.clutter_rate,
            embedding_noise_std: s.embedding_noise_std,
            ..base
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
