//! Perception: ground-truth annotation, the detector interface and the
//! synthetic oriented-box detector that stands in for a trained network.

mod dataset;
mod eval;
mod external;
mod synthetic;

pub use dataset::{generate_dataset, label_lines, Dataset, DatasetSample, Split};
pub use eval::{eval_offline, EvalResult, IOU_THRESHOLDS};
pub use external::{
    seed_for_scene_id, serve_synthetic, DetectionWire, ExternalPerception, PerceptionRequestWire,
    PerceptionResponseWire, WireBox,
};
pub use synthetic::{
    nearest_gap, predict_indexed, BoxDegradation, FeaturePredicate, SyntheticPerception, SyntheticPerceptionParams, WeakRegion,
    CENTER_UNIT_M, ROTATION_UNIT_DEG,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{obb_corners, ObbPose, Point};
use crate::scene::Scene;

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("perception protocol error: {0}")]
    Protocol(String),
    #[error("perception transport error: {0}")]
    Io(#[from] std::io::Error),
}

/// Ground-truth label of one box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub box_id: usize,
    pub polygon: [Point; 4],
    pub obb: ObbPose,
}

/// One predicted oriented box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub obb: ObbPose,
    pub confidence: f64,
}

pub fn annotate(scene: &Scene) -> Vec<Annotation> {
    scene
        .boxes
        .iter()
        .enumerate()
        .map(|(box_id, obb)| Annotation {
            box_id,
            polygon: obb_corners(obb),
            obb: *obb,
        })
        .collect()
}

/// What the controller sends to the detector for one camera frame.
#[derive(Debug, Clone)]
pub struct PerceptionRequest<'a> {
    pub scene_id: String,
    pub boxes: &'a [ObbPose],
    pub luminosity: f64,
    /// Noise seed; only meaningful to seeded in-process models.
    pub seed: u64,
}

/// A detector the controller can query once per cycle.
pub trait Perception {
    fn detect(&mut self, request: &PerceptionRequest<'_>) -> Result<Vec<Detection>, PerceptionError>;
}

impl<P: Perception + ?Sized> Perception for &mut P {
    fn detect(&mut self, request: &PerceptionRequest<'_>) -> Result<Vec<Detection>, PerceptionError> {
        (**self).detect(request)
    }
}
