//! Parametric detector with structured, seeded errors.
//!
//! Per box, the center noise standard deviation grows with the luminosity
//! deficit and with the clearance deficit to the nearest neighbour, and the
//! rotation noise grows with the magnitude of the true rotation. Weak-region
//! masks amplify these learned degradation terms but not the base noise
//! floor. Confidence falls as the applied degradation grows.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Detection, Perception, PerceptionError, PerceptionRequest};
use crate::geometry::{obb_distance, rect_angle_diff, wrap_deg, ObbPose, Rect};
use crate::rng::rng_from_seed;
use crate::scene::Scene;

/// Center noise that counts as one unit of degradation (the near-fail bound).
pub const CENTER_UNIT_M: f64 = 0.01;
/// Rotation noise that counts as one unit of degradation.
pub const ROTATION_UNIT_DEG: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeaturePredicate {
    AbsRotationAbove { deg: f64 },
    LuminosityBelow { value: f64 },
    GapBelow { meters: f64 },
    CenterInside { region: Rect },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakRegion {
    pub when: FeaturePredicate,
    pub multiplier: f64,
}

/// Repairable state of the synthetic detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPerceptionParams {
    /// Degrees of rotation noise per degree of true |rotation|.
    pub rot_err_slope: f64,
    /// Meters of center noise per luminosity unit below `lum_nominal`.
    pub lum_err_gain: f64,
    /// Meters of center noise per meter of clearance below `gap_nominal`.
    pub prox_err_gain: f64,
    pub base_center_noise_sd: f64,
    pub base_rot_noise_sd: f64,
    pub miss_rate: f64,
    /// Degradation (in noise units) above which a box may be missed.
    pub miss_cutoff: f64,
    pub lum_nominal: f64,
    pub gap_nominal: f64,
    pub weak_regions: Vec<WeakRegion>,
}

impl SyntheticPerceptionParams {
    /// A detector without any error.
    pub fn perfect() -> Self {
        Self {
            rot_err_slope: 0.0,
            lum_err_gain: 0.0,
            prox_err_gain: 0.0,
            base_center_noise_sd: 0.0,
            base_rot_noise_sd: 0.0,
            miss_rate: 0.0,
            miss_cutoff: f64::MAX,
            lum_nominal: 3000.0,
            gap_nominal: 0.06,
            weak_regions: Vec::new(),
        }
    }

    pub fn check(&self) -> Result<(), String> {
        let gains = [
            ("rot_err_slope", self.rot_err_slope),
            ("lum_err_gain", self.lum_err_gain),
            ("prox_err_gain", self.prox_err_gain),
            ("base_center_noise_sd", self.base_center_noise_sd),
            ("base_rot_noise_sd", self.base_rot_noise_sd),
        ];
        for (name, v) in gains {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.miss_rate) {
            return Err(format!("miss_rate must lie in [0, 1], got {}", self.miss_rate));
        }
        if self.weak_regions.iter().any(|w| !(w.multiplier >= 0.0)) {
            return Err("weak-region multipliers must be non-negative".into());
        }
        Ok(())
    }

    /// Noise levels applied to box `index` of `boxes`.
    pub fn degradation(&self, boxes: &[ObbPose], index: usize, luminosity: f64) -> BoxDegradation {
        let b = &boxes[index];
        let abs_rot = rect_angle_diff(b.rot_deg, 0.0).abs();
        let nearest_gap = nearest_gap(boxes, index);
        let multiplier: f64 = self
            .weak_regions
            .iter()
            .filter(|w| match &w.when {
                FeaturePredicate::AbsRotationAbove { deg } => abs_rot > *deg,
                FeaturePredicate::LuminosityBelow { value } => luminosity < *value,
                FeaturePredicate::GapBelow { meters } => nearest_gap < *meters,
                FeaturePredicate::CenterInside { region } => region.contains(b.center()),
            })
            .map(|w| w.multiplier)
            .product();
        let lum_deficit = (self.lum_nominal - luminosity).max(0.0);
        let gap_deficit = (self.gap_nominal - nearest_gap).max(0.0);
        let center_sd = self.base_center_noise_sd
            + multiplier * (self.lum_err_gain * lum_deficit + self.prox_err_gain * gap_deficit);
        let rot_sd = self.base_rot_noise_sd + multiplier * self.rot_err_slope * abs_rot;
        BoxDegradation {
            abs_rot,
            nearest_gap,
            lum_deficit,
            gap_deficit,
            multiplier,
            center_sd,
            rot_sd,
        }
    }

    /// Detections for a full scene; see [`SyntheticPerception`].
    pub fn predict(&self, scene: &Scene, seed: u64) -> Vec<Detection> {
        predict_boxes(self, &scene.boxes, scene.luminosity, seed)
    }
}

/// Clearance from box `index` to its closest neighbour (infinite when alone).
pub fn nearest_gap(boxes: &[ObbPose], index: usize) -> f64 {
    boxes
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(_, o)| obb_distance(&boxes[index], o))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDegradation {
    pub abs_rot: f64,
    pub nearest_gap: f64,
    pub lum_deficit: f64,
    pub gap_deficit: f64,
    pub multiplier: f64,
    pub center_sd: f64,
    pub rot_sd: f64,
}

impl BoxDegradation {
    /// Total degradation in units of the near-fail bounds.
    pub fn total(&self) -> f64 {
        self.center_sd / CENTER_UNIT_M + self.rot_sd / ROTATION_UNIT_DEG
    }

    pub fn confidence(&self) -> f64 {
        1.0 / (1.0 + self.total())
    }
}

fn predict_boxes(
    params: &SyntheticPerceptionParams,
    boxes: &[ObbPose],
    luminosity: f64,
    seed: u64,
) -> Vec<Detection> {
    predict_indexed(params, boxes, luminosity, seed)
        .into_iter()
        .flatten()
        .collect()
}

/// Per-box predictions in box order; `None` marks a missed box.
pub fn predict_indexed(
    params: &SyntheticPerceptionParams,
    boxes: &[ObbPose],
    luminosity: f64,
    seed: u64,
) -> Vec<Option<Detection>> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(boxes.len());
    for (i, b) in boxes.iter().enumerate() {
        // Fixed draw order: the same seed yields the same standard normals
        // whatever the parameters are.
        let u: f64 = rng.random();
        let zx: f64 = rng.sample(StandardNormal);
        let zy: f64 = rng.sample(StandardNormal);
        let zr: f64 = rng.sample(StandardNormal);
        let d = params.degradation(boxes, i, luminosity);
        if d.total() > params.miss_cutoff && u < params.miss_rate {
            out.push(None);
            continue;
        }
        out.push(Some(Detection {
            obb: ObbPose {
                cx: b.cx + d.center_sd * zx,
                cy: b.cy + d.center_sd * zy,
                rot_deg: wrap_deg(b.rot_deg + d.rot_sd * zr),
                width: b.width,
                height: b.height,
            },
            confidence: d.confidence(),
        }));
    }
    out
}

/// In-process detector backed by [`SyntheticPerceptionParams`].
#[derive(Debug, Clone)]
pub struct SyntheticPerception {
    pub params: SyntheticPerceptionParams,
}

impl SyntheticPerception {
    pub fn new(params: SyntheticPerceptionParams) -> Self {
        Self { params }
    }
}

impl Perception for SyntheticPerception {
    fn detect(&mut self, request: &PerceptionRequest<'_>) -> Result<Vec<Detection>, PerceptionError> {
        Ok(predict_boxes(
            &self.params,
            request.boxes,
            request.luminosity,
            request.seed,
        ))
    }
}
