//! Kinematic pick-and-place episodes and failure-mode classification.
//!
//! The controller cycle is: capture a frame, pick the detection with the
//! highest confidence, check the grasp, transport, place at the pallet
//! target, and repeat until nothing selectable is detected or the cycle cap
//! of `2 * n_boxes` is reached. There are no dynamics; placement error comes
//! from perception error, singularity shake and grazing of neighbours.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{obb_intersect, obb_iou, rect_angle_diff, ObbPose};
use crate::perception::{Detection, Perception, PerceptionRequest};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scene::{Scene, WorkspaceConfig};

/// Minimum IoU for a detection to be associated with a box.
pub const MATCH_IOU: f64 = 0.1;
/// Failed grasps tolerated per box; the next failure abandons it.
pub const MAX_GRASP_ATTEMPTS: u32 = 2;

const DETECT_S: f64 = 1.0;
const PICK_PLACE_S: f64 = 12.0;
const FAILED_PICK_S: f64 = 6.0;
const RESTART_S: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperKind {
    Suction,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperSpec {
    pub kind: GripperKind,
    /// Largest center-prediction error that still yields a grasp.
    pub suction_tol: f64,
    /// Finger `(width, depth)`; unused by suction grippers.
    pub finger_size: (f64, f64),
    /// Clearance the opened finger sweeps beyond the box edge.
    pub finger_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequirementThresholds {
    pub place_rot_tol_deg: f64,
    pub place_pos_tol_frac: f64,
    pub near_fail_rot_deg: f64,
    pub near_fail_center_m: f64,
}

impl Default for RequirementThresholds {
    fn default() -> Self {
        Self {
            place_rot_tol_deg: 5.0,
            place_pos_tol_frac: 0.5,
            near_fail_rot_deg: 5.0,
            near_fail_center_m: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailureMode {
    /// Predicted center off by more than the near-fail distance.
    FM1,
    /// Predicted rotation off by more than the near-fail angle.
    FM2,
    /// Box not placed at the target.
    FM3,
    /// Placed orientation outside tolerance.
    FM4,
    /// Arm stuck; the cycle restarted.
    FM5,
}

pub type FailureSet = BTreeSet<FailureMode>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    NearFail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    None,
    Soft,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Offset of the box center from the target, pallet frame.
    pub offset: [f64; 2],
    /// Orientation relative to the pallet, in `[-90, 90)`.
    pub rotation_deg: f64,
    pub shake_deg: f64,
    pub transport_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxEvents {
    pub box_id: usize,
    pub true_pose: ObbPose,
    pub detected: bool,
    /// Prediction from the first frame that saw this box.
    pub first_prediction: Option<ObbPose>,
    pub first_center_dev: Option<f64>,
    pub first_rot_dev: Option<f64>,
    pub max_center_dev: f64,
    pub max_rot_dev: f64,
    pub attempts: u32,
    pub grasped: bool,
    pub stuck: u32,
    pub placement: Option<Placement>,
}

impl BoxEvents {
    pub fn new(box_id: usize, true_pose: ObbPose) -> Self {
        Self {
            box_id,
            true_pose,
            detected: false,
            first_prediction: None,
            first_center_dev: None,
            first_rot_dev: None,
            max_center_dev: 0.0,
            max_rot_dev: 0.0,
            attempts: 0,
            grasped: false,
            stuck: 0,
            placement: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraspFailure {
    CenterOffset { error_m: f64 },
    FingerCollision { with_box: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum CycleAction {
    NothingSelectable,
    EmptyPick { confidence: f64 },
    GraspFailed { box_id: usize, reason: GraspFailure, abandoned: bool },
    Stuck { box_id: usize },
    Placed { box_id: usize, placement: Placement },
    PerceptionError { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleEvent {
    pub cycle: usize,
    pub detections: usize,
    #[serde(flatten)]
    pub action: CycleAction,
}

impl fmt::Display for CycleEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cycle {} detections={} ", self.cycle, self.detections)?;
        match &self.action {
            CycleAction::NothingSelectable => write!(f, "stop: nothing selectable"),
            CycleAction::EmptyPick { confidence } => {
                write!(f, "pick at empty space (confidence {confidence:.3})")
            }
            CycleAction::GraspFailed {
                box_id,
                reason,
                abandoned,
            } => {
                let why = match reason {
                    GraspFailure::CenterOffset { error_m } => {
                        format!("center off by {:.4} m", error_m)
                    }
                    GraspFailure::FingerCollision { with_box } => {
                        format!("finger collides with box {with_box}")
                    }
                };
                write!(f, "grasp of box {box_id} failed: {why}")?;
                if *abandoned {
                    write!(f, "; box abandoned")?;
                }
                Ok(())
            }
            CycleAction::Stuck { box_id } => write!(f, "arm stuck carrying box {box_id}; restart"),
            CycleAction::Placed { box_id, placement } => write!(
                f,
                "placed box {box_id}: offset ({:+.4}, {:+.4}) m, orientation {:+.2} deg (shake {:+.2}, graze {:+.2})",
                placement.offset[0],
                placement.offset[1],
                placement.rotation_deg,
                placement.shake_deg,
                placement.transport_deg
            ),
            CycleAction::PerceptionError { message } => write!(f, "perception failure: {message}"),
        }
    }
}

/// Everything observed during one simulated episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub scene: Scene,
    pub seed: u64,
    pub boxes: Vec<BoxEvents>,
    pub cycles: Vec<CycleEvent>,
    pub failure_modes: FailureSet,
    pub outcome: Outcome,
    pub failure_kind: FailureKind,
    /// Set when the perception backend broke the protocol.
    pub infrastructure_error: Option<String>,
    /// Simulated controller time.
    pub sim_time_s: f64,
}

/// Associates detections with boxes greedily by descending IoU (one-to-one,
/// IoU above [`MATCH_IOU`]). Returns the matched box per detection.
fn associate(detections: &[Detection], boxes: &[ObbPose], candidates: &[usize]) -> Vec<Option<usize>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (d, det) in detections.iter().enumerate() {
        for &b in candidates {
            let iou = obb_iou(&det.obb, &boxes[b]);
            if iou > MATCH_IOU {
                pairs.push((iou, d, b));
            }
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut det_box = vec![None; detections.len()];
    let mut box_taken = vec![false; boxes.len()];
    for (_, d, b) in pairs {
        if det_box[d].is_none() && !box_taken[b] {
            det_box[d] = Some(b);
            box_taken[b] = true;
        }
    }
    det_box
}

fn finger_footprints(pred: &ObbPose, gripper: &GripperSpec) -> [ObbPose; 2] {
    let off = pred.height / 2.0 + gripper.finger_gap / 2.0;
    let mk = |sign: f64| {
        let c = pred.to_world([0.0, sign * off]);
        ObbPose {
            cx: c[0],
            cy: c[1],
            rot_deg: pred.rot_deg,
            width: gripper.finger_size.0,
            height: gripper.finger_gap,
        }
    };
    [mk(1.0), mk(-1.0)]
}

/// Pairs of boxes that block each other's parallel-gripper fingers at their
/// true poses, so that neither can be picked first whatever the pick order.
/// Each finger must still hit the neighbour after shrinking it by `margin`
/// on every side; a positive margin leaves out grazing contacts that a
/// slightly wrong prediction would clear. Empty for suction grippers.
pub fn mutual_clearance_violations(boxes: &[ObbPose], gripper: &GripperSpec, margin: f64) -> Vec<(usize, usize)> {
    if gripper.kind != GripperKind::Parallel {
        return Vec::new();
    }
    let blocks = |a: usize, b: usize| {
        let core = boxes[b].inflated(-margin);
        core.width > 0.0
            && core.height > 0.0
            && finger_footprints(&boxes[a], gripper)
                .iter()
                .any(|f| obb_intersect(f, &core))
    };
    let mut out = Vec::new();
    for a in 0..boxes.len() {
        for b in a + 1..boxes.len() {
            if blocks(a, b) && blocks(b, a) {
                out.push((a, b));
            }
        }
    }
    out
}

fn rotate(v: [f64; 2], deg: f64) -> [f64; 2] {
    let (s, c) = deg.to_radians().sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Noise seed handed to the detector at `cycle` of the episode seeded `seed`.
pub fn perception_seed(seed: u64, cycle: usize) -> u64 {
    derive_seed(seed, 1000 + cycle as u64)
}

/// Runs one episode. Identical inputs give identical episodes.
pub fn run_episode(
    scene: &Scene,
    perception: &mut dyn Perception,
    workspace: &WorkspaceConfig,
    thresholds: &RequirementThresholds,
    seed: u64,
) -> Episode {
    let n = scene.boxes.len();
    let mut events: Vec<BoxEvents> = scene
        .boxes
        .iter()
        .enumerate()
        .map(|(i, b)| BoxEvents::new(i, *b))
        .collect();
    let mut on_table = vec![true; n];
    let mut abandoned = vec![false; n];
    let mut cycles = Vec::new();
    let mut infrastructure_error = None;
    let mut sim_time = 0.0;
    let mut ctl_rng = rng_from_seed(derive_seed(seed, 1));

    for cycle in 0..2 * n {
        if (0..n).all(|b| !on_table[b] || abandoned[b]) {
            break;
        }
        let visible: Vec<usize> = (0..n).filter(|&b| on_table[b]).collect();
        let frame: Vec<ObbPose> = visible.iter().map(|&b| scene.boxes[b]).collect();
        let request = PerceptionRequest {
            scene_id: format!("{seed:016x}/{cycle}"),
            boxes: &frame,
            luminosity: scene.luminosity,
            seed: perception_seed(seed, cycle),
        };
        sim_time += DETECT_S;
        let detections = match perception.detect(&request) {
            Ok(d) => d,
            Err(e) => {
                let message = e.to_string();
                cycles.push(CycleEvent {
                    cycle,
                    detections: 0,
                    action: CycleAction::PerceptionError {
                        message: message.clone(),
                    },
                });
                infrastructure_error = Some(message);
                break;
            }
        };
        let matched = associate(&detections, &scene.boxes, &visible);
        for (det, m) in detections.iter().zip(&matched) {
            if let Some(b) = *m {
                let ev = &mut events[b];
                let truth = &scene.boxes[b];
                let c_dev = (det.obb.cx - truth.cx).hypot(det.obb.cy - truth.cy);
                let r_dev = rect_angle_diff(det.obb.rot_deg, truth.rot_deg).abs();
                if !ev.detected {
                    ev.detected = true;
                    ev.first_prediction = Some(det.obb);
                    ev.first_center_dev = Some(c_dev);
                    ev.first_rot_dev = Some(r_dev);
                }
                ev.max_center_dev = ev.max_center_dev.max(c_dev);
                ev.max_rot_dev = ev.max_rot_dev.max(r_dev);
            }
        }

        let selected = (0..detections.len())
            .filter(|&d| matched[d].is_none_or(|b| !abandoned[b]))
            .min_by(|&a, &b| {
                detections[b]
                    .confidence
                    .total_cmp(&detections[a].confidence)
                    .then(matched[a].unwrap_or(usize::MAX).cmp(&matched[b].unwrap_or(usize::MAX)))
                    .then(a.cmp(&b))
            });
        let Some(sel) = selected else {
            cycles.push(CycleEvent {
                cycle,
                detections: detections.len(),
                action: CycleAction::NothingSelectable,
            });
            break;
        };
        let det = detections[sel];
        let action = match matched[sel] {
            None => {
                sim_time += FAILED_PICK_S;
                CycleAction::EmptyPick {
                    confidence: det.confidence,
                }
            }
            Some(b) => {
                let truth = scene.boxes[b];
                events[b].attempts += 1;
                let center_err = (det.obb.cx - truth.cx).hypot(det.obb.cy - truth.cy);
                let mut failure = None;
                if center_err > workspace.gripper.suction_tol {
                    failure = Some(GraspFailure::CenterOffset { error_m: center_err });
                } else if workspace.gripper.kind == GripperKind::Parallel {
                    let fingers = finger_footprints(&det.obb, &workspace.gripper);
                    failure = visible
                        .iter()
                        .copied()
                        .filter(|&o| o != b)
                        .find(|&o| fingers.iter().any(|f| obb_intersect(f, &scene.boxes[o])))
                        .map(|o| GraspFailure::FingerCollision { with_box: o });
                }
                if let Some(reason) = failure {
                    sim_time += FAILED_PICK_S;
                    let give_up = events[b].attempts >= MAX_GRASP_ATTEMPTS;
                    abandoned[b] |= give_up;
                    CycleAction::GraspFailed {
                        box_id: b,
                        reason,
                        abandoned: give_up,
                    }
                } else {
                    events[b].grasped = true;
                    let mut shake = 0.0;
                    let mut stuck = false;
                    if let Some(zone) = &workspace.singularity {
                        if zone.region.contains(det.obb.center()) {
                            let u: f64 = ctl_rng.random();
                            let v: f64 = ctl_rng.random();
                            shake = zone.shake_deg * (2.0 * u - 1.0);
                            stuck = v < zone.p_stuck;
                        }
                    }
                    if stuck {
                        events[b].stuck += 1;
                        sim_time += RESTART_S;
                        let give_up = events[b].attempts >= MAX_GRASP_ATTEMPTS;
                        abandoned[b] |= give_up;
                        CycleAction::Stuck { box_id: b }
                    } else {
                        let base = rect_angle_diff(truth.rot_deg, det.obb.rot_deg);
                        let mut transport = 0.0;
                        if let Some(tc) = &workspace.transport_collision {
                            let swept = truth.inflated(tc.inflate_m);
                            let grazes = visible
                                .iter()
                                .any(|&o| o != b && obb_intersect(&swept, &scene.boxes[o]));
                            if grazes {
                                transport = tc.disturbance_deg.copysign(if base == 0.0 { 1.0 } else { base });
                            }
                        }
                        let rel = [truth.cx - det.obb.cx, truth.cy - det.obb.cy];
                        let offset = rotate(rel, workspace.pallet_orientation_deg - det.obb.rot_deg);
                        let placement = Placement {
                            offset,
                            rotation_deg: rect_angle_diff(base + shake + transport, 0.0),
                            shake_deg: shake,
                            transport_deg: transport,
                        };
                        events[b].placement = Some(placement);
                        on_table[b] = false;
                        sim_time += PICK_PLACE_S;
                        CycleAction::Placed {
                            box_id: b,
                            placement,
                        }
                    }
                }
            }
        };
        cycles.push(CycleEvent {
            cycle,
            detections: detections.len(),
            action,
        });
    }

    let (outcome, failure_kind, failure_modes) =
        classify(&events, infrastructure_error.is_some(), workspace, thresholds);
    Episode {
        scene: scene.clone(),
        seed,
        boxes: events,
        cycles,
        failure_modes,
        outcome,
        failure_kind,
        infrastructure_error,
        sim_time_s: sim_time,
    }
}

/// Labels an episode from its per-box events. Every bound is exceeded only
/// strictly ("more than").
pub fn classify(
    boxes: &[BoxEvents],
    infrastructure_error: bool,
    workspace: &WorkspaceConfig,
    thresholds: &RequirementThresholds,
) -> (Outcome, FailureKind, FailureSet) {
    let (w, h) = workspace.box_dims;
    let mut modes = FailureSet::new();
    for b in boxes {
        if !b.detected || b.max_center_dev > thresholds.near_fail_center_m {
            modes.insert(FailureMode::FM1);
        }
        if !b.detected || b.max_rot_dev > thresholds.near_fail_rot_deg {
            modes.insert(FailureMode::FM2);
        }
        match &b.placement {
            None => {
                modes.insert(FailureMode::FM3);
            }
            Some(p) => {
                if p.offset[0].abs() > thresholds.place_pos_tol_frac * w
                    || p.offset[1].abs() > thresholds.place_pos_tol_frac * h
                {
                    modes.insert(FailureMode::FM3);
                }
                if p.rotation_deg.abs() > thresholds.place_rot_tol_deg {
                    modes.insert(FailureMode::FM4);
                }
            }
        }
        if b.stuck > 0 {
            modes.insert(FailureMode::FM5);
        }
    }
    if infrastructure_error {
        modes.insert(FailureMode::FM5);
    }
    let task_failed = [FailureMode::FM3, FailureMode::FM4, FailureMode::FM5]
        .iter()
        .any(|m| modes.contains(m));
    let mispredicted = modes.contains(&FailureMode::FM1) || modes.contains(&FailureMode::FM2);
    let (outcome, kind) = match (task_failed, mispredicted) {
        (true, true) => (Outcome::Fail, FailureKind::Soft),
        (true, false) => (Outcome::Fail, FailureKind::Hard),
        (false, true) => (Outcome::NearFail, FailureKind::None),
        (false, false) => (Outcome::Pass, FailureKind::None),
    };
    (outcome, kind, modes)
}
