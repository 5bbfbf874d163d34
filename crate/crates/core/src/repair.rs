//! Failure-driven repair of the synthetic detector.
//!
//! Failed and near-failed test records are turned into a repair dataset of
//! first-frame prediction errors. A least-squares fit of the degradation
//! gains on that dataset tells how much of the observed error each gain
//! explains. The gains are then shrunk by a fraction of that amount. The
//! repaired model is kept only if it lowers the prediction error on a held-out
//! split, and the failing scenes are then replayed with it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::rect_angle_diff;
use crate::perception::{
    annotate, predict_indexed, Annotation, DatasetSample, SyntheticPerception, SyntheticPerceptionParams,
    CENTER_UNIT_M, ROTATION_UNIT_DEG,
};
use crate::rng::derive_seed;
use crate::scene::{decode, Scene, SceneError, WorkspaceConfig};
use crate::search::{sha256_hex, Archive, TestRecord};
use crate::simulator::{perception_seed, run_episode, Episode, FailureKind, FailureMode, Outcome, RequirementThresholds};

/// Error charged, in composite units, for a box the detector missed.
pub const MISS_ERROR_UNITS: f64 = 10.0;
/// Every n-th failed record goes to the validation split.
pub const VALIDATION_EVERY: usize = 5;

const STREAM_RERUN: u64 = 0x5245_5255_4E00;

#[derive(Debug, Error, PartialEq)]
pub enum RepairError {
    #[error("no failed or near-failed records: nothing to repair")]
    NothingToRepair,
    #[error(
        "refit rejected: validation error {candidate:.4} is not below the operating model's {baseline:.4}"
    )]
    RefitRejected { baseline: f64, candidate: f64 },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleRole {
    Train,
    Validation,
}

/// One scene from the archive with the detector inputs needed to refit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairSample {
    pub record_id: String,
    pub outcome: Outcome,
    pub role: SampleRole,
    pub scene: Scene,
    pub annotations: Vec<Annotation>,
    /// Detector seed of the first controller cycle.
    pub perception_seed: u64,
    /// Observed first-frame error per box; `None` when the box was never seen.
    pub errors: Vec<Option<BoxError>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxError {
    pub center_m: f64,
    pub rot_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairDataset {
    pub samples: Vec<RepairSample>,
    /// Original validation scenes merged into the validation split.
    pub original_validation: Vec<DatasetSample>,
}

impl RepairDataset {
    pub fn train(&self) -> impl Iterator<Item = &RepairSample> {
        self.samples.iter().filter(|s| s.role == SampleRole::Train)
    }

    pub fn validation(&self) -> impl Iterator<Item = &RepairSample> {
        self.samples.iter().filter(|s| s.role == SampleRole::Validation)
    }

    pub fn record_ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.record_id.clone()).collect()
    }
}

fn first_frame_errors(episode: &Episode) -> Vec<Option<BoxError>> {
    episode
        .boxes
        .iter()
        .map(|b| {
            Some(BoxError {
                center_m: b.first_center_dev?,
                rot_deg: b.first_rot_dev?,
            })
        })
        .collect()
}

/// Collects every failed and near-failed record, ordered by id. Every fifth
/// failed record is held out for validation; near-fails only train.
pub fn assemble(
    archive: &Archive,
    workspace: &WorkspaceConfig,
    original_validation: Vec<DatasetSample>,
) -> Result<RepairDataset, RepairError> {
    let mut picked: Vec<&TestRecord> = archive
        .records
        .iter()
        .filter(|r| matches!(r.outcome(), Outcome::Fail | Outcome::NearFail))
        .collect();
    if picked.is_empty() {
        return Err(RepairError::NothingToRepair);
    }
    picked.sort_by(|a, b| a.id.cmp(&b.id));
    let mut n_failed = 0;
    let mut samples = Vec::with_capacity(picked.len());
    for r in picked {
        let role = if r.outcome() == Outcome::Fail {
            n_failed += 1;
            if n_failed % VALIDATION_EVERY == 0 {
                SampleRole::Validation
            } else {
                SampleRole::Train
            }
        } else {
            SampleRole::Train
        };
        let scene = decode(&r.chromosome, workspace)?;
        samples.push(RepairSample {
            record_id: r.id.clone(),
            outcome: r.outcome(),
            role,
            annotations: annotate(&scene),
            perception_seed: perception_seed(r.seed(), 0),
            errors: first_frame_errors(&r.episode),
            scene,
        });
    }
    Ok(RepairDataset {
        samples,
        original_validation,
    })
}

/// Gains explained by the repair data, before shrinkage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FittedGains {
    pub rot_err_slope: f64,
    pub lum_err_gain: f64,
    pub prox_err_gain: f64,
    pub n_boxes: usize,
}

/// Mean prediction errors of two models on the same validation scenes and
/// seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationComparison {
    pub n_boxes: usize,
    pub rot_deg_before: f64,
    pub rot_deg_after: f64,
    pub center_m_before: f64,
    pub center_m_after: f64,
    /// Composite error in noise units (`rot / 5 deg + center / 1 cm`).
    pub composite_before: f64,
    pub composite_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefitOutcome {
    pub params: SyntheticPerceptionParams,
    pub fitted: FittedGains,
    pub validation: ValidationComparison,
}

// Mean absolute deviation of a zero-mean normal is sd * sqrt(2 / pi); the
// mean norm of an isotropic 2-d normal is sd * sqrt(pi / 2).
const ABS_NORMAL_MEAN: f64 = 0.797_884_560_802_865_4;
const RAYLEIGH_MEAN: f64 = 1.253_314_137_315_500_3;

/// Least-squares fit of the degradation gains to the observed first-frame
/// errors of the training split, followed by shrinkage of each gain by
/// `learning_rate` times the fitted amount (capped at the current gain).
pub fn refit(
    m_o: &SyntheticPerceptionParams,
    dataset: &RepairDataset,
    learning_rate: f64,
) -> Result<RefitOutcome, RepairError> {
    if dataset.samples.is_empty() {
        return Err(RepairError::NothingToRepair);
    }
    let fitted = fit_gains(m_o, dataset.train());
    let shrink = |current: f64, fitted: f64| current - learning_rate * fitted.min(current);
    let params = SyntheticPerceptionParams {
        rot_err_slope: shrink(m_o.rot_err_slope, fitted.rot_err_slope),
        lum_err_gain: shrink(m_o.lum_err_gain, fitted.lum_err_gain),
        prox_err_gain: shrink(m_o.prox_err_gain, fitted.prox_err_gain),
        ..m_o.clone()
    };
    let validation = compare_on_validation(m_o, &params, dataset);
    if params != *m_o && !(validation.composite_after < validation.composite_before) {
        return Err(RepairError::RefitRejected {
            baseline: validation.composite_before,
            candidate: validation.composite_after,
        });
    }
    Ok(RefitOutcome {
        params,
        fitted,
        validation,
    })
}

fn fit_gains<'a>(m: &SyntheticPerceptionParams, train: impl Iterator<Item = &'a RepairSample>) -> FittedGains {
    // Rotation: y = |e| / (c m) - base = slope * |r|, a line through the origin.
    let (mut sxy_r, mut sxx_r) = (0.0, 0.0);
    // Center: y = ||e|| / (c m) - base = a * lum_def + b * gap_def.
    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut n_boxes = 0;
    for s in train {
        for (i, e) in s.errors.iter().enumerate() {
            let Some(e) = e else { continue };
            let d = m.degradation(&s.scene.boxes, i, s.scene.luminosity);
            if d.multiplier <= 0.0 {
                continue;
            }
            n_boxes += 1;
            let y_r = (e.rot_deg / ABS_NORMAL_MEAN - m.base_rot_noise_sd) / d.multiplier;
            sxy_r += d.abs_rot * y_r;
            sxx_r += d.abs_rot * d.abs_rot;
            let y_c = (e.center_m / RAYLEIGH_MEAN - m.base_center_noise_sd) / d.multiplier;
            let (x1, x2) = (d.lum_deficit, d.gap_deficit);
            s11 += x1 * x1;
            s12 += x1 * x2;
            s22 += x2 * x2;
            s1y += x1 * y_c;
            s2y += x2 * y_c;
        }
    }
    let rot_err_slope = if sxx_r > 0.0 { (sxy_r / sxx_r).max(0.0) } else { 0.0 };
    let det = s11 * s22 - s12 * s12;
    let (lum, prox) = if det > 1e-12 * (s11 * s22).max(f64::MIN_POSITIVE) {
        ((s22 * s1y - s12 * s2y) / det, (s11 * s2y - s12 * s1y) / det)
    } else {
        // Collinear or absent regressors: fit each on its own.
        (
            if s11 > 0.0 { s1y / s11 } else { 0.0 },
            if s22 > 0.0 { s2y / s22 } else { 0.0 },
        )
    };
    FittedGains {
        rot_err_slope,
        lum_err_gain: lum.max(0.0),
        prox_err_gain: prox.max(0.0),
        n_boxes,
    }
}

#[derive(Default)]
struct ErrorSums {
    n: usize,
    rot: f64,
    center: f64,
    composite: f64,
}

impl ErrorSums {
    fn add_scene(&mut self, params: &SyntheticPerceptionParams, scene: &Scene, seed: u64) {
        let preds = predict_indexed(params, &scene.boxes, scene.luminosity, seed);
        for (truth, p) in scene.boxes.iter().zip(preds) {
            self.n += 1;
            match p {
                Some(d) => {
                    let rot = rect_angle_diff(d.obb.rot_deg, truth.rot_deg).abs();
                    let center = (d.obb.cx - truth.cx).hypot(d.obb.cy - truth.cy);
                    self.rot += rot;
                    self.center += center;
                    self.composite += rot / ROTATION_UNIT_DEG + center / CENTER_UNIT_M;
                }
                None => self.composite += MISS_ERROR_UNITS,
            }
        }
    }

    fn mean(&self, v: f64) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            v / self.n as f64
        }
    }
}

/// Mean errors of `before` and `after` on the validation split, with the
/// same noise seeds for both.
pub fn compare_on_validation(
    before: &SyntheticPerceptionParams,
    after: &SyntheticPerceptionParams,
    dataset: &RepairDataset,
) -> ValidationComparison {
    let (mut b, mut a) = (ErrorSums::default(), ErrorSums::default());
    let scenes = dataset
        .validation()
        .map(|s| (&s.scene, s.perception_seed))
        .chain(dataset.original_validation.iter().map(|s| (&s.scene, s.seed)));
    for (scene, seed) in scenes {
        b.add_scene(before, scene, seed);
        a.add_scene(after, scene, seed);
    }
    ValidationComparison {
        n_boxes: b.n,
        rot_deg_before: b.mean(b.rot),
        rot_deg_after: a.mean(a.rot),
        center_m_before: b.mean(b.center),
        center_m_after: a.mean(a.center),
        composite_before: b.mean(b.composite),
        composite_after: a.mean(a.composite),
    }
}

/// Versioned detector parameters with their lineage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub name: String,
    pub version: u32,
    pub params_hash: String,
    pub parent_hash: Option<String>,
    /// Records whose data produced this version.
    pub trained_on: Vec<String>,
    pub fitted: Option<FittedGains>,
    pub validation: Option<ValidationComparison>,
    pub params: SyntheticPerceptionParams,
}

pub fn params_hash(params: &SyntheticPerceptionParams) -> String {
    sha256_hex(serde_json::to_string(params).expect("params serialize").as_bytes())
}

impl ModelDocument {
    pub fn operating(params: SyntheticPerceptionParams) -> Self {
        Self {
            name: "operating".into(),
            version: 1,
            params_hash: params_hash(&params),
            parent_hash: None,
            trained_on: Vec::new(),
            fitted: None,
            validation: None,
            params,
        }
    }

    pub fn repaired(parent: &ModelDocument, outcome: &RefitOutcome, trained_on: Vec<String>) -> Self {
        Self {
            name: "repaired".into(),
            version: parent.version + 1,
            params_hash: params_hash(&outcome.params),
            parent_hash: Some(parent.params_hash.clone()),
            trained_on,
            fitted: Some(outcome.fitted),
            validation: Some(outcome.validation),
            params: outcome.params.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub reruns: usize,
    /// A still-failing case is non-repaired if at least this many re-runs fail.
    pub fail_quorum: usize,
    pub base_seed: u64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            reruns: 5,
            fail_quorum: 3,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayCase {
    pub record_id: String,
    pub original_kind: FailureKind,
    pub original_modes: Vec<FailureMode>,
    pub replay_outcome: Outcome,
    pub replay_modes: Vec<FailureMode>,
    /// Failures among the re-runs; `None` when the first replay passed.
    pub rerun_failures: Option<usize>,
    pub repaired: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub replayed: usize,
    pub repaired: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub n_replayed: usize,
    pub n_repaired: usize,
    pub n_non_repaired: usize,
    pub reruns_per_non_repaired: usize,
    pub soft: KindCounts,
    pub hard: KindCounts,
    /// Failure modes still present in non-repaired cases.
    pub residual_modes: BTreeMap<FailureMode, usize>,
    pub cases: Vec<ReplayCase>,
}

impl RepairReport {
    pub fn repaired(&self) -> impl Iterator<Item = &ReplayCase> {
        self.cases.iter().filter(|c| c.repaired)
    }

    pub fn non_repaired(&self) -> impl Iterator<Item = &ReplayCase> {
        self.cases.iter().filter(|c| !c.repaired)
    }
}

/// Re-executes one archived scene with `params`, under `seed`.
pub fn reexecute(
    record: &TestRecord,
    params: &SyntheticPerceptionParams,
    workspace: &WorkspaceConfig,
    thresholds: &RequirementThresholds,
    seed: u64,
) -> Result<Episode, SceneError> {
    let scene = decode(&record.chromosome, workspace)?;
    let mut p = SyntheticPerception::new(params.clone());
    Ok(run_episode(&scene, &mut p, workspace, thresholds, seed))
}

/// Replays each failed record with the repaired model under its original
/// seed. Cases that still fail are re-run with derived seeds and count as
/// non-repaired only if a quorum of the re-runs fails too.
pub fn replay<'a>(
    failed: impl IntoIterator<Item = &'a TestRecord>,
    params: &SyntheticPerceptionParams,
    workspace: &WorkspaceConfig,
    thresholds: &RequirementThresholds,
    cfg: &ReplayConfig,
) -> Result<RepairReport, SceneError> {
    let mut cases = Vec::new();
    for r in failed {
        let first = reexecute(r, params, workspace, thresholds, r.seed())?;
        let (repaired, rerun_failures) = if first.outcome == Outcome::Fail {
            let mut fails = 0;
            for k in 0..cfg.reruns {
                let seed = derive_seed(r.seed() ^ cfg.base_seed, STREAM_RERUN + k as u64);
                if reexecute(r, params, workspace, thresholds, seed)?.outcome == Outcome::Fail {
                    fails += 1;
                }
            }
            (fails < cfg.fail_quorum, Some(fails))
        } else {
            (true, None)
        };
        cases.push(ReplayCase {
            record_id: r.id.clone(),
            original_kind: r.failure_kind(),
            original_modes: r.failure_modes().iter().copied().collect(),
            replay_outcome: first.outcome,
            replay_modes: first.failure_modes.iter().copied().collect(),
            rerun_failures,
            repaired,
        });
    }
    let mut report = RepairReport {
        n_replayed: cases.len(),
        n_repaired: cases.iter().filter(|c| c.repaired).count(),
        n_non_repaired: cases.iter().filter(|c| !c.repaired).count(),
        reruns_per_non_repaired: cfg.reruns,
        soft: KindCounts::default(),
        hard: KindCounts::default(),
        residual_modes: BTreeMap::new(),
        cases: Vec::new(),
    };
    for c in &cases {
        let k = match c.original_kind {
            FailureKind::Soft => &mut report.soft,
            _ => &mut report.hard,
        };
        k.replayed += 1;
        k.repaired += c.repaired as usize;
        if !c.repaired {
            for m in &c.replay_modes {
                *report.residual_modes.entry(*m).or_default() += 1;
            }
        }
    }
    report.cases = cases;
    Ok(report)
}
