//! Built-in use-case profiles and the TOML run configuration.
//!
//! A bare config file containing only `profile = "uc1-suction"` reproduces
//! the default experimental setup; every other section overrides a part of
//! it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Rect;
use crate::perception::{FeaturePredicate, SyntheticPerceptionParams, WeakRegion};
use crate::scene::{ParameterRanges, SceneError, SingularityZone, TransportCollision, WorkspaceConfig};
use crate::search::{SearchConfig, SearchError};
use crate::simulator::{GripperKind, GripperSpec, RequirementThresholds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// 0.17 x 0.14 m boxes, suction cup.
    #[default]
    Uc1Suction,
    /// 0.12 x 0.08 m boxes, two-finger parallel gripper.
    Uc2Parallel,
}

impl Profile {
    pub const ALL: [Profile; 2] = [Profile::Uc1Suction, Profile::Uc2Parallel];

    pub fn name(self) -> &'static str {
        match self {
            Profile::Uc1Suction => "uc1-suction",
            Profile::Uc2Parallel => "uc2-parallel",
        }
    }

    pub fn workspace(self) -> WorkspaceConfig {
        // The camera sees slightly beyond the sampling ranges so that a box
        // centered anywhere in range fits in the frame.
        let camera_fov = Rect {
            x_min: 0.38,
            x_max: 1.02,
            y_min: -0.11,
            y_max: 1.03,
        };
        let singularity = Some(SingularityZone {
            region: Rect {
                x_min: 0.82,
                x_max: 0.90,
                y_min: 0.80,
                y_max: 0.92,
            },
            shake_deg: 8.0,
            p_stuck: 0.1,
        });
        match self {
            Profile::Uc1Suction => WorkspaceConfig {
                camera_fov,
                target_place_position: [0.0, -0.6],
                pallet_orientation_deg: 0.0,
                gripper: GripperSpec {
                    kind: GripperKind::Suction,
                    suction_tol: 0.035,
                    finger_size: (0.04, 0.015),
                    finger_gap: 0.02,
                },
                singularity,
                transport_collision: None,
                n_boxes: 3,
                box_dims: (0.17, 0.14),
            },
            Profile::Uc2Parallel => WorkspaceConfig {
                camera_fov,
                target_place_position: [0.0, -0.6],
                pallet_orientation_deg: 0.0,
                gripper: GripperSpec {
                    kind: GripperKind::Parallel,
                    suction_tol: 0.02,
                    finger_size: (0.04, 0.015),
                    finger_gap: 0.02,
                },
                singularity,
                transport_collision: Some(TransportCollision {
                    inflate_m: 0.01,
                    disturbance_deg: 3.0,
                }),
                n_boxes: 3,
                box_dims: (0.12, 0.08),
            },
        }
    }

    /// Default operating perception model: accurate on typical scenes,
    /// unreliable for steep rotations, dim light and crowded layouts.
    pub fn operating_model(self) -> SyntheticPerceptionParams {
        SyntheticPerceptionParams {
            rot_err_slope: 0.03,
            lum_err_gain: 2e-6,
            prox_err_gain: 0.03,
            base_center_noise_sd: 0.0008,
            base_rot_noise_sd: 0.2,
            miss_rate: 0.5,
            miss_cutoff: 4.0,
            lum_nominal: 2500.0,
            gap_nominal: 0.06,
            weak_regions: vec![
                WeakRegion {
                    when: FeaturePredicate::AbsRotationAbove { deg: 22.0 },
                    multiplier: 3.0,
                },
                WeakRegion {
                    when: FeaturePredicate::AbsRotationAbove { deg: 27.0 },
                    multiplier: 4.0,
                },
            ],
        }
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Profile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown profile {s:?} (expected uc1-suction or uc2-parallel)"))
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Ranges(#[from] SceneError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("invalid perception parameters: {0}")]
    Perception(String),
    #[error("invalid workspace: {0}")]
    Workspace(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    /// Fraction of the fitted gain reduction applied.
    pub learning_rate: f64,
    /// Re-runs of a case that still fails after repair.
    pub reruns: usize,
    /// A still-failing case is non-repaired when at least this many re-runs fail.
    pub rerun_fail_quorum: usize,
    /// Size and seed of the original validation set merged into the repair
    /// validation split.
    pub validation_scenes: usize,
    pub dataset_seed: u64,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.8,
            reruns: 5,
            rerun_fail_quorum: 3,
            validation_scenes: 240,
            dataset_seed: 7,
        }
    }
}

/// Full run configuration. Missing sections fall back to the profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub profile: Profile,
    pub ranges: ParameterRanges,
    pub dataset_ranges: ParameterRanges,
    pub workspace: WorkspaceConfig,
    pub perception: SyntheticPerceptionParams,
    pub thresholds: RequirementThresholds,
    pub search: SearchConfig,
    pub repair: RepairConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    profile: Profile,
    ranges: Option<ParameterRanges>,
    dataset_ranges: Option<ParameterRanges>,
    workspace: Option<WorkspaceConfig>,
    perception: Option<SyntheticPerceptionParams>,
    thresholds: Option<RequirementThresholds>,
    search: Option<SearchConfig>,
    repair: Option<RepairConfig>,
}

impl Config {
    pub fn for_profile(profile: Profile) -> Self {
        Self {
            profile,
            ranges: ParameterRanges::search_default(),
            dataset_ranges: ParameterRanges::dataset_default(),
            workspace: profile.workspace(),
            perception: profile.operating_model(),
            thresholds: RequirementThresholds::default(),
            search: SearchConfig::default(),
            repair: RepairConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let base = Self::for_profile(raw.profile);
        let c = Self {
            profile: raw.profile,
            ranges: raw.ranges.unwrap_or(base.ranges),
            dataset_ranges: raw.dataset_ranges.unwrap_or(base.dataset_ranges),
            workspace: raw.workspace.unwrap_or(base.workspace),
            perception: raw.perception.unwrap_or(base.perception),
            thresholds: raw.thresholds.unwrap_or(base.thresholds),
            search: raw.search.unwrap_or(base.search),
            repair: raw.repair.unwrap_or(base.repair),
        };
        c.check()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        self.ranges.check()?;
        self.dataset_ranges.check()?;
        self.perception.check().map_err(ConfigError::Perception)?;
        let ws = &self.workspace;
        if ws.n_boxes == 0 {
            return Err(ConfigError::Workspace("n_boxes must be at least 1".into()));
        }
        if !(ws.box_dims.0 > 0.0 && ws.box_dims.1 > 0.0) {
            return Err(ConfigError::Workspace("box dimensions must be positive".into()));
        }
        if self.repair.rerun_fail_quorum > self.repair.reruns {
            return Err(ConfigError::Workspace("rerun_fail_quorum exceeds reruns".into()));
        }
        let mut s = self.search.clone();
        // The budget rule only applies to the GA; check it for both so a
        // config never silently breaks when the strategy flag changes.
        s.strategy = crate::search::Strategy::Ga;
        s.check()?;
        Ok(())
    }
}
