//! Test-scene genotype and phenotype.
//!
//! A [`Chromosome`] is the flat gene vector the search operates on:
//! `[x_1, y_1, r_1, ..., x_n, y_n, r_n, l]`. Decoding it against a
//! [`WorkspaceConfig`] yields a [`Scene`] of oriented boxes plus the scene
//! luminosity.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{obb_corners, obb_intersect, wrap_deg, ObbPose, Rect};
use crate::rng::{rng_from_seed, SimRng};
use crate::simulator::GripperSpec;

/// Rejection-sampling cap for [`sample_random`].
pub const MAX_SAMPLING_ATTEMPTS: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("chromosome has {got} genes, expected {expected} for {n_boxes} boxes")]
    LengthMismatch {
        got: usize,
        expected: usize,
        n_boxes: usize,
    },
    #[error("gene {index} is not finite")]
    NonFiniteGene { index: usize },
    #[error("could not sample a valid scene in {attempts} attempts")]
    SamplingInfeasible { attempts: usize },
    #[error("malformed chromosome line: {0}")]
    Parse(String),
    #[error("invalid parameter ranges: {0}")]
    InvalidRanges(String),
}

/// Per-gene bounds for sampling, mutation and validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterRanges {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub rot_min: f64,
    pub rot_max: f64,
    pub lum_min: f64,
    pub lum_max: f64,
}

impl ParameterRanges {
    /// Ranges explored by the test generators.
    pub fn search_default() -> Self {
        Self {
            x_min: 0.5,
            x_max: 0.9,
            y_min: 0.0,
            y_max: 0.92,
            rot_min: -30.0,
            rot_max: 30.0,
            lum_min: 1500.0,
            lum_max: 5000.0,
        }
    }

    /// Ranges used for the randomized training/validation data.
    pub fn dataset_default() -> Self {
        Self {
            rot_min: -25.0,
            rot_max: 25.0,
            ..Self::search_default()
        }
    }

    pub fn check(&self) -> Result<(), SceneError> {
        let pairs = [
            ("x", self.x_min, self.x_max),
            ("y", self.y_min, self.y_max),
            ("rot", self.rot_min, self.rot_max),
            ("lum", self.lum_min, self.lum_max),
        ];
        for (name, lo, hi) in pairs {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(SceneError::InvalidRanges(format!(
                    "{name}: [{lo}, {hi}] is not a proper interval"
                )));
            }
        }
        Ok(())
    }

    /// Bounds of gene `index` in a chromosome with `n_boxes` objects.
    pub fn gene_bounds(&self, index: usize, n_boxes: usize) -> (f64, f64) {
        if index == 3 * n_boxes {
            return (self.lum_min, self.lum_max);
        }
        match index % 3 {
            0 => (self.x_min, self.x_max),
            1 => (self.y_min, self.y_max),
            _ => (self.rot_min, self.rot_max),
        }
    }

    pub fn rotation_span(&self) -> f64 {
        self.rot_max - self.rot_min
    }
}

/// Scaling applied to genes before computing cosine distances.
///
/// Raw genes mix meters, degrees and luminosity units; the luminosity gene
/// alone would dominate the direction of every vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureScaling {
    /// Min-max scaling of each gene onto `[0, 1]`.
    UnitInterval,
    /// Min-max scaling onto `[-1, 1]` (range midpoint at the origin).
    #[default]
    Centered,
    Raw,
}

/// Flat gene vector `[x_1, y_1, r_1, ..., x_n, y_n, r_n, l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Chromosome(Vec<f64>);

impl Chromosome {
    pub fn new(genes: Vec<f64>) -> Result<Self, SceneError> {
        if genes.len() % 3 != 1 {
            return Err(SceneError::LengthMismatch {
                got: genes.len(),
                expected: 3 * (genes.len() / 3) + 1,
                n_boxes: genes.len() / 3,
            });
        }
        if let Some(index) = genes.iter().position(|g| !g.is_finite()) {
            return Err(SceneError::NonFiniteGene { index });
        }
        Ok(Self(genes))
    }

    pub fn genes(&self) -> &[f64] {
        &self.0
    }

    pub fn genes_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_boxes(&self) -> usize {
        self.0.len() / 3
    }

    pub fn luminosity(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// Clamps every gene into its range.
    pub fn clamp_to(&mut self, ranges: &ParameterRanges) {
        let n = self.n_boxes();
        for (i, g) in self.0.iter_mut().enumerate() {
            let (lo, hi) = ranges.gene_bounds(i, n);
            *g = g.clamp(lo, hi);
        }
    }

    /// Feature vector used by the cosine distance.
    pub fn features(&self, ranges: &ParameterRanges, scaling: FeatureScaling) -> Vec<f64> {
        let n = self.n_boxes();
        self.0
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let (lo, hi) = ranges.gene_bounds(i, n);
                match scaling {
                    FeatureScaling::UnitInterval => (g - lo) / (hi - lo),
                    FeatureScaling::Centered => 2.0 * (g - lo) / (hi - lo) - 1.0,
                    FeatureScaling::Raw => g,
                }
            })
            .collect()
    }
}

impl fmt::Display for Chromosome {
    /// Comma-separated shortest round-trip decimals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{g:?}")?;
        }
        Ok(())
    }
}

impl FromStr for Chromosome {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let genes = s
            .trim()
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| SceneError::Parse(format!("{t:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Chromosome::new(genes)
    }
}

/// Singularity zone of the arm: picks whose grasp point falls inside it
/// shake before placing and occasionally get stuck.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularityZone {
    pub region: Rect,
    pub shake_deg: f64,
    pub p_stuck: f64,
}

/// Grazing of neighbouring boxes while the grasped box is lifted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportCollision {
    pub inflate_m: f64,
    pub disturbance_deg: f64,
}

/// Static part of the cell: camera footprint, pallet target, gripper and the
/// handled box size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceConfig {
    pub camera_fov: Rect,
    pub target_place_position: [f64; 2],
    pub pallet_orientation_deg: f64,
    pub gripper: GripperSpec,
    pub singularity: Option<SingularityZone>,
    pub transport_collision: Option<TransportCollision>,
    pub n_boxes: usize,
    pub box_dims: (f64, f64),
}

impl WorkspaceConfig {
    pub fn chromosome_len(&self) -> usize {
        3 * self.n_boxes + 1
    }
}

/// Decoded world state of one test case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub boxes: Vec<ObbPose>,
    pub luminosity: f64,
}

impl Scene {
    pub fn encode(&self) -> Chromosome {
        let mut genes = Vec::with_capacity(3 * self.boxes.len() + 1);
        for b in &self.boxes {
            genes.extend([b.cx, b.cy, b.rot_deg]);
        }
        genes.push(self.luminosity);
        Chromosome(genes)
    }
}

pub fn decode(chromosome: &Chromosome, workspace: &WorkspaceConfig) -> Result<Scene, SceneError> {
    let expected = workspace.chromosome_len();
    if chromosome.len() != expected {
        return Err(SceneError::LengthMismatch {
            got: chromosome.len(),
            expected,
            n_boxes: workspace.n_boxes,
        });
    }
    let (w, h) = workspace.box_dims;
    let boxes = chromosome.genes()[..3 * workspace.n_boxes]
        .chunks_exact(3)
        .map(|g| ObbPose {
            cx: g[0],
            cy: g[1],
            rot_deg: wrap_deg(g[2]),
            width: w,
            height: h,
        })
        .collect();
    Ok(Scene {
        boxes,
        luminosity: chromosome.luminosity(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Overlap { a: usize, b: usize },
    OutsideFov { box_id: usize },
    OutOfRange { gene: usize, value: f64, min: f64, max: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub violations: Vec<Violation>,
}

impl ConstraintReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks placement constraints: pairwise box overlap, camera coverage and
/// gene ranges. Violations are reported, never raised.
pub fn validate(
    chromosome: &Chromosome,
    ranges: &ParameterRanges,
    workspace: &WorkspaceConfig,
) -> Result<ConstraintReport, SceneError> {
    let scene = decode(chromosome, workspace)?;
    Ok(validate_scene(&scene, Some(chromosome), ranges, workspace))
}

fn validate_scene(
    scene: &Scene,
    chromosome: Option<&Chromosome>,
    ranges: &ParameterRanges,
    workspace: &WorkspaceConfig,
) -> ConstraintReport {
    let mut violations = Vec::new();
    if let Some(c) = chromosome {
        let n = c.n_boxes();
        for (gene, &value) in c.genes().iter().enumerate() {
            let (min, max) = ranges.gene_bounds(gene, n);
            if value < min || value > max {
                violations.push(Violation::OutOfRange {
                    gene,
                    value,
                    min,
                    max,
                });
            }
        }
    }
    for (i, b) in scene.boxes.iter().enumerate() {
        if !workspace.camera_fov.contains_polygon(&obb_corners(b)) {
            violations.push(Violation::OutsideFov { box_id: i });
        }
    }
    for i in 0..scene.boxes.len() {
        for j in i + 1..scene.boxes.len() {
            if obb_intersect(&scene.boxes[i], &scene.boxes[j]) {
                violations.push(Violation::Overlap { a: i, b: j });
            }
        }
    }
    ConstraintReport { violations }
}

/// Uniform sample of every gene, rejected until all constraints hold.
pub fn sample_random(
    ranges: &ParameterRanges,
    workspace: &WorkspaceConfig,
    rng: &mut SimRng,
) -> Result<Chromosome, SceneError> {
    ranges.check()?;
    let len = workspace.chromosome_len();
    for _ in 0..MAX_SAMPLING_ATTEMPTS {
        let genes: Vec<f64> = (0..len)
            .map(|i| {
                let (lo, hi) = ranges.gene_bounds(i, workspace.n_boxes);
                rng.random_range(lo..hi)
            })
            .collect();
        let c = Chromosome(genes);
        if validate(&c, ranges, workspace)?.is_ok() {
            return Ok(c);
        }
    }
    Err(SceneError::SamplingInfeasible {
        attempts: MAX_SAMPLING_ATTEMPTS,
    })
}

pub fn sample_random_seeded(
    ranges: &ParameterRanges,
    workspace: &WorkspaceConfig,
    seed: u64,
) -> Result<Chromosome, SceneError> {
    sample_random(ranges, workspace, &mut rng_from_seed(seed))
}
