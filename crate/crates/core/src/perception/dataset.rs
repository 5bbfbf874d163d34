//! Randomized annotated scenes for training and offline validation.

use serde::{Deserialize, Serialize};

use super::{annotate, Annotation};
use crate::geometry::Rect;
use crate::rng::derive_seed;
use crate::scene::{decode, sample_random_seeded, ParameterRanges, Scene, SceneError, WorkspaceConfig};

/// Class index written to label files; every object is a cardboard box.
pub const BOX_CLASS: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub index: usize,
    pub seed: u64,
    pub scene: Scene,
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<DatasetSample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl Dataset {
    /// Leading 80% for training, the rest for validation.
    pub fn split(&self) -> Split {
        let n_train = self.samples.len() * 4 / 5;
        Split {
            train: (0..n_train).collect(),
            validation: (n_train..self.samples.len()).collect(),
        }
    }

    pub fn validation(&self) -> impl Iterator<Item = &DatasetSample> {
        let split = self.split();
        split
            .validation
            .into_iter()
            .map(move |i| &self.samples[i])
    }
}

/// Samples `count` independent valid scenes; sample `i` uses a seed derived
/// from `(seed, i)`, so samples can be produced in any order.
pub fn generate_dataset(
    ranges: &ParameterRanges,
    workspace: &WorkspaceConfig,
    count: usize,
    seed: u64,
) -> Result<Dataset, SceneError> {
    let samples = (0..count)
        .map(|index| {
            let sample_seed = derive_seed(seed, index as u64);
            let c = sample_random_seeded(ranges, workspace, sample_seed)?;
            let scene = decode(&c, workspace)?;
            Ok(DatasetSample {
                index,
                seed: sample_seed,
                annotations: annotate(&scene),
                scene,
            })
        })
        .collect::<Result<Vec<_>, SceneError>>()?;
    Ok(Dataset { samples })
}

/// Label file body: `class x1 y1 x2 y2 x3 y3 x4 y4` per object, corners
/// normalized to the camera footprint.
pub fn label_lines(annotations: &[Annotation], fov: &Rect) -> String {
    let mut out = String::new();
    for a in annotations {
        out.push_str(&BOX_CLASS.to_string());
        for p in &a.polygon {
            let q = fov.normalize(*p);
            out.push_str(&format!(" {:.6} {:.6}", q[0], q[1]));
        }
        out.push('\n');
    }
    out
}
