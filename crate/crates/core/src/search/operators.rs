//! Variation operators and duplicate removal.

use rand::seq::index::sample;
use rand::Rng;

use crate::analysis::cosine_distance;
use crate::geometry::{obb_intersect, ObbPose};
use crate::rng::SimRng;
use crate::scene::{sample_random, Chromosome, FeatureScaling, ParameterRanges, SceneError, WorkspaceConfig};

/// Attempts allowed when resampling one object in [`mutate_replace`].
pub const MAX_REPLACE_ATTEMPTS: usize = 100;
/// Attempts allowed when refilling a removed duplicate.
pub const MAX_REFILL_ATTEMPTS: usize = 1000;

/// One-point crossover with the cut drawn uniformly from `1..len`; the gene
/// tails after the cut are swapped.
pub fn crossover_one_point(a: &Chromosome, b: &Chromosome, rng: &mut SimRng) -> (Chromosome, Chromosome) {
    assert_eq!(a.len(), b.len(), "crossover needs equal-length parents");
    let cut = rng.random_range(1..a.len());
    crossover_at(a, b, cut)
}

pub fn crossover_at(a: &Chromosome, b: &Chromosome, cut: usize) -> (Chromosome, Chromosome) {
    let mut ca = a.clone();
    let mut cb = b.clone();
    ca.genes_mut()[cut..].copy_from_slice(&b.genes()[cut..]);
    cb.genes_mut()[cut..].copy_from_slice(&a.genes()[cut..]);
    (ca, cb)
}

/// Random modification: `k ~ U{1..len}` distinct genes each scaled by 1.1
/// or 0.9 (fair coin), then clamped to the ranges.
pub fn mutate_rm(c: &Chromosome, ranges: &ParameterRanges, rng: &mut SimRng) -> Chromosome {
    let k = rng.random_range(1..=c.len());
    let picks: Vec<(usize, bool)> = sample(rng, c.len(), k)
        .into_iter()
        .map(|i| (i, rng.random_bool(0.5)))
        .collect();
    mutate_rm_with(c, ranges, &picks)
}

/// Applies the ±10% rule to the given `(gene, increase)` picks.
pub fn mutate_rm_with(c: &Chromosome, ranges: &ParameterRanges, picks: &[(usize, bool)]) -> Chromosome {
    let mut out = c.clone();
    for &(i, up) in picks {
        out.genes_mut()[i] *= if up { 1.1 } else { 0.9 };
    }
    out.clamp_to(ranges);
    out
}

/// Replacement: one object's `(x, y, r)` resampled until it collides with no
/// other box. Returns the input unchanged when no such pose is found.
pub fn mutate_replace(
    c: &Chromosome,
    ranges: &ParameterRanges,
    workspace: &WorkspaceConfig,
    rng: &mut SimRng,
) -> Chromosome {
    let n = c.n_boxes();
    let target = rng.random_range(0..n);
    let (w, h) = workspace.box_dims;
    let pose = |g: &[f64], i: usize| ObbPose::new(g[3 * i], g[3 * i + 1], g[3 * i + 2], w, h);
    for _ in 0..MAX_REPLACE_ATTEMPTS {
        let x = rng.random_range(ranges.x_min..ranges.x_max);
        let y = rng.random_range(ranges.y_min..ranges.y_max);
        let r = rng.random_range(ranges.rot_min..ranges.rot_max);
        let candidate = ObbPose::new(x, y, r, w, h);
        let clear = (0..n)
            .filter(|&i| i != target)
            .all(|i| !obb_intersect(&candidate, &pose(c.genes(), i)));
        if clear {
            let mut out = c.clone();
            out.genes_mut()[3 * target..3 * target + 3].copy_from_slice(&[x, y, r]);
            return out;
        }
    }
    c.clone()
}

/// Cosine distance between scaled feature vectors. A zero vector is at
/// distance 0 from another zero vector and 1 from anything else.
pub fn feature_distance(a: &[f64], b: &[f64]) -> f64 {
    cosine_distance(a, b).unwrap_or_else(|_| {
        let zero = |v: &[f64]| v.iter().all(|&x| x == 0.0);
        if zero(a) && zero(b) {
            0.0
        } else {
            1.0
        }
    })
}

#[derive(Debug, Clone, Copy)]
pub struct DedupParams<'a> {
    pub ranges: &'a ParameterRanges,
    pub scaling: FeatureScaling,
    pub threshold: f64,
}

impl DedupParams<'_> {
    fn features(&self, c: &Chromosome) -> Vec<f64> {
        c.features(self.ranges, self.scaling)
    }

    fn is_duplicate(&self, f: &[f64], retained: &[Vec<f64>]) -> bool {
        retained.iter().any(|r| feature_distance(f, r) < self.threshold)
    }
}

/// Greedy scan in population order: indices of the individuals kept, given
/// already-retained `reference` individuals. No replacements are drawn.
pub fn dedup_filter(population: &[Chromosome], reference: &[Chromosome], p: &DedupParams<'_>) -> Vec<usize> {
    let mut retained: Vec<Vec<f64>> = reference.iter().map(|c| p.features(c)).collect();
    let mut keep = Vec::new();
    for (i, c) in population.iter().enumerate() {
        let f = p.features(c);
        if !p.is_duplicate(&f, &retained) {
            retained.push(f);
            keep.push(i);
        }
    }
    keep
}

/// Greedy duplicate removal that refills each removed slot with a fresh
/// random sample, preserving the population size.
pub fn dedup(
    population: Vec<Chromosome>,
    reference: &[Chromosome],
    p: &DedupParams<'_>,
    workspace: &WorkspaceConfig,
    rng: &mut SimRng,
) -> Result<Vec<Chromosome>, SceneError> {
    let mut retained: Vec<Vec<f64>> = reference.iter().map(|c| p.features(c)).collect();
    let mut out = Vec::with_capacity(population.len());
    for c in population {
        let f = p.features(&c);
        if !p.is_duplicate(&f, &retained) {
            retained.push(f);
            out.push(c);
            continue;
        }
        let mut fresh = sample_random(p.ranges, workspace, rng)?;
        for _ in 1..MAX_REFILL_ATTEMPTS {
            if !p.is_duplicate(&p.features(&fresh), &retained) {
                break;
            }
            fresh = sample_random(p.ranges, workspace, rng)?;
        }
        retained.push(p.features(&fresh));
        out.push(fresh);
    }
    Ok(out)
}
