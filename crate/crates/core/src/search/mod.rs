//! Test generation: a genetic algorithm and a random-search baseline.
//!
//! Both strategies share the same evaluation path. A chromosome is decoded,
//! one episode is run against the perception model, and the result is
//! appended to an [`Archive`] together with its fitness. The budget counts
//! evaluated episodes only.

mod archive;
pub mod operators;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use rand::Rng;

pub use archive::{Archive, ArchiveError, Provenance, TestRecord};
pub use operators::{
    crossover_at, crossover_one_point, dedup, dedup_filter, feature_distance, mutate_replace, mutate_rm,
    mutate_rm_with, DedupParams,
};

use crate::perception::Perception;
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::scene::{decode, sample_random, validate, Chromosome, FeatureScaling, ParameterRanges, SceneError, WorkspaceConfig};
use crate::simulator::{run_episode, Episode, RequirementThresholds};

/// Fitness assigned to offspring that break a placement constraint.
pub const PENALTY_FITNESS: f64 = -1.0;
/// Resampling cap for random search before giving up on finding a
/// non-duplicate.
pub const MAX_RS_DEDUP_ATTEMPTS: usize = 10_000;
/// Consecutive generations without a single evaluation before the GA gives up.
pub const MAX_STALLED_GENERATIONS: usize = 1000;

const STREAM_STRATEGY: u64 = 2;
const STREAM_EPISODE: u64 = 0x5EED_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Ga,
    Rs,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Ga => "ga",
            Strategy::Rs => "rs",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ga" => Ok(Strategy::Ga),
            "rs" => Ok(Strategy::Rs),
            other => Err(format!("unknown strategy {other:?} (expected ga or rs)")),
        }
    }
}

/// What GA offspring are compared against when removing duplicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DedupScope {
    /// Only earlier offspring of the same generation.
    #[default]
    Offspring,
    /// The parent generation as well.
    Generation,
    /// Every chromosome evaluated so far in the run.
    Archive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub population_size: usize,
    pub eval_budget: usize,
    pub p_cross: f64,
    pub p_mut: f64,
    pub dup_threshold: f64,
    pub scaling: FeatureScaling,
    pub dedup_scope: DedupScope,
    pub w1: f64,
    pub w2: f64,
    pub k_p: f64,
    pub k_r: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Ga,
            population_size: 40,
            eval_budget: 220,
            p_cross: 0.9,
            p_mut: 0.4,
            dup_threshold: 0.1,
            scaling: FeatureScaling::default(),
            dedup_scope: DedupScope::default(),
            w1: 0.5,
            w2: 0.5,
            k_p: 0.01,
            k_r: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("no non-duplicate sample found in {attempts} attempts")]
    DedupExhausted { attempts: usize },
    #[error("no valid offspring in {generations} consecutive generations")]
    Stalled { generations: usize },
}

impl SearchConfig {
    pub fn check(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::InvalidConfig(m));
        for (name, p) in [("p_cross", self.p_cross), ("p_mut", self.p_mut)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.eval_budget == 0 {
            return bad("eval_budget must be at least 1".into());
        }
        if self.strategy == Strategy::Ga {
            if self.population_size < 2 {
                return bad("population_size must be at least 2".into());
            }
            if self.eval_budget < self.population_size {
                return bad(format!(
                    "eval_budget {} is below population_size {}",
                    self.eval_budget, self.population_size
                ));
            }
        }
        if !(self.dup_threshold >= 0.0 && self.dup_threshold <= 2.0) {
            return bad(format!("dup_threshold {} outside [0, 2]", self.dup_threshold));
        }
        if !(self.k_p > 0.0 && self.k_r > 0.0 && self.w1 >= 0.0 && self.w2 >= 0.0) {
            return bad("fitness weights must be non-negative and normalizers positive".into());
        }
        Ok(())
    }

    pub fn fitness_params(&self, ranges: &ParameterRanges, workspace: &WorkspaceConfig) -> FitnessParams {
        FitnessParams {
            w1: self.w1,
            w2: self.w2,
            k_p: self.k_p,
            k_r: self.k_r,
            position_cap: workspace.camera_fov.diagonal(),
            rotation_cap: ranges.rotation_span(),
        }
    }

    /// Seed for run `run_id` under master seed `self.seed`.
    pub fn run_seed(&self, run_id: u32) -> u64 {
        derive_seed(self.seed, 0x0052_554E_0000 + run_id as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessParams {
    pub w1: f64,
    pub w2: f64,
    pub k_p: f64,
    pub k_r: f64,
    /// Position deviation charged for a box that was never detected.
    pub position_cap: f64,
    pub rotation_cap: f64,
}

/// Weighted, normalized worst-case prediction error over the boxes of one
/// episode. Undetected boxes count at the caps.
pub fn fitness(episode: &Episode, p: &FitnessParams) -> f64 {
    let mut max_pos: f64 = 0.0;
    let mut max_rot: f64 = 0.0;
    for b in &episode.boxes {
        if b.detected {
            max_pos = max_pos.max(b.max_center_dev);
            max_rot = max_rot.max(b.max_rot_dev);
        } else {
            max_pos = max_pos.max(p.position_cap);
            max_rot = max_rot.max(p.rotation_cap);
        }
    }
    p.w1 / p.k_p * max_pos + p.w2 / p.k_r * max_rot
}

/// Everything a strategy needs besides its own config.
#[derive(Debug, Clone, Copy)]
pub struct SearchSetup<'a> {
    pub ranges: &'a ParameterRanges,
    pub workspace: &'a WorkspaceConfig,
    pub thresholds: &'a RequirementThresholds,
}

/// Picks a parent index from the current generation's fitness values.
pub trait ParentSelector {
    fn select(&self, fitness: &[f64], rng: &mut SimRng) -> usize;
}

/// Two uniform draws with replacement; the fitter one wins, the first on ties.
#[derive(Debug, Clone, Copy, Default)]
pub struct BinaryTournament;

impl ParentSelector for BinaryTournament {
    fn select(&self, fitness: &[f64], rng: &mut SimRng) -> usize {
        let i = rng.random_range(0..fitness.len());
        let j = rng.random_range(0..fitness.len());
        if fitness[j] > fitness[i] {
            j
        } else {
            i
        }
    }
}

struct Evaluator<'a, 'p> {
    config: &'a SearchConfig,
    setup: SearchSetup<'a>,
    perception: &'p mut dyn Perception,
    fitness: FitnessParams,
    run_id: u32,
    run_seed: u64,
    records: Vec<TestRecord>,
}

impl<'a, 'p> Evaluator<'a, 'p> {
    fn new(config: &'a SearchConfig, setup: SearchSetup<'a>, perception: &'p mut dyn Perception, run_id: u32) -> Self {
        Self {
            fitness: config.fitness_params(setup.ranges, setup.workspace),
            run_seed: config.run_seed(run_id),
            config,
            setup,
            perception,
            run_id,
            records: Vec::with_capacity(config.eval_budget),
        }
    }

    fn exhausted(&self) -> bool {
        self.records.len() >= self.config.eval_budget
    }

    fn evaluate(&mut self, chromosome: Chromosome, generation: usize) -> Result<f64, SearchError> {
        let eval_index = self.records.len();
        let seed = derive_seed(self.run_seed, STREAM_EPISODE + eval_index as u64);
        let scene = decode(&chromosome, self.setup.workspace)?;
        let episode = run_episode(&scene, self.perception, self.setup.workspace, self.setup.thresholds, seed);
        let f = fitness(&episode, &self.fitness);
        self.records.push(TestRecord {
            id: TestRecord::make_id(self.config.strategy, self.run_id, eval_index),
            provenance: Provenance {
                strategy: self.config.strategy,
                run_id: self.run_id,
                run_seed: self.run_seed,
                eval_index,
                generation,
            },
            chromosome,
            fitness: f,
            episode,
        });
        Ok(f)
    }

    fn finish(self) -> Archive {
        Archive { records: self.records }
    }
}

/// Runs whichever strategy the config names.
pub fn run_search(
    config: &SearchConfig,
    setup: SearchSetup<'_>,
    perception: &mut dyn Perception,
    run_id: u32,
) -> Result<Archive, SearchError> {
    match config.strategy {
        Strategy::Ga => run_ga(config, setup, perception, run_id),
        Strategy::Rs => run_rs(config, setup, perception, run_id),
    }
}

pub fn run_ga(
    config: &SearchConfig,
    setup: SearchSetup<'_>,
    perception: &mut dyn Perception,
    run_id: u32,
) -> Result<Archive, SearchError> {
    run_ga_with(config, setup, perception, run_id, &BinaryTournament)
}

/// Generational GA without elitism. Offspring that violate a placement
/// constraint get [`PENALTY_FITNESS`] and cost no budget.
pub fn run_ga_with(
    config: &SearchConfig,
    setup: SearchSetup<'_>,
    perception: &mut dyn Perception,
    run_id: u32,
    selector: &dyn ParentSelector,
) -> Result<Archive, SearchError> {
    config.check()?;
    let mut ev = Evaluator::new(config, setup, perception, run_id);
    let mut rng = rng_from_seed(derive_seed(ev.run_seed, STREAM_STRATEGY));
    let dp = DedupParams {
        ranges: setup.ranges,
        scaling: config.scaling,
        threshold: config.dup_threshold,
    };
    let n = config.population_size;

    let initial = (0..n)
        .map(|_| sample_random(setup.ranges, setup.workspace, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let mut population = dedup(initial, &[], &dp, setup.workspace, &mut rng)?;
    let mut fit = Vec::with_capacity(n);
    for c in &population {
        fit.push(ev.evaluate(c.clone(), 0)?);
    }

    let mut generation = 0;
    let mut stalled = 0;
    while !ev.exhausted() {
        generation += 1;
        let mut offspring = Vec::with_capacity(n + 1);
        while offspring.len() < n {
            let a = &population[selector.select(&fit, &mut rng)];
            let b = &population[selector.select(&fit, &mut rng)];
            let (ca, cb) = if rng.random_bool(config.p_cross) {
                crossover_one_point(a, b, &mut rng)
            } else {
                (a.clone(), b.clone())
            };
            for child in [ca, cb] {
                let child = if rng.random_bool(config.p_mut) {
                    if rng.random_bool(0.5) {
                        mutate_rm(&child, setup.ranges, &mut rng)
                    } else {
                        mutate_replace(&child, setup.ranges, setup.workspace, &mut rng)
                    }
                } else {
                    child
                };
                offspring.push(child);
            }
        }
        offspring.truncate(n);
        let reference: Vec<Chromosome> = match config.dedup_scope {
            DedupScope::Offspring => Vec::new(),
            DedupScope::Generation => population.clone(),
            DedupScope::Archive => ev.records.iter().map(|r| r.chromosome.clone()).collect(),
        };
        let offspring = dedup(offspring, &reference, &dp, setup.workspace, &mut rng)?;

        let before = ev.records.len();
        let mut next_fit = Vec::with_capacity(n);
        let mut next_pop = Vec::with_capacity(n);
        for child in offspring {
            if ev.exhausted() {
                break;
            }
            let f = if validate(&child, setup.ranges, setup.workspace)?.is_ok() {
                ev.evaluate(child.clone(), generation)?
            } else {
                PENALTY_FITNESS
            };
            next_pop.push(child);
            next_fit.push(f);
        }
        if ev.records.len() == before {
            stalled += 1;
            if stalled >= MAX_STALLED_GENERATIONS {
                return Err(SearchError::Stalled { generations: stalled });
            }
        } else {
            stalled = 0;
        }
        if next_pop.len() == n {
            population = next_pop;
            fit = next_fit;
        }
    }
    Ok(ev.finish())
}

/// Independent uniform samples, each kept only if it is not a duplicate of
/// anything already evaluated.
pub fn run_rs(
    config: &SearchConfig,
    setup: SearchSetup<'_>,
    perception: &mut dyn Perception,
    run_id: u32,
) -> Result<Archive, SearchError> {
    config.check()?;
    let mut ev = Evaluator::new(config, setup, perception, run_id);
    let mut rng = rng_from_seed(derive_seed(ev.run_seed, STREAM_STRATEGY));
    let mut seen: Vec<Vec<f64>> = Vec::with_capacity(config.eval_budget);
    while !ev.exhausted() {
        let mut accepted = None;
        for _ in 0..MAX_RS_DEDUP_ATTEMPTS {
            let c = sample_random(setup.ranges, setup.workspace, &mut rng)?;
            let f = c.features(setup.ranges, config.scaling);
            if seen.iter().all(|s| feature_distance(&f, s) >= config.dup_threshold) {
                accepted = Some((c, f));
                break;
            }
        }
        let (c, f) = accepted.ok_or(SearchError::DedupExhausted {
            attempts: MAX_RS_DEDUP_ATTEMPTS,
        })?;
        seen.push(f);
        ev.evaluate(c, 0)?;
    }
    Ok(ev.finish())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
