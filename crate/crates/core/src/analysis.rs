//! Post-run analytics: diversity of revealed failures, outcome tallies and
//! the two-sample statistics used to compare strategies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::rng_from_seed;
use crate::scene::{FeatureScaling, ParameterRanges};
use crate::search::{Archive, TestRecord};
use crate::simulator::{FailureKind, FailureSet, Outcome};

/// Largest number of splits enumerated exactly by [`permutation_test`].
pub const EXACT_PERMUTATION_LIMIT: u64 = 20_000;
pub const DEFAULT_PERMUTATIONS: usize = 10_000;

// Ties in the permutation statistic are compared with this slack so that
// rounding in the means never drops the observed split from the count.
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("cosine distance is undefined for a zero-norm vector")]
    ZeroNorm,
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty sample")]
    EmptySample,
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na2: f64 = a.iter().map(|x| x * x).sum();
    let nb2: f64 = b.iter().map(|x| x * x).sum();
    if na2 == 0.0 || nb2 == 0.0 {
        return Err(AnalysisError::ZeroNorm);
    }
    // sqrt(x * x) == x exactly, so identical vectors land on 0.
    Ok((1.0 - dot / (na2 * nb2).sqrt()).clamp(0.0, 2.0))
}

/// Mean over items of the largest distance to any item (itself included).
/// Zero for fewer than two items.
pub fn sparseness<T>(items: &[T], dist: impl Fn(&T, &T) -> f64) -> f64 {
    if items.is_empty() {
        return 0.0;
    }
    let total: f64 = items
        .iter()
        .map(|a| items.iter().map(|b| dist(a, b)).fold(0.0, f64::max))
        .sum();
    total / items.len() as f64
}

/// Jaccard distance between two failure-mode sets.
pub fn severity_distance(a: &FailureSet, b: &FailureSet) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.symmetric_difference(b).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsenessReport {
    pub s_avf: f64,
    pub s_avs: f64,
    pub n_unique_fm_combos: usize,
}

/// Diversity of the failed records among `records`.
pub fn failure_sparseness<'a>(
    records: impl IntoIterator<Item = &'a TestRecord>,
    ranges: &ParameterRanges,
    scaling: FeatureScaling,
) -> SparsenessReport {
    let failed: Vec<&TestRecord> = records.into_iter().filter(|r| r.outcome() == Outcome::Fail).collect();
    let features: Vec<Vec<f64>> = failed.iter().map(|r| r.chromosome.features(ranges, scaling)).collect();
    let modes: Vec<&FailureSet> = failed.iter().map(|r| r.failure_modes()).collect();
    SparsenessReport {
        s_avf: sparseness(&features, |a, b| crate::search::feature_distance(a, b)),
        s_avs: sparseness(&modes, |a, b| severity_distance(a, b)),
        n_unique_fm_combos: modes.iter().collect::<BTreeSet<_>>().len(),
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Two-sided permutation test on the difference of means. Enumerates every
/// split when there are at most [`EXACT_PERMUTATION_LIMIT`] of them, otherwise
/// draws `iterations` seeded random permutations.
pub fn permutation_test(a: &[f64], b: &[f64], iterations: usize, seed: u64) -> Result<f64, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    if binomial((a.len() + b.len()) as u64, a.len() as u64) <= EXACT_PERMUTATION_LIMIT {
        permutation_exact(a, b)
    } else {
        permutation_monte_carlo(a, b, iterations, seed)
    }
}

pub fn permutation_exact(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let total: f64 = pooled.iter().sum();
    let (na, n) = (a.len(), pooled.len());
    let nb = n - na;
    let observed = (mean(a) - mean(b)).abs();
    let mut idx: Vec<usize> = (0..na).collect();
    let (mut hits, mut splits) = (0u64, 0u64);
    loop {
        let sa: f64 = idx.iter().map(|&i| pooled[i]).sum();
        let diff = (sa / na as f64 - (total - sa) / nb as f64).abs();
        if diff >= observed - TIE_EPS {
            hits += 1;
        }
        splits += 1;
        // Next combination in lexicographic order.
        let mut i = na;
        while i > 0 && idx[i - 1] == n - na + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..na {
            idx[j] = idx[j - 1] + 1;
        }
    }
    Ok(hits as f64 / splits as f64)
}

/// Random-permutation estimate; the observed split counts once, so the
/// p-value is never zero.
pub fn permutation_monte_carlo(a: &[f64], b: &[f64], iterations: usize, seed: u64) -> Result<f64, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let na = a.len();
    let observed = (mean(a) - mean(b)).abs();
    let mut rng = rng_from_seed(seed);
    let mut hits = 0usize;
    for _ in 0..iterations {
        pooled.shuffle(&mut rng);
        let diff = (mean(&pooled[..na]) - mean(&pooled[na..])).abs();
        if diff >= observed - TIE_EPS {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (1 + iterations) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub fn of(delta: f64) -> Self {
        match delta.abs() {
            d if d < 0.147 => Magnitude::Negligible,
            d if d < 0.33 => Magnitude::Small,
            d if d < 0.474 => Magnitude::Medium,
            _ => Magnitude::Large,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Magnitude::Negligible => 'N',
            Magnitude::Small => 'S',
            Magnitude::Medium => 'M',
            Magnitude::Large => 'L',
        }
    }
}

pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<(f64, Magnitude), AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let mut score: i64 = 0;
    for x in a {
        for y in b {
            score += (x > y) as i64 - (x < y) as i64;
        }
    }
    let d = score as f64 / (a.len() * b.len()) as f64;
    Ok((d, Magnitude::of(d)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    /// Difference of means, first sample minus second.
    pub statistic: f64,
    pub p_value: f64,
    pub cliffs_delta: f64,
    pub magnitude: Magnitude,
}

pub fn compare(a: &[f64], b: &[f64], iterations: usize, seed: u64) -> Result<StatResult, AnalysisError> {
    let p_value = permutation_test(a, b, iterations, seed)?;
    let (cliffs_delta, magnitude) = cliffs_delta(a, b)?;
    Ok(StatResult {
        statistic: mean(a) - mean(b),
        p_value,
        cliffs_delta,
        magnitude,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub pass: usize,
    pub fail: usize,
    pub near_fail: usize,
    pub soft: usize,
    pub hard: usize,
}

impl Tally {
    pub fn total(&self) -> usize {
        self.pass + self.fail + self.near_fail
    }

    fn add(&mut self, r: &TestRecord) {
        match r.outcome() {
            Outcome::Pass => self.pass += 1,
            Outcome::NearFail => self.near_fail += 1,
            Outcome::Fail => self.fail += 1,
        }
        match r.failure_kind() {
            FailureKind::Soft => self.soft += 1,
            FailureKind::Hard => self.hard += 1,
            FailureKind::None => {}
        }
    }
}

impl std::ops::Add for Tally {
    type Output = Tally;

    fn add(self, o: Tally) -> Tally {
        Tally {
            pass: self.pass + o.pass,
            fail: self.fail + o.fail,
            near_fail: self.near_fail + o.near_fail,
            soft: self.soft + o.soft,
            hard: self.hard + o.hard,
        }
    }
}

/// Outcome counts keyed by strategy name.
pub fn tally(archive: &Archive) -> BTreeMap<String, Tally> {
    let mut out: BTreeMap<String, Tally> = BTreeMap::new();
    for r in &archive.records {
        out.entry(r.provenance.strategy.to_string()).or_default().add(r);
    }
    out
}

pub fn tally_all(archive: &Archive) -> Tally {
    tally(archive).into_values().fold(Tally::default(), |a, b| a + b)
}

/// Per-run figures for one group of archives (one strategy, several runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub name: String,
    pub runs: Vec<RunSummary>,
    pub total: Tally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tally: Tally,
    pub sparseness: SparsenessReport,
}

impl GroupSummary {
    pub fn build(name: &str, archives: &[Archive], ranges: &ParameterRanges, scaling: FeatureScaling) -> Self {
        let runs: Vec<RunSummary> = archives
            .iter()
            .map(|a| RunSummary {
                tally: tally_all(a),
                sparseness: failure_sparseness(&a.records, ranges, scaling),
            })
            .collect();
        let total = runs.iter().fold(Tally::default(), |acc, r| acc + r.tally);
        Self {
            name: name.to_string(),
            runs,
            total,
        }
    }

    pub fn metric(&self, m: Metric) -> Vec<f64> {
        self.runs
            .iter()
            .map(|r| match m {
                Metric::Failures => r.tally.fail as f64,
                Metric::SoftFailures => r.tally.soft as f64,
                Metric::HardFailures => r.tally.hard as f64,
                Metric::SAvf => r.sparseness.s_avf,
                Metric::SAvs => r.sparseness.s_avs,
                Metric::NFm => r.sparseness.n_unique_fm_combos as f64,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Failures,
    SoftFailures,
    HardFailures,
    SAvf,
    SAvs,
    NFm,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Failures,
        Metric::SoftFailures,
        Metric::HardFailures,
        Metric::SAvf,
        Metric::SAvs,
        Metric::NFm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Failures => "failures",
            Metric::SoftFailures => "soft",
            Metric::HardFailures => "hard",
            Metric::SAvf => "s_avf",
            Metric::SAvs => "s_avs",
            Metric::NFm => "n_fm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub metric: Metric,
    pub mean_a: f64,
    pub mean_b: f64,
    pub result: StatResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub groups: Vec<GroupSummary>,
    /// Empty when only one group was given.
    pub comparisons: Vec<Comparison>,
}

impl StatsReport {
    pub fn build(groups: Vec<GroupSummary>, iterations: usize, seed: u64) -> Result<Self, AnalysisError> {
        let mut comparisons = Vec::new();
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                for m in Metric::ALL {
                    let (a, b) = (groups[i].metric(m), groups[j].metric(m));
                    comparisons.push(Comparison {
                        a: groups[i].name.clone(),
                        b: groups[j].name.clone(),
                        metric: m,
                        mean_a: mean(&a),
                        mean_b: mean(&b),
                        result: compare(&a, &b, iterations, seed)?,
                    });
                }
            }
        }
        Ok(Self { groups, comparisons })
    }

    /// One row per run: `group,run,pass,fail,near_fail,soft,hard,s_avf,s_avs,n_fm`.
    pub fn tally_csv(&self) -> String {
        let mut out = String::from("group,run,pass,fail,near_fail,soft,hard,s_avf,s_avs,n_fm\n");
        for g in &self.groups {
            for (i, r) in g.runs.iter().enumerate() {
                let t = &r.tally;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{:.4},{:.4},{}",
                    g.name, i, t.pass, t.fail, t.near_fail, t.soft, t.hard, r.sparseness.s_avf, r.sparseness.s_avs,
                    r.sparseness.n_unique_fm_combos
                );
            }
        }
        out
    }

    /// One row per compared metric: means, p-value and effect size.
    pub fn comparison_csv(&self) -> String {
        let mut out = String::from("metric,group_a,group_b,mean_a,mean_b,p_value,cliffs_delta,magnitude\n");
        for c in &self.comparisons {
            let _ = writeln!(
                out,
                "{},{},{},{:.4},{:.4},{:.4},{:.3},{}",
                c.metric.name(),
                c.a,
                c.b,
                c.mean_a,
                c.mean_b,
                c.result.p_value,
                c.result.cliffs_delta,
                c.result.magnitude.letter()
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::FailureMode::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 2.0);
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), Err(AnalysisError::ZeroNorm));
    }

    fn brute(items: &[Vec<f64>]) -> f64 {
        let mut s = 0.0;
        for i in 0..items.len() {
            let mut m = 0.0;
            for j in 0..items.len() {
                let d = cosine_distance(&items[i], &items[j]).unwrap();
                if d > m {
                    m = d;
                }
            }
            s += m;
        }
        s / items.len() as f64
    }

    #[test]
    fn sparseness_examples() {
        let d = |a: &f64, b: &f64| (a - b).abs();
        assert_eq!(sparseness(&[3.0], d), 0.0);
        assert_eq!(sparseness(&[1.0, 1.25], d), 0.25);
        let items = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        assert_eq!(sparseness(&items, |a, b| cosine_distance(a, b).unwrap()), brute(&items));
    }

    #[test]
    fn severity_examples() {
        let s = |v: &[crate::simulator::FailureMode]| v.iter().copied().collect::<FailureSet>();
        assert_eq!(severity_distance(&s(&[FM2]), &s(&[FM2])), 0.0);
        assert_eq!(severity_distance(&s(&[FM1]), &s(&[FM3])), 1.0);
        assert_relative_eq!(severity_distance(&s(&[FM1, FM2]), &s(&[FM2, FM4])), 2.0 / 3.0);
        assert_eq!(severity_distance(&s(&[]), &s(&[])), 0.0);
    }

    #[test]
    fn permutation_examples() {
        assert_eq!(permutation_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], 100, 0).unwrap(), 1.0);
        assert_relative_eq!(permutation_test(&[1.0, 2.0], &[10.0, 11.0], 100, 0).unwrap(), 2.0 / 6.0);
        assert!(permutation_test(&[], &[1.0], 10, 0).is_err());
    }

    #[test]
    fn permutation_large_samples_use_monte_carlo() {
        let a: Vec<f64> = (0..20).map(f64::from).collect();
        let b: Vec<f64> = (0..20).map(|x| f64::from(x) + 30.0).collect();
        let p = permutation_test(&a, &b, 999, 3).unwrap();
        assert_eq!(p, 1.0 / 1000.0);
    }

    #[test]
    fn cliffs_examples() {
        assert_eq!(cliffs_delta(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), (0.0, Magnitude::Negligible));
        assert_eq!(cliffs_delta(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(), (-1.0, Magnitude::Large));
        assert_eq!(cliffs_delta(&[1.0, 3.0], &[2.0]).unwrap().0, 0.0);
        assert_eq!(Magnitude::of(0.147), Magnitude::Small);
        assert_eq!(Magnitude::of(0.33), Magnitude::Medium);
        assert_eq!(Magnitude::of(-0.474), Magnitude::Large);
        assert_eq!(Magnitude::of(0.1469), Magnitude::Negligible);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(12, 6), 924);
        assert_eq!(binomial(10, 5), 252);
        assert_eq!(binomial(200, 100), u64::MAX);
    }

    proptest! {
        #[test]
        fn permutation_symmetric_and_shift_invariant(
            a in proptest::collection::vec(-10.0f64..10.0, 1..6),
            b in proptest::collection::vec(-10.0f64..10.0, 1..6),
            shift in -100.0f64..100.0,
        ) {
            let p = permutation_test(&a, &b, 0, 0).unwrap();
            prop_assert_eq!(p, permutation_test(&b, &a, 0, 0).unwrap());
            let sa: Vec<f64> = a.iter().map(|x| x + shift).collect();
            let sb: Vec<f64> = b.iter().map(|x| x + shift).collect();
            prop_assert!((p - permutation_test(&sa, &sb, 0, 0).unwrap()).abs() < 1e-12);
            prop_assert!(p > 0.0 && p <= 1.0);
        }

        #[test]
        fn cliffs_antisymmetric_and_monotone_invariant(
            a in proptest::collection::vec(-10.0f64..10.0, 1..8),
            b in proptest::collection::vec(-10.0f64..10.0, 1..8),
        ) {
            let d = cliffs_delta(&a, &b).unwrap().0;
            prop_assert_eq!(d, -cliffs_delta(&b, &a).unwrap().0);
            let f = |x: &f64| x.exp() * 3.0 + 1.0;
            let ta: Vec<f64> = a.iter().map(f).collect();
            let tb: Vec<f64> = b.iter().map(f).collect();
            prop_assert_eq!(d, cliffs_delta(&ta, &tb).unwrap().0);
            prop_assert!((-1.0..=1.0).contains(&d));
        }

        #[test]
        fn sparseness_order_invariant(
            items in proptest::collection::vec(proptest::collection::vec(0.1f64..1.0, 3), 1..12),
            rot in 0usize..12,
        ) {
            let d = |a: &Vec<f64>, b: &Vec<f64>| cosine_distance(a, b).unwrap();
            let mut shuffled = items.clone();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let s = sparseness(&items, d);
            prop_assert!((s - sparseness(&shuffled, d)).abs() < 1e-12);
            prop_assert!((0.0..=2.0).contains(&s));
        }
    }
}
