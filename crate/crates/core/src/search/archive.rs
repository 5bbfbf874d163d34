use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::Strategy;
use crate::scene::Chromosome;
use crate::simulator::{Episode, FailureKind, FailureSet, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub strategy: Strategy,
    pub run_id: u32,
    pub run_seed: u64,
    pub eval_index: usize,
    pub generation: usize,
}

/// One evaluated test case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub id: String,
    pub provenance: Provenance,
    pub chromosome: Chromosome,
    pub fitness: f64,
    pub episode: Episode,
}

impl TestRecord {
    pub fn make_id(strategy: Strategy, run_id: u32, eval_index: usize) -> String {
        format!("{}-r{run_id}-{eval_index:04}", strategy.as_str())
    }

    pub fn outcome(&self) -> Outcome {
        self.episode.outcome
    }

    pub fn failure_kind(&self) -> FailureKind {
        self.episode.failure_kind
    }

    pub fn failure_modes(&self) -> &FailureSet {
        &self.episode.failure_modes
    }

    pub fn seed(&self) -> u64 {
        self.episode.seed
    }
}

/// Evaluated test cases in evaluation order. The pass / fail / near-fail
/// partitions are views over the same records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub records: Vec<TestRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("archive line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Archive {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn with_outcome(&self, outcome: Outcome) -> impl Iterator<Item = &TestRecord> {
        self.records.iter().filter(move |r| r.outcome() == outcome)
    }

    pub fn passed(&self) -> impl Iterator<Item = &TestRecord> {
        self.with_outcome(Outcome::Pass)
    }

    pub fn failed(&self) -> impl Iterator<Item = &TestRecord> {
        self.with_outcome(Outcome::Fail)
    }

    pub fn near_failed(&self) -> impl Iterator<Item = &TestRecord> {
        self.with_outcome(Outcome::NearFail)
    }

    pub fn get(&self, id: &str) -> Option<&TestRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn merge<'a>(archives: impl IntoIterator<Item = &'a Archive>) -> Archive {
        Archive {
            records: archives
                .into_iter()
                .flat_map(|a| a.records.iter().cloned())
                .collect(),
        }
    }

    /// One JSON object per line.
    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Archive, ArchiveError> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line).map_err(|source| ArchiveError::Parse {
                line: i + 1,
                source,
            })?;
            records.push(rec);
        }
        Ok(Archive { records })
    }
}
