//! Failure-driven repair: search for failures, refit the detector on them,
//! and replay every failing scene with the repaired detector.
//!
//! `cargo run --release --example repair_loop [uc1-suction|uc2-parallel]`

use armtest::perception::{generate_dataset, SyntheticPerception};
use armtest::repair::{assemble, refit, replay, ModelDocument, ReplayConfig};
use armtest::search::{run_search, Archive, SearchSetup};
use armtest::{Config, Profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile: Profile = std::env::args().nth(1).as_deref().unwrap_or("uc1-suction").parse()?;
    let config = Config::for_profile(profile);
    let setup = SearchSetup {
        ranges: &config.ranges,
        workspace: &config.workspace,
        thresholds: &config.thresholds,
    };
    let archives = (0..5)
        .map(|run| run_search(&config.search, setup, &mut SyntheticPerception::new(config.perception.clone()), run))
        .collect::<Result<Vec<_>, _>>()?;
    let archive = Archive::merge(&archives);

    let rc = &config.repair;
    let validation = generate_dataset(&config.dataset_ranges, &config.workspace, rc.validation_scenes * 5, rc.dataset_seed)?
        .validation()
        .cloned()
        .collect();
    let dataset = assemble(&archive, &config.workspace, validation)?;
    let outcome = refit(&config.perception, &dataset, rc.learning_rate)?;
    let m_o = ModelDocument::operating(config.perception.clone());
    let m_f = ModelDocument::repaired(&m_o, &outcome, dataset.record_ids());
    println!("fitted gains {:?}", outcome.fitted);
    println!("validation {:?}", outcome.validation);
    println!("M_f v{} parent {}", m_f.version, m_f.parent_hash.as_deref().unwrap_or("-"));

    let report = replay(archive.failed(), &m_f.params, &config.workspace, &config.thresholds, &ReplayConfig::default())?;
    println!(
        "{} failures replayed: {} repaired, {} not repaired",
        report.n_replayed, report.n_repaired, report.n_non_repaired
    );
    println!("soft {:?}  hard {:?}", report.soft, report.hard);
    println!("modes left in non-repaired cases: {:?}", report.residual_modes);
    Ok(())
}
