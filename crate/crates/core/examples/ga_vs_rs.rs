//! Five GA runs against five random-search runs at the same budget, with
//! failure tallies, sparseness and significance tests.
//!
//! `cargo run --release --example ga_vs_rs [master-seed]`

use armtest::analysis::{GroupSummary, StatsReport};
use armtest::perception::SyntheticPerception;
use armtest::search::{run_search, SearchConfig, SearchSetup, Strategy};
use armtest::{Config, Profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let config = Config::for_profile(Profile::Uc1Suction);
    let setup = SearchSetup {
        ranges: &config.ranges,
        workspace: &config.workspace,
        thresholds: &config.thresholds,
    };
    let mut groups = Vec::new();
    for strategy in [Strategy::Ga, Strategy::Rs] {
        let search = SearchConfig {
            strategy,
            seed,
            ..config.search.clone()
        };
        let archives = (0..5)
            .map(|run| run_search(&search, setup, &mut SyntheticPerception::new(config.perception.clone()), run))
            .collect::<Result<Vec<_>, _>>()?;
        groups.push(GroupSummary::build(strategy.as_str(), &archives, &config.ranges, search.scaling));
    }
    let report = StatsReport::build(groups, 10_000, 0)?;
    print!("{}\n{}", report.tally_csv(), report.comparison_csv());
    Ok(())
}
