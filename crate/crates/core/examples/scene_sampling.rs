//! Sampling valid scenes, encoding them as chromosomes and checking the
//! placement constraints of a hand-made invalid one.
//!
//! `cargo run --example scene_sampling [uc1-suction|uc2-parallel]`

use armtest::rng::rng_from_seed;
use armtest::scene::{decode, sample_random, validate, Chromosome, FeatureScaling};
use armtest::{Config, Profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile: Profile = std::env::args().nth(1).as_deref().unwrap_or("uc1-suction").parse()?;
    let config = Config::for_profile(profile);
    let mut rng = rng_from_seed(3);
    for _ in 0..3 {
        let c = sample_random(&config.ranges, &config.workspace, &mut rng)?;
        let scene = decode(&c, &config.workspace)?;
        println!("chromosome {c}");
        for b in &scene.boxes {
            println!("  box ({:.3}, {:.3}) rot {:+.1}", b.cx, b.cy, b.rot_deg);
        }
        let f = c.features(&config.ranges, FeatureScaling::Centered);
        println!("  luminosity {:.0} lux, centered features {:.2?}", scene.luminosity, f);
    }

    // Two boxes on top of each other, one rotated out of range.
    let bad: Chromosome = "0.7,0.4,0,0.71,0.41,45,0.6,0.8,0,3000".parse()?;
    let report = validate(&bad, &config.ranges, &config.workspace)?;
    println!("hand-made scene violations:");
    for v in &report.violations {
        println!("  {v:?}");
    }
    Ok(())
}
