//! Offline evaluation of the operating detector on a generated validation
//! split, against a noise-free detector.
//!
//! `cargo run --release --example offline_eval`

use armtest::perception::{eval_offline, generate_dataset, Annotation, Detection, SyntheticPerceptionParams};
use armtest::{Config, Profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Config::for_profile(Profile::Uc1Suction);
    let dataset = generate_dataset(&config.dataset_ranges, &config.workspace, 1200, config.repair.dataset_seed)?;
    let val: Vec<_> = dataset.validation().collect();
    let gts: Vec<Vec<Annotation>> = val.iter().map(|s| s.annotations.clone()).collect();
    for (name, model) in [
        ("operating", config.perception.clone()),
        ("perfect", SyntheticPerceptionParams::perfect()),
    ] {
        let preds: Vec<Vec<Detection>> = val.iter().map(|s| model.predict(&s.scene, s.seed)).collect();
        let r = eval_offline(&preds, &gts);
        println!("{name:>9}: mAP@[.50:.95] {:.4}  F1@.50 {:.4}", r.map_50_95, r.f1);
        let aps: Vec<String> = r.ap_per_threshold.iter().map(|(t, ap)| format!("{t:.2}:{ap:.3}")).collect();
        println!("           {}", aps.join(" "));
    }
    Ok(())
}
