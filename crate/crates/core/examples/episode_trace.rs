//! One pick-and-place episode, traced cycle by cycle, for a calm scene and
//! for the same scene with steeply rotated boxes.
//!
//! `cargo run --example episode_trace`

use armtest::geometry::ObbPose;
use armtest::perception::SyntheticPerception;
use armtest::scene::Scene;
use armtest::simulator::run_episode;
use armtest::{Config, Profile};

fn main() {
    let config = Config::for_profile(Profile::Uc1Suction);
    let (w, h) = config.workspace.box_dims;
    for rot in [5.0, 29.0] {
        let scene = Scene {
            boxes: vec![
                ObbPose::new(0.60, 0.15, rot, w, h),
                ObbPose::new(0.75, 0.50, -rot, w, h),
                ObbPose::new(0.60, 0.80, rot, w, h),
            ],
            luminosity: 1800.0,
        };
        let mut detector = SyntheticPerception::new(config.perception.clone());
        let ep = run_episode(&scene, &mut detector, &config.workspace, &config.thresholds, 42);
        println!("boxes at +/-{rot} deg:");
        for c in &ep.cycles {
            println!("  {c}");
        }
        println!(
            "  -> {:?}, {:?}, modes {:?}, {:.1} s simulated",
            ep.outcome, ep.failure_kind, ep.failure_modes, ep.sim_time_s
        );
    }
}
