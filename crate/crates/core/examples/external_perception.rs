//! Running episodes against an out-of-process detector over TCP. The
//! server here is the synthetic detector behind the line-JSON protocol; a
//! real network would answer the same requests.
//!
//! `cargo run --example external_perception`

use std::io::{BufReader, BufWriter};
use std::net::TcpListener;

use armtest::perception::{serve_synthetic, ExternalPerception};
use armtest::scene::{decode, sample_random_seeded};
use armtest::simulator::run_episode;
use armtest::{Config, Profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Config::for_profile(Profile::Uc1Suction);
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let params = config.perception.clone();
    let server = std::thread::spawn(move || -> std::io::Result<usize> {
        let (stream, _) = listener.accept()?;
        serve_synthetic(&params, BufReader::new(stream.try_clone()?), BufWriter::new(stream))
    });

    let mut detector = ExternalPerception::connect(addr)?;
    for seed in 0..5 {
        let c = sample_random_seeded(&config.ranges, &config.workspace, seed)?;
        let scene = decode(&c, &config.workspace)?;
        let ep = run_episode(&scene, &mut detector, &config.workspace, &config.thresholds, seed);
        println!("scene {seed}: {} cycles, {:?} {:?}", ep.cycles.len(), ep.outcome, ep.failure_modes);
    }
    drop(detector);
    println!("server answered {} requests", server.join().expect("server thread")?);
    Ok(())
}
