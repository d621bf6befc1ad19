//! Drive the search through the line-delimited evaluator protocol. The
//! evaluator side runs on threads here; in practice it is a separate
//! process started with `--evaluator exec:<command>`.

use std::thread;

use hybrid_nas::cost_model::HardwareProfile;
use hybrid_nas::evaluator::{
    analyze, duplex, serve, Connection, ExternalEvaluator, ExternalReply, DEFAULT_TIMEOUT,
};
use hybrid_nas::nsga2::{search, Nsga2Params};
use hybrid_nas::search_space::SearchSpaceConfig;

pub fn run() {
    let config = SearchSpaceConfig::toy();
    let profile = HardwareProfile::unit();

    let mut conns = Vec::new();
    let mut workers = Vec::new();
    for _ in 0..2 {
        let (ours, mut theirs) = duplex();
        let (config, profile) = (config.clone(), profile.clone());
        workers.push(thread::spawn(move || {
            serve(&mut theirs, |id, genome, _calibrate| {
                // Reward depth, report a made-up measured latency.
                let s = analyze(genome, &config, &profile).unwrap();
                ExternalReply {
                    id,
                    score: 10.0 * genome.active_cell_count() as f64,
                    latency_ms: Some(2.0 * s.latency_ms),
                    peak_mem_mb: None,
                }
            })
        }));
        conns.push(Connection::open(Box::new(ours), DEFAULT_TIMEOUT).unwrap());
    }
    let evaluator = ExternalEvaluator::new(conns, config.clone(), profile.clone());
    let params = Nsga2Params {
        population_size: 8,
        generations: 3,
        branches: Some(1),
        seed: 5,
        ..Nsga2Params::default()
    };
    let archive = search(&config, &profile, &params, &evaluator).unwrap();
    drop(evaluator);
    for w in workers {
        w.join().unwrap().unwrap();
    }
    println!("{} evaluations over 2 workers", archive.stats.evaluations);
    for c in archive.front_members() {
        println!(
            "  #{:<3} score {:5.1}  measured latency {:.3} ms",
            c.id, c.objectives.score, c.objectives.latency_ms
        );
    }
}

#[allow(dead_code)]
fn main() {
    run();
}
