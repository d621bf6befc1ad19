//! A short constrained NSGA-II run against the analytic proxy.

use hybrid_nas::cost_model::HardwareProfile;
use hybrid_nas::evaluator::{ObjectivePair, ProxyEvaluator};
use hybrid_nas::nsga2::{search, Nsga2Params};
use hybrid_nas::search_space::SearchSpaceConfig;

pub fn run() {
    let config = SearchSpaceConfig::toy();
    let profile =
        HardwareProfile::from_json(include_str!("../data/gpu_like_profile.json")).unwrap();
    let evaluator = ProxyEvaluator::new(config.clone(), profile.clone());
    let params = Nsga2Params {
        population_size: 12,
        generations: 6,
        branches: Some(2),
        objectives: ObjectivePair::Latency,
        latency_cap: Some(20.0),
        seed: 11,
        ..Nsga2Params::default()
    };
    let archive = search(&config, &profile, &params, &evaluator).unwrap();
    let st = &archive.stats;
    println!(
        "{} evaluations, {} cap rejections, front of {}",
        st.evaluations,
        st.cap_rejections,
        archive.front.len()
    );
    let mut front: Vec<_> = archive.front_members().collect();
    front.sort_by(|a, b| a.objectives.latency_ms.total_cmp(&b.objectives.latency_ms));
    for c in front {
        println!(
            "  #{:<4} gen {:<2} score {:6.3}  latency {:7.3} ms",
            c.id, c.generation, c.objectives.score, c.objectives.latency_ms
        );
    }
    println!("top-k by crowding: {:?}", archive.top_k);
}

#[allow(dead_code)]
fn main() {
    run();
}
