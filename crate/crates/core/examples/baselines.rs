//! Random sampling and single-edit local search at the same budget as a
//! small NSGA-II run, then pick models closest to a few FLOPs targets.

use hybrid_nas::baselines::{
    front_points, front_weakly_dominates, local_search, random_baseline, select_closest_by_flops,
    LocalSearchParams,
};
use hybrid_nas::cost_model::HardwareProfile;
use hybrid_nas::evaluator::{ObjectivePair, ProxyEvaluator};
use hybrid_nas::nsga2::{search, Nsga2Params};
use hybrid_nas::search_space::SearchSpaceConfig;

pub fn run() {
    let config = SearchSpaceConfig::toy();
    let profile = HardwareProfile::unit();
    let evaluator = ProxyEvaluator::new(config.clone(), profile.clone());
    let pair = ObjectivePair::Flops;

    let params = Nsga2Params {
        population_size: 10,
        generations: 5,
        objectives: pair,
        seed: 1,
        ..Nsga2Params::default()
    };
    let nsga = search(&config, &profile, &params, &evaluator).unwrap();
    let budget = nsga.candidates.len();
    let random = random_baseline(&config, budget, None, pair, &evaluator, 2).unwrap();
    let local = local_search(
        &config,
        &LocalSearchParams {
            seeds: 2,
            iterations: 6,
            neighbors: 3,
            ..LocalSearchParams::default()
        },
        &evaluator,
        3,
    )
    .unwrap();

    println!(
        "budget {budget}: nsga front {}, random front {}, local pool {} (front {})",
        nsga.front.len(),
        random.front.len(),
        local.pool.candidates.len(),
        local.pool.front.len()
    );
    println!(
        "nsga front covers random front: {}",
        front_weakly_dominates(&front_points(&nsga), &front_points(&random))
    );
    println!("local search stalls per seed: {:?}", local.stalls);

    let front: Vec<_> = nsga.front_members().collect();
    for c in select_closest_by_flops(&front, &[0.3, 1.0, 3.0]).unwrap() {
        println!(
            "  #{:<3} {:.3} GMACs  score {:.3}",
            c.id, c.objectives.flops_g, c.objectives.score
        );
    }
}

#[allow(dead_code)]
fn main() {
    run();
}
