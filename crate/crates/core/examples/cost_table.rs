//! Operator comparison table and the cost report of one sampled genome on
//! a GPU-like profile.

use hybrid_nas::cost_model::{table1, HardwareProfile};
use hybrid_nas::evaluator::analyze;
use hybrid_nas::search_space::{sample, SearchSpaceConfig};

pub fn run() {
    let profile =
        HardwareProfile::from_json(include_str!("../data/gpu_like_profile.json")).unwrap();
    println!(
        "{:<32} {:>8} {:>9} {:>10}",
        "operator", "flops_g", "params_m", "latency_ms"
    );
    for row in table1(48) {
        println!(
            "{:<32} {:>8.3} {:>9.3} {:>10.3}",
            row.name,
            row.flops_g(),
            row.params_m(),
            row.latency_ms(&profile)
        );
    }

    let config = SearchSpaceConfig::default();
    let g = sample(&config, 3);
    let s = analyze(&g, &config, &profile).unwrap();
    println!();
    println!(
        "{}-branch genome, {} ops",
        g.branch_count,
        s.cost.per_op.len()
    );
    println!("flops_g        {:.3}", s.cost.flops_g());
    println!("params_m       {:.3}", s.cost.params_m());
    println!(
        "peak_mem_mb    {:.1} (budget ok: {})",
        s.memory.required_mb, s.memory.pass
    );
    println!("est_latency_ms {:.3}", s.latency_ms);
}

#[allow(dead_code)]
fn main() {
    run();
}
