//! Rank agreement between two scorings of the same candidates, read from
//! `id,value` text the same way the `correlate` command does.

use hybrid_nas::baselines::{align, kendall_tau, kendall_tau_b, parse_values, pearson_r};
use hybrid_nas::cost_model::HardwareProfile;
use hybrid_nas::evaluator::{evaluate_proxy, ProxyParams};
use hybrid_nas::search_space::{sample, SearchSpaceConfig};

pub fn run() {
    let config = SearchSpaceConfig::toy();
    let profile = HardwareProfile::unit();
    let clean = ProxyParams::default();
    let noisy = ProxyParams {
        epsilon: 0.5,
        ..clean.clone()
    };

    let mut a = String::from("id,score\n");
    let mut b = String::new();
    for i in 0..30u64 {
        let g = sample(&config, i);
        let x = evaluate_proxy(&g, &config, &profile, &clean, i)
            .unwrap()
            .score;
        let y = evaluate_proxy(&g, &config, &profile, &noisy, 1000 + i)
            .unwrap()
            .score;
        a.push_str(&format!("c{i},{x}\n"));
        b.push_str(&format!("c{i}\t{y}\n"));
    }
    let (x, y) = align(&parse_values(&a).unwrap(), &parse_values(&b).unwrap()).unwrap();
    println!("30 candidates, proxy vs noisy proxy");
    println!("tau   {:.4}", kendall_tau(&x, &y).unwrap());
    println!("tau_b {:.4}", kendall_tau_b(&x, &y).unwrap());
    println!("rho   {:.4}", pearson_r(&x, &y).unwrap());

    let t = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    println!("one swapped pair out of six: tau {t:.4}");
}

#[allow(dead_code)]
fn main() {
    run();
}
