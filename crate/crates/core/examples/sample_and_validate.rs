//! Draw genomes from the prior, check them against the constraints and
//! round-trip them through the one-hot encoding.

use hybrid_nas::search_space::{
    decode, encode, encoding_key, n_var, sample, validate, SearchSpaceConfig,
};

pub fn run() {
    let config = SearchSpaceConfig::toy();
    println!(
        "toy space: {} layers, {} one-hot bits",
        config.num_layers,
        n_var(&config)
    );

    let mut per_branch = [0usize; 3];
    for seed in 0..1000 {
        let g = sample(&config, seed);
        assert!(validate(&g, &config).is_empty());
        let bits = encode(&g, &config).unwrap();
        assert_eq!(decode(&bits, &config).unwrap(), g);
        per_branch[g.branch_count as usize - 1] += 1;
    }
    println!("branch counts over 1000 samples: {per_branch:?}");

    let g = sample(&config, 7);
    println!(
        "seed 7: {} active cells, heads at strides {:?}",
        g.active_cell_count(),
        g.head_strides()
    );
    println!("key {}", encoding_key(&encode(&g, &config).unwrap()));

    let mut broken = g.clone();
    broken.head_index = 99;
    for v in validate(&broken, &config) {
        println!("violation: {v}");
    }
}

#[allow(dead_code)]
fn main() {
    run();
}
