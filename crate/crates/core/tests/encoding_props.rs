use hybrid_nas::rng::rng_from_seed;
use hybrid_nas::search_space::{
    decode, encode, encoding_key, n_var, repair, sample, validate, SearchSpaceConfig,
};
use proptest::prelude::*;

fn spaces() -> impl Strategy<Value = SearchSpaceConfig> {
    (3usize..=8).prop_map(SearchSpaceConfig::with_layers)
}

proptest! {
    #[test]
    fn samples_round_trip_through_the_encoding(config in spaces(), seed in any::<u64>()) {
        let g = sample(&config, seed);
        prop_assert!(validate(&g, &config).is_empty());
        let bits = encode(&g, &config).unwrap();
        prop_assert_eq!(bits.len(), n_var(&config));
        prop_assert_eq!(decode(&bits, &config).unwrap(), g);
    }

    #[test]
    fn distinct_genomes_have_distinct_keys(seed_a in any::<u64>(), seed_b in any::<u64>()) {
        let config = SearchSpaceConfig::toy();
        let (a, b) = (sample(&config, seed_a), sample(&config, seed_b));
        let ka = encoding_key(&encode(&a, &config).unwrap());
        let kb = encoding_key(&encode(&b, &config).unwrap());
        prop_assert_eq!(a == b, ka == kb);
    }

    #[test]
    fn flipping_a_bit_never_decodes_silently_wrong(seed in any::<u64>(), bit in 0usize..182) {
        let config = SearchSpaceConfig::toy();
        let g = sample(&config, seed);
        let mut bits = encode(&g, &config).unwrap();
        bits[bit] = !bits[bit];
        // one-hot groups end up with zero or two set bits
        prop_assert!(decode(&bits, &config).is_err());
    }

    #[test]
    fn repair_output_is_valid(seed in any::<u64>(), head in 0usize..6, d in 1usize..4) {
        let config = SearchSpaceConfig::toy();
        let mut g = sample(&config, seed);
        g.head_index = head;
        g.downsample_layers = [Some(d), Some(d)];
        let fixed = repair(g, &config, None, &mut rng_from_seed(seed));
        prop_assert!(validate(&fixed, &config).is_empty());
    }
}
