use rand::seq::SliceRandom;

use super::config::SearchSpaceConfig;
use super::encoding::{gene_values, genome_from_values, Gene, GeneLayout};
use super::genome::Genome;
use super::sampler::legal_values;
use super::{validate, SearchSpaceError};
use crate::rng::rng_from_seed;

/// Every valid genome reachable from `genome` by changing exactly one gene:
/// a cell's operator or width, one node edge toggle, or the head.
///
/// Topology genes are excluded: moving a downsample layer or changing the
/// branch count always changes more than one gene.
pub fn single_edits(
    genome: &Genome,
    config: &SearchSpaceConfig,
) -> Result<Vec<Genome>, SearchSpaceError> {
    let layout = GeneLayout::new(config);
    let values = gene_values(genome, &layout, config)?;
    let mut out = Vec::new();
    for (i, gene) in layout.genes().iter().enumerate() {
        let candidates: Vec<usize> = match *gene {
            g if g.is_topology() => continue,
            Gene::Node { .. } if values[i] > 0 => {
                // Toggle one edge at a time.
                let mask = values[i] - 1;
                (0..3).map(|bit| (mask ^ (1 << bit)) + 1).collect()
            }
            g => legal_values(genome, g, config, None),
        };
        for v in candidates {
            if v == values[i] {
                continue;
            }
            let mut next = values.clone();
            next[i] = v;
            let candidate = genome_from_values(&next, &layout, config)?;
            if validate(&candidate, config).is_empty() {
                out.push(candidate);
            }
        }
    }
    Ok(out)
}

/// `k` single-edit neighbors of `genome`, drawn without replacement while
/// distinct edits remain (then cycling through a fresh shuffle).
pub fn neighbors(
    genome: &Genome,
    config: &SearchSpaceConfig,
    seed: u64,
    k: usize,
) -> Result<Vec<Genome>, SearchSpaceError> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let edits = single_edits(genome, config)?;
    if edits.is_empty() {
        return Err(SearchSpaceError::NoLegalNeighbor);
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let mut order: Vec<usize> = (0..edits.len()).collect();
        order.shuffle(&mut rng);
        out.extend(
            order
                .into_iter()
                .take(k - out.len())
                .map(|i| edits[i].clone()),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search_space::encoding::gene_distance;
    use crate::search_space::{sample, Edge};

    fn with_branches(config: &SearchSpaceConfig, b: u8) -> Genome {
        (0..)
            .map(|s| sample(config, s))
            .find(|g| g.branch_count == b)
            .unwrap()
    }

    #[test]
    fn five_neighbors_at_distance_one() {
        let config = SearchSpaceConfig::toy();
        let g = with_branches(&config, 2);
        let ns = neighbors(&g, &config, 9, 5).unwrap();
        assert_eq!(ns.len(), 5);
        for n in &ns {
            assert_eq!(gene_distance(&g, n, &config).unwrap(), 1);
            assert!(validate(n, &config).is_empty());
        }
    }

    #[test]
    fn zero_neighbors_is_empty() {
        let config = SearchSpaceConfig::toy();
        let g = with_branches(&config, 1);
        assert!(neighbors(&g, &config, 0, 0).unwrap().is_empty());
    }

    #[test]
    fn neighbors_are_seeded() {
        let config = SearchSpaceConfig::toy();
        let g = with_branches(&config, 3);
        assert_eq!(
            neighbors(&g, &config, 4, 7).unwrap(),
            neighbors(&g, &config, 4, 7).unwrap()
        );
    }

    #[test]
    fn single_edits_match_brute_force_enumeration() {
        // Brute force: try every category of every non-topology gene and keep
        // the valid results; this must equal the edit generator's output.
        let config = SearchSpaceConfig::toy();
        let layout = GeneLayout::new(&config);
        for seed in 0..30 {
            let g = sample(&config, seed);
            let values = gene_values(&g, &layout, &config).unwrap();
            let mut expected = Vec::new();
            for (i, gene) in layout.genes().iter().enumerate() {
                if gene.is_topology() {
                    continue;
                }
                for v in 0..layout.cardinality(i) {
                    if v == values[i] {
                        continue;
                    }
                    let mut next = values.clone();
                    next[i] = v;
                    let Ok(c) = genome_from_values(&next, &layout, &config) else {
                        continue;
                    };
                    // Node edits must be single-edge toggles.
                    if let Gene::Node { .. } = gene {
                        if values[i] == 0 || v == 0 || ((v - 1) ^ (values[i] - 1)).count_ones() != 1
                        {
                            continue;
                        }
                    }
                    if validate(&c, &config).is_empty() {
                        expected.push(c);
                    }
                }
            }
            let mut got = single_edits(&g, &config).unwrap();
            let key = |g: &Genome| format!("{g:?}");
            expected.sort_by_key(key);
            got.sort_by_key(key);
            assert_eq!(got, expected);

            // None of them drops the mandatory downsampled input of an entry node.
            let topo = g.topology();
            for n in &got {
                for row in 1..3 {
                    if let Some(d) = topo.row_start(row) {
                        assert!(n.node(d, row).unwrap().contains(Edge::FromHigherRes));
                    }
                }
            }
        }
    }
}
