use rand::seq::SliceRandom;
use rand::Rng;

use super::config::{SearchSpaceConfig, NUM_ROWS};
use super::encoding::Gene;
use super::genome::{CellGene, Genome, NodeGene, Operator, Topology};
use super::SearchSpaceError;
use crate::rng::rng_from_seed;

/// Restricts sampling and variation to one branch count (1, 2 or 3).
pub type BranchFilter = Option<u8>;

/// Draw a valid genome: branch count from the priors, everything else uniform
/// over its legal values.
pub fn sample(config: &SearchSpaceConfig, seed: u64) -> Genome {
    sample_with(config, None, &mut rng_from_seed(seed))
}

pub fn sample_with<R: Rng + ?Sized>(
    config: &SearchSpaceConfig,
    branches: BranchFilter,
    rng: &mut R,
) -> Genome {
    let branch_count = match branches {
        Some(b) => b,
        None => sample_branch_count(config, rng),
    };
    let mut genome = Genome {
        branch_count,
        downsample_layers: sample_downsample(config, branch_count, rng),
        cells: vec![None; config.num_layers * NUM_ROWS],
        nodes: vec![None; (config.num_layers - 1) * NUM_ROWS],
        head_index: 0,
    };
    fill_slots(&mut genome, config, rng);
    debug_assert!(super::validate(&genome, config).is_empty());
    genome
}

fn sample_branch_count<R: Rng + ?Sized>(config: &SearchSpaceConfig, rng: &mut R) -> u8 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in config.branch_priors.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u8 + 1;
        }
    }
    // Rounding left u above the cumulative sum: take the last supported count.
    (1..=3u8)
        .rev()
        .find(|b| config.branch_supported(*b))
        .unwrap_or(1)
}

fn sample_downsample<R: Rng + ?Sized>(
    config: &SearchSpaceConfig,
    branch_count: u8,
    rng: &mut R,
) -> [Option<usize>; 2] {
    let last = config.num_layers - 1;
    match branch_count {
        2 => [Some(rng.gen_range(1..=last)), None],
        3 => {
            // Uniform over ordered pairs 1 <= d2 < d3 <= L-1.
            let pairs: Vec<(usize, usize)> = (1..=last)
                .flat_map(|a| (a + 1..=last).map(move |b| (a, b)))
                .collect();
            let (a, b) = pairs[rng.gen_range(0..pairs.len())];
            [Some(a), Some(b)]
        }
        _ => [None, None],
    }
}

fn random_cell<R: Rng + ?Sized>(config: &SearchSpaceConfig, rng: &mut R) -> CellGene {
    CellGene {
        operator: Operator::ALL[rng.gen_range(0..Operator::ALL.len())],
        width_index: rng.gen_range(0..config.width_multipliers.len()),
    }
}

/// Fill every slot the topology activates and clear the rest.
fn fill_slots<R: Rng + ?Sized>(genome: &mut Genome, config: &SearchSpaceConfig, rng: &mut R) {
    let topo = genome.topology();
    for layer in 0..config.num_layers {
        for row in 0..NUM_ROWS {
            let active = topo.is_active(layer, row);
            *genome.cell_mut(layer, row) = active.then(|| random_cell(config, rng));
            if layer > 0 {
                *genome.node_mut(layer, row) =
                    active.then(|| *topo.legal_nodes(layer, row).choose(rng).unwrap());
            }
        }
    }
    genome.head_index = *topo.legal_heads(config.num_layers).choose(rng).unwrap();
}

/// Legal categories of `gene` given the rest of `context`.
///
/// Category numbering follows [`super::encoding::gene_values`].
pub fn legal_values(
    context: &Genome,
    gene: Gene,
    config: &SearchSpaceConfig,
    branches: BranchFilter,
) -> Vec<usize> {
    let topo = context.topology();
    let last = config.num_layers - 1;
    let bc = context.branch_count;
    match gene {
        Gene::BranchCount => match branches {
            Some(b) => vec![b as usize - 1],
            None => (1..=3u8)
                .filter(|b| config.branch_supported(*b))
                .map(|b| b as usize - 1)
                .collect(),
        },
        Gene::Downsample(0) if bc >= 2 => {
            let upper = match (bc, context.downsample_layers[1]) {
                (3, Some(d3)) if d3 >= 2 && d3 <= last => d3 - 1,
                _ => last,
            };
            (1..=upper).collect()
        }
        Gene::Downsample(1) if bc == 3 => {
            let lower = match context.downsample_layers[0] {
                Some(d2) if d2 >= 1 && d2 < last => d2 + 1,
                _ => 1,
            };
            (lower..=last).collect()
        }
        Gene::Downsample(_) => vec![0],
        Gene::CellOp { layer, row } => {
            if topo.is_active(layer, row) {
                (1..=Operator::ALL.len()).collect()
            } else {
                vec![0]
            }
        }
        Gene::CellWidth { layer, row } => {
            if topo.is_active(layer, row) {
                (1..=config.width_multipliers.len()).collect()
            } else {
                vec![0]
            }
        }
        Gene::Node { layer, row } => {
            if topo.is_active(layer, row) {
                topo.legal_nodes(layer, row)
                    .into_iter()
                    .map(|n| n.mask() as usize + 1)
                    .collect()
            } else {
                vec![0]
            }
        }
        Gene::Head => topo.legal_heads(config.num_layers),
    }
}

/// Bring a structurally well-formed genome back to constraint validity by
/// resampling only the offending gene groups.
pub fn repair<R: Rng + ?Sized>(
    mut genome: Genome,
    config: &SearchSpaceConfig,
    branches: BranchFilter,
    rng: &mut R,
) -> Genome {
    let last = config.num_layers - 1;
    let bc_ok = match branches {
        Some(b) => genome.branch_count == b,
        None => config.branch_supported(genome.branch_count),
    };
    if !bc_ok {
        genome.branch_count = match branches {
            Some(b) => b,
            None => sample_branch_count(config, rng),
        };
    }
    let bc = genome.branch_count;

    // Downsample positions.
    let in_range = |d: Option<usize>| d.filter(|d| (1..=last).contains(d));
    let mut d = [
        in_range(genome.downsample_layers[0]),
        in_range(genome.downsample_layers[1]),
    ];
    match bc {
        1 => d = [None, None],
        2 => {
            d[1] = None;
            if d[0].is_none() {
                d[0] = Some(rng.gen_range(1..=last));
            }
        }
        _ => match d {
            [Some(a), Some(b)] if a < b => {}
            [Some(a), Some(b)] if a > b => d = [Some(b), Some(a)],
            [Some(a), _] if a < last => d[1] = Some(rng.gen_range(a + 1..=last)),
            [_, Some(b)] if b > 1 => d[0] = Some(rng.gen_range(1..b)),
            _ => d = sample_downsample(config, 3, rng),
        },
    }
    genome.downsample_layers = d;

    let topo: Topology = genome.topology();
    for layer in 0..config.num_layers {
        for row in 0..NUM_ROWS {
            let active = topo.is_active(layer, row);
            let cell = genome.cell_mut(layer, row);
            *cell = match (*cell, active) {
                (_, false) => None,
                (Some(c), true) if c.width_index < config.width_multipliers.len() => Some(c),
                (Some(c), true) => Some(CellGene {
                    operator: c.operator,
                    width_index: rng.gen_range(0..config.width_multipliers.len()),
                }),
                (None, true) => Some(random_cell(config, rng)),
            };
            if layer == 0 {
                continue;
            }
            let legal = if active {
                topo.legal_nodes(layer, row)
            } else {
                Vec::new()
            };
            let node = genome.node_mut(layer, row);
            *node = match (*node, active) {
                (_, false) => None,
                (Some(n), true) if legal.contains(&n) => Some(n),
                (Some(n), true) => {
                    // Keep whatever part of the old fusion still makes sense.
                    let trimmed =
                        NodeGene::from_mask(n.mask() & topo.available_edges(layer, row).mask())
                            .filter(|t| legal.contains(t));
                    Some(trimmed.unwrap_or_else(|| *legal.choose(rng).unwrap()))
                }
                (None, true) => Some(*legal.choose(rng).unwrap()),
            };
        }
    }
    let heads = topo.legal_heads(config.num_layers);
    if !heads.contains(&genome.head_index) {
        genome.head_index = *heads.choose(rng).unwrap();
    }
    debug_assert!(super::validate(&genome, config).is_empty());
    genome
}

/// All valid genomes of `config` (optionally with a fixed branch count), in a
/// deterministic order. Fails when more than `limit` genomes exist.
pub fn enumerate_genomes(
    config: &SearchSpaceConfig,
    branches: BranchFilter,
    limit: usize,
) -> Result<Vec<Genome>, SearchSpaceError> {
    let last = config.num_layers - 1;
    let cells: Vec<CellGene> = Operator::ALL
        .iter()
        .flat_map(|&operator| {
            (0..config.width_multipliers.len()).map(move |width_index| CellGene {
                operator,
                width_index,
            })
        })
        .collect();

    let mut out = Vec::new();
    for bc in 1..=3u8 {
        let allowed = match branches {
            Some(b) => b == bc,
            None => config.branch_supported(bc),
        };
        if !allowed {
            continue;
        }
        let downsamples: Vec<[Option<usize>; 2]> = match bc {
            1 => vec![[None, None]],
            2 => (1..=last).map(|a| [Some(a), None]).collect(),
            _ => (1..=last)
                .flat_map(|a| (a + 1..=last).map(move |b| [Some(a), Some(b)]))
                .collect(),
        };
        for downsample_layers in downsamples {
            let mut template = Genome {
                branch_count: bc,
                downsample_layers,
                cells: vec![None; config.num_layers * NUM_ROWS],
                nodes: vec![None; (config.num_layers - 1) * NUM_ROWS],
                head_index: 0,
            };
            let topo = template.topology();
            // Each choice: (slot kind, number of options).
            enum Slot {
                Cell(usize, usize),
                Node(usize, usize, Vec<NodeGene>),
                Head(Vec<usize>),
            }
            let mut slots = Vec::new();
            for layer in 0..config.num_layers {
                for row in 0..NUM_ROWS {
                    if !topo.is_active(layer, row) {
                        continue;
                    }
                    slots.push(Slot::Cell(layer, row));
                    if layer > 0 {
                        slots.push(Slot::Node(layer, row, topo.legal_nodes(layer, row)));
                    }
                }
            }
            slots.push(Slot::Head(topo.legal_heads(config.num_layers)));
            let radix: Vec<usize> = slots
                .iter()
                .map(|s| match s {
                    Slot::Cell(..) => cells.len(),
                    Slot::Node(_, _, legal) => legal.len(),
                    Slot::Head(h) => h.len(),
                })
                .collect();
            let count = radix
                .iter()
                .try_fold(1usize, |acc, r| acc.checked_mul(*r))
                .filter(|c| out.len() + c <= limit)
                .ok_or(SearchSpaceError::TooLarge { limit })?;
            let mut digits = vec![0usize; radix.len()];
            for _ in 0..count {
                for (slot, &digit) in slots.iter().zip(&digits) {
                    match slot {
                        Slot::Cell(l, r) => *template.cell_mut(*l, *r) = Some(cells[digit]),
                        Slot::Node(l, r, legal) => *template.node_mut(*l, *r) = Some(legal[digit]),
                        Slot::Head(h) => template.head_index = h[digit],
                    }
                }
                out.push(template.clone());
                // Mixed-radix increment, last slot fastest.
                for i in (0..digits.len()).rev() {
                    digits[i] += 1;
                    if digits[i] < radix[i] {
                        break;
                    }
                    digits[i] = 0;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search_space::validate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampling_is_deterministic() {
        let config = SearchSpaceConfig::default();
        assert_eq!(sample(&config, 42), sample(&config, 42));
    }

    #[test]
    fn degenerate_prior_always_three_branches() {
        let mut config = SearchSpaceConfig::toy();
        config.branch_priors = [0.0, 0.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            assert_eq!(sample_with(&config, None, &mut rng).branch_count, 3);
        }
    }

    #[test]
    fn toy_one_branch_space_size() {
        let config = SearchSpaceConfig::toy();
        let all = enumerate_genomes(&config, Some(1), 4096).unwrap();
        // Four cells with 2 operators x 3 widths; nodes and head are forced.
        assert_eq!(all.len(), 6usize.pow(4));
        assert!(all.iter().all(|g| validate(g, &config).is_empty()));
        let mut keys: Vec<_> = all.iter().map(|g| format!("{g:?}")).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), all.len());
    }

    #[test]
    fn enumeration_respects_limit() {
        let config = SearchSpaceConfig::toy();
        assert!(matches!(
            enumerate_genomes(&config, None, 10_000),
            Err(SearchSpaceError::TooLarge { .. })
        ));
    }

    #[test]
    fn repair_fixes_broken_topology_and_slots() {
        let config = SearchSpaceConfig::toy();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..200 {
            let mut g = sample(&config, seed);
            g.branch_count = 3;
            g.downsample_layers = [Some(2), Some(2)];
            g.head_index = 5;
            let fixed = repair(g, &config, None, &mut rng);
            assert!(validate(&fixed, &config).is_empty(), "{fixed:?}");
        }
    }

    #[test]
    fn repair_keeps_valid_genomes() {
        let config = SearchSpaceConfig::toy();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..200 {
            let g = sample(&config, seed);
            assert_eq!(repair(g.clone(), &config, None, &mut rng), g);
        }
    }
}
