use rand::seq::SliceRandom;
use rand::Rng;

use crate::search_space::{
    gene_values, genome_from_values, legal_values, repair, BranchFilter, GeneLayout, Genome,
    SearchSpaceConfig,
};

/// Binary tournament winner between members `a` and `b`: lower rank, then
/// larger crowding distance, then a coin flip.
pub fn tournament<R: Rng + ?Sized>(
    rank: &[usize],
    crowd: &[f64],
    a: usize,
    b: usize,
    rng: &mut R,
) -> usize {
    match rank[a].cmp(&rank[b]) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => match crowd[a].partial_cmp(&crowd[b]) {
            Some(std::cmp::Ordering::Greater) => a,
            Some(std::cmp::Ordering::Less) => b,
            _ => {
                if rng.gen_bool(0.5) {
                    a
                } else {
                    b
                }
            }
        },
    }
}

/// `count` parents, each the winner of a binary tournament between two
/// distinct random members (the same member twice when there is only one).
pub fn tournament_select<R: Rng + ?Sized>(
    rank: &[usize],
    crowd: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    let n = rank.len();
    assert!(n > 0, "tournament over an empty population");
    (0..count)
        .map(|_| {
            let a = rng.gen_range(0..n);
            let b = if n == 1 {
                a
            } else {
                (a + rng.gen_range(1..n)) % n
            };
            tournament(rank, crowd, a, b, rng)
        })
        .collect()
}

/// Swap every gene from layout index `cut` onward, then repair.
pub fn crossover_at<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    cut: usize,
    config: &SearchSpaceConfig,
    branches: BranchFilter,
    rng: &mut R,
) -> (Genome, Genome) {
    let layout = GeneLayout::new(config);
    let va = gene_values(a, &layout, config).expect("parents are well-formed");
    let vb = gene_values(b, &layout, config).expect("parents are well-formed");
    let mut ca = va.clone();
    let mut cb = vb.clone();
    ca[cut..].copy_from_slice(&vb[cut..]);
    cb[cut..].copy_from_slice(&va[cut..]);
    // Cell op and width genes share a segment, so activity stays consistent.
    let ga = genome_from_values(&ca, &layout, config).expect("segment-aligned cut");
    let gb = genome_from_values(&cb, &layout, config).expect("segment-aligned cut");
    (
        repair(ga, config, branches, rng),
        repair(gb, config, branches, rng),
    )
}

/// One-point crossover at a uniformly chosen segment boundary with
/// probability `p_c`; otherwise the parents are returned unchanged.
pub fn crossover<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    p_c: f64,
    config: &SearchSpaceConfig,
    branches: BranchFilter,
    rng: &mut R,
) -> (Genome, Genome) {
    if !rng.gen_bool(p_c.clamp(0.0, 1.0)) {
        return (a.clone(), b.clone());
    }
    let cut = *GeneLayout::new(config).cut_points().choose(rng).unwrap();
    crossover_at(a, b, cut, config, branches, rng)
}

/// Number of genes of `genome` with at least two legal categories.
pub fn mutable_gene_count(
    genome: &Genome,
    config: &SearchSpaceConfig,
    branches: BranchFilter,
) -> usize {
    GeneLayout::new(config)
        .genes()
        .iter()
        .filter(|g| legal_values(genome, **g, config, branches).len() >= 2)
        .count()
}

/// Gene values after mutation but before repair. Each gene with at least two
/// legal categories (judged against the parent) is, with probability `rate`,
/// moved to a different legal category chosen uniformly.
pub fn mutate_values<R: Rng + ?Sized>(
    genome: &Genome,
    rate: f64,
    config: &SearchSpaceConfig,
    branches: BranchFilter,
    rng: &mut R,
) -> Vec<usize> {
    let layout = GeneLayout::new(config);
    let mut values = gene_values(genome, &layout, config).expect("parent is well-formed");
    for (i, gene) in layout.genes().iter().enumerate() {
        let legal = legal_values(genome, *gene, config, branches);
        if legal.len() < 2 || !rng.gen_bool(rate.clamp(0.0, 1.0)) {
            continue;
        }
        let others: Vec<usize> = legal.into_iter().filter(|v| *v != values[i]).collect();
        if let Some(v) = others.choose(rng) {
            values[i] = *v;
        }
    }
    values
}

/// Categorical mutation followed by repair. `rate = None` uses one over the
/// number of mutable genes of `genome`, so one gene changes on average.
pub fn mutate<R: Rng + ?Sized>(
    genome: &Genome,
    rate: Option<f64>,
    config: &SearchSpaceConfig,
    branches: BranchFilter,
    rng: &mut R,
) -> Genome {
    let rate =
        rate.unwrap_or_else(|| 1.0 / mutable_gene_count(genome, config, branches).max(1) as f64);
    let values = mutate_values(genome, rate, config, branches, rng);
    let layout = GeneLayout::new(config);
    let raw = genome_from_values(&values, &layout, config).expect("op and width share activity");
    repair(raw, config, branches, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::search_space::{sample, sample_with, validate, Segment};

    #[test]
    fn tournament_rules() {
        let mut rng = rng_from_seed(0);
        let rank = [0, 2];
        let crowd = [0.0, f64::INFINITY];
        for _ in 0..100 {
            assert_eq!(tournament(&rank, &crowd, 0, 1, &mut rng), 0);
            assert_eq!(tournament(&rank, &crowd, 1, 0, &mut rng), 0);
        }
        let rank = [1, 1];
        let crowd = [f64::INFINITY, 0.3];
        assert_eq!(tournament(&rank, &crowd, 1, 0, &mut rng), 0);
    }

    #[test]
    fn tie_is_a_fair_coin() {
        let mut rng = rng_from_seed(42);
        let rank = [0, 0];
        let crowd = [1.0, 1.0];
        let wins = (0..10_000)
            .filter(|_| tournament(&rank, &crowd, 0, 1, &mut rng) == 0)
            .count();
        let freq = wins as f64 / 10_000.0;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn crossover_identities() {
        let config = SearchSpaceConfig::toy();
        let mut rng = rng_from_seed(1);
        let a = sample(&config, 1);
        let b = sample(&config, 2);
        assert_eq!(
            crossover(&a, &b, 0.0, &config, None, &mut rng),
            (a.clone(), b.clone())
        );
        for _ in 0..20 {
            assert_eq!(
                crossover(&a, &a, 1.0, &config, None, &mut rng),
                (a.clone(), a.clone())
            );
        }
    }

    #[test]
    fn crossover_swaps_the_row32_segment() {
        let config = SearchSpaceConfig::toy();
        let layout = GeneLayout::new(&config);
        let mut rng = rng_from_seed(5);
        let a = sample_with(&config, Some(3), &mut rng);
        // Same topology and everything else; resample only row-2 genes.
        let b = loop {
            let mut g = a.clone();
            for layer in 0..config.num_layers {
                *g.cell_mut(layer, 2) = None;
                if layer > 0 {
                    *g.node_mut(layer, 2) = None;
                }
            }
            let b = repair(g, &config, Some(3), &mut rng);
            if b != a {
                break b;
            }
        };
        let cut = layout.segment_start(Segment::Row(2));
        let (ca, cb) = crossover_at(&a, &b, cut, &config, Some(3), &mut rng);
        let va = gene_values(&a, &layout, &config).unwrap();
        let vb = gene_values(&b, &layout, &config).unwrap();
        let vca = gene_values(&ca, &layout, &config).unwrap();
        let vcb = gene_values(&cb, &layout, &config).unwrap();
        let row2 = layout.segment_range(Segment::Row(2));
        assert_eq!(vca[..row2.start], va[..row2.start]);
        assert_eq!(vca[row2.clone()], vb[row2.clone()]);
        assert_eq!(vcb[row2.clone()], va[row2.clone()]);
        assert_eq!(vca[row2.end..], va[row2.end..]);
        assert_eq!((ca, cb), (b, a));
    }

    #[test]
    fn children_are_valid() {
        let config = SearchSpaceConfig::toy();
        let mut rng = rng_from_seed(7);
        for s in 0..300 {
            let a = sample(&config, s);
            let b = sample(&config, s + 1000);
            let (x, y) = crossover(&a, &b, 1.0, &config, None, &mut rng);
            assert!(validate(&x, &config).is_empty());
            assert!(validate(&y, &config).is_empty());
            let m = mutate(&x, Some(0.3), &config, None, &mut rng);
            assert!(validate(&m, &config).is_empty());
        }
    }

    #[test]
    fn zero_rate_is_identity() {
        let config = SearchSpaceConfig::toy();
        let mut rng = rng_from_seed(3);
        for s in 0..50 {
            let g = sample(&config, s);
            assert_eq!(mutate(&g, Some(0.0), &config, None, &mut rng), g);
        }
    }

    #[test]
    fn full_rate_changes_every_mutable_gene() {
        let config = SearchSpaceConfig::toy();
        let layout = GeneLayout::new(&config);
        let mut rng = rng_from_seed(4);
        for s in 0..100 {
            let g = sample(&config, s);
            let before = gene_values(&g, &layout, &config).unwrap();
            let after = mutate_values(&g, 1.0, &config, None, &mut rng);
            for (i, gene) in layout.genes().iter().enumerate() {
                let n = legal_values(&g, *gene, &config, None).len();
                assert_eq!(after[i] != before[i], n >= 2, "gene {gene:?}");
            }
        }
    }

    #[test]
    fn default_rate_changes_one_gene_on_average() {
        let config = SearchSpaceConfig::toy();
        let layout = GeneLayout::new(&config);
        let mut rng = rng_from_seed(9);
        let g = sample_with(&config, Some(3), &mut rng_from_seed(2));
        let before = gene_values(&g, &layout, &config).unwrap();
        let rate = 1.0 / mutable_gene_count(&g, &config, None) as f64;
        let trials = 10_000;
        let total: usize = (0..trials)
            .map(|_| {
                let after = mutate_values(&g, rate, &config, None, &mut rng);
                before.iter().zip(&after).filter(|(a, b)| a != b).count()
            })
            .sum();
        let mean = total as f64 / trials as f64;
        assert!((mean - 1.0).abs() <= 0.05, "{mean}");
    }
}
