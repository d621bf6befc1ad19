//! Reference searches and analysis helpers: random sampling, single-edit
//! local search, FLOPs-matched selection and rank correlation.

mod correlation;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{EvalError, EvalRequest, Evaluator, ObjectivePair};
use crate::nsga2::{dominates, dominates_2d, EvaluatedCandidate, FrontArchive};
use crate::rng::{derive_seed, rng_from_seed};
use crate::search_space::{
    encode_with, encoding_key, neighbors, sample_with, BranchFilter, GeneLayout, Genome,
    SearchSpaceConfig, SearchSpaceError,
};

pub use correlation::{align, kendall_tau, kendall_tau_b, parse_values, pearson_r, read_values};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("invalid baseline parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Space(#[from] SearchSpaceError),
    #[error("front is empty")]
    EmptyFront,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two values, got {0}")]
    TooShort(usize),
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("ids do not line up: {0}")]
    Misaligned(String),
    #[error("cannot parse values: {0}")]
    Parse(String),
}

struct Pool<'a, E: Evaluator + ?Sized> {
    config: &'a SearchSpaceConfig,
    evaluator: &'a E,
    layout: GeneLayout,
    eval_seed: u64,
    archive: FrontArchive,
}

impl<'a, E: Evaluator + ?Sized> Pool<'a, E> {
    fn new(
        config: &'a SearchSpaceConfig,
        evaluator: &'a E,
        seed: u64,
        objectives: ObjectivePair,
    ) -> Self {
        Pool {
            config,
            evaluator,
            layout: GeneLayout::new(config),
            eval_seed: derive_seed(seed, 1),
            archive: FrontArchive::new(objectives),
        }
    }

    fn key(&self, genome: &Genome) -> String {
        encoding_key(&encode_with(genome, &self.layout, self.config).expect("valid genomes encode"))
    }

    /// Evaluate and append; returns the new ids.
    fn evaluate(
        &mut self,
        genomes: Vec<Genome>,
        generation: usize,
    ) -> Result<Vec<u64>, BaselineError> {
        let first = self.archive.candidates.len() as u64;
        let requests: Vec<EvalRequest> = genomes
            .into_iter()
            .enumerate()
            .map(|(k, genome)| EvalRequest {
                id: first + k as u64,
                genome,
                seed: derive_seed(self.eval_seed, first + k as u64),
            })
            .collect();
        let results = self.evaluator.evaluate_batch(&requests);
        let mut ids = Vec::new();
        for (req, res) in requests.into_iter().zip(results) {
            let objectives = res?;
            let encoding = self.key(&req.genome);
            self.archive.candidates.push(EvaluatedCandidate {
                id: req.id,
                genome: req.genome,
                encoding,
                objectives,
                rank: 0,
                crowding: 0.0,
                generation,
            });
            self.archive.stats.evaluations += 1;
            ids.push(req.id);
        }
        Ok(ids)
    }
}

/// `n` distinct prior-biased samples, all evaluated. Stops early if the
/// space (under `branches`) runs out of unseen genomes.
pub fn random_baseline<E: Evaluator + ?Sized>(
    config: &SearchSpaceConfig,
    n: usize,
    branches: BranchFilter,
    objectives: ObjectivePair,
    evaluator: &E,
    seed: u64,
) -> Result<FrontArchive, BaselineError> {
    if n == 0 {
        return Err(BaselineError::InvalidParams("n must be at least 1".into()));
    }
    let mut pool = Pool::new(config, evaluator, seed, objectives);
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let mut keys = HashSet::new();
    let mut genomes = Vec::new();
    let mut attempts = 0;
    while genomes.len() < n && attempts < n * 100 {
        attempts += 1;
        let g = sample_with(config, branches, &mut rng);
        if keys.insert(pool.key(&g)) {
            genomes.push(g);
        } else {
            pool.archive.stats.duplicate_rejections += 1;
        }
    }
    pool.archive.stats.init_attempts = attempts;
    pool.evaluate(genomes, 0)?;
    pool.archive.stats.init_evaluations = pool.archive.stats.evaluations;
    pool.archive.finalize(usize::MAX);
    Ok(pool.archive)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSearchParams {
    pub seeds: usize,
    pub iterations: usize,
    pub neighbors: usize,
    /// Acceptance pair; the pooled front uses the same pair.
    pub objectives: ObjectivePair,
    pub branches: BranchFilter,
}

impl Default for LocalSearchParams {
    fn default() -> Self {
        LocalSearchParams {
            seeds: 5,
            iterations: 32,
            neighbors: 5,
            objectives: ObjectivePair::Flops,
            branches: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSearchOutcome {
    /// Every evaluated candidate across all seeds (duplicates kept);
    /// `generation` holds the iteration (0 for the starting point).
    pub pool: FrontArchive,
    /// Iterations without a move, per seed.
    pub stalls: Vec<usize>,
    /// Ids of the final incumbent of each seed.
    pub incumbents: Vec<u64>,
}

/// Single-edit hill climbing: a neighbor replaces the incumbent only if it
/// strictly dominates it. When several do, the first in draw order wins.
pub fn local_search<E: Evaluator + ?Sized>(
    config: &SearchSpaceConfig,
    params: &LocalSearchParams,
    evaluator: &E,
    seed: u64,
) -> Result<LocalSearchOutcome, BaselineError> {
    if params.seeds == 0 || params.iterations == 0 || params.neighbors == 0 {
        return Err(BaselineError::InvalidParams(
            "seeds, iterations and neighbors must be >= 1".into(),
        ));
    }
    let pair = params.objectives;
    let mut pool = Pool::new(config, evaluator, seed, pair);
    let mut stalls = Vec::new();
    let mut incumbents = Vec::new();
    for s in 0..params.seeds {
        let stream = derive_seed(seed, 100 + s as u64);
        let mut rng = rng_from_seed(stream);
        let start = sample_with(config, params.branches, &mut rng);
        let mut incumbent = pool.evaluate(vec![start], 0)?[0];
        let mut stalled = 0;
        for it in 0..params.iterations {
            let genome = pool.archive.candidates[incumbent as usize].genome.clone();
            let edits = neighbors(
                &genome,
                config,
                derive_seed(stream, it as u64 + 1),
                params.neighbors,
            )?;
            let ids = pool.evaluate(edits, it + 1)?;
            let current = pool.archive.candidates[incumbent as usize]
                .objectives
                .clone();
            match ids.iter().find(|id| {
                dominates(
                    &pool.archive.candidates[**id as usize].objectives,
                    &current,
                    pair,
                )
            }) {
                Some(&better) => incumbent = better,
                None => stalled += 1,
            }
        }
        stalls.push(stalled);
        incumbents.push(incumbent);
    }
    pool.archive.finalize(usize::MAX);
    Ok(LocalSearchOutcome {
        pool: pool.archive,
        stalls,
        incumbents,
    })
}

/// For each target, the front member with FLOPs closest to it. Ties go to
/// lower latency, then the smaller encoding.
pub fn select_closest_by_flops<'a>(
    front: &[&'a EvaluatedCandidate],
    targets: &[f64],
) -> Result<Vec<&'a EvaluatedCandidate>, BaselineError> {
    if front.is_empty() {
        return Err(BaselineError::EmptyFront);
    }
    Ok(targets
        .iter()
        .map(|t| {
            *front
                .iter()
                .min_by(|a, b| {
                    let (da, db) = (
                        (a.objectives.flops_g - t).abs(),
                        (b.objectives.flops_g - t).abs(),
                    );
                    da.total_cmp(&db)
                        .then(a.objectives.latency_ms.total_cmp(&b.objectives.latency_ms))
                        .then(a.encoding.cmp(&b.encoding))
                })
                .unwrap()
        })
        .collect())
}

/// True when every point of `b` is weakly dominated (no worse on both axes)
/// by some point of `a`. Points are `(score ↑, cost ↓)`.
pub fn front_weakly_dominates(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    b.iter()
        .all(|q| a.iter().any(|p| p == q || dominates_2d(*p, *q)))
}

/// `(score, cost)` points of an archive's front.
pub fn front_points(archive: &FrontArchive) -> Vec<(f64, f64)> {
    archive
        .front_members()
        .map(|c| (c.objectives.score, archive.objectives.cost(&c.objectives)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost_model::HardwareProfile;
    use crate::evaluator::{ConstantEvaluator, ObjectiveVector, ProxyEvaluator, RuleEvaluator};

    fn cand(id: u64, flops: f64, latency: f64, enc: &str) -> EvaluatedCandidate {
        EvaluatedCandidate {
            id,
            genome: crate::search_space::sample(&SearchSpaceConfig::toy(), id),
            encoding: enc.to_string(),
            objectives: ObjectiveVector::point(50.0, latency, flops, 1.0),
            rank: 0,
            crowding: 0.0,
            generation: 0,
        }
    }

    #[test]
    fn random_single_and_repeatable() {
        let config = SearchSpaceConfig::toy();
        let ev = ProxyEvaluator::new(config.clone(), HardwareProfile::unit());
        let one = random_baseline(&config, 1, None, ObjectivePair::Latency, &ev, 3).unwrap();
        assert_eq!(one.candidates.len(), 1);
        assert_eq!(one.front, vec![0]);
        let a = random_baseline(&config, 50, None, ObjectivePair::Latency, &ev, 9).unwrap();
        let b = random_baseline(&config, 50, None, ObjectivePair::Latency, &ev, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_evaluator_never_moves() {
        let config = SearchSpaceConfig::toy();
        let params = LocalSearchParams {
            seeds: 2,
            iterations: 4,
            neighbors: 3,
            ..LocalSearchParams::default()
        };
        let out = local_search(&config, &params, &ConstantEvaluator::new(10.0), 1).unwrap();
        assert_eq!(out.pool.candidates.len(), 2 * (1 + 4 * 3));
        assert_eq!(out.stalls, vec![4, 4]);
        assert_eq!(out.incumbents, vec![0, 13]);
    }

    #[test]
    fn a_strictly_better_edit_is_taken_at_once() {
        // Score rises and FLOPs fall with the number of attention cells, so
        // any edit that turns a conv into attention strictly dominates.
        let config = SearchSpaceConfig::toy();
        let ev = RuleEvaluator {
            config: config.clone(),
            profile: HardwareProfile::unit(),
            rule: |g: &Genome, _: &crate::evaluator::CostSummary| {
                g.cells
                    .iter()
                    .flatten()
                    .filter(|c| c.operator == crate::search_space::Operator::MemEffSelfAttention)
                    .count() as f64
            },
        };
        struct Flip<'a, R>(&'a RuleEvaluator<R>);
        impl<R> Evaluator for Flip<'_, R>
        where
            R: Fn(&Genome, &crate::evaluator::CostSummary) -> f64 + Send + Sync,
        {
            fn evaluate(&self, r: &EvalRequest) -> Result<ObjectiveVector, EvalError> {
                let mut v = self.0.evaluate(r)?;
                v.flops_g = 100.0 - v.score;
                Ok(v)
            }
        }
        let params = LocalSearchParams {
            seeds: 1,
            iterations: 1,
            neighbors: 200,
            ..LocalSearchParams::default()
        };
        let out = local_search(&config, &params, &Flip(&ev), 4).unwrap();
        assert_eq!(out.stalls, vec![0]);
        let start = &out.pool.candidates[0].objectives;
        let end = &out.pool.candidates[out.incumbents[0] as usize].objectives;
        assert!(end.score > start.score && end.flops_g < start.flops_g);
    }

    #[test]
    fn closest_by_flops() {
        let a = cand(0, 9.6, 5.0, "a");
        let b = cand(1, 22.4, 9.0, "b");
        let c = cand(2, 335.1, 40.0, "c");
        let front = [&a, &b, &c];
        let got = select_closest_by_flops(&front, &[22.4]).unwrap();
        assert_eq!(got[0].id, 1);
        assert_eq!(select_closest_by_flops(&[&c], &[1.0]).unwrap()[0].id, 2);

        let slow = cand(3, 10.0, 9.0, "a");
        let fast = cand(4, 20.0, 3.0, "b");
        assert_eq!(
            select_closest_by_flops(&[&slow, &fast], &[15.0]).unwrap()[0].id,
            4
        );
        assert!(matches!(
            select_closest_by_flops(&[], &[1.0]),
            Err(BaselineError::EmptyFront)
        ));
    }

    #[test]
    fn weak_front_dominance() {
        let a = [(80.0, 10.0), (70.0, 5.0)];
        assert!(front_weakly_dominates(&a, &[(80.0, 10.0)]));
        assert!(front_weakly_dominates(&a, &[(75.0, 10.0), (60.0, 6.0)]));
        assert!(!front_weakly_dominates(&a, &[(81.0, 10.0)]));
    }
}
