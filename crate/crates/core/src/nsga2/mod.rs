//! Constrained two-objective NSGA-II over genomes.

mod engine;
mod sort;
mod variation;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{EvalError, ObjectivePair, ObjectiveVector};
use crate::search_space::{BranchFilter, Genome};

pub use engine::search;
pub use sort::{
    constrained_dominates, crowded_cmp, crowding_distance, dominates, dominates_2d, front_crowding,
    non_dominated_indices, non_dominated_sort, rank_and_crowd, sort_points,
};
pub use variation::{
    crossover, crossover_at, mutable_gene_count, mutate, mutate_values, tournament,
    tournament_select,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nsga2Params {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-gene mutation probability; `None` means one over the number of
    /// mutable genes of the parent.
    pub mutation_rate: Option<f64>,
    /// Offspring with latency above this are discarded before evaluation.
    pub latency_cap: Option<f64>,
    /// Offspring scoring at or below this are discarded after evaluation.
    pub score_min: Option<f64>,
    pub objectives: ObjectivePair,
    pub seed: u64,
    pub top_k: usize,
    pub branches: BranchFilter,
    /// Variation attempts per offspring slot before falling back to a fresh sample.
    pub max_slot_attempts: usize,
}

impl Default for Nsga2Params {
    fn default() -> Self {
        Nsga2Params {
            population_size: 40,
            generations: 20,
            crossover_prob: 0.9,
            mutation_rate: None,
            latency_cap: None,
            score_min: None,
            objectives: ObjectivePair::Latency,
            seed: 0,
            top_k: 5,
            branches: None,
            max_slot_attempts: 20,
        }
    }
}

impl Nsga2Params {
    pub fn validate(&self) -> Result<(), Nsga2Error> {
        let bad = |m: &str| Err(Nsga2Error::InvalidParams(m.to_string()));
        if self.population_size < 2 || self.population_size % 2 != 0 {
            return bad("population_size must be even and at least 2");
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad("crossover_prob must be in [0, 1]");
        }
        if let Some(r) = self.mutation_rate {
            if !(r > 0.0 && r <= 1.0) {
                return bad("mutation_rate must be in (0, 1]");
            }
        }
        if self.max_slot_attempts == 0 {
            return bad("max_slot_attempts must be at least 1");
        }
        if let Some(b) = self.branches {
            if !(1..=3).contains(&b) {
                return bad("branch filter must be 1, 2 or 3");
            }
        }
        Ok(())
    }
}

/// One evaluated genome as stored in the archive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedCandidate {
    /// Evaluation order; also the evaluator request id.
    pub id: u64,
    pub genome: Genome,
    /// One-hot encoding as a `0`/`1` string.
    pub encoding: String,
    pub objectives: ObjectiveVector,
    /// Front index over the whole archive (constrained sort).
    pub rank: usize,
    /// Crowding distance within its archive front.
    pub crowding: f64,
    /// 0 for the initial populations, then the generation that bred it.
    pub generation: usize,
}

/// Counters of everything the engine did besides accepted evaluations.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub evaluations: usize,
    pub init_evaluations: usize,
    /// Evaluations spent on offspring, accepted or not.
    pub offspring_evaluations: usize,
    pub cap_rejections: usize,
    pub floor_rejections: usize,
    pub duplicate_rejections: usize,
    /// Slots filled by a fresh sample after exhausting variation attempts.
    pub fresh_fills: usize,
    /// Slots filled by re-using an archived candidate because no new one
    /// could be found.
    pub stale_fills: usize,
    pub init_attempts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationSnapshot {
    pub generation: usize,
    /// Cumulative evaluations at the end of this generation.
    pub evaluations: usize,
    /// Parent population ids after environmental selection.
    pub population: Vec<u64>,
    /// Archive non-dominated ids at this point.
    pub front: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontArchive {
    pub objectives: ObjectivePair,
    /// Every evaluated candidate in evaluation order (`candidates[i].id == i`).
    pub candidates: Vec<EvaluatedCandidate>,
    /// Ids of the feasible non-dominated members.
    pub front: Vec<u64>,
    /// Up to `top_k` front ids, by decreasing crowding distance.
    pub top_k: Vec<u64>,
    pub history: Vec<GenerationSnapshot>,
    pub stats: SearchStats,
    /// False when the run stopped early on an evaluator failure.
    pub complete: bool,
}

impl FrontArchive {
    pub fn new(objectives: ObjectivePair) -> Self {
        FrontArchive {
            objectives,
            candidates: Vec::new(),
            front: Vec::new(),
            top_k: Vec::new(),
            history: Vec::new(),
            stats: SearchStats::default(),
            complete: true,
        }
    }

    pub fn get(&self, id: u64) -> Option<&EvaluatedCandidate> {
        self.candidates.get(id as usize)
    }

    pub fn front_members(&self) -> impl Iterator<Item = &EvaluatedCandidate> {
        self.front.iter().filter_map(|id| self.get(*id))
    }

    pub fn objective_vectors(&self) -> Vec<ObjectiveVector> {
        self.candidates
            .iter()
            .map(|c| c.objectives.clone())
            .collect()
    }

    /// Recompute ranks, crowding, the front and the top-k list.
    pub fn finalize(&mut self, top_k: usize) {
        let objs = self.objective_vectors();
        let (rank, crowd) = rank_and_crowd(&objs, self.objectives);
        for (c, (r, d)) in self.candidates.iter_mut().zip(rank.into_iter().zip(crowd)) {
            c.rank = r;
            c.crowding = d;
        }
        self.front = non_dominated_indices(&objs, self.objectives)
            .into_iter()
            .map(|i| i as u64)
            .collect();
        let mut by_crowd = self.front.clone();
        by_crowd.sort_by(|a, b| {
            let (ca, cb) = (&self.candidates[*a as usize], &self.candidates[*b as usize]);
            cb.crowding.total_cmp(&ca.crowding).then(a.cmp(b))
        });
        by_crowd.truncate(top_k);
        self.top_k = by_crowd;
    }
}

#[derive(Debug, Error)]
pub enum Nsga2Error {
    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
    #[error("infeasible space: {0}")]
    InfeasibleSpace(String),
    #[error("evaluator failed after {} evaluations: {source}", partial.candidates.len())]
    EvaluatorFailure {
        source: EvalError,
        partial: Box<FrontArchive>,
    },
}
