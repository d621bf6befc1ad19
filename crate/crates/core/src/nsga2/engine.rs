use std::collections::{HashMap, HashSet};

use rand::Rng as _;

use super::{
    crossover, front_crowding, mutate, non_dominated_indices, non_dominated_sort, rank_and_crowd,
    tournament_select, EvaluatedCandidate, FrontArchive, GenerationSnapshot, Nsga2Error,
    Nsga2Params,
};
use crate::cost_model::HardwareProfile;
use crate::evaluator::{analyze, EvalRequest, Evaluator, ObjectiveVector};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::search_space::{
    encode_with, encoding_key, sample_with, GeneLayout, Genome, SearchSpaceConfig,
};

/// Sample attempts allowed per initial-population slot.
const INIT_ATTEMPTS_PER_SLOT: usize = 100;

struct Engine<'a, E: Evaluator + ?Sized> {
    config: &'a SearchSpaceConfig,
    profile: &'a HardwareProfile,
    params: &'a Nsga2Params,
    evaluator: &'a E,
    layout: GeneLayout,
    archive: FrontArchive,
    seen: HashMap<String, u64>,
    rng: Rng,
    eval_seed: u64,
}

/// A genome that passed the pre-evaluation filters.
struct Pending {
    genome: Genome,
    key: String,
}

/// Run the generational loop: initial `P0 ∪ Q0` from the sampler, then per
/// generation select `P` from `P ∪ Q` and breed a new `Q` of the same size.
pub fn search<E: Evaluator + ?Sized>(
    config: &SearchSpaceConfig,
    profile: &HardwareProfile,
    params: &Nsga2Params,
    evaluator: &E,
) -> Result<FrontArchive, Nsga2Error> {
    params.validate()?;
    config
        .validate()
        .map_err(|e| Nsga2Error::InvalidParams(e.to_string()))?;
    if let Some(b) = params.branches {
        if !config.branch_supported(b) {
            return Err(Nsga2Error::InvalidParams(format!(
                "branch count {b} is not supported by this space"
            )));
        }
    }
    let mut engine = Engine {
        config,
        profile,
        params,
        evaluator,
        layout: GeneLayout::new(config),
        archive: FrontArchive::new(params.objectives),
        seen: HashMap::new(),
        rng: rng_from_seed(derive_seed(params.seed, 0)),
        eval_seed: derive_seed(params.seed, 1),
    };
    engine.run()?;
    engine.archive.finalize(params.top_k);
    Ok(engine.archive)
}

impl<E: Evaluator + ?Sized> Engine<'_, E> {
    fn run(&mut self) -> Result<(), Nsga2Error> {
        let n = self.params.population_size;
        let initial = self.initialize(2 * n)?;
        let mut population = self.select(&initial, n);
        self.snapshot(0, &population);
        for generation in 1..=self.params.generations {
            let offspring = self.breed(&population, generation)?;
            let mut pool = population.clone();
            for id in offspring {
                if !pool.contains(&id) {
                    pool.push(id);
                }
            }
            population = self.select(&pool, n);
            self.snapshot(generation, &population);
        }
        Ok(())
    }

    fn key(&self, genome: &Genome) -> String {
        encoding_key(&encode_with(genome, &self.layout, self.config).expect("valid genomes encode"))
    }

    fn over_cap(&self, latency_ms: f64) -> bool {
        self.params.latency_cap.is_some_and(|cap| latency_ms > cap)
    }

    fn estimated_latency(&self, genome: &Genome) -> f64 {
        analyze(genome, self.config, self.profile)
            .map(|s| s.latency_ms)
            .unwrap_or(f64::INFINITY)
    }

    /// Evaluate `batch` and append the results to the archive, returning
    /// their ids. On failure the archive keeps everything evaluated so far.
    fn evaluate(&mut self, batch: Vec<Pending>, generation: usize) -> Result<Vec<u64>, Nsga2Error> {
        let first = self.archive.candidates.len() as u64;
        let requests: Vec<EvalRequest> = batch
            .iter()
            .enumerate()
            .map(|(k, p)| EvalRequest {
                id: first + k as u64,
                genome: p.genome.clone(),
                seed: derive_seed(self.eval_seed, first + k as u64),
            })
            .collect();
        let results = self.evaluator.evaluate_batch(&requests);
        let mut ids = Vec::with_capacity(batch.len());
        for ((pending, request), result) in batch.into_iter().zip(requests).zip(results) {
            match result {
                Ok(objectives) => {
                    self.seen.insert(pending.key.clone(), request.id);
                    self.archive.candidates.push(EvaluatedCandidate {
                        id: request.id,
                        genome: pending.genome,
                        encoding: pending.key,
                        objectives,
                        rank: 0,
                        crowding: 0.0,
                        generation,
                    });
                    self.archive.stats.evaluations += 1;
                    if generation == 0 {
                        self.archive.stats.init_evaluations += 1;
                    } else {
                        self.archive.stats.offspring_evaluations += 1;
                    }
                    ids.push(request.id);
                }
                Err(source) => {
                    let mut partial = std::mem::replace(
                        &mut self.archive,
                        FrontArchive::new(self.params.objectives),
                    );
                    partial.complete = false;
                    partial.finalize(self.params.top_k);
                    return Err(Nsga2Error::EvaluatorFailure {
                        source,
                        partial: Box::new(partial),
                    });
                }
            }
        }
        Ok(ids)
    }

    fn objectives(&self, id: u64) -> &ObjectiveVector {
        &self.archive.candidates[id as usize].objectives
    }

    /// `count` distinct sampled genomes within the latency cap.
    fn initialize(&mut self, count: usize) -> Result<Vec<u64>, Nsga2Error> {
        let budget = count * INIT_ATTEMPTS_PER_SLOT;
        let mut chosen: Vec<u64> = Vec::new();
        while chosen.len() < count {
            let mut batch = Vec::new();
            let mut keys = HashSet::new();
            while chosen.len() + batch.len() < count {
                if self.archive.stats.init_attempts >= budget {
                    return Err(self.infeasible(count, chosen.len() + batch.len(), budget));
                }
                self.archive.stats.init_attempts += 1;
                let genome = sample_with(self.config, self.params.branches, &mut self.rng);
                let key = self.key(&genome);
                if self.seen.contains_key(&key) || keys.contains(&key) {
                    self.archive.stats.duplicate_rejections += 1;
                    continue;
                }
                if self.over_cap(self.estimated_latency(&genome)) {
                    self.archive.stats.cap_rejections += 1;
                    continue;
                }
                keys.insert(key.clone());
                batch.push(Pending { genome, key });
            }
            for id in self.evaluate(batch, 0)? {
                // A measured latency may still exceed the cap.
                if self.over_cap(self.objectives(id).latency_ms) {
                    self.archive.stats.cap_rejections += 1;
                } else {
                    chosen.push(id);
                }
            }
        }
        Ok(chosen)
    }

    fn infeasible(&self, wanted: usize, found: usize, budget: usize) -> Nsga2Error {
        let s = &self.archive.stats;
        let mut msg = format!(
            "found {found} of {wanted} initial candidates in {budget} samples \
             ({} over the latency cap, {} duplicates)",
            s.cap_rejections, s.duplicate_rejections
        );
        if let Some(cap) = self.params.latency_cap {
            msg.push_str(&format!("; latency cap S_max = {cap} ms"));
        }
        Nsga2Error::InfeasibleSpace(msg)
    }

    /// Environmental selection: whole fronts while they fit, then the most
    /// spread-out members of the front that overflows.
    fn select(&self, pool: &[u64], n: usize) -> Vec<u64> {
        let objs: Vec<ObjectiveVector> =
            pool.iter().map(|id| self.objectives(*id).clone()).collect();
        let mut out = Vec::with_capacity(n);
        for front in non_dominated_sort(&objs, self.params.objectives) {
            if out.len() + front.len() <= n {
                out.extend(front.iter().map(|&i| pool[i]));
                continue;
            }
            let crowd = front_crowding(&objs, &front, self.params.objectives);
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&a, &b| crowd[b].total_cmp(&crowd[a]).then(front[a].cmp(&front[b])));
            out.extend(
                order
                    .into_iter()
                    .take(n - out.len())
                    .map(|k| pool[front[k]]),
            );
            break;
        }
        out
    }

    /// One variation attempt: two tournaments, crossover, one child, mutation.
    fn offspring(&mut self, parents: &[u64], rank: &[usize], crowd: &[f64]) -> Genome {
        let pick = tournament_select(rank, crowd, 2, &mut self.rng);
        let a = self.archive.candidates[parents[pick[0]] as usize]
            .genome
            .clone();
        let b = self.archive.candidates[parents[pick[1]] as usize]
            .genome
            .clone();
        let (x, y) = crossover(
            &a,
            &b,
            self.params.crossover_prob,
            self.config,
            self.params.branches,
            &mut self.rng,
        );
        let child = if self.rng.gen_bool(0.5) { x } else { y };
        mutate(
            &child,
            self.params.mutation_rate,
            self.config,
            self.params.branches,
            &mut self.rng,
        )
    }

    /// Checks a candidate against the archive, the current batch and the cap.
    fn admit(&mut self, genome: Genome, batch_keys: &HashSet<String>) -> Option<Pending> {
        let key = self.key(&genome);
        if self.seen.contains_key(&key) || batch_keys.contains(&key) {
            self.archive.stats.duplicate_rejections += 1;
            return None;
        }
        if self.over_cap(self.estimated_latency(&genome)) {
            self.archive.stats.cap_rejections += 1;
            return None;
        }
        Some(Pending { genome, key })
    }

    /// A new offspring for one slot, or `None` when every attempt (variation,
    /// then fresh samples) was rejected.
    fn fill_slot(
        &mut self,
        parents: &[u64],
        rank: &[usize],
        crowd: &[f64],
        batch_keys: &HashSet<String>,
    ) -> Option<Pending> {
        for _ in 0..self.params.max_slot_attempts {
            let child = self.offspring(parents, rank, crowd);
            if let Some(p) = self.admit(child, batch_keys) {
                return Some(p);
            }
        }
        for _ in 0..self.params.max_slot_attempts {
            let fresh = sample_with(self.config, self.params.branches, &mut self.rng);
            if let Some(p) = self.admit(fresh, batch_keys) {
                self.archive.stats.fresh_fills += 1;
                return Some(p);
            }
        }
        None
    }

    /// Breed `population.len()` accepted offspring.
    fn breed(&mut self, population: &[u64], generation: usize) -> Result<Vec<u64>, Nsga2Error> {
        let n = population.len();
        let objs: Vec<ObjectiveVector> = population
            .iter()
            .map(|id| self.objectives(*id).clone())
            .collect();
        let (rank, crowd) = rank_and_crowd(&objs, self.params.objectives);
        let mut accepted: Vec<u64> = Vec::with_capacity(n);
        // Post-evaluation rejections (score floor, measured cap) are bounded
        // so an unreachable floor cannot loop forever.
        let mut late_rejections = 0;
        let late_budget = n * self.params.max_slot_attempts;
        while accepted.len() < n {
            let mut batch = Vec::new();
            let mut keys = HashSet::new();
            let mut stale = 0;
            for _ in accepted.len()..n {
                let slot = if late_rejections < late_budget {
                    self.fill_slot(population, &rank, &crowd, &keys)
                } else {
                    None
                };
                match slot {
                    Some(p) => {
                        keys.insert(p.key.clone());
                        batch.push(p);
                    }
                    None => stale += 1,
                }
            }
            for _ in 0..stale {
                // Nothing new to try: re-use a tournament winner.
                let pick = tournament_select(&rank, &crowd, 1, &mut self.rng)[0];
                accepted.push(population[pick]);
                self.archive.stats.stale_fills += 1;
            }
            for id in self.evaluate(batch, generation)? {
                let o = self.objectives(id);
                if self.over_cap(o.latency_ms) {
                    self.archive.stats.cap_rejections += 1;
                    late_rejections += 1;
                } else if self.params.score_min.is_some_and(|min| !(o.score > min)) {
                    self.archive.stats.floor_rejections += 1;
                    late_rejections += 1;
                } else {
                    accepted.push(id);
                }
            }
        }
        Ok(accepted)
    }

    fn snapshot(&mut self, generation: usize, population: &[u64]) {
        let objs = self.archive.objective_vectors();
        let front = non_dominated_indices(&objs, self.params.objectives)
            .into_iter()
            .map(|i| i as u64)
            .collect();
        self.archive.history.push(GenerationSnapshot {
            generation,
            evaluations: self.archive.stats.evaluations,
            population: population.to_vec(),
            front,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{ConstantEvaluator, ProxyEvaluator};

    fn toy_params(seed: u64) -> Nsga2Params {
        Nsga2Params {
            population_size: 8,
            generations: 4,
            seed,
            branches: Some(1),
            ..Nsga2Params::default()
        }
    }

    #[test]
    fn budget_is_population_times_generations() {
        let config = SearchSpaceConfig::toy();
        let profile = HardwareProfile::unit();
        let ev = ProxyEvaluator::new(config.clone(), profile.clone());
        let a = search(&config, &profile, &toy_params(1), &ev).unwrap();
        assert_eq!(a.stats.init_evaluations, 16);
        assert_eq!(a.stats.offspring_evaluations, 8 * 4);
        assert_eq!(a.candidates.len(), 16 + 32);
        assert_eq!(a.history.len(), 5);
        assert!(a.complete);
    }

    #[test]
    fn seeded_runs_repeat() {
        let config = SearchSpaceConfig::toy();
        let profile = HardwareProfile::unit();
        let ev = ProxyEvaluator::new(config.clone(), profile.clone());
        let a = search(&config, &profile, &toy_params(3), &ev).unwrap();
        let b = search(&config, &profile, &toy_params(3), &ev).unwrap();
        assert_eq!(a, b);
        let c = search(&config, &profile, &toy_params(4), &ev).unwrap();
        assert_ne!(a.candidates, c.candidates);
    }

    #[test]
    fn no_duplicate_encodings_are_evaluated() {
        let config = SearchSpaceConfig::toy();
        let profile = HardwareProfile::unit();
        let ev = ProxyEvaluator::new(config.clone(), profile.clone());
        let a = search(&config, &profile, &toy_params(5), &ev).unwrap();
        let keys: HashSet<&str> = a.candidates.iter().map(|c| c.encoding.as_str()).collect();
        assert_eq!(keys.len(), a.candidates.len());
    }

    #[test]
    fn impossible_cap_names_the_cap() {
        let config = SearchSpaceConfig::toy();
        let profile = HardwareProfile::unit();
        let params = Nsga2Params {
            latency_cap: Some(1e-6),
            ..toy_params(0)
        };
        let err = search(&config, &profile, &params, &ConstantEvaluator::new(50.0)).unwrap_err();
        match err {
            Nsga2Error::InfeasibleSpace(msg) => assert!(msg.contains("latency cap"), "{msg}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unreachable_floor_terminates_with_stale_fills() {
        let config = SearchSpaceConfig::toy();
        let profile = HardwareProfile::unit();
        let params = Nsga2Params {
            score_min: Some(99.0),
            max_slot_attempts: 2,
            ..toy_params(0)
        };
        let a = search(&config, &profile, &params, &ConstantEvaluator::new(50.0)).unwrap();
        assert!(a.stats.floor_rejections > 0);
        assert!(a.stats.stale_fills > 0);
    }

    #[test]
    fn bad_params_are_rejected() {
        let config = SearchSpaceConfig::toy();
        let profile = HardwareProfile::unit();
        let params = Nsga2Params {
            population_size: 7,
            ..toy_params(0)
        };
        assert!(matches!(
            search(&config, &profile, &params, &ConstantEvaluator::new(1.0)),
            Err(Nsga2Error::InvalidParams(_))
        ));
    }
}
