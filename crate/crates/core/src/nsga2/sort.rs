use std::cmp::Ordering;

use crate::evaluator::{ObjectivePair, ObjectiveVector};

/// Pareto dominance on (score ↑, `pair` cost ↓). Feasibility is ignored here;
/// see [`constrained_dominates`].
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector, pair: ObjectivePair) -> bool {
    dominates_2d((a.score, pair.cost(a)), (b.score, pair.cost(b)))
}

/// `(score, cost)` dominance: score maximized, cost minimized.
pub fn dominates_2d(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 <= b.1 && (a.0 > b.0 || a.1 < b.1)
}

/// Feasible beats infeasible; two infeasible compare by violation; two
/// feasible by Pareto dominance.
pub fn constrained_dominates(
    a: &ObjectiveVector,
    b: &ObjectiveVector,
    pair: ObjectivePair,
) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.violation < b.violation,
        (true, true) => dominates(a, b, pair),
    }
}

/// Fast non-dominated sort with constraint handling. Returns fronts of
/// indices into `pop`; within each front, indices are ascending.
///
/// Feasible candidates are sorted by dominance; every infeasible candidate
/// ranks below all of them, grouped into fronts of equal violation in
/// increasing order.
pub fn non_dominated_sort(pop: &[ObjectiveVector], pair: ObjectivePair) -> Vec<Vec<usize>> {
    let feasible: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].feasible).collect();
    let points: Vec<(f64, f64)> = feasible
        .iter()
        .map(|&i| (pop[i].score, pair.cost(&pop[i])))
        .collect();
    let mut fronts: Vec<Vec<usize>> = sort_points(&points)
        .into_iter()
        .map(|f| f.into_iter().map(|k| feasible[k]).collect())
        .collect();

    let mut infeasible: Vec<usize> = (0..pop.len()).filter(|&i| !pop[i].feasible).collect();
    infeasible.sort_by(|&a, &b| {
        pop[a]
            .violation
            .total_cmp(&pop[b].violation)
            .then(a.cmp(&b))
    });
    for i in infeasible {
        match fronts.last_mut() {
            Some(last) if !pop[last[0]].feasible && pop[last[0]].violation == pop[i].violation => {
                last.push(i)
            }
            _ => fronts.push(vec![i]),
        }
    }
    fronts
}

/// Non-dominated sort of bare `(score, cost)` points.
pub fn sort_points(points: &[(f64, f64)]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates_2d(points[i], points[j]) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates_2d(points[j], points[i]) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Indices of the non-dominated members among the feasible ones.
pub fn non_dominated_indices(pop: &[ObjectiveVector], pair: ObjectivePair) -> Vec<usize> {
    let feasible: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].feasible).collect();
    feasible
        .iter()
        .copied()
        .filter(|&i| !feasible.iter().any(|&j| dominates(&pop[j], &pop[i], pair)))
        .collect()
}

/// Crowding distance of each point of one front, in input order. Extremes on
/// either axis get `f64::INFINITY`; an axis with zero range adds nothing.
pub fn crowding_distance(points: &[(f64, f64)]) -> Vec<f64> {
    let n = points.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for axis in 0..2 {
        let value = |i: usize| if axis == 0 { points[i].0 } else { points[i].1 };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let (lo, hi) = (value(order[0]), value(order[n - 1]));
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for k in 1..n - 1 {
            dist[order[k]] += (value(order[k + 1]) - value(order[k - 1])) / range;
        }
    }
    dist
}

/// Crowding distance of the candidates `front` (indices into `pop`).
pub fn front_crowding(pop: &[ObjectiveVector], front: &[usize], pair: ObjectivePair) -> Vec<f64> {
    let points: Vec<(f64, f64)> = front
        .iter()
        .map(|&i| (pop[i].score, pair.cost(&pop[i])))
        .collect();
    crowding_distance(&points)
}

/// Rank (front index) and crowding distance of every member of `pop`.
pub fn rank_and_crowd(pop: &[ObjectiveVector], pair: ObjectivePair) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; pop.len()];
    let mut crowd = vec![0.0; pop.len()];
    for (r, front) in non_dominated_sort(pop, pair).iter().enumerate() {
        for (&i, d) in front.iter().zip(front_crowding(pop, front, pair)) {
            rank[i] = r;
            crowd[i] = d;
        }
    }
    (rank, crowd)
}

/// Selection order: lower rank first, then larger crowding distance, then
/// lower index.
pub fn crowded_cmp(rank: &[usize], crowd: &[f64], a: usize, b: usize) -> Ordering {
    rank[a]
        .cmp(&rank[b])
        .then(crowd[b].total_cmp(&crowd[a]))
        .then(a.cmp(&b))
}
