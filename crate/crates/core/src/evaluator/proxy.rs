use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{analyze, EvalError, EvalRequest, Evaluator, ObjectiveVector, Source};
use crate::cost_model::HardwareProfile;
use crate::rng::rng_from_seed;
use crate::search_space::{Genome, Operator, SearchSpaceConfig};

/// Constants of the synthetic score. The score is not a segmentation
/// metric; it is a smooth, capacity-monotone stand-in used to exercise the
/// search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxyParams {
    /// Weight on `ln(1 + flops_g)`.
    pub a: f64,
    /// Weight on the depth bonus (active cells per layer).
    pub b: f64,
    /// Weight on the attention-placement indicator.
    pub c: f64,
    /// Subtracted inside the sigmoid. 0 by default.
    pub bias: f64,
    /// Amplitude of uniform seeded noise added to the score.
    pub epsilon: f64,
}

impl Default for ProxyParams {
    fn default() -> Self {
        ProxyParams {
            a: 0.35,
            b: 0.05,
            c: 3.0,
            bias: 0.0,
            epsilon: 0.0,
        }
    }
}

/// Active cells divided by the number of cell layers.
pub fn depth_bonus(genome: &Genome, config: &SearchSpaceConfig) -> f64 {
    genome.active_cell_count() as f64 / config.num_layers as f64
}

/// 1 if any attention cell sits on the preferred row, else 0. The preferred
/// row is the deepest active one; for a single-branch genome that is the
/// highest-resolution row.
pub fn attention_placement_bonus(genome: &Genome, config: &SearchSpaceConfig) -> f64 {
    let row = genome.branch_count.max(1) as usize - 1;
    let hit = (0..config.num_layers).any(|layer| {
        genome
            .cell(layer, row)
            .is_some_and(|c| c.operator == Operator::MemEffSelfAttention)
    });
    if hit {
        1.0
    } else {
        0.0
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn evaluate_proxy(
    genome: &Genome,
    config: &SearchSpaceConfig,
    profile: &HardwareProfile,
    params: &ProxyParams,
    seed: u64,
) -> Result<ObjectiveVector, EvalError> {
    let summary = analyze(genome, config, profile)?;
    let flops_g = summary.cost.flops_g();
    let x = params.a * flops_g.ln_1p()
        + params.b * depth_bonus(genome, config)
        + params.c * attention_placement_bonus(genome, config)
        - params.bias;
    let mut score = 100.0 * sigmoid(x);
    if params.epsilon > 0.0 {
        score += rng_from_seed(seed).gen_range(-params.epsilon..=params.epsilon);
    }
    Ok(summary.objectives(score.clamp(0.0, 100.0), Source::Proxy))
}

#[derive(Clone, Debug)]
pub struct ProxyEvaluator {
    pub config: SearchSpaceConfig,
    pub profile: HardwareProfile,
    pub params: ProxyParams,
}

impl ProxyEvaluator {
    pub fn new(config: SearchSpaceConfig, profile: HardwareProfile) -> Self {
        ProxyEvaluator {
            config,
            profile,
            params: ProxyParams::default(),
        }
    }
}

impl Evaluator for ProxyEvaluator {
    fn evaluate(&self, request: &EvalRequest) -> Result<ObjectiveVector, EvalError> {
        evaluate_proxy(
            &request.genome,
            &self.config,
            &self.profile,
            &self.params,
            request.seed,
        )
    }
}
