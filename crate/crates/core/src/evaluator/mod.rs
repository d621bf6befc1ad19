//! Genome → objective vector.
//!
//! Every evaluator shares the analytic cost path (FLOPs, parameters, latency
//! estimate, memory check); they differ in where the accuracy-like score
//! comes from.

mod external;
mod protocol;
mod proxy;
mod transport;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost_model::{
    aggregate, check_memory, estimate_latency, HardwareProfile, MemoryCheck, ModelCost,
};
use crate::search_space::{
    decode_to_ir, ArchitectureIR, Genome, SearchSpaceConfig, SearchSpaceError, Violation,
};

pub use external::{
    evaluate_external, serve, Connection, ExternalEvaluator, ExternalReply, RequestMeta,
    DEFAULT_TIMEOUT,
};
pub use protocol::{Message, PROTOCOL_VERSION};
pub use proxy::{evaluate_proxy, ProxyEvaluator, ProxyParams};
pub use transport::{duplex, ChannelTransport, ChildTransport, Transport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Proxy,
    External,
    Constant,
}

/// Evaluated objectives of one candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    /// Accuracy-like score in [0, 100], maximized.
    pub score: f64,
    pub latency_ms: f64,
    pub flops_g: f64,
    pub params_m: f64,
    /// Training-time activation memory, in MB.
    pub peak_mem_mb: f64,
    pub feasible: bool,
    /// Constraint-violation magnitude (MB over the memory budget); 0 when feasible.
    pub violation: f64,
    pub source: Source,
}

impl ObjectiveVector {
    /// A feasible vector with the given score and cost axes (handy in tests).
    pub fn point(score: f64, latency_ms: f64, flops_g: f64, params_m: f64) -> Self {
        ObjectiveVector {
            score,
            latency_ms,
            flops_g,
            params_m,
            peak_mem_mb: 0.0,
            feasible: true,
            violation: 0.0,
            source: Source::Constant,
        }
    }
}

/// The minimized axis paired with the score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectivePair {
    #[default]
    Latency,
    Flops,
    Params,
}

impl ObjectivePair {
    pub fn cost(self, v: &ObjectiveVector) -> f64 {
        match self {
            ObjectivePair::Latency => v.latency_ms,
            ObjectivePair::Flops => v.flops_g,
            ObjectivePair::Params => v.params_m,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ObjectivePair::Latency => "latency_ms",
            ObjectivePair::Flops => "flops_g",
            ObjectivePair::Params => "params_m",
        }
    }
}

impl fmt::Display for ObjectivePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectivePair::Latency => "latency",
            ObjectivePair::Flops => "flops",
            ObjectivePair::Params => "params",
        })
    }
}

impl FromStr for ObjectivePair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "latency" | "speed" => Ok(ObjectivePair::Latency),
            "flops" => Ok(ObjectivePair::Flops),
            "params" => Ok(ObjectivePair::Params),
            other => Err(format!(
                "unknown objective '{other}' (latency|flops|params)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("genome violates constraints: {0:?}")]
    ConstraintViolation(Vec<Violation>),
    #[error("evaluator timed out on request {id} after {seconds:.1} s")]
    Timeout { id: u64, seconds: f64 },
    #[error("evaluator protocol error: {0}")]
    Protocol(String),
    #[error("evaluator crashed: {0}")]
    Crash(String),
    #[error("could not start evaluator: {0}")]
    Spawn(String),
    #[error(transparent)]
    Space(#[from] SearchSpaceError),
}

/// One evaluation job. `seed` drives any evaluator-side randomness.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRequest {
    pub id: u64,
    pub genome: Genome,
    pub seed: u64,
}

pub trait Evaluator: Send + Sync {
    fn evaluate(&self, request: &EvalRequest) -> Result<ObjectiveVector, EvalError>;

    /// Evaluate several requests; results line up with `requests`.
    /// Implementations may run them concurrently.
    fn evaluate_batch(&self, requests: &[EvalRequest]) -> Vec<Result<ObjectiveVector, EvalError>> {
        requests.iter().map(|r| self.evaluate(r)).collect()
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate(&self, request: &EvalRequest) -> Result<ObjectiveVector, EvalError> {
        (**self).evaluate(request)
    }

    fn evaluate_batch(&self, requests: &[EvalRequest]) -> Vec<Result<ObjectiveVector, EvalError>> {
        (**self).evaluate_batch(requests)
    }
}

/// Analytic costs of one genome.
#[derive(Clone, Debug)]
pub struct CostSummary {
    pub ir: ArchitectureIR,
    pub cost: ModelCost,
    pub latency_ms: f64,
    pub memory: MemoryCheck,
}

pub fn analyze(
    genome: &Genome,
    config: &SearchSpaceConfig,
    profile: &HardwareProfile,
) -> Result<CostSummary, EvalError> {
    let ir = decode_to_ir(genome, config).map_err(|e| match e {
        SearchSpaceError::ConstraintViolation(v) => EvalError::ConstraintViolation(v),
        other => EvalError::Space(other),
    })?;
    let cost = aggregate(&ir);
    let latency_ms = estimate_latency(&cost, profile);
    let memory = check_memory(&cost, profile);
    Ok(CostSummary {
        ir,
        cost,
        latency_ms,
        memory,
    })
}

impl CostSummary {
    pub fn objectives(&self, score: f64, source: Source) -> ObjectiveVector {
        ObjectiveVector {
            score,
            latency_ms: self.latency_ms,
            flops_g: self.cost.flops_g(),
            params_m: self.cost.params_m(),
            peak_mem_mb: self.memory.required_mb,
            feasible: self.memory.pass,
            violation: self.memory.excess_mb(),
            source,
        }
    }
}

/// Returns the same objective vector for every genome. Useful for wiring
/// tests and for measuring search bookkeeping in isolation.
#[derive(Clone, Debug)]
pub struct ConstantEvaluator {
    pub value: ObjectiveVector,
}

impl ConstantEvaluator {
    pub fn new(score: f64) -> Self {
        ConstantEvaluator {
            value: ObjectiveVector::point(score, 0.0, 0.0, 0.0),
        }
    }
}

impl Evaluator for ConstantEvaluator {
    fn evaluate(&self, _request: &EvalRequest) -> Result<ObjectiveVector, EvalError> {
        Ok(self.value.clone())
    }
}

/// Evaluator backed by a plain function of the genome's costs, e.g. a
/// scripted scoring rule. Score comes from `rule`; cost axes are analytic.
pub struct RuleEvaluator<F> {
    pub config: SearchSpaceConfig,
    pub profile: HardwareProfile,
    pub rule: F,
}

impl<F> Evaluator for RuleEvaluator<F>
where
    F: Fn(&Genome, &CostSummary) -> f64 + Send + Sync,
{
    fn evaluate(&self, request: &EvalRequest) -> Result<ObjectiveVector, EvalError> {
        let summary = analyze(&request.genome, &self.config, &self.profile)?;
        let score = (self.rule)(&request.genome, &summary);
        Ok(summary.objectives(score, Source::Constant))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search_space::sample;

    #[test]
    fn objective_pair_parsing() {
        assert_eq!(
            "flops".parse::<ObjectivePair>().unwrap(),
            ObjectivePair::Flops
        );
        assert_eq!(
            "latency".parse::<ObjectivePair>().unwrap(),
            ObjectivePair::Latency
        );
        assert!("mIoU".parse::<ObjectivePair>().is_err());
    }

    #[test]
    fn memory_over_budget_is_infeasible() {
        let config = SearchSpaceConfig::toy();
        let mut profile = HardwareProfile::unit();
        profile.memory_budget_mb = Some(0.5);
        let s = analyze(&sample(&config, 1), &config, &profile).unwrap();
        let v = s.objectives(70.0, Source::Proxy);
        assert!(!v.feasible);
        assert!(v.violation > 0.0);
        assert_eq!(v.score, 70.0);
    }
}
