//! Analytic cost accounting.
//!
//! FLOPs are multiply-accumulates (one MAC = one FLOP, no bias terms).
//! Bilinear resampling is free. Activation memory counts elements, not bytes.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search_space::{ArchitectureIR, OpInstance, OpKind};

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("lightweight convolution needs even spatial dims, got {height}x{width}")]
    OddSpatialDim { height: u32, width: u32 },
    #[error("invalid hardware profile: {0}")]
    InvalidProfile(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCost {
    /// Multiply-accumulates.
    pub flops: u64,
    pub params: u64,
    /// Activation elements produced (outputs plus internal buffers).
    pub act_mem: u64,
}

impl Add for OpCost {
    type Output = OpCost;

    fn add(self, rhs: OpCost) -> OpCost {
        OpCost {
            flops: self.flops + rhs.flops,
            params: self.params + rhs.params,
            act_mem: self.act_mem + rhs.act_mem,
        }
    }
}

impl AddAssign for OpCost {
    fn add_assign(&mut self, rhs: OpCost) {
        *self = *self + rhs;
    }
}

/// Dense `kernel x kernel` convolution evaluated at an `height x width` output.
pub fn conv_cost(c_in: u32, c_out: u32, kernel: u32, height: u32, width: u32) -> OpCost {
    let (c_in, c_out, k, hw) = (
        c_in as u64,
        c_out as u64,
        kernel as u64,
        height as u64 * width as u64,
    );
    OpCost {
        flops: k * k * c_in * c_out * hw,
        params: k * k * c_in * c_out,
        act_mem: c_out * hw,
    }
}

/// Lightweight convolution with distinct input and output widths: a 3x3
/// convolution on the half-resolution (zoomed) input plus a parallel
/// full-resolution 1x1 convolution.
pub fn lightweight_conv_cost(
    c_in: u32,
    c_out: u32,
    height: u32,
    width: u32,
) -> Result<OpCost, CostError> {
    if height % 2 != 0 || width % 2 != 0 {
        return Err(CostError::OddSpatialDim { height, width });
    }
    let zoomed = conv_cost(c_in, c_out, 3, height / 2, width / 2);
    let bypass = conv_cost(c_in, c_out, 1, height, width);
    let half = (height / 2) as u64 * (width / 2) as u64;
    Ok(OpCost {
        flops: zoomed.flops + bypass.flops,
        params: zoomed.params + bypass.params,
        // zoomed input, zoomed output, upsampled output, 1x1 output
        act_mem: c_in as u64 * half + zoomed.act_mem + 2 * bypass.act_mem,
    })
}

/// Memory-efficient self-attention block with `c_in == c_out`.
pub fn attention_cost(c_in: u32, bottleneck: u32, height: u32, width: u32) -> OpCost {
    attention_cost_io(c_in, c_in, bottleneck, height, width)
}

/// Memory-efficient self-attention block: 1x1 reduce to the bottleneck,
/// single-head dot-product attention (Q/K/V and output projections, no
/// feed-forward), 1x1 expand, plus a bypassed 1x1 convolution.
pub fn attention_cost_io(
    c_in: u32,
    c_out: u32,
    bottleneck: u32,
    height: u32,
    width: u32,
) -> OpCost {
    let n = height as u64 * width as u64;
    let (ci, co, d) = (c_in as u64, c_out as u64, bottleneck as u64);
    let reduce = n * ci * d;
    let qkv = 3 * n * d * d;
    let scores = n * n * d;
    let weighted = n * n * d;
    let out_proj = n * d * d;
    let expand = n * d * co;
    let bypass = n * ci * co;
    OpCost {
        flops: reduce + qkv + scores + weighted + out_proj + expand + bypass,
        params: ci * d + 4 * d * d + d * co + ci * co,
        // attention map, six bottleneck tensors (reduced, q, k, v, attended,
        // projected), expanded and bypass outputs
        act_mem: n * n + 6 * n * d + 2 * n * co,
    }
}

/// Standard transformer encoder layer (single-head attention plus a
/// feed-forward block of width `ffn_ratio * channels`). Reference row only.
pub fn transformer_cost(channels: u32, ffn_ratio: u32, height: u32, width: u32) -> OpCost {
    let n = height as u64 * width as u64;
    let (c, f) = (channels as u64, (ffn_ratio * channels) as u64);
    OpCost {
        flops: 4 * n * c * c + 2 * n * n * c + 2 * n * c * f,
        params: 4 * c * c + 2 * c * f,
        act_mem: n * n + 5 * n * c + n * f,
    }
}

/// Cost of one IR instance.
pub fn instance_cost(inst: &OpInstance, attention_bottleneck: u32) -> OpCost {
    let (h, w) = (inst.height, inst.width);
    match inst.kind {
        OpKind::Stem | OpKind::Fuse3x3 => conv_cost(inst.in_channels, inst.out_channels, 3, h, w),
        OpKind::SlimConv1x1 => conv_cost(inst.in_channels, inst.out_channels, 1, h, w),
        OpKind::Upsample | OpKind::Downsample => OpCost {
            act_mem: inst.output_elements(),
            ..OpCost::default()
        },
        OpKind::LightweightConv => lightweight_conv_cost(inst.in_channels, inst.out_channels, h, w)
            .expect("config validation keeps every stride's spatial dims even"),
        OpKind::MemEffSelfAttention => attention_cost_io(
            inst.in_channels,
            inst.out_channels,
            attention_bottleneck,
            h,
            w,
        ),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub instance: usize,
    pub kind: OpKind,
    pub cost: OpCost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCost {
    /// Total multiply-accumulates.
    pub flops: u64,
    pub params: u64,
    /// Peak live activation elements over a topological sweep.
    pub peak_act_mem: u64,
    pub per_op: Vec<CostEntry>,
}

impl ModelCost {
    pub fn flops_g(&self) -> f64 {
        self.flops as f64 / 1e9
    }

    pub fn params_m(&self) -> f64 {
        self.params as f64 / 1e6
    }
}

/// Sum per-instance costs and sweep for peak activation memory.
///
/// The sweep walks instances in id (topological) order with immediate-free
/// semantics: a tensor is live from its producer until its last consumer has
/// run. At each step the live set plus the running op's own activations is a
/// candidate peak.
pub fn aggregate(ir: &ArchitectureIR) -> ModelCost {
    let per_op: Vec<CostEntry> = ir
        .instances
        .iter()
        .map(|inst| CostEntry {
            instance: inst.id,
            kind: inst.kind,
            cost: instance_cost(inst, ir.attention_bottleneck),
        })
        .collect();

    let mut remaining = ir.out_degrees();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); ir.instances.len()];
    for e in &ir.edges {
        preds[e.dst].push(e.src);
    }
    let mut live: u64 = 0;
    let mut peak: u64 = 0;
    for (inst, entry) in ir.instances.iter().zip(&per_op) {
        peak = peak.max(live + entry.cost.act_mem);
        live += inst.output_elements();
        for &src in &preds[inst.id] {
            remaining[src] -= 1;
            if remaining[src] == 0 {
                live -= ir.instances[src].output_elements();
            }
        }
        if remaining[inst.id] == 0 {
            live -= inst.output_elements();
        }
    }

    let total = per_op.iter().fold(OpCost::default(), |acc, e| acc + e.cost);
    ModelCost {
        flops: total.flops,
        params: total.params,
        peak_act_mem: peak,
        per_op,
    }
}

fn default_bytes_per_element() -> f64 {
    4.0
}

fn default_training_factor() -> f64 {
    2.0
}

/// Latency and memory model of a deployment target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile {
    /// Milliseconds per GMAC, per operator kind. Missing kinds cost nothing.
    #[serde(default)]
    pub coefficients: BTreeMap<OpKind, f64>,
    /// Fixed cost per instance, in milliseconds.
    #[serde(default)]
    pub overhead_ms: f64,
    /// Training memory budget in MB (10^6 bytes); `null` means unlimited.
    #[serde(default)]
    pub memory_budget_mb: Option<f64>,
    #[serde(default = "default_bytes_per_element")]
    pub bytes_per_element: f64,
    #[serde(default = "default_training_factor")]
    pub training_factor: f64,
}

impl HardwareProfile {
    /// Every kind at 1 ms/GMAC, no overhead, unlimited memory.
    pub fn unit() -> Self {
        HardwareProfile {
            coefficients: OpKind::ALL.iter().map(|k| (*k, 1.0)).collect(),
            overhead_ms: 0.0,
            memory_budget_mb: None,
            bytes_per_element: default_bytes_per_element(),
            training_factor: default_training_factor(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CostError> {
        let profile: HardwareProfile =
            serde_json::from_str(text).map_err(|e| CostError::InvalidProfile(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), CostError> {
        let bad = |m: String| Err(CostError::InvalidProfile(m));
        if let Some((k, c)) = self
            .coefficients
            .iter()
            .find(|(_, c)| !(**c >= 0.0 && c.is_finite()))
        {
            return bad(format!(
                "coefficient for {k:?} must be finite and >= 0, got {c}"
            ));
        }
        if !(self.overhead_ms >= 0.0 && self.overhead_ms.is_finite()) {
            return bad(format!(
                "overhead_ms must be >= 0, got {}",
                self.overhead_ms
            ));
        }
        if let Some(b) = self.memory_budget_mb {
            if !(b > 0.0) {
                return bad(format!("memory_budget_mb must be > 0, got {b}"));
            }
        }
        if !(self.bytes_per_element > 0.0) || !(self.training_factor > 0.0) {
            return bad("bytes_per_element and training_factor must be > 0".into());
        }
        Ok(())
    }

    pub fn coefficient(&self, kind: OpKind) -> f64 {
        self.coefficients.get(&kind).copied().unwrap_or(0.0)
    }

    /// Training-time memory of `peak_elements` activations, in MB.
    pub fn training_mb(&self, peak_elements: u64) -> f64 {
        peak_elements as f64 * self.bytes_per_element * self.training_factor / 1e6
    }
}

/// Σ GMACs × kind coefficient + instance count × overhead.
pub fn estimate_latency(cost: &ModelCost, profile: &HardwareProfile) -> f64 {
    let compute: f64 = cost
        .per_op
        .iter()
        .map(|e| e.cost.flops as f64 / 1e9 * profile.coefficient(e.kind))
        .sum();
    compute + cost.per_op.len() as f64 * profile.overhead_ms
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MemoryCheck {
    pub pass: bool,
    pub required_mb: f64,
    /// `None` when the profile has no budget.
    pub budget_mb: Option<f64>,
}

impl MemoryCheck {
    /// How far over budget, in MB (0 when within budget).
    pub fn excess_mb(&self) -> f64 {
        match self.budget_mb {
            Some(b) if !self.pass => self.required_mb - b,
            _ => 0.0,
        }
    }
}

/// Training memory must fit the budget.
pub fn check_memory(cost: &ModelCost, profile: &HardwareProfile) -> MemoryCheck {
    check_memory_mb(profile.training_mb(cost.peak_act_mem), profile)
}

pub fn check_memory_mb(required_mb: f64, profile: &HardwareProfile) -> MemoryCheck {
    MemoryCheck {
        pass: profile.memory_budget_mb.is_none_or(|b| required_mb <= b),
        required_mb,
        budget_mb: profile.memory_budget_mb,
    }
}

/// Channels and spatial size of the operator comparison input (1x256x32x64).
pub const TABLE1_INPUT: (u32, u32, u32) = (256, 32, 64);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Row {
    pub name: &'static str,
    pub complexity: &'static str,
    /// Kind whose latency coefficient prices the row.
    pub priced_as: OpKind,
    pub cost: OpCost,
}

impl Table1Row {
    pub fn flops_g(&self) -> f64 {
        self.cost.flops as f64 / 1e9
    }

    pub fn params_m(&self) -> f64 {
        self.cost.params as f64 / 1e6
    }

    pub fn latency_ms(&self, profile: &HardwareProfile) -> f64 {
        self.flops_g() * profile.coefficient(self.priced_as) + profile.overhead_ms
    }
}

/// Convolution, lightweight convolution, memory-efficient attention (with the
/// given bottleneck) and a transformer layer (FFN ratio 4) on the comparison input.
pub fn table1(attention_bottleneck: u32) -> Vec<Table1Row> {
    let (c, h, w) = TABLE1_INPUT;
    vec![
        Table1Row {
            name: "Convolution",
            complexity: "Linear",
            priced_as: OpKind::Fuse3x3,
            cost: conv_cost(c, c, 3, h, w),
        },
        Table1Row {
            name: "Lightweight Convolution",
            complexity: "Linear",
            priced_as: OpKind::LightweightConv,
            cost: lightweight_conv_cost(c, c, h, w).expect("even input"),
        },
        Table1Row {
            name: "Memory-efficient Self-attention",
            complexity: "Quadratic",
            priced_as: OpKind::MemEffSelfAttention,
            cost: attention_cost(c, attention_bottleneck, h, w),
        },
        Table1Row {
            name: "Transformer",
            complexity: "Quadratic",
            priced_as: OpKind::MemEffSelfAttention,
            cost: transformer_cost(c, 4, h, w),
        },
    ]
}
