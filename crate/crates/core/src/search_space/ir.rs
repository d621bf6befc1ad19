//! Explicit layer graph decoded from a genome.
//!
//! Layout: two stride-2 stem convolutions bring the image to stride 4, a
//! bilinear downsample feeds the first stride-8 cell, then cells run layer by
//! layer. A node that keeps only its same-row edge is a pass-through; any
//! other node resamples its inputs (bilinear, channel preserving) and, when
//! more than one edge is fused, concatenates them into a 3x3 fuse
//! convolution. The head projects each selected row with a 1x1 slimmable
//! convolution, upsamples to the finest selected stride, concatenates and
//! fuses with one 3x3 convolution.

use serde::{Deserialize, Serialize};

use super::config::{SearchSpaceConfig, HEADS, NUM_ROWS, STRIDE_ROWS};
use super::genome::{Edge, Genome, Operator};
use super::{validate, SearchSpaceError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Stem,
    Downsample,
    Upsample,
    LightweightConv,
    MemEffSelfAttention,
    Fuse3x3,
    SlimConv1x1,
}

impl OpKind {
    pub const ALL: [OpKind; 7] = [
        OpKind::Stem,
        OpKind::Downsample,
        OpKind::Upsample,
        OpKind::LightweightConv,
        OpKind::MemEffSelfAttention,
        OpKind::Fuse3x3,
        OpKind::SlimConv1x1,
    ];
}

impl From<Operator> for OpKind {
    fn from(op: Operator) -> Self {
        match op {
            Operator::LightweightConv => OpKind::LightweightConv,
            Operator::MemEffSelfAttention => OpKind::MemEffSelfAttention,
        }
    }
}

/// Which part of the network an instance belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Stem,
    Body,
    Head,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpInstance {
    pub id: usize,
    pub kind: OpKind,
    pub stage: Stage,
    /// Grid layer for body instances.
    pub layer: Option<usize>,
    /// Grid row for body and head instances.
    pub row: Option<usize>,
    /// Output stride.
    pub stride: u32,
    pub in_channels: u32,
    pub out_channels: u32,
    /// Output spatial size.
    pub height: u32,
    pub width: u32,
}

impl OpInstance {
    pub fn output_elements(&self) -> u64 {
        self.out_channels as u64 * self.height as u64 * self.width as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrEdge {
    pub src: usize,
    pub dst: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub head_index: usize,
    pub strides: Vec<u32>,
    pub channels: u32,
}

/// Decoded architecture. Instances are stored in a topological order
/// (every edge goes from a lower id to a higher id).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureIR {
    pub instances: Vec<OpInstance>,
    pub edges: Vec<IrEdge>,
    pub head: HeadSpec,
    pub attention_bottleneck: u32,
    pub input_size: [u32; 2],
}

impl ArchitectureIR {
    pub fn predecessors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.dst == id)
            .map(|e| e.src)
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.instances.len()];
        for e in &self.edges {
            deg[e.src] += 1;
        }
        deg
    }

    /// Body cells present at the final layer, by row.
    pub fn final_rows(&self) -> Vec<usize> {
        let last = self
            .instances
            .iter()
            .filter(|i| i.stage == Stage::Body && i.layer.is_some())
            .filter_map(|i| i.layer)
            .max();
        let mut rows: Vec<usize> = self
            .instances
            .iter()
            .filter(|i| {
                matches!(
                    i.kind,
                    OpKind::LightweightConv | OpKind::MemEffSelfAttention
                ) && i.layer == last
            })
            .filter_map(|i| i.row)
            .collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    }

    pub fn count(&self, kind: OpKind) -> usize {
        self.instances.iter().filter(|i| i.kind == kind).count()
    }

    /// The stem-plus-head skeleton of `config` with an empty body, where the
    /// stem output feeds every head row directly. Used as an additivity base
    /// case for cost accounting.
    pub fn stem_and_head(config: &SearchSpaceConfig, head_index: usize) -> Self {
        let mut b = Builder::new(config);
        let stem = b.stem();
        let rows = HEADS[head_index];
        let feeds: Vec<(usize, usize)> = rows.iter().map(|&r| (r, stem)).collect();
        b.head(&feeds);
        b.finish(head_index)
    }
}

struct Builder<'a> {
    config: &'a SearchSpaceConfig,
    instances: Vec<OpInstance>,
    edges: Vec<IrEdge>,
}

impl<'a> Builder<'a> {
    fn new(config: &'a SearchSpaceConfig) -> Self {
        Builder {
            config,
            instances: Vec::new(),
            edges: Vec::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        kind: OpKind,
        stage: Stage,
        layer: Option<usize>,
        row: Option<usize>,
        stride: u32,
        in_channels: u32,
        out_channels: u32,
        inputs: &[usize],
    ) -> usize {
        let id = self.instances.len();
        let (height, width) = self.config.spatial(stride);
        self.instances.push(OpInstance {
            id,
            kind,
            stage,
            layer,
            row,
            stride,
            in_channels,
            out_channels,
            height,
            width,
        });
        self.edges
            .extend(inputs.iter().map(|&src| IrEdge { src, dst: id }));
        id
    }

    fn channels(&self, id: usize) -> u32 {
        self.instances[id].out_channels
    }

    fn stride(&self, id: usize) -> u32 {
        self.instances[id].stride
    }

    /// Stem convolutions; returns the stride-4 output.
    fn stem(&mut self) -> usize {
        let base = self.config.base_channels;
        let s1 = self.push(OpKind::Stem, Stage::Stem, None, None, 2, 3, base / 2, &[]);
        self.push(
            OpKind::Stem,
            Stage::Stem,
            None,
            None,
            4,
            base / 2,
            base,
            &[s1],
        )
    }

    /// Bilinearly resample `src` to `stride` (no-op when already there).
    fn resample(
        &mut self,
        src: usize,
        stride: u32,
        stage: Stage,
        layer: Option<usize>,
        row: Option<usize>,
    ) -> usize {
        let from = self.stride(src);
        let c = self.channels(src);
        if from == stride {
            src
        } else if from < stride {
            self.push(OpKind::Downsample, stage, layer, row, stride, c, c, &[src])
        } else {
            self.push(OpKind::Upsample, stage, layer, row, stride, c, c, &[src])
        }
    }

    /// Append the head for `feeds` = (row, producing instance) pairs.
    fn head(&mut self, feeds: &[(usize, usize)]) -> usize {
        let head_ch = self.config.head_channels();
        let target = feeds
            .iter()
            .map(|&(r, _)| STRIDE_ROWS[r])
            .min()
            .expect("heads select at least one row");
        let mut branches = Vec::with_capacity(feeds.len());
        for &(row, src) in feeds {
            let stride = STRIDE_ROWS[row];
            let src = self.resample(src, stride, Stage::Head, None, Some(row));
            let c = self.channels(src);
            let slim = self.push(
                OpKind::SlimConv1x1,
                Stage::Head,
                None,
                Some(row),
                stride,
                c,
                head_ch,
                &[src],
            );
            branches.push(self.resample(slim, target, Stage::Head, None, Some(row)));
        }
        let c_in = branches.iter().map(|&b| self.channels(b)).sum();
        self.push(
            OpKind::Fuse3x3,
            Stage::Head,
            None,
            None,
            target,
            c_in,
            head_ch,
            &branches,
        )
    }

    fn finish(self, head_index: usize) -> ArchitectureIR {
        ArchitectureIR {
            instances: self.instances,
            edges: self.edges,
            head: HeadSpec {
                head_index,
                strides: HEADS[head_index].iter().map(|&r| STRIDE_ROWS[r]).collect(),
                channels: self.config.head_channels(),
            },
            attention_bottleneck: self.config.attention_bottleneck,
            input_size: self.config.input_size,
        }
    }
}

/// Decode a valid genome into its explicit layer graph.
pub fn decode_to_ir(
    genome: &Genome,
    config: &SearchSpaceConfig,
) -> Result<ArchitectureIR, SearchSpaceError> {
    let violations = validate(genome, config);
    if !violations.is_empty() {
        return Err(SearchSpaceError::ConstraintViolation(violations));
    }
    let topo = genome.topology();
    let mut b = Builder::new(config);
    let stem = b.stem();
    let entry = b.resample(stem, STRIDE_ROWS[0], Stage::Stem, None, None);

    let mut prev: [Option<usize>; NUM_ROWS] = [None; NUM_ROWS];
    for layer in 0..config.num_layers {
        let mut cur: [Option<usize>; NUM_ROWS] = [None; NUM_ROWS];
        for row in 0..NUM_ROWS {
            if !topo.is_active(layer, row) {
                continue;
            }
            let cell = genome.cell(layer, row).expect("validated");
            let stride = STRIDE_ROWS[row];
            let width = config.row_width(row, cell.width_index);
            let input = if layer == 0 {
                entry
            } else {
                let node = genome.node(layer, row).expect("validated");
                let mut sources = Vec::with_capacity(3);
                for edge in node.edges() {
                    let src_row = match edge {
                        Edge::SameRow => row,
                        Edge::FromHigherRes => row - 1,
                        Edge::FromLowerRes => row + 1,
                    };
                    let src = prev[src_row].expect("validated edge source");
                    sources.push(b.resample(src, stride, Stage::Body, Some(layer), Some(row)));
                }
                if sources.len() == 1 {
                    sources[0]
                } else {
                    let c_in = sources.iter().map(|&s| b.channels(s)).sum();
                    b.push(
                        OpKind::Fuse3x3,
                        Stage::Body,
                        Some(layer),
                        Some(row),
                        stride,
                        c_in,
                        width,
                        &sources,
                    )
                }
            };
            let c_in = b.channels(input);
            cur[row] = Some(b.push(
                cell.operator.into(),
                Stage::Body,
                Some(layer),
                Some(row),
                stride,
                c_in,
                width,
                &[input],
            ));
        }
        prev = cur;
    }

    let feeds: Vec<(usize, usize)> = HEADS[genome.head_index]
        .iter()
        .map(|&r| (r, prev[r].expect("validated head row")))
        .collect();
    b.head(&feeds);
    Ok(b.finish(genome.head_index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search_space::{sample, CellGene, NodeGene};

    fn one_branch(config: &SearchSpaceConfig) -> Genome {
        let l = config.num_layers;
        let mut g = Genome {
            branch_count: 1,
            downsample_layers: [None, None],
            cells: vec![None; l * 3],
            nodes: vec![None; (l - 1) * 3],
            head_index: 0,
        };
        for layer in 0..l {
            *g.cell_mut(layer, 0) = Some(CellGene {
                operator: Operator::LightweightConv,
                width_index: 0,
            });
            if layer > 0 {
                *g.node_mut(layer, 0) = Some(NodeGene::from_edges(&[Edge::SameRow]));
            }
        }
        g
    }

    /// Independent check: walk every instance, sum producer channels over
    /// its incoming edges, compare to the declared input width.
    fn walk_channels(ir: &ArchitectureIR) {
        for inst in &ir.instances {
            let incoming: Vec<&IrEdge> = ir.edges.iter().filter(|e| e.dst == inst.id).collect();
            if incoming.is_empty() {
                assert_eq!(inst.kind, OpKind::Stem);
                assert_eq!(inst.in_channels, 3);
                continue;
            }
            let sum: u32 = incoming
                .iter()
                .map(|e| ir.instances[e.src].out_channels)
                .sum();
            assert_eq!(sum, inst.in_channels, "instance {inst:?}");
            for e in incoming {
                assert!(e.src < e.dst);
                let src = &ir.instances[e.src];
                if inst.kind != OpKind::Downsample
                    && inst.kind != OpKind::Upsample
                    && inst.kind != OpKind::Stem
                {
                    assert_eq!(src.stride, inst.stride, "resolution mismatch on {e:?}");
                }
            }
        }
    }

    #[test]
    fn minimal_topology() {
        let config = SearchSpaceConfig::toy();
        let ir = decode_to_ir(&one_branch(&config), &config).unwrap();
        let cells = ir
            .instances
            .iter()
            .filter(|i| i.stage == Stage::Body)
            .collect::<Vec<_>>();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.row == Some(0)));
        assert_eq!(ir.count(OpKind::SlimConv1x1), 1);
        assert_eq!(ir.count(OpKind::Upsample), 0);
        assert_eq!(ir.count(OpKind::Fuse3x3), 1);
        assert_eq!(ir.final_rows(), vec![0]);
        walk_channels(&ir);
    }

    #[test]
    fn three_row_head_structure() {
        let config = SearchSpaceConfig::toy();
        let g = (0..)
            .map(|s| sample(&config, s))
            .find(|g| g.branch_count == 3 && g.head_index == 5)
            .unwrap();
        let ir = decode_to_ir(&g, &config).unwrap();
        let head: Vec<&OpInstance> = ir
            .instances
            .iter()
            .filter(|i| i.stage == Stage::Head)
            .collect();
        let count = |k| head.iter().filter(|i| i.kind == k).count();
        assert_eq!(count(OpKind::SlimConv1x1), 3);
        assert_eq!(count(OpKind::Upsample), 2);
        assert_eq!(count(OpKind::Fuse3x3), 1);
        let fuse = head.iter().find(|i| i.kind == OpKind::Fuse3x3).unwrap();
        assert_eq!(fuse.in_channels, 3 * config.head_channels());
        assert_eq!(fuse.stride, 8);
        assert_eq!(ir.final_rows(), vec![0, 1, 2]);
    }

    #[test]
    fn channel_sums_match_edge_walk() {
        let config = SearchSpaceConfig::toy();
        for seed in 0..300 {
            let g = sample(&config, seed);
            let ir = decode_to_ir(&g, &config).unwrap();
            walk_channels(&ir);
            assert_eq!(ir.final_rows().len(), g.branch_count as usize);
        }
    }

    #[test]
    fn fuse_concatenates_row_widths() {
        let config = SearchSpaceConfig::toy();
        // Two rows, row 0 fuses its own and the upsampled row-1 feature at layer 3.
        let mut g = one_branch(&config);
        g.branch_count = 2;
        g.downsample_layers = [Some(1), None];
        for layer in 1..4 {
            *g.cell_mut(layer, 1) = Some(CellGene {
                operator: Operator::MemEffSelfAttention,
                width_index: 2,
            });
            *g.node_mut(layer, 1) = Some(NodeGene::from_edges(if layer == 1 {
                &[Edge::FromHigherRes][..]
            } else {
                &[Edge::SameRow][..]
            }));
        }
        *g.node_mut(3, 0) = Some(NodeGene::from_edges(&[Edge::SameRow, Edge::FromLowerRes]));
        let ir = decode_to_ir(&g, &config).unwrap();
        let fuse = ir
            .instances
            .iter()
            .find(|i| i.kind == OpKind::Fuse3x3 && i.stage == Stage::Body)
            .unwrap();
        // a = 8 (row 0, multiplier 8), b = 16 * 2 = 32 (row 1, multiplier 16)
        assert_eq!(fuse.in_channels, 8 + 32);
        assert_eq!(fuse.out_channels, 8);
        walk_channels(&ir);
    }

    #[test]
    fn invalid_genome_is_rejected() {
        let config = SearchSpaceConfig::toy();
        let mut g = one_branch(&config);
        g.branch_count = 0;
        assert!(matches!(
            decode_to_ir(&g, &config),
            Err(SearchSpaceError::ConstraintViolation(_))
        ));
    }
}
