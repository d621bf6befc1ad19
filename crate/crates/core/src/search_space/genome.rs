use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::config::{SearchSpaceConfig, HEADS, NUM_ROWS};

/// Operator a cell can select.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    LightweightConv,
    MemEffSelfAttention,
}

impl Operator {
    pub const ALL: [Operator; 2] = [Operator::LightweightConv, Operator::MemEffSelfAttention];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellGene {
    pub operator: Operator,
    pub width_index: usize,
}

/// An incoming edge a node may fuse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    /// Same row, previous layer.
    SameRow,
    /// The next-finer row, downsampled.
    FromHigherRes,
    /// The next-coarser row, upsampled.
    FromLowerRes,
}

impl Edge {
    pub const ALL: [Edge; 3] = [Edge::SameRow, Edge::FromHigherRes, Edge::FromLowerRes];

    fn bit(self) -> u8 {
        match self {
            Edge::SameRow => 1,
            Edge::FromHigherRes => 2,
            Edge::FromLowerRes => 4,
        }
    }
}

/// Set of incoming edges fused at a node, stored as a 3-bit mask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeGene(u8);

impl NodeGene {
    pub const EMPTY: NodeGene = NodeGene(0);

    pub fn from_mask(mask: u8) -> Option<Self> {
        (mask < 8).then_some(NodeGene(mask))
    }

    pub fn from_edges(edges: &[Edge]) -> Self {
        NodeGene(edges.iter().fold(0, |m, e| m | e.bit()))
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn contains(self, edge: Edge) -> bool {
        self.0 & edge.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn toggled(self, edge: Edge) -> Self {
        NodeGene(self.0 ^ edge.bit())
    }

    pub fn edges(self) -> impl Iterator<Item = Edge> {
        Edge::ALL.into_iter().filter(move |e| self.contains(*e))
    }

    pub fn is_subset_of(self, other: NodeGene) -> bool {
        self.0 & !other.0 == 0
    }
}

impl fmt::Debug for NodeGene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.edges()).finish()
    }
}

impl Serialize for NodeGene {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.edges())
    }
}

impl<'de> Deserialize<'de> for NodeGene {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let edges = Vec::<Edge>::deserialize(deserializer)?;
        Ok(NodeGene::from_edges(&edges))
    }
}

/// Complete decision vector for one candidate architecture.
///
/// `cells` is layer-major: slot `(layer, row)` lives at `layer * 3 + row` for
/// `layer in 0..L`. `nodes` covers layers `1..L`: slot `(layer, row)` lives at
/// `(layer - 1) * 3 + row`. Inactive slots hold `None`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    pub branch_count: u8,
    /// Layers where the stride-16 and stride-32 rows begin.
    pub downsample_layers: [Option<usize>; 2],
    pub cells: Vec<Option<CellGene>>,
    pub nodes: Vec<Option<NodeGene>>,
    pub head_index: usize,
}

impl Genome {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn cell(&self, layer: usize, row: usize) -> Option<CellGene> {
        self.cells.get(layer * NUM_ROWS + row).copied().flatten()
    }

    pub fn cell_mut(&mut self, layer: usize, row: usize) -> &mut Option<CellGene> {
        &mut self.cells[layer * NUM_ROWS + row]
    }

    /// Node feeding cell `(layer, row)`; `layer` must be at least 1.
    pub fn node(&self, layer: usize, row: usize) -> Option<NodeGene> {
        debug_assert!(layer >= 1);
        self.nodes
            .get((layer - 1) * NUM_ROWS + row)
            .copied()
            .flatten()
    }

    pub fn node_mut(&mut self, layer: usize, row: usize) -> &mut Option<NodeGene> {
        &mut self.nodes[(layer - 1) * NUM_ROWS + row]
    }

    pub fn has_shape_of(&self, config: &SearchSpaceConfig) -> bool {
        self.cells.len() == config.num_layers * NUM_ROWS
            && self.nodes.len() == (config.num_layers - 1) * NUM_ROWS
    }

    pub fn topology(&self) -> Topology {
        Topology {
            branch_count: self.branch_count,
            downsample_layers: self.downsample_layers,
        }
    }

    /// Strides of the selected head.
    pub fn head_strides(&self) -> Vec<u32> {
        HEADS[self.head_index]
            .iter()
            .map(|&r| super::config::STRIDE_ROWS[r])
            .collect()
    }

    pub fn active_cell_count(&self) -> usize {
        self.cells.iter().flatten().count()
    }
}

/// Branch-level topology: how many rows exist and where each one starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Topology {
    pub branch_count: u8,
    pub downsample_layers: [Option<usize>; 2],
}

impl Topology {
    /// First layer at which `row` carries a cell, if the row exists.
    pub fn row_start(&self, row: usize) -> Option<usize> {
        match row {
            0 => (self.branch_count >= 1).then_some(0),
            1 if self.branch_count >= 2 => self.downsample_layers[0],
            2 if self.branch_count >= 3 => self.downsample_layers[1],
            _ => None,
        }
    }

    pub fn is_active(&self, layer: usize, row: usize) -> bool {
        self.row_start(row).is_some_and(|start| layer >= start)
    }

    /// True when `(layer, row)` is the first slot of a freshly created row.
    pub fn is_entry(&self, layer: usize, row: usize) -> bool {
        row > 0 && self.row_start(row) == Some(layer)
    }

    /// Edges whose source slot exists for the node feeding `(layer, row)`.
    pub fn available_edges(&self, layer: usize, row: usize) -> NodeGene {
        let prev = layer - 1;
        let mut edges = Vec::with_capacity(3);
        if self.is_active(prev, row) {
            edges.push(Edge::SameRow);
        }
        if row > 0 && self.is_active(prev, row - 1) {
            edges.push(Edge::FromHigherRes);
        }
        if row + 1 < NUM_ROWS && self.is_active(prev, row + 1) {
            edges.push(Edge::FromLowerRes);
        }
        NodeGene::from_edges(&edges)
    }

    /// Every node value allowed at `(layer, row)` for an active slot.
    ///
    /// Entry nodes of a new row must take the downsampled feature and may not
    /// pass the same-row skip through; other nodes take any non-empty subset
    /// of the available edges.
    pub fn legal_nodes(&self, layer: usize, row: usize) -> Vec<NodeGene> {
        let available = self.available_edges(layer, row);
        let entry = self.is_entry(layer, row);
        (1u8..8)
            .map(NodeGene)
            .filter(|n| n.is_subset_of(available))
            .filter(|n| !entry || (n.contains(Edge::FromHigherRes) && !n.contains(Edge::SameRow)))
            .collect()
    }

    /// Heads whose strides are all active at the final layer.
    pub fn legal_heads(&self, num_layers: usize) -> Vec<usize> {
        (0..HEADS.len())
            .filter(|&h| HEADS[h].iter().all(|&r| self.is_active(num_layers - 1, r)))
            .collect()
    }
}
