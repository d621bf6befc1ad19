use std::fmt;

use serde::Serialize;

use super::config::{SearchSpaceConfig, HEADS, NUM_ROWS};
use super::genome::{Edge, Genome};

/// A broken constraint, with its location.
///
/// The first three variants are the search-space constraints proper (path
/// count, distinct downsample positions, no skip at a downsample position);
/// the rest report slots that disagree with the genome's own topology.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    PathCountZero,
    DownsampleCollision {
        layer: usize,
    },
    SkipAtDownsample {
        layer: usize,
        row: usize,
    },
    BranchCountTooLarge {
        branch_count: u8,
    },
    DownsampleOutOfRange {
        row: usize,
        layer: Option<usize>,
    },
    DownsampleOrder {
        first: usize,
        second: usize,
    },
    UnexpectedDownsample {
        row: usize,
    },
    StructureMismatch,
    MissingCell {
        layer: usize,
        row: usize,
    },
    UnexpectedCell {
        layer: usize,
        row: usize,
    },
    WidthOutOfRange {
        layer: usize,
        row: usize,
        width_index: usize,
    },
    MissingNode {
        layer: usize,
        row: usize,
    },
    UnexpectedNode {
        layer: usize,
        row: usize,
    },
    EmptyNode {
        layer: usize,
        row: usize,
    },
    DanglingEdge {
        layer: usize,
        row: usize,
        edge: Edge,
    },
    HeadOutOfRange {
        head_index: usize,
    },
    HeadStrideInactive {
        head_index: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PathCountZero => write!(f, "constraint 1: sub-network has no path"),
            Violation::DownsampleCollision { layer } => {
                write!(f, "constraint 2: both rows downsample at layer {layer}")
            }
            Violation::SkipAtDownsample { layer, row } => write!(
                f,
                "constraint 3: entry node ({layer}, {row}) must take the downsampled input and no skip"
            ),
            other => write!(f, "{other:?}"),
        }
    }
}

/// Check a genome against the search-space constraints.
///
/// Topology problems (branch count, downsample layers) are reported alone,
/// since slot activity cannot be derived from an inconsistent topology.
pub fn validate(genome: &Genome, config: &SearchSpaceConfig) -> Vec<Violation> {
    let layers = config.num_layers;
    if !genome.has_shape_of(config) {
        return vec![Violation::StructureMismatch];
    }
    match genome.branch_count {
        0 => return vec![Violation::PathCountZero],
        n if n > 3 => return vec![Violation::BranchCountTooLarge { branch_count: n }],
        _ => {}
    }

    let mut out = Vec::new();
    let bc = genome.branch_count as usize;
    for (i, d) in genome.downsample_layers.iter().enumerate() {
        let row = i + 1;
        if row < bc {
            match d {
                Some(d) if (1..layers).contains(d) => {}
                _ => out.push(Violation::DownsampleOutOfRange { row, layer: *d }),
            }
        } else if d.is_some() {
            out.push(Violation::UnexpectedDownsample { row });
        }
    }
    if out.is_empty() && bc == 3 {
        let (d2, d3) = (
            genome.downsample_layers[0].unwrap(),
            genome.downsample_layers[1].unwrap(),
        );
        if d2 == d3 {
            out.push(Violation::DownsampleCollision { layer: d2 });
        } else if d2 > d3 {
            out.push(Violation::DownsampleOrder {
                first: d2,
                second: d3,
            });
        }
    }
    if !out.is_empty() {
        return out;
    }

    let topo = genome.topology();
    for layer in 0..layers {
        for row in 0..NUM_ROWS {
            let active = topo.is_active(layer, row);
            match (active, genome.cell(layer, row)) {
                (true, None) => out.push(Violation::MissingCell { layer, row }),
                (false, Some(_)) => out.push(Violation::UnexpectedCell { layer, row }),
                (true, Some(c)) if c.width_index >= config.width_multipliers.len() => {
                    out.push(Violation::WidthOutOfRange {
                        layer,
                        row,
                        width_index: c.width_index,
                    })
                }
                _ => {}
            }
            if layer == 0 {
                continue;
            }
            let node = genome.node(layer, row);
            let node = match (active, node) {
                (true, None) => {
                    out.push(Violation::MissingNode { layer, row });
                    continue;
                }
                (false, Some(_)) => {
                    out.push(Violation::UnexpectedNode { layer, row });
                    continue;
                }
                (false, None) => continue,
                (true, Some(n)) => n,
            };
            if topo.is_entry(layer, row) {
                if !node.contains(Edge::FromHigherRes) || node.contains(Edge::SameRow) {
                    out.push(Violation::SkipAtDownsample { layer, row });
                }
                if node.contains(Edge::FromLowerRes)
                    && !topo
                        .available_edges(layer, row)
                        .contains(Edge::FromLowerRes)
                {
                    out.push(Violation::DanglingEdge {
                        layer,
                        row,
                        edge: Edge::FromLowerRes,
                    });
                }
                continue;
            }
            if node.is_empty() {
                out.push(Violation::EmptyNode { layer, row });
            }
            let available = topo.available_edges(layer, row);
            for edge in node.edges().filter(|e| !available.contains(*e)) {
                out.push(Violation::DanglingEdge { layer, row, edge });
            }
        }
    }
    if genome.head_index >= HEADS.len() {
        out.push(Violation::HeadOutOfRange {
            head_index: genome.head_index,
        });
    } else if !topo.legal_heads(layers).contains(&genome.head_index) {
        out.push(Violation::HeadStrideInactive {
            head_index: genome.head_index,
        });
    }
    out
}
