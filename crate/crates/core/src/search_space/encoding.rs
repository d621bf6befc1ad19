//! Fixed-length categorical gene layout and its one-hot bit encoding.
//!
//! Every grid slot has a gene whether or not the current topology activates
//! it; category 0 of a slot gene is the reserved "inactive" value, so the
//! layout (and the bit-vector length) depends on the config alone.
//!
//! Genes are ordered in five crossover segments:
//! `topology | row stride-8 | row stride-16 | row stride-32 | head`.

use super::config::{SearchSpaceConfig, HEADS, NUM_ROWS};
use super::genome::{CellGene, Genome, NodeGene, Operator};
use super::SearchSpaceError;

/// One categorical decision variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gene {
    BranchCount,
    /// Start layer of row 1 (`0`) or row 2 (`1`).
    Downsample(usize),
    CellOp {
        layer: usize,
        row: usize,
    },
    CellWidth {
        layer: usize,
        row: usize,
    },
    Node {
        layer: usize,
        row: usize,
    },
    Head,
}

impl Gene {
    /// Topology genes change which slots exist; the rest fill those slots.
    pub fn is_topology(self) -> bool {
        matches!(self, Gene::BranchCount | Gene::Downsample(_))
    }
}

/// Crossover segment boundaries, as indices into [`GeneLayout::genes`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    Topology,
    Row(usize),
    Head,
}

#[derive(Clone, Debug)]
pub struct GeneLayout {
    genes: Vec<Gene>,
    cardinalities: Vec<usize>,
    offsets: Vec<usize>,
    /// Start index of each segment: topology, row 0, row 1, row 2, head.
    segment_starts: [usize; 5],
    n_bits: usize,
}

impl GeneLayout {
    pub fn new(config: &SearchSpaceConfig) -> Self {
        let layers = config.num_layers;
        let widths = config.width_multipliers.len();
        let mut genes = vec![Gene::BranchCount, Gene::Downsample(0), Gene::Downsample(1)];
        let mut segment_starts = [0; 5];
        for row in 0..NUM_ROWS {
            segment_starts[row + 1] = genes.len();
            for layer in 0..layers {
                genes.push(Gene::CellOp { layer, row });
                genes.push(Gene::CellWidth { layer, row });
            }
            for layer in 1..layers {
                genes.push(Gene::Node { layer, row });
            }
        }
        segment_starts[4] = genes.len();
        genes.push(Gene::Head);

        let cardinalities: Vec<usize> = genes
            .iter()
            .map(|g| match g {
                Gene::BranchCount => 3,
                Gene::Downsample(_) => layers,
                Gene::CellOp { .. } => 1 + Operator::ALL.len(),
                Gene::CellWidth { .. } => 1 + widths,
                Gene::Node { .. } => 1 + 8,
                Gene::Head => HEADS.len(),
            })
            .collect();
        let mut offsets = Vec::with_capacity(genes.len());
        let mut n_bits = 0;
        for c in &cardinalities {
            offsets.push(n_bits);
            n_bits += c;
        }
        GeneLayout {
            genes,
            cardinalities,
            offsets,
            segment_starts,
            n_bits,
        }
    }

    pub fn genes(&self) -> &[Gene] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn cardinality(&self, index: usize) -> usize {
        self.cardinalities[index]
    }

    /// Bit offset of gene `index` in the one-hot vector.
    pub fn offset(&self, index: usize) -> usize {
        self.offsets[index]
    }

    /// Length of the one-hot bit vector.
    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn segment_start(&self, segment: Segment) -> usize {
        match segment {
            Segment::Topology => self.segment_starts[0],
            Segment::Row(r) => self.segment_starts[r + 1],
            Segment::Head => self.segment_starts[4],
        }
    }

    /// The gene-index range of a segment.
    pub fn segment_range(&self, segment: Segment) -> std::ops::Range<usize> {
        let start = self.segment_start(segment);
        let end = match segment {
            Segment::Topology => self.segment_starts[1],
            Segment::Row(r) => self.segment_starts[r + 2],
            Segment::Head => self.genes.len(),
        };
        start..end
    }

    /// Cut points between consecutive segments (usable for one-point crossover).
    pub fn cut_points(&self) -> [usize; 4] {
        [
            self.segment_starts[1],
            self.segment_starts[2],
            self.segment_starts[3],
            self.segment_starts[4],
        ]
    }
}

/// Length of the encoded bit vector for `config`.
pub fn n_var(config: &SearchSpaceConfig) -> usize {
    GeneLayout::new(config).n_bits()
}

fn mismatch(msg: impl Into<String>) -> SearchSpaceError {
    SearchSpaceError::StructureMismatch(msg.into())
}

/// Category index of every gene in layout order.
pub fn gene_values(
    genome: &Genome,
    layout: &GeneLayout,
    config: &SearchSpaceConfig,
) -> Result<Vec<usize>, SearchSpaceError> {
    if !genome.has_shape_of(config) {
        return Err(mismatch(format!(
            "genome has {} cells / {} nodes, config expects {} / {}",
            genome.cells.len(),
            genome.nodes.len(),
            config.num_layers * NUM_ROWS,
            (config.num_layers - 1) * NUM_ROWS
        )));
    }
    let layers = config.num_layers;
    let widths = config.width_multipliers.len();
    layout
        .genes()
        .iter()
        .map(|gene| match *gene {
            Gene::BranchCount => match genome.branch_count {
                1..=3 => Ok(genome.branch_count as usize - 1),
                n => Err(mismatch(format!("branch_count {n} is not encodable"))),
            },
            Gene::Downsample(i) => match genome.downsample_layers[i] {
                None => Ok(0),
                Some(d) if (1..layers).contains(&d) => Ok(d),
                Some(d) => Err(mismatch(format!("downsample layer {d} out of range"))),
            },
            Gene::CellOp { layer, row } => Ok(match genome.cell(layer, row) {
                None => 0,
                Some(c) => 1 + c.operator as usize,
            }),
            Gene::CellWidth { layer, row } => match genome.cell(layer, row) {
                None => Ok(0),
                Some(c) if c.width_index < widths => Ok(1 + c.width_index),
                Some(c) => Err(mismatch(format!(
                    "width index {} at ({layer}, {row}) out of range",
                    c.width_index
                ))),
            },
            Gene::Node { layer, row } => Ok(match genome.node(layer, row) {
                None => 0,
                Some(n) => 1 + n.mask() as usize,
            }),
            Gene::Head => {
                if genome.head_index < HEADS.len() {
                    Ok(genome.head_index)
                } else {
                    Err(mismatch(format!(
                        "head index {} out of range",
                        genome.head_index
                    )))
                }
            }
        })
        .collect()
}

/// Rebuild a genome from per-gene categories. No constraint checking.
pub fn genome_from_values(
    values: &[usize],
    layout: &GeneLayout,
    config: &SearchSpaceConfig,
) -> Result<Genome, SearchSpaceError> {
    if values.len() != layout.len() {
        return Err(mismatch(format!(
            "expected {} gene values, got {}",
            layout.len(),
            values.len()
        )));
    }
    let layers = config.num_layers;
    let mut genome = Genome {
        branch_count: 1,
        downsample_layers: [None, None],
        cells: vec![None; layers * NUM_ROWS],
        nodes: vec![None; (layers - 1) * NUM_ROWS],
        head_index: 0,
    };
    let mut ops = vec![0usize; layers * NUM_ROWS];
    let mut widths = vec![0usize; layers * NUM_ROWS];
    for (i, (gene, &v)) in layout.genes().iter().zip(values).enumerate() {
        if v >= layout.cardinality(i) {
            return Err(SearchSpaceError::MalformedEncoding(format!(
                "category {v} out of range for {gene:?}"
            )));
        }
        match *gene {
            Gene::BranchCount => genome.branch_count = v as u8 + 1,
            Gene::Downsample(k) => genome.downsample_layers[k] = (v > 0).then_some(v),
            Gene::CellOp { layer, row } => ops[layer * NUM_ROWS + row] = v,
            Gene::CellWidth { layer, row } => widths[layer * NUM_ROWS + row] = v,
            Gene::Node { layer, row } => {
                *genome.node_mut(layer, row) = (v > 0)
                    .then(|| NodeGene::from_mask(v as u8 - 1).expect("cardinality bounds the mask"))
            }
            Gene::Head => genome.head_index = v,
        }
    }
    for slot in 0..layers * NUM_ROWS {
        genome.cells[slot] = match (ops[slot], widths[slot]) {
            (0, 0) => None,
            (op, w) if op > 0 && w > 0 => Some(CellGene {
                operator: Operator::ALL[op - 1],
                width_index: w - 1,
            }),
            _ => {
                return Err(SearchSpaceError::MalformedEncoding(format!(
                    "cell slot ({}, {}) has operator and width disagreeing on activity",
                    slot / NUM_ROWS,
                    slot % NUM_ROWS
                )))
            }
        };
    }
    Ok(genome)
}

/// One-hot encode a genome into a fixed-length bit vector.
pub fn encode(genome: &Genome, config: &SearchSpaceConfig) -> Result<Vec<bool>, SearchSpaceError> {
    let layout = GeneLayout::new(config);
    encode_with(genome, &layout, config)
}

pub fn encode_with(
    genome: &Genome,
    layout: &GeneLayout,
    config: &SearchSpaceConfig,
) -> Result<Vec<bool>, SearchSpaceError> {
    let values = gene_values(genome, layout, config)?;
    let mut bits = vec![false; layout.n_bits()];
    for (i, v) in values.into_iter().enumerate() {
        bits[layout.offset(i) + v] = true;
    }
    Ok(bits)
}

/// Inverse of [`encode`]. Every one-hot group must have exactly one hot bit.
pub fn decode(bits: &[bool], config: &SearchSpaceConfig) -> Result<Genome, SearchSpaceError> {
    let layout = GeneLayout::new(config);
    if bits.len() != layout.n_bits() {
        return Err(mismatch(format!(
            "expected {} bits, got {}",
            layout.n_bits(),
            bits.len()
        )));
    }
    let mut values = Vec::with_capacity(layout.len());
    for (i, gene) in layout.genes().iter().enumerate() {
        let group = &bits[layout.offset(i)..layout.offset(i) + layout.cardinality(i)];
        let mut hot = group
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(k, _)| k);
        match (hot.next(), hot.next()) {
            (Some(k), None) => values.push(k),
            (None, _) => {
                return Err(SearchSpaceError::MalformedEncoding(format!(
                    "no hot bit in group {gene:?}"
                )))
            }
            (Some(_), Some(_)) => {
                return Err(SearchSpaceError::MalformedEncoding(format!(
                    "multiple hot bits in group {gene:?}"
                )))
            }
        }
    }
    genome_from_values(&values, &layout, config)
}

/// Number of genes in which two genomes differ.
pub fn gene_distance(
    a: &Genome,
    b: &Genome,
    config: &SearchSpaceConfig,
) -> Result<usize, SearchSpaceError> {
    let layout = GeneLayout::new(config);
    let va = gene_values(a, &layout, config)?;
    let vb = gene_values(b, &layout, config)?;
    Ok(va.iter().zip(&vb).filter(|(x, y)| x != y).count())
}

/// Compact, order-preserving text key of an encoding (used for duplicate
/// detection and deterministic tie-breaking).
pub fn encoding_key(bits: &[bool]) -> String {
    bits.iter().map(|b| if *b { '1' } else { '0' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search_space::{sample, Edge};

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
                width_index: layer % 3,
            });
            if layer > 0 {
                *g.node_mut(layer, 0) = Some(NodeGene::from_edges(&[Edge::SameRow]));
            }
        }
        g
    }

    #[test]
    fn n_var_matches_slot_enumeration() {
        let config = SearchSpaceConfig::toy();
        // Count one-hot bits by walking every grid position.
        let w = config.width_multipliers.len();
        let mut bits = 3; // branch count 1..3
        bits += 2 * config.num_layers; // d2, d3: inactive + layers 1..L-1
        for _layer in 0..config.num_layers {
            for _row in 0..3 {
                bits += 3; // inactive, lightweight conv, attention
                bits += 1 + w;
            }
        }
        for _layer in 1..config.num_layers {
            for _row in 0..3 {
                bits += 9; // inactive + 8 edge subsets
            }
        }
        bits += 6;
        assert_eq!(bits, 182);
        assert_eq!(n_var(&config), bits);
    }

    #[test]
    fn round_trip_one_branch() {
        let config = SearchSpaceConfig::toy();
        let g = one_branch(&config);
        let bits = encode(&g, &config).unwrap();
        assert_eq!(bits.len(), n_var(&config));
        assert_eq!(decode(&bits, &config).unwrap(), g);
    }

    #[test]
    fn head_change_only_touches_head_segment() {
        let config = SearchSpaceConfig::toy();
        let mut seed = 0;
        let g = loop {
            let g = sample(&config, seed);
            if g.branch_count == 3 {
                break g;
            }
            seed += 1;
        };
        let mut h = g.clone();
        h.head_index = (g.head_index + 1) % 6;
        let layout = GeneLayout::new(&config);
        let a = encode(&g, &config).unwrap();
        let b = encode(&h, &config).unwrap();
        let head = layout.offset(layout.len() - 1);
        let diff: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
        assert_eq!(diff.len(), 2);
        assert!(diff.iter().all(|&i| i >= head));
    }

    #[test]
    fn all_zero_vector_is_malformed() {
        let config = SearchSpaceConfig::toy();
        let bits = vec![false; n_var(&config)];
        assert!(matches!(
            decode(&bits, &config),
            Err(SearchSpaceError::MalformedEncoding(_))
        ));
    }

    #[test]
    fn two_hot_head_bits_are_malformed() {
        let config = SearchSpaceConfig::toy();
        let mut bits = encode(&one_branch(&config), &config).unwrap();
        let n = bits.len();
        bits[n - 1] = true;
        bits[n - 6] = true;
        assert!(matches!(
            decode(&bits, &config),
            Err(SearchSpaceError::MalformedEncoding(_))
        ));
    }

    #[test]
    fn wrong_grid_shape_is_structure_mismatch() {
        let config = SearchSpaceConfig::toy();
        let mut g = one_branch(&config);
        g.cells.pop();
        assert!(matches!(
            encode(&g, &config),
            Err(SearchSpaceError::StructureMismatch(_))
        ));
        assert!(matches!(
            decode(&[true; 3], &config),
            Err(SearchSpaceError::StructureMismatch(_))
        ));
    }

    #[test]
    fn segments_tile_the_layout() {
        let layout = GeneLayout::new(&SearchSpaceConfig::toy());
        let mut covered = 0;
        for seg in [
            Segment::Topology,
            Segment::Row(0),
            Segment::Row(1),
            Segment::Row(2),
            Segment::Head,
        ] {
            let r = layout.segment_range(seg);
            assert_eq!(r.start, covered);
            covered = r.end;
        }
        assert_eq!(covered, layout.len());
    }
}
