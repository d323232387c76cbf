use serde::{Deserialize, Serialize};

use super::NetError;

/// Cell operators. Channel count is preserved by every operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    /// Exact zero tensor.
    None,
    Skip,
    Conv1x1,
    Conv3x3,
    AvgPool3x3,
}

impl Op {
    /// Accepts both the cell-benchmark spellings (`nor_conv_3x3`) and the
    /// graph-benchmark spellings (`conv3x3`).
    pub fn from_name(name: &str) -> Option<Op> {
        Some(match name {
            "none" | "zero" => Op::None,
            "skip_connect" | "skip" => Op::Skip,
            "nor_conv_1x1" | "conv1x1" => Op::Conv1x1,
            "nor_conv_3x3" | "conv3x3" => Op::Conv3x3,
            "avg_pool_3x3" | "avgpool3x3" => Op::AvgPool3x3,
            _ => return None,
        })
    }

    pub fn cell_name(self) -> &'static str {
        match self {
            Op::None => "none",
            Op::Skip => "skip_connect",
            Op::Conv1x1 => "nor_conv_1x1",
            Op::Conv3x3 => "nor_conv_3x3",
            Op::AvgPool3x3 => "avg_pool_3x3",
        }
    }

    pub fn graph_name(self) -> &'static str {
        match self {
            Op::None => "none",
            Op::Skip => "skip",
            Op::Conv1x1 => "conv1x1",
            Op::Conv3x3 => "conv3x3",
            Op::AvgPool3x3 => "avgpool3x3",
        }
    }

    pub fn kernel(self) -> Option<usize> {
        match self {
            Op::Conv1x1 => Some(1),
            Op::Conv3x3 => Some(3),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    /// NAS-Bench-201 style cell: operator on every edge of a complete DAG.
    Cell201,
    /// NAS-Bench-101 style graph: 7x7 upper-triangular adjacency plus five
    /// interior vertex operators.
    Graph101,
    /// A small complete-DAG cell space that can be enumerated exhaustively.
    Toy,
}

impl SpaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::Cell201 => "cell201",
            SpaceKind::Graph101 => "graph101",
            SpaceKind::Toy => "toy",
        }
    }
}

impl std::str::FromStr for SpaceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cell201" | "nb201" => Ok(SpaceKind::Cell201),
            "graph101" | "nb101" => Ok(SpaceKind::Graph101),
            "toy" | "toyenum" => Ok(SpaceKind::Toy),
            _ => Err(format!(
                "unknown search space `{s}` (expected cell201, graph101 or toy)"
            )),
        }
    }
}

/// Outer network shape shared by every architecture of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacroConfig {
    pub input_channels: usize,
    /// Square input side length.
    pub input_size: usize,
    pub stem_channels: usize,
    /// Number of stacked cells.
    pub cells: usize,
    pub classes: usize,
    /// Give cell convolutions a bias term. Off by default, which keeps every
    /// cell positively homogeneous.
    pub conv_bias: bool,
}

impl Default for MacroConfig {
    fn default() -> Self {
        MacroConfig {
            input_channels: 3,
            input_size: 8,
            stem_channels: 8,
            cells: 1,
            classes: 10,
            conv_bias: false,
        }
    }
}

impl MacroConfig {
    pub fn input_len(&self) -> usize {
        self.input_channels * self.input_size * self.input_size
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.input_channels == 0
            || self.input_size == 0
            || self.stem_channels == 0
            || self.cells == 0
            || self.classes < 2
        {
            return Err(NetError::InvalidSpace(format!(
                "macro config needs positive sizes and at least 2 classes: {self:?}"
            )));
        }
        Ok(())
    }
}

/// A search space: cell topology, operator vocabulary and macro skeleton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub kind: SpaceKind,
    pub nodes: usize,
    /// For cell spaces, the searchable edges in canonical order (grouped by
    /// target node, then by source). For the graph space, every upper
    /// triangular position that may hold an adjacency bit.
    pub edges: Vec<(usize, usize)>,
    pub op_vocab: Vec<Op>,
    #[serde(rename = "macro")]
    pub macro_cfg: MacroConfig,
}

/// Complete DAG edges on `nodes` nodes, ordered by target then source.
pub fn complete_dag_edges(nodes: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for to in 1..nodes {
        for from in 0..to {
            edges.push((from, to));
        }
    }
    edges
}

pub const GRAPH_VERTICES: usize = 7;
pub const GRAPH_MAX_EDGES: usize = 9;

impl SearchSpace {
    /// Four-node cell, six edges, five operators: 5⁶ = 15625 architectures.
    pub fn cell201() -> Self {
        SearchSpace {
            kind: SpaceKind::Cell201,
            nodes: 4,
            edges: complete_dag_edges(4),
            op_vocab: vec![Op::None, Op::Skip, Op::Conv1x1, Op::Conv3x3, Op::AvgPool3x3],
            macro_cfg: MacroConfig::default(),
        }
    }

    /// Three-node cell, three edges, three operators: 27 architectures.
    pub fn toy() -> Self {
        SearchSpace {
            kind: SpaceKind::Toy,
            nodes: 3,
            edges: complete_dag_edges(3),
            op_vocab: vec![Op::None, Op::Skip, Op::Conv3x3],
            macro_cfg: MacroConfig::default(),
        }
    }

    /// Seven-vertex graph space with conv1x1 / conv3x3 / avgpool3x3 vertices.
    pub fn graph101() -> Self {
        SearchSpace {
            kind: SpaceKind::Graph101,
            nodes: GRAPH_VERTICES,
            edges: complete_dag_edges(GRAPH_VERTICES),
            op_vocab: vec![Op::Conv1x1, Op::Conv3x3, Op::AvgPool3x3],
            macro_cfg: MacroConfig::default(),
        }
    }

    pub fn from_kind(kind: SpaceKind) -> Self {
        match kind {
            SpaceKind::Cell201 => Self::cell201(),
            SpaceKind::Graph101 => Self::graph101(),
            SpaceKind::Toy => Self::toy(),
        }
    }

    pub fn with_macro(mut self, macro_cfg: MacroConfig) -> Self {
        self.macro_cfg = macro_cfg;
        self
    }

    /// Cell space with a custom operator vocabulary.
    pub fn with_ops(mut self, ops: Vec<Op>) -> Self {
        self.op_vocab = ops;
        self
    }

    pub fn is_cell(&self) -> bool {
        matches!(self.kind, SpaceKind::Cell201 | SpaceKind::Toy)
    }

    pub fn op_name(&self, index: usize) -> &'static str {
        let op = self.op_vocab[index];
        if self.is_cell() {
            op.cell_name()
        } else {
            op.graph_name()
        }
    }

    pub fn op_index(&self, name: &str) -> Option<usize> {
        let op = Op::from_name(name)?;
        self.op_vocab.iter().position(|&o| o == op)
    }

    /// Number of categorical decisions a policy has to make.
    pub fn num_choices(&self) -> usize {
        match self.kind {
            SpaceKind::Graph101 => self.edges.len() + (GRAPH_VERTICES - 2),
            _ => self.edges.len(),
        }
    }

    /// Number of options for decision `i`.
    pub fn choice_arity(&self, i: usize) -> usize {
        match self.kind {
            SpaceKind::Graph101 if i < self.edges.len() => 2,
            _ => self.op_vocab.len(),
        }
    }

    /// Total number of architectures for exhaustively enumerable cell spaces.
    pub fn cardinality(&self) -> Option<u128> {
        if !self.is_cell() {
            return None;
        }
        (self.op_vocab.len() as u128).checked_pow(self.edges.len() as u32)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        self.macro_cfg.validate()?;
        if self.op_vocab.is_empty() {
            return Err(NetError::InvalidSpace("empty operator vocabulary".into()));
        }
        if self.edges.iter().any(|&(a, b)| a >= b || b >= self.nodes) {
            return Err(NetError::InvalidSpace(
                "edges must satisfy from < to < nodes".into(),
            ));
        }
        if self.is_cell() && self.edges != complete_dag_edges(self.nodes) {
            return Err(NetError::InvalidSpace(
                "cell spaces use every (i, j) edge with i < j".into(),
            ));
        }
        if self.kind == SpaceKind::Graph101 {
            if self.nodes != GRAPH_VERTICES {
                return Err(NetError::InvalidSpace("graph space has 7 vertices".into()));
            }
            if self
                .op_vocab
                .iter()
                .any(|o| matches!(o, Op::None | Op::Skip))
            {
                return Err(NetError::InvalidSpace(
                    "graph vertices take conv or pooling operators".into(),
                ));
            }
        }
        Ok(())
    }
}
