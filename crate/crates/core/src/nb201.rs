//! NAS-Bench-201 cells carry operations on edges. This module turns them into
//! the vertex-labelled DAG form used everywhere else.
//!
//! Construction (a line graph):
//!
//! 1. Edges are taken in lexicographic order `(0,1), (0,2), (0,3), (1,2),
//!    (1,3), (2,3)`; every edge whose operation is not `none` becomes one
//!    operation vertex.
//! 2. The vertex of edge `(i,j)` reads from In when `i = 0` and from every
//!    vertex of an edge `(k,i)`. It feeds Out when `j` is the cell output and
//!    every vertex of an edge `(j,m)`.
//! 3. Vertices that are unreachable from In or cannot reach Out are dropped.
//! 4. The result is padded with `Null` to the space's layer count.
//!
//! With four nodes this gives at most six operation vertices, so
//! `n_layers = 8` and each cell has `6! = 720` homogeneous forms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::arch::{Architecture, LayerType, Space};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeOp {
    None,
    SkipConnect,
    Conv1x1,
    Conv3x3,
    AvgPool3x3,
}

impl EdgeOp {
    pub const ALL: [EdgeOp; 5] = [
        EdgeOp::None,
        EdgeOp::SkipConnect,
        EdgeOp::Conv1x1,
        EdgeOp::Conv3x3,
        EdgeOp::AvgPool3x3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EdgeOp::None => "none",
            EdgeOp::SkipConnect => "skip_connect",
            EdgeOp::Conv1x1 => "conv1x1",
            EdgeOp::Conv3x3 => "conv3x3",
            EdgeOp::AvgPool3x3 => "avgpool3x3",
        }
    }
}

impl fmt::Display for EdgeOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EdgeOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "none" => EdgeOp::None,
            "skip_connect" | "skip" => EdgeOp::SkipConnect,
            "conv1x1" | "nor_conv_1x1" => EdgeOp::Conv1x1,
            "conv3x3" | "nor_conv_3x3" => EdgeOp::Conv3x3,
            "avgpool3x3" | "avg_pool_3x3" => EdgeOp::AvgPool3x3,
            other => return Err(Error::UnknownOp(other.to_string())),
        })
    }
}

/// The NAS-Bench-201 space after transformation.
pub fn op_vocab_201() -> Space {
    Space {
        name: "nb201".into(),
        n_layers: 8,
        op_vocab: vec!["skip_connect".into(), "conv1x1".into(), "conv3x3".into(), "avgpool3x3".into()],
    }
}

/// A cell with one operation per node pair `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeCell {
    n_nodes: usize,
    edge_ops: BTreeMap<(usize, usize), EdgeOp>,
}

impl EdgeCell {
    /// Every pair `i < j < n_nodes` must be present exactly once.
    pub fn new(n_nodes: usize, edge_ops: BTreeMap<(usize, usize), EdgeOp>) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::EdgeCell(format!("need at least 2 nodes, got {n_nodes}")));
        }
        let expected = n_nodes * (n_nodes - 1) / 2;
        if edge_ops.len() != expected {
            return Err(Error::EdgeCell(format!("{} edges given, {expected} expected", edge_ops.len())));
        }
        if let Some(&(i, j)) = edge_ops.keys().find(|&&(i, j)| i >= j || j >= n_nodes) {
            return Err(Error::EdgeCell(format!("bad edge ({i},{j})")));
        }
        Ok(EdgeCell { n_nodes, edge_ops })
    }

    /// Builds a 4-node cell from ops listed in lexicographic edge order.
    pub fn from_ops(ops: [EdgeOp; 6]) -> Self {
        let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        EdgeCell {
            n_nodes: 4,
            edge_ops: pairs.into_iter().zip(ops).collect(),
        }
    }

    /// Parses a `"i,j" -> op` map.
    pub fn from_named(n_nodes: usize, named: &BTreeMap<String, String>) -> Result<Self> {
        let mut edge_ops = BTreeMap::new();
        for (k, v) in named {
            let (a, b) = k
                .split_once(',')
                .ok_or_else(|| Error::EdgeCell(format!("edge key `{k}` is not `i,j`")))?;
            let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::EdgeCell(format!("edge key `{k}`")));
            if edge_ops.insert((parse(a)?, parse(b)?), v.parse()?).is_some() {
                return Err(Error::EdgeCell(format!("duplicate edge `{k}`")));
            }
        }
        EdgeCell::new(n_nodes, edge_ops)
    }

    /// Parses the benchmark's string form, e.g.
    /// `|nor_conv_3x3~0|+|none~0|skip_connect~1|+|...|`.
    pub fn from_arch_str(s: &str) -> Result<Self> {
        let mut edge_ops = BTreeMap::new();
        let nodes: Vec<&str> = s.split('+').collect();
        for (k, node) in nodes.iter().enumerate() {
            let target = k + 1;
            for tok in node.split('|').filter(|t| !t.is_empty()) {
                let (op, src) = tok
                    .split_once('~')
                    .ok_or_else(|| Error::EdgeCell(format!("token `{tok}`")))?;
                let src: usize = src.parse().map_err(|_| Error::EdgeCell(format!("token `{tok}`")))?;
                edge_ops.insert((src, target), op.parse()?);
            }
        }
        EdgeCell::new(nodes.len() + 1, edge_ops)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edge_ops(&self) -> &BTreeMap<(usize, usize), EdgeOp> {
        &self.edge_ops
    }

    pub fn to_named(&self) -> BTreeMap<String, String> {
        self.edge_ops
            .iter()
            .map(|(&(i, j), op)| (format!("{i},{j}"), op.name().to_string()))
            .collect()
    }
}

/// Vertex-labelled form of `cell`, padded to `space.n_layers`.
pub fn to_standard_dag(cell: &EdgeCell, space: &Space) -> Result<Architecture> {
    let last = cell.n_nodes - 1;
    let live: Vec<((usize, usize), EdgeOp)> = cell
        .edge_ops
        .iter()
        .filter(|(_, op)| **op != EdgeOp::None)
        .map(|(&e, &op)| (e, op))
        .collect();
    let n = live.len() + 2;
    let out = n - 1;
    let mut types = Vec::with_capacity(n);
    types.push(LayerType::In);
    for (_, op) in &live {
        types.push(space.parse_layer(op.name())?);
    }
    types.push(LayerType::Out);
    let mut edges = Vec::new();
    for (a, &((i, j), _)) in live.iter().enumerate() {
        let va = a + 1;
        if i == 0 {
            edges.push((0, va));
        }
        if j == last {
            edges.push((va, out));
        }
        for (b, &((k, _), _)) in live.iter().enumerate() {
            if k == j {
                edges.push((va, b + 1));
            }
        }
    }
    let full = Architecture::from_edges(types, &edges)?;
    let pruned = full.prune().ok_or(Error::DegenerateCell)?;
    pruned.pad(space.n_layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{isomorphic, Mode};
    use crate::augment::augmentation_count;
    use EdgeOp::*;

    #[test]
    fn space_shape() {
        let s = op_vocab_201();
        assert_eq!(s.n_types(), 4);
        assert_eq!(augmentation_count(s.n_layers).unwrap(), 720);
        assert!(s.parse_layer("none").unwrap().is_null());
    }

    #[test]
    fn all_none_is_degenerate() {
        let c = EdgeCell::from_ops([None; 6]);
        assert!(matches!(to_standard_dag(&c, &op_vocab_201()), Err(Error::DegenerateCell)));
    }

    #[test]
    fn full_cell_has_six_vertices() {
        let a = to_standard_dag(&EdgeCell::from_ops([Conv3x3; 6]), &op_vocab_201()).unwrap();
        assert_eq!(a.n_layers(), 8);
        assert!(a.types().iter().all(|t| !t.is_null()));
        assert!(a.validate(Mode::Strict).is_ok());
        // vertices in edge order: (0,1)=1 (0,2)=2 (0,3)=3 (1,2)=4 (1,3)=5 (2,3)=6
        let mut expect = vec![(0, 1), (0, 2), (0, 3), (3, 7), (5, 7), (6, 7), (1, 4), (1, 5), (2, 6), (4, 6)];
        let mut got: Vec<_> = a.edges().collect();
        expect.sort();
        got.sort();
        assert_eq!(got, expect);
    }

    #[test]
    fn chain_cell() {
        let c = EdgeCell::from_ops([Conv3x3, None, None, None, SkipConnect, None]);
        let a = to_standard_dag(&c, &op_vocab_201()).unwrap();
        let s = op_vocab_201();
        let expect = Architecture::from_edges(
            vec![
                LayerType::In,
                s.parse_layer("conv3x3").unwrap(),
                s.parse_layer("skip_connect").unwrap(),
                LayerType::Null,
                LayerType::Null,
                LayerType::Null,
                LayerType::Null,
                LayerType::Out,
            ],
            &[(0, 1), (1, 2), (2, 7)],
        )
        .unwrap();
        assert_eq!(a, expect);
    }

    #[test]
    fn dead_branches_are_pruned() {
        // (0,1) leads nowhere because nothing leaves node 1
        let c = EdgeCell::from_ops([Conv1x1, None, Conv3x3, None, None, None]);
        let a = to_standard_dag(&c, &op_vocab_201()).unwrap();
        assert_eq!(a.strip_null().n_layers(), 3);
        let d = EdgeCell::from_ops([AvgPool3x3, None, Conv3x3, None, None, None]);
        assert!(isomorphic(&a, &to_standard_dag(&d, &op_vocab_201()).unwrap()).unwrap());
    }

    #[test]
    fn parses_benchmark_strings() {
        let c = EdgeCell::from_arch_str("|nor_conv_3x3~0|+|none~0|none~1|+|none~0|skip_connect~1|none~2|").unwrap();
        assert_eq!(c, EdgeCell::from_ops([Conv3x3, None, None, None, SkipConnect, None]));
        assert!(EdgeCell::from_arch_str("|conv~0|").is_err());
        let named = c.to_named();
        assert_eq!(EdgeCell::from_named(4, &named).unwrap(), c);
    }
}
