//! Cell architectures in standard DAG form.
//!
//! An [`Architecture`] is a square 0/1 adjacency matrix plus one [`LayerType`]
//! per vertex. Vertex 0 is the cell input, the last vertex is the cell output
//! and everything in between is an operation or a `Null` padding slot. Row `i`
//! holds the outputs of layer `i`, column `j` the inputs of layer `j`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest cell the crate accepts. Exhaustive permutation work grows as
/// `(n_layers - 2)!`.
pub const MAX_LAYERS: usize = 16;

/// Type of a single vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerType {
    In,
    Out,
    /// Index into the active space's operation vocabulary.
    Op(u8),
    /// Zero padding.
    Null,
}

impl LayerType {
    pub fn is_null(self) -> bool {
        matches!(self, LayerType::Null)
    }

    pub fn is_placeholder(self) -> bool {
        matches!(self, LayerType::In | LayerType::Out)
    }
}

/// A cell search space: fixed layer count plus operation vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Space {
    pub name: String,
    pub n_layers: usize,
    pub op_vocab: Vec<String>,
}

impl Space {
    pub fn new(name: impl Into<String>, n_layers: usize, op_vocab: Vec<String>) -> Result<Self> {
        if n_layers < 2 {
            return Err(Error::Config(format!("a space needs at least 2 layers, got {n_layers}")));
        }
        if n_layers > MAX_LAYERS {
            return Err(Error::Config(format!("at most {MAX_LAYERS} layers are supported, got {n_layers}")));
        }
        if op_vocab.is_empty() || op_vocab.len() > u8::MAX as usize {
            return Err(Error::Config("operation vocabulary must hold 1..=255 names".into()));
        }
        Ok(Space {
            name: name.into(),
            n_layers,
            op_vocab,
        })
    }

    /// NAS-Bench-101 cells: 7 vertices, three operations.
    pub fn nb101() -> Self {
        Space {
            name: "nb101".into(),
            n_layers: 7,
            op_vocab: vec!["conv1x1-bn-relu".into(), "conv3x3-bn-relu".into(), "maxpool3x3".into()],
        }
    }

    /// Anonymous space with operations named `op0`, `op1`, ...
    pub fn synthetic(n_layers: usize, n_types: usize) -> Result<Self> {
        Space::new("synthetic", n_layers, (0..n_types).map(|i| format!("op{i}")).collect())
    }

    pub fn n_types(&self) -> usize {
        self.op_vocab.len()
    }

    /// Resolves a vertex label. `input`, `output` and `null` are reserved;
    /// anything else must name an operation (a trailing `-bn-relu` and the
    /// NAS-Bench-201 spellings are accepted as aliases).
    pub fn parse_layer(&self, name: &str) -> Result<LayerType> {
        match name {
            "input" | "in" => return Ok(LayerType::In),
            "output" | "out" => return Ok(LayerType::Out),
            "null" | "none" => return Ok(LayerType::Null),
            _ => {}
        }
        let canon = canonical_op_name(name);
        self.op_vocab
            .iter()
            .position(|v| canonical_op_name(v) == canon)
            .map(|i| LayerType::Op(i as u8))
            .ok_or_else(|| Error::UnknownOp(name.to_string()))
    }

    pub fn layer_name(&self, t: LayerType) -> &str {
        match t {
            LayerType::In => "input",
            LayerType::Out => "output",
            LayerType::Null => "null",
            LayerType::Op(i) => &self.op_vocab[i as usize],
        }
    }

    /// Checks that `arch` has this space's layer count and only uses known
    /// operations.
    pub fn check(&self, arch: &Architecture) -> Result<()> {
        if arch.n_layers() != self.n_layers {
            return Err(Error::LayerCount {
                have: arch.n_layers(),
                expected: self.n_layers,
            });
        }
        for t in arch.types() {
            if let LayerType::Op(i) = *t {
                if i as usize >= self.n_types() {
                    return Err(Error::OpOutOfRange {
                        op: i as usize,
                        n_types: self.n_types(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn canonical_op_name(name: &str) -> String {
    let n = name.trim().to_ascii_lowercase();
    let n = n.strip_suffix("-bn-relu").unwrap_or(&n);
    match n {
        "nor_conv_1x1" => "conv1x1".into(),
        "nor_conv_3x3" => "conv3x3".into(),
        "avg_pool_3x3" => "avgpool3x3".into(),
        "max_pool_3x3" => "maxpool3x3".into(),
        "skip" => "skip_connect".into(),
        other => other.to_string(),
    }
}

/// Which structural rules [`Architecture::validate`] enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Upper-triangular adjacency with `Null` slots forming a contiguous
    /// interior suffix. This is how cells are stored before augmentation.
    Strict,
    /// Any vertex order, as produced by interior permutations. Acyclicity is
    /// checked directly instead of through triangularity.
    Augmented,
}

/// One broken structural rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    TooFewLayers,
    NotUpperTriangular { from: usize, to: usize },
    Cycle,
    FirstNotIn,
    LastNotOut,
    PlaceholderInside { index: usize },
    NullNotSuffix { index: usize },
    NullHasEdges { index: usize },
    SelfLoop { index: usize },
    OffPath { index: usize },
    NoPath,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewLayers => write!(f, "fewer than 2 layers"),
            Violation::NotUpperTriangular { from, to } => {
                write!(f, "not upper-triangular: edge {from}->{to}")
            }
            Violation::Cycle => write!(f, "graph contains a cycle"),
            Violation::FirstNotIn => write!(f, "first layer is not In"),
            Violation::LastNotOut => write!(f, "last layer is not Out"),
            Violation::PlaceholderInside { index } => write!(f, "In/Out placeholder at interior position {index}"),
            Violation::NullNotSuffix { index } => {
                write!(f, "operation at {index} follows a Null layer")
            }
            Violation::NullHasEdges { index } => write!(f, "Null layer {index} has edges"),
            Violation::SelfLoop { index } => write!(f, "self loop on layer {index}"),
            Violation::OffPath { index } => write!(f, "layer {index} is not on an In->Out path"),
            Violation::NoPath => write!(f, "no path from In to Out"),
        }
    }
}

/// Result of [`Architecture::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Report {
    pub violations: Vec<Violation>,
}

impl Report {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Invalid(self.violations))
        }
    }
}

/// Adjacency matrix plus layer-type list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Architecture {
    n: usize,
    adjacency: Vec<u8>,
    types: Vec<LayerType>,
}

impl Architecture {
    /// Builds an architecture from a row-major adjacency matrix. Only the
    /// shape and the 0/1 alphabet are checked here; see [`Self::validate`].
    pub fn new(adjacency: Vec<Vec<u8>>, types: Vec<LayerType>) -> Result<Self> {
        let n = types.len();
        let rows = adjacency.len();
        let mut flat = Vec::with_capacity(n * n);
        for row in &adjacency {
            if row.len() != n || rows != n {
                return Err(Error::Shape {
                    rows,
                    cols: row.len(),
                    types: n,
                });
            }
            flat.extend_from_slice(row);
        }
        if rows != n {
            return Err(Error::Shape { rows, cols: rows, types: n });
        }
        Self::from_flat(flat, types)
    }

    /// Same as [`Self::new`] with a flat row-major matrix.
    pub fn from_flat(adjacency: Vec<u8>, types: Vec<LayerType>) -> Result<Self> {
        let n = types.len();
        if adjacency.len() != n * n {
            return Err(Error::Shape {
                rows: adjacency.len(),
                cols: 1,
                types: n,
            });
        }
        if let Some(&bad) = adjacency.iter().find(|&&v| v > 1) {
            return Err(Error::NonBinary(bad));
        }
        Ok(Architecture { n, adjacency, types })
    }

    /// Builds from an edge list; convenient in tests and examples.
    pub fn from_edges(types: Vec<LayerType>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = types.len();
        let mut adjacency = vec![0u8; n * n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Shape { rows: i.max(j) + 1, cols: n, types: n });
            }
            adjacency[i * n + j] = 1;
        }
        Ok(Architecture { n, adjacency, types })
    }

    pub fn n_layers(&self) -> usize {
        self.n
    }

    pub fn types(&self) -> &[LayerType] {
        &self.types
    }

    /// Row-major flat adjacency.
    pub fn adjacency(&self) -> &[u8] {
        &self.adjacency
    }

    pub fn adjacency_rows(&self) -> Vec<Vec<u8>> {
        self.adjacency.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    #[inline]
    pub fn edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j] != 0
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&v| v != 0).count()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (0..self.n).filter(move |&j| self.edge(i, j)).map(move |j| (i, j)))
    }

    /// Interior op types as a sorted multiset (Null excluded).
    pub fn op_multiset(&self) -> Vec<LayerType> {
        let mut ops: Vec<_> = self.types.iter().copied().filter(|t| matches!(t, LayerType::Op(_))).collect();
        ops.sort();
        ops
    }

    fn reach_from(&self, start: usize, forward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for w in 0..self.n {
                let e = if forward { self.edge(v, w) } else { self.edge(w, v) };
                if e && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Kahn order, or `None` if the graph has a cycle.
    fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = (0..self.n).map(|j| (0..self.n).filter(|&i| self.edge(i, j)).count()).collect();
        let mut ready: Vec<usize> = (0..self.n).filter(|&v| indeg[v] == 0).rev().collect();
        let mut order = Vec::with_capacity(self.n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for w in (0..self.n).rev() {
                if self.edge(v, w) {
                    indeg[w] -= 1;
                    if indeg[w] == 0 {
                        ready.push(w);
                    }
                }
            }
        }
        (order.len() == self.n).then_some(order)
    }

    /// Number of edges on the longest In->Out path, 0 if there is none.
    pub fn longest_path(&self) -> usize {
        let Some(order) = self.topological_order() else {
            return 0;
        };
        let mut dist: Vec<Option<usize>> = vec![None; self.n];
        if self.n == 0 {
            return 0;
        }
        dist[0] = Some(0);
        for v in order {
            if let Some(d) = dist[v] {
                for w in 0..self.n {
                    if self.edge(v, w) {
                        dist[w] = Some(dist[w].map_or(d + 1, |x| x.max(d + 1)));
                    }
                }
            }
        }
        dist[self.n - 1].unwrap_or(0)
    }

    /// Checks the structural rules selected by `mode`. Never fails; callers
    /// decide what to do with the violations.
    pub fn validate(&self, mode: Mode) -> Report {
        let n = self.n;
        let mut v = Vec::new();
        if n < 2 {
            v.push(Violation::TooFewLayers);
            return Report { violations: v };
        }
        if self.types[0] != LayerType::In {
            v.push(Violation::FirstNotIn);
        }
        if self.types[n - 1] != LayerType::Out {
            v.push(Violation::LastNotOut);
        }
        for i in 1..n - 1 {
            if self.types[i].is_placeholder() {
                v.push(Violation::PlaceholderInside { index: i });
            }
        }
        for i in 0..n {
            if self.edge(i, i) {
                v.push(Violation::SelfLoop { index: i });
            }
        }
        match mode {
            Mode::Strict => {
                for (i, j) in self.edges() {
                    if i > j {
                        v.push(Violation::NotUpperTriangular { from: i, to: j });
                    }
                }
                let mut seen_null = false;
                for i in 1..n - 1 {
                    if self.types[i].is_null() {
                        seen_null = true;
                    } else if seen_null {
                        v.push(Violation::NullNotSuffix { index: i });
                    }
                }
            }
            Mode::Augmented => {
                if self.topological_order().is_none() {
                    v.push(Violation::Cycle);
                }
            }
        }
        for i in 1..n - 1 {
            if self.types[i].is_null() && (0..n).any(|k| self.edge(i, k) || self.edge(k, i)) {
                v.push(Violation::NullHasEdges { index: i });
            }
        }
        let fwd = self.reach_from(0, true);
        let bwd = self.reach_from(n - 1, false);
        if !fwd[n - 1] {
            v.push(Violation::NoPath);
        }
        for i in 1..n - 1 {
            if !self.types[i].is_null() && !(fwd[i] && bwd[i]) {
                v.push(Violation::OffPath { index: i });
            }
        }
        Report { violations: v }
    }

    pub fn is_valid(&self, mode: Mode) -> bool {
        self.validate(mode).is_ok()
    }

    /// Keeps the vertices listed in `keep` (in that order).
    pub(crate) fn induced(&self, keep: &[usize]) -> Architecture {
        let m = keep.len();
        let mut adjacency = vec![0u8; m * m];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                adjacency[a * m + b] = self.adjacency[i * self.n + j];
            }
        }
        Architecture {
            n: m,
            adjacency,
            types: keep.iter().map(|&i| self.types[i]).collect(),
        }
    }

    /// Drops every `Null` vertex.
    pub fn strip_null(&self) -> Architecture {
        let keep: Vec<usize> = (0..self.n).filter(|&i| !self.types[i].is_null()).collect();
        self.induced(&keep)
    }

    /// Drops interior vertices that are not on an In->Out path, `Null` slots
    /// included. Returns `None` when Out is unreachable from In.
    pub fn prune(&self) -> Option<Architecture> {
        if self.n < 2 {
            return None;
        }
        let fwd = self.reach_from(0, true);
        let bwd = self.reach_from(self.n - 1, false);
        if !fwd[self.n - 1] {
            return None;
        }
        let keep: Vec<usize> = (0..self.n)
            .filter(|&i| i == 0 || i == self.n - 1 || (fwd[i] && bwd[i] && !self.types[i].is_null()))
            .collect();
        Some(self.induced(&keep))
    }

    /// Grows the cell to `target` layers by inserting `Null` slots right
    /// before Out. Existing edges keep their endpoints.
    pub fn pad(&self, target: usize) -> Result<Architecture> {
        if self.n > target {
            return Err(Error::PadTooSmall { have: self.n, target });
        }
        if self.n < 2 {
            return Err(Error::Invalid(vec![Violation::TooFewLayers]));
        }
        if self.n == target {
            return Ok(self.clone());
        }
        let map = |i: usize| if i == self.n - 1 { target - 1 } else { i };
        let mut adjacency = vec![0u8; target * target];
        for (i, j) in self.edges() {
            adjacency[map(i) * target + map(j)] = 1;
        }
        let mut types = self.types[..self.n - 1].to_vec();
        types.resize(target - 1, LayerType::Null);
        types.push(self.types[self.n - 1]);
        Ok(Architecture { n: target, adjacency, types })
    }

    pub(crate) fn from_parts_unchecked(n: usize, adjacency: Vec<u8>, types: Vec<LayerType>) -> Architecture {
        debug_assert_eq!(adjacency.len(), n * n);
        debug_assert_eq!(types.len(), n);
        Architecture { n, adjacency, types }
    }
}

/// True iff some bijection between the non-`Null` vertices of `a` and `b`
/// fixes In and Out and preserves layer types and edges.
///
/// Both inputs must pass [`Mode::Augmented`] validation. The search walks
/// every interior assignment, cutting a branch as soon as a type or an edge
/// between already-assigned vertices disagrees.
pub fn isomorphic(a: &Architecture, b: &Architecture) -> Result<bool> {
    a.validate(Mode::Augmented).into_result()?;
    b.validate(Mode::Augmented).into_result()?;
    let a = a.strip_null();
    let b = b.strip_null();
    if a.n != b.n || a.edge_count() != b.edge_count() || a.op_multiset() != b.op_multiset() {
        return Ok(false);
    }
    let n = a.n;
    // mapping[v] = image of a's vertex v in b
    let mut mapping = vec![usize::MAX; n];
    let mut used = vec![false; n];
    mapping[0] = 0;
    mapping[n - 1] = n - 1;
    used[0] = true;
    used[n - 1] = true;
    if a.edge(0, n - 1) != b.edge(0, n - 1) {
        return Ok(false);
    }
    let order: Vec<usize> = (1..n - 1).collect();
    Ok(extend(&a, &b, &order, 0, &mut mapping, &mut used))
}

fn extend(a: &Architecture, b: &Architecture, order: &[usize], depth: usize, mapping: &mut [usize], used: &mut [bool]) -> bool {
    if depth == order.len() {
        return true;
    }
    let v = order[depth];
    let n = a.n;
    for cand in 1..n - 1 {
        if used[cand] || a.types[v] != b.types[cand] {
            continue;
        }
        let consistent = (0..n).all(|u| {
            let fu = mapping[u];
            fu == usize::MAX || (a.edge(u, v) == b.edge(fu, cand) && a.edge(v, u) == b.edge(cand, fu))
        });
        if !consistent {
            continue;
        }
        mapping[v] = cand;
        used[cand] = true;
        if extend(a, b, order, depth + 1, mapping, used) {
            return true;
        }
        mapping[v] = usize::MAX;
        used[cand] = false;
    }
    false
}
