//! Random and exhaustive generation of valid cells.

use std::collections::HashSet;

use rand::Rng;

use crate::arch::{Architecture, LayerType, Mode, Space};
use crate::augment::canonical_key;
use crate::error::{Error, Result};
use crate::nb201::{to_standard_dag, EdgeCell, EdgeOp};

/// Draws an unpruned genotype: every upper-triangular edge with probability
/// 1/2 and a uniform operation per interior vertex. Vertices may be off
/// every In->Out path.
pub fn random_genome<R: Rng + ?Sized>(space: &Space, rng: &mut R) -> Architecture {
    let n = space.n_layers;
    let mut types = Vec::with_capacity(n);
    types.push(LayerType::In);
    for _ in 1..n - 1 {
        types.push(LayerType::Op(rng.random_range(0..space.n_types()) as u8));
    }
    types.push(LayerType::Out);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.5) {
                edges.push((i, j));
            }
        }
    }
    Architecture::from_edges(types, &edges).expect("in-range edges")
}

/// Random cell: a [`random_genome`] with vertices off every In->Out path
/// pruned, padded back to `space.n_layers`. Returns `None` when the draw has
/// no In->Out path.
pub fn random_architecture<R: Rng + ?Sized>(space: &Space, rng: &mut R) -> Option<Architecture> {
    express(&random_genome(space, rng), space.n_layers)
}

/// The cell a genotype stands for: pruned, then padded to `n_layers`.
pub fn express(genome: &Architecture, n_layers: usize) -> Option<Architecture> {
    genome.prune()?.pad(n_layers).ok()
}

/// Like [`random_architecture`] but retries up to `attempts` times.
pub fn random_valid<R: Rng + ?Sized>(space: &Space, rng: &mut R, attempts: usize) -> Result<Architecture> {
    for _ in 0..attempts {
        if let Some(a) = random_architecture(space, rng) {
            debug_assert!(a.is_valid(Mode::Strict));
            return Ok(a);
        }
    }
    Err(Error::SamplingFailed(attempts))
}

/// A uniformly random 4-node edge cell.
pub fn random_edge_cell<R: Rng + ?Sized>(rng: &mut R) -> EdgeCell {
    let mut ops = [EdgeOp::None; 6];
    for op in &mut ops {
        *op = EdgeOp::ALL[rng.random_range(0..EdgeOp::ALL.len())];
    }
    EdgeCell::from_ops(ops)
}

/// Every valid cell of `space` up to isomorphism, one representative each
/// (upper-triangular, `Null` slots last). Work grows as
/// `2^(n(n-1)/2) * (N_t + 1)^(n-2)`, so only small spaces are accepted.
pub fn enumerate_space(space: &Space) -> Result<Vec<Architecture>> {
    let n = space.n_layers;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let type_choices = space.n_types() + 1;
    let work = (pairs.len() as u32) + ((n - 2) as f64 * (type_choices as f64).log2()).ceil() as u32;
    if work > 20 {
        return Err(Error::Config(format!("space `{}` is too large to enumerate", space.name)));
    }
    let n_type_lists = type_choices.pow((n - 2) as u32);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for t in 0..n_type_lists {
        let mut types = Vec::with_capacity(n);
        types.push(LayerType::In);
        let mut code = t;
        for _ in 1..n - 1 {
            let c = code % type_choices;
            code /= type_choices;
            types.push(if c == 0 { LayerType::Null } else { LayerType::Op((c - 1) as u8) });
        }
        types.push(LayerType::Out);
        let interior = &types[1..n - 1];
        if let Some(p) = interior.iter().position(|t| t.is_null()) {
            if interior[p..].iter().any(|t| !t.is_null()) {
                continue;
            }
        }
        for mask in 0u64..(1u64 << pairs.len()) {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            let a = Architecture::from_edges(types.clone(), &edges)?;
            if !a.is_valid(Mode::Strict) {
                continue;
            }
            if seen.insert(canonical_key(&a)) {
                out.push(a);
            }
        }
    }
    Ok(out)
}

/// Every non-degenerate 4-node edge cell after transformation, up to
/// isomorphism.
pub fn enumerate_nb201(space: &Space) -> Result<Vec<Architecture>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for code in 0..5usize.pow(6) {
        let mut ops = [EdgeOp::None; 6];
        let mut c = code;
        for op in &mut ops {
            *op = EdgeOp::ALL[c % 5];
            c /= 5;
        }
        match to_standard_dag(&EdgeCell::from_ops(ops), space) {
            Ok(a) => {
                if seen.insert(canonical_key(&a)) {
                    out.push(a);
                }
            }
            Err(Error::DegenerateCell) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_cells_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = Space::nb101();
        for _ in 0..200 {
            let a = random_valid(&s, &mut rng, 100).unwrap();
            assert!(a.validate(Mode::Strict).is_ok());
            assert_eq!(a.n_layers(), 7);
        }
    }

    #[test]
    fn tiny_space_enumeration() {
        // In -> Out only, or In -> op -> Out with or without the skip edge
        let s = Space::synthetic(3, 2).unwrap();
        let all = enumerate_space(&s).unwrap();
        assert_eq!(all.len(), 1 + 2 * 2);
        assert!(enumerate_space(&Space::nb101()).is_err());
    }
}
