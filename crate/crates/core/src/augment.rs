//! Homogeneous augmentation.
//!
//! Reordering the interior layers of a cell, while moving the matching
//! adjacency rows and columns along with them, yields a different matrix for
//! the same network. A cell with `n` layers has `(n - 2)!` such forms
//! (identity included) and all of them share the original's accuracy.

use rand::seq::index;
use rayon::prelude::*;

use crate::arch::{Architecture, LayerType, Mode};
use crate::error::{Error, Result};
use crate::seed;

/// Largest layer count [`augment_all`] will enumerate: `10! = 3_628_800`
/// forms per cell.
pub const MAX_AUGMENT_LAYERS: usize = 12;

/// A bijection on the interior positions `1..=n-2`. In and Out stay put.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InteriorPermutation {
    n_layers: usize,
    // images[k] = p(k + 1)
    images: Vec<usize>,
}

impl InteriorPermutation {
    /// `images[k]` is the source position placed at interior slot `k + 1`.
    pub fn new(n_layers: usize, images: Vec<usize>) -> Result<Self> {
        if n_layers < 2 || images.len() != n_layers - 2 {
            return Err(Error::NotBijection(format!(
                "{} images for {} interior positions",
                images.len(),
                n_layers.saturating_sub(2)
            )));
        }
        let mut seen = vec![false; n_layers];
        for &x in &images {
            if x == 0 || x >= n_layers - 1 || seen[x] {
                return Err(Error::NotBijection(format!("{images:?}")));
            }
            seen[x] = true;
        }
        Ok(InteriorPermutation { n_layers, images })
    }

    pub fn identity(n_layers: usize) -> Self {
        InteriorPermutation {
            n_layers,
            images: (1..n_layers.saturating_sub(1)).collect(),
        }
    }

    /// Transposition of two interior positions.
    pub fn swap(n_layers: usize, a: usize, b: usize) -> Result<Self> {
        let mut images: Vec<usize> = (1..n_layers.saturating_sub(1)).collect();
        if a == 0 || b == 0 || a >= n_layers - 1 || b >= n_layers - 1 {
            return Err(Error::NotBijection(format!("swap({a}, {b}) touches In/Out")));
        }
        images.swap(a - 1, b - 1);
        Ok(InteriorPermutation { n_layers, images })
    }

    /// The `rank`-th interior permutation in lexicographic order
    /// (factorial number system).
    pub fn nth_lexicographic(n_layers: usize, mut rank: u64) -> Result<Self> {
        let k = n_layers.saturating_sub(2);
        let total = factorial(k).ok_or(Error::TooManyLayers {
            n_layers,
            max: MAX_AUGMENT_LAYERS,
        })?;
        if rank >= total {
            return Err(Error::NotBijection(format!("rank {rank} >= {total}")));
        }
        let mut pool: Vec<usize> = (1..=k).collect();
        let mut images = Vec::with_capacity(k);
        for i in (0..k).rev() {
            let f = factorial(i).unwrap();
            let idx = (rank / f) as usize;
            rank %= f;
            images.push(pool.remove(idx));
        }
        Ok(InteriorPermutation { n_layers, images })
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    /// Full map on `0..n`, with In and Out fixed.
    pub fn full(&self) -> Vec<usize> {
        let mut m = Vec::with_capacity(self.n_layers);
        m.push(0);
        m.extend_from_slice(&self.images);
        if self.n_layers > 1 {
            m.push(self.n_layers - 1);
        }
        m
    }

    pub fn inverse(&self) -> Self {
        let mut images = vec![0; self.images.len()];
        for (k, &x) in self.images.iter().enumerate() {
            images[x - 1] = k + 1;
        }
        InteriorPermutation {
            n_layers: self.n_layers,
            images,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(k, &x)| x == k + 1)
    }
}

pub fn factorial(k: usize) -> Option<u64> {
    (1..=k as u64).try_fold(1u64, |acc, x| acc.checked_mul(x))
}

/// Number of homogeneous forms of an `n_layers` cell, `(n_layers - 2)!`.
pub fn augmentation_count(n_layers: usize) -> Result<u64> {
    if n_layers > MAX_AUGMENT_LAYERS {
        return Err(Error::TooManyLayers {
            n_layers,
            max: MAX_AUGMENT_LAYERS,
        });
    }
    Ok(factorial(n_layers.saturating_sub(2)).unwrap())
}

/// Reorders interior layers: `types'[i] = types[p(i)]` and
/// `adj'[i][j] = adj[p(i)][p(j)]`.
pub fn permute(arch: &Architecture, p: &InteriorPermutation) -> Result<Architecture> {
    let n = arch.n_layers();
    if p.n_layers() != n {
        return Err(Error::NotBijection(format!(
            "permutation over {} layers applied to {} layers",
            p.n_layers(),
            n
        )));
    }
    Ok(permute_with(arch, &p.full()))
}

fn permute_with(arch: &Architecture, full: &[usize]) -> Architecture {
    let n = arch.n_layers();
    let src = arch.adjacency();
    let mut adjacency = vec![0u8; n * n];
    for i in 0..n {
        let row = full[i] * n;
        for j in 0..n {
            adjacency[i * n + j] = src[row + full[j]];
        }
    }
    let types = full.iter().map(|&k| arch.types()[k]).collect();
    Architecture::from_parts_unchecked(n, adjacency, types)
}

/// Advances `v` to its lexicographic successor; false once `v` is the last
/// permutation.
pub(crate) fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Calls `f` with the full vertex map of every interior permutation, in
/// lexicographic order starting from the identity.
pub(crate) fn for_each_permutation(n_layers: usize, mut f: impl FnMut(&[usize])) {
    let mut full: Vec<usize> = (0..n_layers).collect();
    if n_layers < 3 {
        f(&full);
        return;
    }
    loop {
        f(&full);
        if !next_permutation(&mut full[1..n_layers - 1]) {
            break;
        }
    }
}

/// The homogeneous forms generated from one source cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationBatch {
    pub source: Architecture,
    /// `members[0]` is always the source itself.
    pub members: Vec<Architecture>,
}

impl AugmentationBatch {
    pub fn count(&self) -> usize {
        self.members.len()
    }

    /// Removes repeated matrices (cells with interchangeable layers), keeping
    /// first occurrences.
    pub fn dedup(mut self) -> Self {
        let mut seen = std::collections::HashSet::new();
        self.members.retain(|m| seen.insert(m.clone()));
        self
    }
}

/// Enumerates the homogeneous forms of `arch`.
///
/// With `limit = None` every one of the `(n - 2)!` interior permutations is
/// applied, in lexicographic order. With `limit = Some(k)` the batch holds
/// the original followed by `k` forms drawn uniformly without replacement
/// from the rest (seeded), still in lexicographic order. Repeated matrices
/// are kept.
pub fn augment_all(arch: &Architecture, limit: Option<usize>, seed: u64) -> Result<AugmentationBatch> {
    arch.validate(Mode::Augmented).into_result()?;
    let n = arch.n_layers();
    let total = augmentation_count(n)?;
    let members = match limit {
        Some(k) if (k as u64) < total - 1 => {
            let mut rng = seed::rng(seed, "augment", 0);
            let mut ranks: Vec<u64> = index::sample(&mut rng, (total - 1) as usize, k)
                .into_iter()
                .map(|r| r as u64 + 1)
                .collect();
            ranks.sort_unstable();
            let mut members = Vec::with_capacity(k + 1);
            members.push(arch.clone());
            for r in ranks {
                let p = InteriorPermutation::nth_lexicographic(n, r)?;
                members.push(permute_with(arch, &p.full()));
            }
            members
        }
        _ => {
            let mut members = Vec::with_capacity(total as usize);
            for_each_permutation(n, |full| members.push(permute_with(arch, full)));
            members
        }
    };
    Ok(AugmentationBatch {
        source: arch.clone(),
        members,
    })
}

/// Augments many cells; cell `i` draws from sub-seed `(seed, "augment", i)`.
/// Output order follows input order regardless of thread count.
pub fn augment_many(archs: &[Architecture], limit: Option<usize>, seed: u64) -> Result<Vec<AugmentationBatch>> {
    archs
        .par_iter()
        .enumerate()
        .map(|(i, a)| augment_all(a, limit, seed::derive(seed, "augment-many", i as u64)))
        .collect()
}

/// Pairs every member with the source's label.
pub fn label_propagate(batch: &AugmentationBatch, y: f64) -> Vec<(Architecture, f64)> {
    batch.members.iter().map(|m| (m.clone(), y)).collect()
}

/// Isomorphism-invariant key: the lexicographically smallest
/// `(interior type codes, adjacency bits)` byte string over all interior
/// permutations. Homogeneous forms of one cell share a key.
pub fn canonical_key(arch: &Architecture) -> Vec<u8> {
    let n = arch.n_layers();
    let code = |t: LayerType| match t {
        LayerType::Null => 0u8,
        LayerType::Op(k) => k + 1,
        LayerType::In => 254,
        LayerType::Out => 255,
    };
    let len = n.saturating_sub(2) + n * n;
    let mut best: Option<Vec<u8>> = None;
    let mut buf = Vec::with_capacity(len);
    for_each_permutation(n, |full| {
        buf.clear();
        buf.extend(full[1..n - 1].iter().map(|&k| code(arch.types()[k])));
        for &i in full {
            for &j in full {
                buf.push(arch.edge(i, j) as u8);
            }
        }
        if best.as_ref().is_none_or(|b| buf < *b) {
            best = Some(buf.clone());
        }
    });
    best.unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::fixtures::*;
    use crate::arch::isomorphic;

    #[test]
    fn identity_is_noop() {
        let a = five_layer();
        assert_eq!(permute(&a, &InteriorPermutation::identity(5)).unwrap(), a);
    }

    #[test]
    fn swapping_null_slot_matches_figure() {
        let a = five_layer();
        let b = permute(&a, &InteriorPermutation::swap(5, 2, 3).unwrap()).unwrap();
        assert_eq!(b.types(), &[LayerType::In, C3, LayerType::Null, C1, LayerType::Out]);
        // rows and columns 2 and 3 swapped
        let expect = Architecture::from_edges(
            vec![LayerType::In, C3, LayerType::Null, C1, LayerType::Out],
            &[(0, 1), (1, 3), (3, 4), (0, 4)],
        )
        .unwrap();
        assert_eq!(b, expect);
        assert!(isomorphic(&a, &b).unwrap());
        assert!(!b.validate(Mode::Strict).is_ok());
        assert!(b.validate(Mode::Augmented).is_ok());
    }

    #[test]
    fn bad_permutations() {
        assert!(InteriorPermutation::new(5, vec![1, 1, 2]).is_err());
        assert!(InteriorPermutation::new(5, vec![0, 1, 2]).is_err());
        assert!(InteriorPermutation::new(5, vec![1, 2]).is_err());
        assert!(InteriorPermutation::swap(5, 0, 2).is_err());
        let p = InteriorPermutation::identity(4);
        assert!(permute(&five_layer(), &p).is_err());
    }

    #[test]
    fn counts() {
        assert_eq!(augmentation_count(7).unwrap(), 120);
        assert_eq!(augmentation_count(8).unwrap(), 720);
        assert_eq!(augmentation_count(2).unwrap(), 1);
        assert!(augmentation_count(13).is_err());
        let tiny = Architecture::from_edges(vec![LayerType::In, LayerType::Out], &[(0, 1)]).unwrap();
        let b = augment_all(&tiny, None, 0).unwrap();
        assert_eq!(b.members, vec![tiny]);
    }

    #[test]
    fn lexicographic_unranking_matches_enumeration() {
        let mut all = Vec::new();
        for_each_permutation(6, |f| all.push(f.to_vec()));
        assert_eq!(all.len(), 24);
        for (r, f) in all.iter().enumerate() {
            assert_eq!(&InteriorPermutation::nth_lexicographic(6, r as u64).unwrap().full(), f);
        }
    }

    #[test]
    fn limited_batches() {
        let a = five_layer().pad(7).unwrap();
        let b = augment_all(&a, Some(30), 3).unwrap();
        assert_eq!(b.count(), 31);
        assert_eq!(b.members[0], a);
        assert_eq!(b, augment_all(&a, Some(30), 3).unwrap());
        assert_eq!(augment_all(&a, Some(0), 3).unwrap().members, vec![a.clone()]);
        assert_eq!(augment_all(&a, Some(500), 3).unwrap().count(), 120);
    }

    #[test]
    fn dedup_collapses_symmetric_forms() {
        // two parallel conv3x3 branches: swapping them gives the same matrix
        let a = Architecture::from_edges(
            vec![LayerType::In, C3, C3, LayerType::Out],
            &[(0, 1), (0, 2), (1, 3), (2, 3)],
        )
        .unwrap();
        let b = augment_all(&a, None, 0).unwrap();
        assert_eq!(b.count(), 2);
        assert_eq!(b.dedup().count(), 1);
    }

    #[test]
    fn canonical_key_is_shared_by_homogeneous_forms() {
        let a = five_layer().pad(6).unwrap();
        let key = canonical_key(&a);
        for m in augment_all(&a, None, 0).unwrap().members {
            assert_eq!(canonical_key(&m), key);
        }
        let other = Architecture::from_edges(
            vec![LayerType::In, C3, MP, LayerType::Null, LayerType::Null, LayerType::Out],
            &[(0, 1), (1, 2), (2, 5), (0, 5)],
        )
        .unwrap();
        assert_ne!(canonical_key(&other), key);
    }

    #[test]
    fn labels_copied() {
        let b = augment_all(&five_layer().pad(7).unwrap(), None, 0).unwrap();
        let rows = label_propagate(&b, 0.94);
        assert_eq!(rows.len(), 120);
        assert!(rows.iter().all(|(_, y)| *y == 0.94));
    }
}
