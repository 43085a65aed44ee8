//! Fixed-length feature vectors for regression.
//!
//! Two schemes are provided:
//!
//! * **one-hot**: drop In/Out from the type list and the first column and
//!   last row from the adjacency matrix, flatten the remaining
//!   `(n-1) x (n-1)` matrix by row and append one `N_t`-wide one-hot block per
//!   interior layer (`Null` is an all-zero block). Length
//!   `(n-1)^2 + (n-2) * N_t`.
//! * **hard**: the integer baseline. Layer types become integers (`Null` = 0,
//!   operations `1..=N_t` in vocabulary order), the integer row is stretched
//!   to an `n x n` matrix and multiplied elementwise with the adjacency
//!   matrix. Length `n^2`.

use serde::{Deserialize, Serialize};

use crate::arch::{Architecture, LayerType, Space};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[serde(rename = "onehot")]
    OneHot,
    Hard,
}

/// How the hard scheme stretches the integer type row into a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stretch {
    /// Entry `(i, j)` carries the type of the target layer `j`.
    #[default]
    Row,
    /// Entry `(i, j)` carries the type of the source layer `i`.
    Column,
}

/// The In/Out-free view of a cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduced {
    /// `(n-1) x (n-1)`, row-major. Rows are layers `0..n-1`, columns layers
    /// `1..n`.
    pub adjacency: Vec<u8>,
    pub types: Vec<LayerType>,
}

impl Reduced {
    pub fn side(&self) -> usize {
        self.types.len() + 1
    }
}

/// Drops In/Out from the type list, the first adjacency column (inputs of
/// In) and the last row (outputs of Out).
pub fn reduce(arch: &Architecture) -> Result<Reduced> {
    let n = arch.n_layers();
    if n < 2 {
        return Err(Error::Invalid(vec![crate::arch::Violation::TooFewLayers]));
    }
    let m = n - 1;
    let src = arch.adjacency();
    let mut adjacency = Vec::with_capacity(m * m);
    for i in 0..m {
        adjacency.extend_from_slice(&src[i * n + 1..i * n + n]);
    }
    Ok(Reduced {
        adjacency,
        types: arch.types()[1..n - 1].to_vec(),
    })
}

/// Inverse of [`reduce`]: re-attaches In and Out with an empty In column and
/// Out row.
pub fn reconstruct(r: &Reduced) -> Architecture {
    let m = r.side();
    let n = m + 1;
    let mut adjacency = vec![0u8; n * n];
    for i in 0..m {
        adjacency[i * n + 1..i * n + n].copy_from_slice(&r.adjacency[i * m..i * m + m]);
    }
    let mut types = Vec::with_capacity(n);
    types.push(LayerType::In);
    types.extend_from_slice(&r.types);
    types.push(LayerType::Out);
    Architecture::from_parts_unchecked(n, adjacency, types)
}

/// One `n_types`-wide block per entry; `Null` maps to zeros.
pub fn one_hot(types: &[LayerType], n_types: usize) -> Result<Vec<u8>> {
    let mut out = vec![0u8; types.len() * n_types];
    for (k, t) in types.iter().enumerate() {
        match *t {
            LayerType::Op(op) => {
                let op = op as usize;
                if op >= n_types {
                    return Err(Error::OpOutOfRange { op, n_types });
                }
                out[k * n_types + op] = 1;
            }
            LayerType::Null => {}
            LayerType::In => return Err(Error::Placeholder("In")),
            LayerType::Out => return Err(Error::Placeholder("Out")),
        }
    }
    Ok(out)
}

/// Integer code used by the hard scheme. In and Out carry the bare edge bit.
fn hard_code(t: LayerType) -> u8 {
    match t {
        LayerType::Null => 0,
        LayerType::Op(k) => k + 1,
        LayerType::In | LayerType::Out => 1,
    }
}

/// Maps architectures of one space to feature vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoder {
    pub space: Space,
    pub scheme: Scheme,
    #[serde(default)]
    pub stretch: Stretch,
}

impl Encoder {
    pub fn new(space: Space, scheme: Scheme) -> Self {
        Encoder {
            space,
            scheme,
            stretch: Stretch::Row,
        }
    }

    pub fn with_stretch(mut self, stretch: Stretch) -> Self {
        self.stretch = stretch;
        self
    }

    /// Feature count; depends only on the space and scheme.
    pub fn dim(&self) -> usize {
        let n = self.space.n_layers;
        match self.scheme {
            Scheme::OneHot => (n - 1) * (n - 1) + (n - 2) * self.space.n_types(),
            Scheme::Hard => n * n,
        }
    }

    /// Encodes a cell already padded to the space's layer count.
    pub fn encode(&self, arch: &Architecture) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.dim());
        self.encode_into(arch, &mut out)?;
        Ok(out)
    }

    /// Appends the encoding to `out`.
    pub fn encode_into(&self, arch: &Architecture, out: &mut Vec<f64>) -> Result<()> {
        self.space.check(arch)?;
        match self.scheme {
            Scheme::OneHot => {
                let r = reduce(arch)?;
                out.extend(r.adjacency.iter().map(|&v| v as f64));
                out.extend(one_hot(&r.types, self.space.n_types())?.into_iter().map(|v| v as f64));
            }
            Scheme::Hard => {
                let n = arch.n_layers();
                let codes: Vec<u8> = arch.types().iter().map(|&t| hard_code(t)).collect();
                for i in 0..n {
                    for j in 0..n {
                        let c = match self.stretch {
                            Stretch::Row => codes[j],
                            Stretch::Column => codes[i],
                        };
                        out.push((arch.adjacency()[i * n + j] * c) as f64);
                    }
                }
            }
        }
        Ok(())
    }

    /// Encodes many cells into one row-major matrix.
    pub fn encode_all(&self, archs: &[Architecture]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(archs.len() * self.dim());
        for a in archs {
            self.encode_into(a, &mut out)?;
        }
        Ok(out)
    }
}

/// One-hot encoding of a padded cell.
pub fn encode_onehot(arch: &Architecture, space: &Space) -> Result<Vec<f64>> {
    Encoder::new(space.clone(), Scheme::OneHot).encode(arch)
}

/// Hard (integer) encoding of a padded cell, row stretch.
pub fn encode_hard(arch: &Architecture, space: &Space) -> Result<Vec<f64>> {
    Encoder::new(space.clone(), Scheme::Hard).encode(arch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::fixtures::*;
    use crate::augment::{permute, InteriorPermutation};

    fn five_space() -> Space {
        Space::new("fig", 5, vec!["conv1x1".into(), "conv3x3".into(), "maxpool3x3".into()]).unwrap()
    }

    #[test]
    fn one_hot_blocks() {
        assert_eq!(one_hot(&[C1, C3, MP], 3).unwrap(), vec![1, 0, 0, 0, 1, 0, 0, 0, 1]);
        assert_eq!(one_hot(&[LayerType::Null], 3).unwrap(), vec![0, 0, 0]);
        assert!(matches!(one_hot(&[LayerType::Op(3)], 3), Err(Error::OpOutOfRange { op: 3, n_types: 3 })));
        assert!(one_hot(&[LayerType::In], 3).is_err());
    }

    #[test]
    fn reduce_shapes() {
        let a = five_layer().pad(7).unwrap();
        let r = reduce(&a).unwrap();
        assert_eq!(r.adjacency.len(), 36);
        assert_eq!(r.types.len(), 5);
        assert_eq!(reconstruct(&r), a);
        let tiny = Architecture::from_edges(vec![LayerType::In, LayerType::Out], &[(0, 1)]).unwrap();
        let r = reduce(&tiny).unwrap();
        assert_eq!(r.adjacency, vec![1]);
        assert!(r.types.is_empty());
        assert_eq!(reconstruct(&r), tiny);
    }

    #[test]
    fn lengths() {
        assert_eq!(Encoder::new(Space::nb101(), Scheme::OneHot).dim(), 51);
        assert_eq!(Encoder::new(Space::nb101(), Scheme::Hard).dim(), 49);
        let a = five_layer().pad(7).unwrap();
        assert_eq!(encode_onehot(&a, &Space::nb101()).unwrap().len(), 51);
        assert!(encode_onehot(&five_layer(), &Space::nb101()).is_err());
    }

    #[test]
    fn hard_entries_follow_target_type() {
        let a = five_layer();
        let v = encode_hard(&a, &five_space()).unwrap();
        // hand-computed: edges (0,1) conv3x3 -> 2, (1,2) conv1x1 -> 1,
        // (2,4) Out -> 1, (0,4) Out -> 1
        let mut expect = vec![0.0; 25];
        expect[1] = 2.0;
        expect[5 + 2] = 1.0;
        expect[2 * 5 + 4] = 1.0;
        expect[4] = 1.0;
        assert_eq!(v, expect);
        let col = Encoder::new(five_space(), Scheme::Hard).with_stretch(Stretch::Column).encode(&a).unwrap();
        // (1,2) now carries the source type conv3x3
        assert_eq!(col[5 + 2], 2.0);
        assert_eq!(col[2 * 5 + 4], 1.0);
    }

    #[test]
    fn hard_zero_adjacency() {
        let a = Architecture::from_edges(vec![LayerType::In, LayerType::Null, LayerType::Null, LayerType::Null, LayerType::Out], &[]).unwrap();
        assert!(encode_hard(&a, &five_space()).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn homogeneous_forms_encode_differently() {
        let a = five_layer();
        let b = permute(&a, &InteriorPermutation::swap(5, 1, 2).unwrap()).unwrap();
        assert_ne!(encode_onehot(&a, &five_space()).unwrap(), encode_onehot(&b, &five_space()).unwrap());
    }
}
