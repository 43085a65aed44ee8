//! Glue between records, augmentation, encoding and the regressors.

use rayon::prelude::*;

use crate::arch::{Architecture, Space};
use crate::augment::augment_many;
use crate::data_io::{BenchRecord, LabelField};
use crate::encode::Encoder;
use crate::error::{Error, Result};
use crate::regress::{Origin, TrainingSet};

/// Converts records to padded cells of `space`.
pub fn architectures(records: &[BenchRecord], space: &Space) -> Result<Vec<Architecture>> {
    records.par_iter().map(|r| r.architecture(space)).collect()
}

/// Reads one label column.
pub fn labels(records: &[BenchRecord], field: LabelField) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| r.label(field).ok_or_else(|| Error::Config(format!("record `{}` has no {field:?} label", r.id))))
        .collect()
}

/// Builds the regression rows. With `augment` every cell contributes its
/// homogeneous forms (all of them, or the original plus `limit` sampled
/// ones), each carrying the source label; otherwise one row per cell.
/// The feature dimension is the same either way.
pub fn training_set(archs: &[Architecture], y: &[f64], encoder: &Encoder, augment: bool, limit: Option<usize>, seed: u64) -> Result<TrainingSet> {
    if archs.len() != y.len() {
        return Err(Error::LengthMismatch { left: archs.len(), right: y.len() });
    }
    let d = encoder.dim();
    if !augment {
        return TrainingSet::originals(encoder.encode_all(archs)?, d, y.to_vec());
    }
    let batches = augment_many(archs, limit, seed)?;
    let blocks: Vec<Vec<f64>> = batches.par_iter().map(|b| encoder.encode_all(&b.members)).collect::<Result<_>>()?;
    let rows: usize = batches.iter().map(|b| b.count()).sum();
    let mut features = Vec::with_capacity(rows * d);
    let mut labels = Vec::with_capacity(rows);
    let mut origin = Vec::with_capacity(rows);
    for ((b, block), &label) in batches.iter().zip(blocks).zip(y) {
        features.extend(block);
        for k in 0..b.count() {
            labels.push(label);
            origin.push(if k == 0 { Origin::Original } else { Origin::Augmented });
        }
    }
    TrainingSet::new(features, d, labels, origin)
}
