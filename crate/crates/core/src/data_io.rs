//! Datasets and file formats.
//!
//! Benchmark samples are JSON Lines, one [`BenchRecord`] per line:
//!
//! ```json
//! {"id":"a1","space":"nb101","adjacency":[[0,1,1],[0,0,1],[0,0,0]],"ops":["input","conv3x3-bn-relu","output"],"val_acc":0.91,"test_acc":0.90}
//! {"id":"b7","space":"nb201","edge_ops":{"0,1":"conv3x3","0,2":"none","0,3":"skip_connect","1,2":"none","1,3":"conv1x1","2,3":"none"},"val_acc":0.88}
//! ```
//!
//! NAS-Bench-201 records may instead carry the transformed DAG
//! (`adjacency` + `ops`), which is what `archaug augment` writes.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::arch::{Architecture, LayerType, Mode, Space, Violation};
use crate::augment::canonical_key;
use crate::encode::Encoder;
use crate::error::{Error, Result};
use crate::nb201::{op_vocab_201, to_standard_dag, EdgeCell};
use crate::regress::forest::{ForestModel, Tree};
use crate::regress::{Model, Origin};
use crate::sample;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Nb101,
    Nb201,
    Synthetic,
}

impl SpaceKind {
    pub fn of(space: &Space) -> SpaceKind {
        match space.name.as_str() {
            "nb101" => SpaceKind::Nb101,
            "nb201" => SpaceKind::Nb201,
            _ => SpaceKind::Synthetic,
        }
    }
}

/// One labelled architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub id: String,
    pub space: SpaceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<Vec<Vec<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ops: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_ops: Option<BTreeMap<String, String>>,
    pub val_acc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Origin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
}

/// Which accuracy column is the regression target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelField {
    #[default]
    Val,
    Test,
}

impl BenchRecord {
    /// Record in DAG form.
    pub fn from_architecture(id: impl Into<String>, space: &Space, arch: &Architecture, val_acc: f64, test_acc: Option<f64>) -> Self {
        BenchRecord {
            id: id.into(),
            space: SpaceKind::of(space),
            adjacency: Some(arch.adjacency_rows()),
            ops: Some(arch.types().iter().map(|&t| space.layer_name(t).to_string()).collect()),
            edge_ops: None,
            val_acc,
            test_acc,
            origin: None,
            source_id: None,
        }
    }

    /// Structural checks that do not need a [`Space`].
    pub fn check(&self) -> std::result::Result<(), String> {
        let dag = self.adjacency.is_some() && self.ops.is_some();
        let half_dag = self.adjacency.is_some() != self.ops.is_some();
        let edge = self.edge_ops.is_some();
        if half_dag {
            return Err("`adjacency` and `ops` must be given together".into());
        }
        if dag == edge {
            return Err("exactly one of `adjacency`+`ops` or `edge_ops` is required".into());
        }
        if edge && self.space != SpaceKind::Nb201 {
            return Err("`edge_ops` is only valid for nb201 records".into());
        }
        let in_unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !in_unit(self.val_acc) {
            return Err(format!("val_acc {} is outside [0, 1]", self.val_acc));
        }
        if let Some(t) = self.test_acc {
            if !in_unit(t) {
                return Err(format!("test_acc {t} is outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn label(&self, field: LabelField) -> Option<f64> {
        match field {
            LabelField::Val => Some(self.val_acc),
            LabelField::Test => self.test_acc,
        }
    }

    /// Converts to a cell padded to `space.n_layers`.
    pub fn architecture(&self, space: &Space) -> Result<Architecture> {
        let arch = if let Some(named) = &self.edge_ops {
            let n_nodes = (1..=space.n_layers)
                .find(|k| k * (k - 1) / 2 == named.len())
                .ok_or_else(|| Error::EdgeCell(format!("{} edges do not form a complete cell", named.len())))?;
            to_standard_dag(&EdgeCell::from_named(n_nodes, named)?, space)?
        } else {
            let (adj, ops) = self.adjacency.as_ref().zip(self.ops.as_ref()).ok_or_else(|| Error::Config("record has no structure".into()))?;
            let types = ops.iter().map(|o| space.parse_layer(o)).collect::<Result<Vec<LayerType>>>()?;
            let mut a = Architecture::new(adj.clone(), types)?;
            let report = a.validate(Mode::Augmented);
            // layers that feed nothing (or are fed by nothing) do not change
            // the network, so they are dropped rather than rejected
            if !report.is_ok() && report.violations.iter().all(|v| matches!(v, Violation::OffPath { .. })) {
                a = a.prune().ok_or(Error::Invalid(report.violations))?;
            }
            a.validate(Mode::Augmented).into_result()?;
            a.pad(space.n_layers)?
        };
        space.check(&arch)?;
        Ok(arch)
    }
}

/// Resolves a record's space tag. Synthetic spaces carry their shape
/// outside the record, so the caller supplies it.
pub fn space_for(kind: SpaceKind, synthetic: Option<&Space>) -> Result<Space> {
    match kind {
        SpaceKind::Nb101 => Ok(Space::nb101()),
        SpaceKind::Nb201 => Ok(op_vocab_201()),
        SpaceKind::Synthetic => synthetic
            .cloned()
            .ok_or_else(|| Error::Config("synthetic records need --n-layers and --n-types".into())),
    }
}

/// Parses JSON Lines from `reader`. Blank lines are ignored. NAS-Bench-201
/// cells without an input-to-output path are skipped; their count is
/// returned next to the records.
pub fn read_jsonl<R: BufRead>(reader: R, path: &Path) -> Result<(Vec<BenchRecord>, usize)> {
    let mut out = Vec::new();
    let mut skipped = 0;
    let nb201 = op_vocab_201();
    for (k, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| Error::Schema {
            path: path.to_path_buf(),
            line: k + 1,
            message,
        };
        let rec: BenchRecord = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        rec.check().map_err(schema)?;
        if rec.edge_ops.is_some() {
            match rec.architecture(&nb201) {
                Err(Error::DegenerateCell) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(schema(e.to_string())),
                Ok(_) => {}
            }
        }
        out.push(rec);
    }
    if skipped > 0 {
        log::warn!("{}: skipped {skipped} degenerate NAS-Bench-201 cells", path.display());
    }
    Ok((out, skipped))
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(read_jsonl(BufReader::new(f), path)?.0)
}

pub fn write_jsonl_to<W: Write>(mut w: W, records: &[BenchRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

pub fn write_jsonl(path: impl AsRef<Path>, records: &[BenchRecord]) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_jsonl_to(&mut w, records)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Sizes and seed of a train/test draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// Uniform sampling without replacement: the first `n_train` draws form the
/// training set, the next `n_test` the test set.
pub fn split<T: Clone>(items: &[T], spec: SplitSpec) -> Result<(Vec<T>, Vec<T>)> {
    let need = spec.n_train + spec.n_test;
    if need > items.len() {
        return Err(Error::SplitSize { need, have: items.len() });
    }
    let mut rng = seed::rng(spec.seed, "split", 0);
    let picked = index::sample(&mut rng, items.len(), need).into_vec();
    let train = picked[..spec.n_train].iter().map(|&i| items[i].clone()).collect();
    let test = picked[spec.n_train..].iter().map(|&i| items[i].clone()).collect();
    Ok((train, test))
}

/// Noise-free synthetic accuracy.
///
/// With `c_t` the number of layers of operation `t`, `E` the edge count and
/// `L` the longest In->Out path (in edges):
///
/// ```text
/// w_t = 0.3 * t / max(N_t - 1, 1) - 0.1
/// z   = 1.5 + sum_t w_t c_t + 0.12 E - 0.012 E^2 + 0.3 L - 0.06 L^2
/// y   = 1 / (1 + exp(-z))
/// ```
///
/// Every input is unchanged by interior permutations, so all homogeneous
/// forms of a cell score the same.
pub fn synthetic_score(arch: &Architecture, n_types: usize) -> f64 {
    let denom = n_types.saturating_sub(1).max(1) as f64;
    let mut z = 1.5;
    for t in arch.types() {
        if let LayerType::Op(k) = *t {
            z += 0.3 * k as f64 / denom - 0.1;
        }
    }
    let e = arch.edge_count() as f64;
    let l = arch.longest_path() as f64;
    z += 0.12 * e - 0.012 * e * e + 0.3 * l - 0.06 * l * l;
    1.0 / (1.0 + (-z).exp())
}

/// Generates `n` distinct (non-isomorphic) labelled cells of `space`.
///
/// Labels are [`synthetic_score`] plus `N(0, noise_sd)` noise, clamped to
/// `[0, 1]`; `test_acc` uses an independent noise draw. Spaces small enough
/// to enumerate are sampled exactly and fail if they hold fewer than `n`
/// cells; larger ones are sampled by rejection.
pub fn gen_synthetic(space: &Space, n: usize, seed_value: u64, noise_sd: f64) -> Result<Vec<BenchRecord>> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::Config(format!("noise must be a finite non-negative sd, got {noise_sd}")));
    }
    let mut rng = seed::rng(seed_value, "gen-synthetic", 0);
    let kind = SpaceKind::of(space);
    let archs: Vec<(Architecture, Option<EdgeCell>)> = if kind == SpaceKind::Nb201 {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let attempts = 200 * n + 10_000;
        for _ in 0..attempts {
            if out.len() == n {
                break;
            }
            let cell = sample::random_edge_cell(&mut rng);
            if let Ok(a) = to_standard_dag(&cell, space) {
                if seen.insert(canonical_key(&a)) {
                    out.push((a, Some(cell)));
                }
            }
        }
        if out.len() < n {
            let available = sample::enumerate_nb201(space)?.len();
            return Err(Error::SpaceTooSmall { available, requested: n });
        }
        out
    } else if let Ok(all) = sample::enumerate_space(space) {
        if all.len() < n {
            return Err(Error::SpaceTooSmall {
                available: all.len(),
                requested: n,
            });
        }
        index::sample(&mut rng, all.len(), n).into_iter().map(|i| (all[i].clone(), None)).collect()
    } else {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let attempts = 200 * n + 10_000;
        for _ in 0..attempts {
            if out.len() == n {
                break;
            }
            if let Some(a) = sample::random_architecture(space, &mut rng) {
                if seen.insert(canonical_key(&a)) {
                    out.push((a, None));
                }
            }
        }
        if out.len() < n {
            return Err(Error::SamplingFailed(attempts));
        }
        out
    };
    let normal = Normal::new(0.0, noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let noisy = |base: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        let eps = if noise_sd > 0.0 { normal.sample(rng) } else { 0.0 };
        (base + eps).clamp(0.0, 1.0)
    };
    let mut records = Vec::with_capacity(n);
    for (i, (a, cell)) in archs.into_iter().enumerate() {
        let base = synthetic_score(&a, space.n_types());
        let val = noisy(base, &mut rng);
        let test = noisy(base, &mut rng);
        let id = format!("syn-{i:06}");
        let rec = match cell {
            Some(c) => BenchRecord {
                id,
                space: kind,
                adjacency: None,
                ops: None,
                edge_ops: Some(c.to_named()),
                val_acc: val,
                test_acc: Some(test),
                origin: None,
                source_id: None,
            },
            None => BenchRecord::from_architecture(id, space, &a, val, Some(test)),
        };
        records.push(rec);
    }
    Ok(records)
}

/// Everything needed to use a trained predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub encoder: Encoder,
    pub label: LabelField,
    pub augmented: bool,
    pub n_train_rows: usize,
    pub model: Model,
}

pub const MODEL_FORMAT: &str = "archaug-model";
pub const MODEL_VERSION: u32 = 1;
const BINARY_MAGIC: &[u8; 8] = b"ARCHAUG\x01";

impl ModelFile {
    pub fn new(encoder: Encoder, label: LabelField, augmented: bool, n_train_rows: usize, model: Model) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            encoder,
            label,
            augmented,
            n_train_rows,
            model,
        }
    }

    /// JSON unless the path ends in `.bin`, which selects the compact binary
    /// layout (see [`ModelFile::to_binary`]).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = if is_binary(path) { self.to_binary()? } else { serde_json::to_vec(self)? };
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let m = if bytes.starts_with(BINARY_MAGIC) {
            Self::from_binary(&bytes)?
        } else {
            serde_json::from_slice::<ModelFile>(&bytes)?
        };
        if m.version != MODEL_VERSION || m.format != MODEL_FORMAT {
            return Err(Error::ModelVersion(m.version));
        }
        Ok(m)
    }

    /// Binary layout, all integers little endian:
    ///
    /// ```text
    /// magic "ARCHAUG\x01"
    /// u64 header length, header JSON (this struct; forest trees emptied)
    /// u64 tree count, then per tree:
    ///   u64 node count, i32 feature[], f64 threshold[], u32 left[],
    ///   u32 right[], f64 value[]
    /// ```
    pub fn to_binary(&self) -> Result<Vec<u8>> {
        let mut header = self.clone();
        let trees = match &mut header.model {
            Model::Rf(f) => std::mem::take(&mut f.trees),
            _ => Vec::new(),
        };
        let head = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(head.len() + 64);
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(head.len() as u64).to_le_bytes());
        out.extend_from_slice(&head);
        out.extend_from_slice(&(trees.len() as u64).to_le_bytes());
        for t in &trees {
            out.extend_from_slice(&(t.feature.len() as u64).to_le_bytes());
            t.feature.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
            t.threshold.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
            t.left.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
            t.right.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
            t.value.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
        Ok(out)
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: BINARY_MAGIC.len() };
        if !bytes.starts_with(BINARY_MAGIC) {
            return Err(Error::Config("not a binary model file".into()));
        }
        let head_len = cur.u64()? as usize;
        let mut m: ModelFile = serde_json::from_slice(cur.take(head_len)?)?;
        let n_trees = cur.u64()? as usize;
        if let Model::Rf(ForestModel { trees, n_features, .. }) = &mut m.model {
            for _ in 0..n_trees {
                let k = cur.u64()? as usize;
                let feature = cur.array(k, 4, |b| i32::from_le_bytes(b.try_into().unwrap()))?;
                let threshold = cur.array(k, 8, |b| f64::from_le_bytes(b.try_into().unwrap()))?;
                let left = cur.array(k, 4, |b| u32::from_le_bytes(b.try_into().unwrap()))?;
                let right = cur.array(k, 4, |b| u32::from_le_bytes(b.try_into().unwrap()))?;
                let value = cur.array(k, 8, |b| f64::from_le_bytes(b.try_into().unwrap()))?;
                trees.push(Tree::from_arrays(feature, threshold, left, right, value, *n_features)?);
            }
        } else if n_trees != 0 {
            return Err(Error::Config("trees present for a non-forest model".into()));
        }
        Ok(m)
    }
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Config("truncated model file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn array<T>(&mut self, k: usize, width: usize, f: impl Fn(&[u8]) -> T) -> Result<Vec<T>> {
        let raw = self.take(k.checked_mul(width).ok_or_else(|| Error::Config("bad length".into()))?)?;
        Ok(raw.chunks_exact(width).map(f).collect())
    }
}
