//! Aging evolution driven by a performance predictor.
//!
//! The population is a queue: each cycle samples a tournament, mutates its
//! best member once and replaces the oldest member with the child. Every
//! evaluated cell is remembered, and the result lists the best `top_k`
//! distinct cells (up to isomorphism) ever scored.

use std::collections::{HashMap, VecDeque};
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arch::{Architecture, LayerType, Mode, Space};
use crate::augment::canonical_key;
use crate::data_io::{BenchRecord, LabelField, ModelFile, SpaceKind};
use crate::encode::Encoder;
use crate::error::{Error, Result};
use crate::nb201::{to_standard_dag, EdgeCell, EdgeOp};
use crate::regress::Model;
use crate::sample;
use crate::seed;

/// Scores cells; higher is better.
pub trait Predictor {
    fn predict(&self, archs: &[Architecture]) -> Result<Vec<f64>>;
}

/// Encoder plus trained model.
pub struct ModelPredictor<'a> {
    pub encoder: &'a Encoder,
    pub model: &'a Model,
}

impl Predictor for ModelPredictor<'_> {
    fn predict(&self, archs: &[Architecture]) -> Result<Vec<f64>> {
        self.model.predict(&self.encoder.encode_all(archs)?)
    }
}

impl Predictor for ModelFile {
    fn predict(&self, archs: &[Architecture]) -> Result<Vec<f64>> {
        self.model.predict(&self.encoder.encode_all(archs)?)
    }
}

/// Wraps a scoring function, e.g. a ground-truth oracle.
pub struct FnPredictor<F>(pub F);

impl<F: Fn(&Architecture) -> f64> Predictor for FnPredictor<F> {
    fn predict(&self, archs: &[Architecture]) -> Result<Vec<f64>> {
        Ok(archs.iter().map(&self.0).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub population: usize,
    pub cycles: usize,
    pub tournament: usize,
    /// Relative weight of the edge-flip mutation.
    pub edge_flip: f64,
    /// Relative weight of the type-change mutation.
    pub type_change: f64,
    pub top_k: usize,
    pub seed: u64,
    /// Stop once this many seconds have been spent inside the predictor.
    pub time_budget: Option<f64>,
    /// Attempts per sample or mutation before giving up.
    pub max_retries: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population: 100,
            cycles: 1000,
            tournament: 10,
            edge_flip: 0.5,
            type_change: 0.5,
            top_k: 10,
            seed: 0,
            time_budget: None,
            max_retries: 1000,
        }
    }
}

impl SearchConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.tournament == 0 || self.tournament > self.population {
            return bad("need 1 <= tournament <= population");
        }
        if self.top_k > self.population {
            return bad("top_k must not exceed population");
        }
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        if !unit(self.edge_flip) || !unit(self.type_change) || self.edge_flip + self.type_change == 0.0 {
            return bad("mutation probabilities must lie in [0, 1] and not both be zero");
        }
        if self.time_budget.is_some_and(|t| t.is_nan() || t < 0.0) {
            return bad("time budget must be non-negative");
        }
        if self.max_retries == 0 {
            return bad("max_retries must be positive");
        }
        Ok(())
    }
}

/// One selected cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub adjacency: Vec<Vec<u8>>,
    pub ops: Vec<String>,
    pub predicted: f64,
}

impl Candidate {
    pub fn architecture(&self, space: &Space) -> Result<Architecture> {
        let types = self.ops.iter().map(|o| space.parse_layer(o)).collect::<Result<Vec<_>>>()?;
        Architecture::new(self.adjacency.clone(), types)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Cycles,
    TimeBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Best distinct cells, highest prediction first.
    pub selected: Vec<Candidate>,
    /// Best prediction so far: initial population, then after each cycle.
    pub history: Vec<f64>,
    /// Cells passed to the predictor.
    pub evaluations: usize,
    pub cycles_run: usize,
    pub stopped: StopReason,
    pub predictor_seconds: f64,
}

/// What mutation acts on. DAG cells keep their unpruned matrix, so
/// vertices off every path stay available to later mutations.
#[derive(Clone)]
enum Genome {
    Dag(Architecture),
    Cell(EdgeCell),
}

#[derive(Clone)]
struct Member {
    genome: Genome,
    score: f64,
}

struct Evaluator<'a, P: ?Sized> {
    predictor: &'a P,
    spent: Duration,
    calls: usize,
    seen: HashMap<Vec<u8>, (f64, Architecture)>,
}

impl<P: Predictor + ?Sized> Evaluator<'_, P> {
    fn score(&mut self, archs: &[Architecture]) -> Result<Vec<f64>> {
        let t = Instant::now();
        let s = self.predictor.predict(archs)?;
        self.spent += t.elapsed();
        self.calls += archs.len();
        if s.len() != archs.len() {
            return Err(Error::LengthMismatch { left: archs.len(), right: s.len() });
        }
        for (a, &v) in archs.iter().zip(&s) {
            if !v.is_finite() {
                return Err(Error::Config(format!("predictor returned {v}")));
            }
            self.seen.entry(canonical_key(a)).or_insert_with(|| (v, a.clone()));
        }
        Ok(s)
    }
}

fn is_nb201(space: &Space) -> bool {
    SpaceKind::of(space) == SpaceKind::Nb201
}

fn express(genome: &Genome, space: &Space) -> Option<Architecture> {
    match genome {
        Genome::Dag(g) => sample::express(g, space.n_layers),
        Genome::Cell(c) => to_standard_dag(c, space).ok(),
    }
}

fn random_member(space: &Space, rng: &mut ChaCha8Rng, retries: usize) -> Result<(Architecture, Genome)> {
    for _ in 0..retries {
        let g = if is_nb201(space) {
            Genome::Cell(sample::random_edge_cell(rng))
        } else {
            Genome::Dag(sample::random_genome(space, rng))
        };
        if let Some(a) = express(&g, space) {
            return Ok((a, g));
        }
    }
    Err(Error::SamplingFailed(retries))
}

/// Flips one upper-triangular bit or changes one interior operation.
fn mutate_dag(g: &Architecture, space: &Space, cfg: &SearchConfig, rng: &mut ChaCha8Rng) -> Option<Architecture> {
    let n = g.n_layers();
    let nt = space.n_types();
    let mut types = g.types().to_vec();
    let mut adj = g.adjacency().to_vec();
    let flip = nt < 2 || n < 3 || rng.random::<f64>() * (cfg.edge_flip + cfg.type_change) < cfg.edge_flip;
    if flip {
        let mut k = rng.random_range(0..n * (n - 1) / 2);
        let mut i = 0;
        while k >= n - 1 - i {
            k -= n - 1 - i;
            i += 1;
        }
        adj[i * n + i + 1 + k] ^= 1;
    } else {
        let v = rng.random_range(1..n - 1);
        let LayerType::Op(cur) = types[v] else { return None };
        let mut new = rng.random_range(0..nt - 1) as u8;
        if new >= cur {
            new += 1;
        }
        types[v] = LayerType::Op(new);
    }
    Architecture::from_flat(adj, types).ok()
}

/// Changes one edge operation of a 4-node cell.
fn mutate_cell(cell: &EdgeCell, rng: &mut ChaCha8Rng) -> Option<EdgeCell> {
    let mut ops = cell.edge_ops().clone();
    let k = rng.random_range(0..ops.len());
    let slot = ops.values_mut().nth(k)?;
    let choices: Vec<EdgeOp> = EdgeOp::ALL.iter().copied().filter(|o| o != slot).collect();
    *slot = choices[rng.random_range(0..choices.len())];
    EdgeCell::new(cell.n_nodes(), ops).ok()
}

/// A mutated child whose expressed cell is valid.
fn mutate(parent: &Member, space: &Space, cfg: &SearchConfig, rng: &mut ChaCha8Rng) -> Result<(Architecture, Genome)> {
    for _ in 0..cfg.max_retries {
        let g = match &parent.genome {
            Genome::Dag(g) => mutate_dag(g, space, cfg, rng).map(Genome::Dag),
            Genome::Cell(c) => mutate_cell(c, rng).map(Genome::Cell),
        };
        if let Some(a) = g.as_ref().and_then(|g| express(g, space)) {
            if a.is_valid(Mode::Strict) {
                return Ok((a, g.unwrap()));
            }
        }
    }
    Err(Error::SamplingFailed(cfg.max_retries))
}

/// Runs aging evolution over `space`.
pub fn evolve<P: Predictor + ?Sized>(space: &Space, predictor: &P, cfg: &SearchConfig) -> Result<SearchResult> {
    cfg.check()?;
    let mut rng = seed::rng(cfg.seed, "search", 0);
    let mut ev = Evaluator {
        predictor,
        spent: Duration::ZERO,
        calls: 0,
        seen: HashMap::new(),
    };

    let mut init = Vec::with_capacity(cfg.population);
    for _ in 0..cfg.population {
        init.push(random_member(space, &mut rng, cfg.max_retries)?);
    }
    let archs: Vec<Architecture> = init.iter().map(|(a, _)| a.clone()).collect();
    let scores = ev.score(&archs)?;
    let mut queue: VecDeque<Member> = init
        .into_iter()
        .zip(scores)
        .map(|((_, genome), score)| Member { genome, score })
        .collect();

    let mut best = queue.iter().map(|m| m.score).fold(f64::NEG_INFINITY, f64::max);
    let mut history = vec![best];
    let budget = cfg.time_budget.map(Duration::from_secs_f64);
    let mut stopped = StopReason::Cycles;
    let mut cycles_run = 0;
    for _ in 0..cfg.cycles {
        if budget.is_some_and(|b| ev.spent >= b) {
            stopped = StopReason::TimeBudget;
            break;
        }
        let picks = index::sample(&mut rng, queue.len(), cfg.tournament);
        let mut parent = picks.index(0);
        for i in picks.iter().skip(1) {
            if queue[i].score > queue[parent].score {
                parent = i;
            }
        }
        let (arch, genome) = mutate(&queue[parent], space, cfg, &mut rng)?;
        let score = ev.score(std::slice::from_ref(&arch))?[0];
        queue.pop_front();
        queue.push_back(Member { genome, score });
        best = best.max(score);
        history.push(best);
        cycles_run += 1;
    }

    let mut ranked: Vec<(Vec<u8>, f64, Architecture)> = ev.seen.into_iter().map(|(k, (s, a))| (k, s, a)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let selected = ranked
        .into_iter()
        .take(cfg.top_k)
        .map(|(_, s, a)| Candidate {
            adjacency: a.adjacency_rows(),
            ops: a.types().iter().map(|&t| space.layer_name(t).to_string()).collect(),
            predicted: s,
        })
        .collect();
    Ok(SearchResult {
        selected,
        history,
        evaluations: ev.calls,
        cycles_run,
        stopped,
        predictor_seconds: ev.spent.as_secs_f64(),
    })
}

/// True accuracy of one selected cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub id: String,
    pub val_acc: f64,
    pub test_acc: Option<f64>,
    /// Share of distinct dataset cells whose label is at most this one, in
    /// percent. The dataset's best scores 100.
    pub percentile: f64,
    /// `100 * rank / N` with rank 1 for the best; the "top x%" figure.
    pub top_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthReport {
    pub label: LabelField,
    pub dataset_size: usize,
    pub results: Vec<GroundTruth>,
    pub mean_val_acc: Option<f64>,
    pub mean_test_acc: Option<f64>,
}

/// Looks up `selected` in `dataset` by canonical key, so any homogeneous
/// form of a cell finds the same record. Repeated cells in the dataset keep
/// their first record.
pub fn query_ground_truth(selected: &[Architecture], dataset: &[BenchRecord], space: &Space, label: LabelField) -> Result<GroundTruthReport> {
    let mut by_key: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut labels = Vec::new();
    for (i, r) in dataset.iter().enumerate() {
        let a = r.architecture(space)?;
        if let std::collections::hash_map::Entry::Vacant(e) = by_key.entry(canonical_key(&a)) {
            e.insert(i);
            labels.push(r.label(label).ok_or_else(|| Error::Config(format!("record {} has no {label:?} label", r.id)))?);
        }
    }
    labels.sort_by(f64::total_cmp);
    let n = labels.len();
    let mut results = Vec::with_capacity(selected.len());
    let mut missing = Vec::new();
    for (k, a) in selected.iter().enumerate() {
        let Some(&i) = by_key.get(&canonical_key(a)) else {
            missing.push(k);
            continue;
        };
        let r = &dataset[i];
        let y = r.label(label).unwrap_or(r.val_acc);
        let at_most = labels.partition_point(|&v| v <= y);
        results.push(GroundTruth {
            id: r.id.clone(),
            val_acc: r.val_acc,
            test_acc: r.test_acc,
            percentile: 100.0 * at_most as f64 / n as f64,
            top_percent: 100.0 * (n - at_most + 1) as f64 / n as f64,
        });
    }
    if !missing.is_empty() {
        return Err(Error::NotFound(missing));
    }
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let mean_test_acc = if results.iter().all(|g| g.test_acc.is_some()) {
        mean(results.iter().filter_map(|g| g.test_acc).collect())
    } else {
        None
    };
    Ok(GroundTruthReport {
        label,
        dataset_size: n,
        mean_val_acc: mean(results.iter().map(|g| g.val_acc).collect()),
        mean_test_acc,
        results,
    })
}
