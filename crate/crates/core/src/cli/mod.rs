//! The `archaug` command line.
//!
//! Every command takes one `--seed`, writes its main output to `-o` and a
//! [`RunManifest`] next to it.

mod manifest;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use manifest::{manifest_path, sha256_file, RunManifest};

use crate::arch::{Architecture, Space};
use crate::augment::augment_many;
use crate::data_io::{gen_synthetic, load_jsonl, write_jsonl, BenchRecord, LabelField, ModelFile, SpaceKind};
use crate::encode::{Encoder, Scheme, Stretch};
use crate::error::{Error, Result};
use crate::metrics::{write_rank_csv, EvalReport};
use crate::nb201::op_vocab_201;
use crate::pipeline;
use crate::regress::{fit, ForestConfig, KnnConfig, LinearConfig, ModelKind, Origin, RegressConfig};
use crate::search::{evolve, query_ground_truth, GroundTruthReport, SearchConfig, SearchResult};

#[derive(Debug, Parser)]
#[command(name = "archaug", version, about = "Architecture augmentation and performance prediction")]
pub struct Cli {
    /// Worker threads; defaults to all cores. Results do not depend on it.
    #[arg(long, global = true, env = "ARCHAUG_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand every record into its homogeneous forms.
    Augment(AugmentArgs),
    /// Fit a predictor.
    Train(TrainArgs),
    /// Score a predictor on labelled records.
    Eval(EvalArgs),
    /// Evolutionary search guided by a predictor.
    Search(SearchArgs),
    /// Write a labelled synthetic dataset.
    GenSynthetic(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceArg {
    Nb101,
    Nb201,
    Synthetic,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpaceArgs {
    #[arg(long, value_enum, default_value = "nb101")]
    pub space: SpaceArg,
    /// Layer count of a synthetic space.
    #[arg(long, default_value_t = 7)]
    pub n_layers: usize,
    /// Operation count of a synthetic space.
    #[arg(long, default_value_t = 3)]
    pub n_types: usize,
}

impl SpaceArgs {
    pub fn space(&self) -> Result<Space> {
        match self.space {
            SpaceArg::Nb101 => Ok(Space::nb101()),
            SpaceArg::Nb201 => Ok(op_vocab_201()),
            SpaceArg::Synthetic => Space::synthetic(self.n_layers, self.n_types),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AugmentArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Keep the original plus this many sampled forms; all forms if absent.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Drop repeated matrices within each cell's batch.
    #[arg(long)]
    pub dedup: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub space: SpaceArgs,
    #[arg(long, value_enum, default_value = "onehot")]
    pub scheme: SchemeArg,
    /// Orientation of the hard encoding.
    #[arg(long, value_enum, default_value = "row")]
    pub stretch: StretchArg,
    #[arg(long, value_enum, default_value = "on")]
    pub augment: Switch,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, value_enum, default_value = "rf")]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value = "val")]
    pub label: LabelArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub n_trees: usize,
    /// Features tried per split; all if absent.
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub min_samples_split: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = Switch::On, value_enum)]
    pub bootstrap: Switch,
    /// Neighbours for `--model knn`.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Model file; a `.bin` extension selects the binary layout.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Onehot,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StretchArg {
    Row,
    Column,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Rf,
    Linear,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelArg {
    Val,
    Test,
}

impl From<LabelArg> for LabelField {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Val => LabelField::Val,
            LabelArg::Test => LabelField::Test,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    pub model: PathBuf,
    pub input: PathBuf,
    /// Override the label column the model was trained on.
    #[arg(long, value_enum)]
    pub label: Option<LabelArg>,
    /// Also write a `true_rank,predicted_rank` CSV.
    #[arg(long)]
    pub ranks: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SearchArgs {
    pub model: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub population: usize,
    #[arg(long, default_value_t = 1000)]
    pub cycles: usize,
    #[arg(long, default_value_t = 10)]
    pub tournament: usize,
    #[arg(long, default_value_t = 0.5)]
    pub edge_flip: f64,
    #[arg(long, default_value_t = 0.5)]
    pub type_change: f64,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Seconds of predictor time after which the search stops.
    #[arg(long)]
    pub time_budget: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Labelled records to look the selected cells up in.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "val")]
    pub label: LabelArg,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    #[arg(short = 'n', long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of the label noise.
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Configures the global thread pool and runs the command.
pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Augment(a) => cmd_augment(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Search(a) => cmd_search(&a).map(|_| ()),
        Command::GenSynthetic(a) => cmd_gen_synthetic(&a),
    }
}

fn load_for(path: &Path, space_args: &SpaceArgs) -> Result<(Space, Vec<BenchRecord>)> {
    let space = space_args.space()?;
    let records = load_jsonl(path)?;
    check_kind(&records, &space, path)?;
    Ok((space, records))
}

fn check_kind(records: &[BenchRecord], space: &Space, path: &Path) -> Result<()> {
    let want = SpaceKind::of(space);
    if let Some(r) = records.iter().find(|r| r.space != want) {
        return Err(Error::Config(format!(
            "{}: record `{}` belongs to {:?}, expected {:?}",
            path.display(),
            r.id,
            r.space,
            want
        )));
    }
    Ok(())
}

pub fn cmd_augment(args: &AugmentArgs) -> Result<()> {
    let mut m = RunManifest::new("augment", args, Some(args.seed))?;
    m.start();
    m.input(&args.input)?;
    let (space, records) = m.time("load", || load_for(&args.input, &args.space))?;
    let archs = pipeline::architectures(&records, &space)?;
    let out = m.time("augment", || {
        if args.limit == Some(0) {
            return Ok(records.clone());
        }
        let batches = augment_many(&archs, args.limit, args.seed)?;
        let mut out = Vec::new();
        for (r, b) in records.iter().zip(batches) {
            let b = if args.dedup { b.dedup() } else { b };
            for (k, a) in b.members.iter().enumerate() {
                let mut rec = BenchRecord::from_architecture(format!("{}#{k}", r.id), &space, a, r.val_acc, r.test_acc);
                rec.origin = Some(if k == 0 { Origin::Original } else { Origin::Augmented });
                rec.source_id = Some(r.id.clone());
                out.push(rec);
            }
        }
        Ok(out)
    })?;
    m.time("write", || write_jsonl(&args.output, &out))?;
    eprintln!(
        "augmented {} records into {} rows (x{:.2})",
        records.len(),
        out.len(),
        out.len() as f64 / records.len().max(1) as f64
    );
    m.output(&args.output);
    m.finish(&args.output)?;
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut m = RunManifest::new("train", args, Some(args.seed))?;
    m.start();
    m.input(&args.input)?;
    let (space, records) = m.time("load", || load_for(&args.input, &args.space))?;
    let scheme = match args.scheme {
        SchemeArg::Onehot => Scheme::OneHot,
        SchemeArg::Hard => Scheme::Hard,
    };
    let stretch = match args.stretch {
        StretchArg::Row => Stretch::Row,
        StretchArg::Column => Stretch::Column,
    };
    let encoder = Encoder::new(space.clone(), scheme).with_stretch(stretch);
    let label = LabelField::from(args.label);
    let augment = args.augment == Switch::On;
    let data = m.time("encode", || {
        let archs = pipeline::architectures(&records, &space)?;
        let y = pipeline::labels(&records, label)?;
        pipeline::training_set(&archs, &y, &encoder, augment, args.limit, seed_for(args.seed, "train-augment"))
    })?;
    let kind = match args.model {
        ModelArg::Rf => ModelKind::Rf,
        ModelArg::Linear => ModelKind::Linear,
        ModelArg::Knn => ModelKind::Knn,
    };
    let config = RegressConfig {
        forest: ForestConfig {
            n_trees: args.n_trees,
            max_features: args.max_features,
            min_samples_split: args.min_samples_split,
            max_depth: args.max_depth,
            bootstrap: args.bootstrap == Switch::On,
        },
        linear: LinearConfig::default(),
        knn: KnnConfig { k: args.k },
    };
    let model = m.time("fit", || fit(&data, kind, &config, seed_for(args.seed, "train-model")))?;
    let file = ModelFile::new(encoder, label, augment, data.len(), model);
    m.time("write", || file.save(&args.output))?;
    eprintln!(
        "trained {:?} on {} rows ({} original, {} features) in {:.2}s",
        kind,
        data.len(),
        data.n_original(),
        data.n_features(),
        m.timings.get("fit").copied().unwrap_or(0.0)
    );
    m.output(&args.output);
    m.finish(&args.output)?;
    Ok(())
}

fn seed_for(master: u64, label: &str) -> u64 {
    crate::seed::derive(master, label, 0)
}

/// Predictions of a model file for records of its space.
pub fn predict_records(model: &ModelFile, records: &[BenchRecord]) -> Result<Vec<f64>> {
    let archs = pipeline::architectures(records, &model.encoder.space)?;
    model.model.predict(&model.encoder.encode_all(&archs)?)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let mut m = RunManifest::new("eval", args, None)?;
    m.start();
    m.input(&args.model)?;
    m.input(&args.input)?;
    let model = m.time("load", || ModelFile::load(&args.model))?;
    let records = m.time("load", || load_jsonl(&args.input))?;
    check_kind(&records, &model.encoder.space, &args.input)?;
    let label = args.label.map(LabelField::from).unwrap_or(model.label);
    let y = pipeline::labels(&records, label)?;
    let yhat = m.time("predict", || predict_records(&model, &records))?;
    let report = EvalReport::compute(&y, &yhat, args.ranks.is_some())?;
    if let (Some(path), Some(pairs)) = (&args.ranks, &report.rank_pairs) {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        write_rank_csv(BufWriter::new(f), pairs).map_err(|e| Error::io(path, e))?;
        m.output(path);
    }
    let slim = EvalReport { rank_pairs: None, ..report };
    write_json(&args.output, &slim)?;
    eprintln!("ktau {:.4}  mse {:.6}  n {}", slim.ktau, slim.mse, slim.n);
    m.output(&args.output);
    m.finish(&args.output)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchOutput {
    #[serde(flatten)]
    pub result: SearchResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruthReport>,
}

pub fn cmd_search(args: &SearchArgs) -> Result<SearchOutput> {
    let mut m = RunManifest::new("search", args, Some(args.seed))?;
    m.start();
    m.input(&args.model)?;
    let model = m.time("load", || ModelFile::load(&args.model))?;
    let space = model.encoder.space.clone();
    let cfg = SearchConfig {
        population: args.population,
        cycles: args.cycles,
        tournament: args.tournament,
        edge_flip: args.edge_flip,
        type_change: args.type_change,
        top_k: args.top_k,
        seed: args.seed,
        time_budget: args.time_budget,
        ..SearchConfig::default()
    };
    let result = m.time("search", || evolve(&space, &model, &cfg))?;
    let ground_truth = match &args.dataset {
        Some(path) => {
            m.input(path)?;
            let records = load_jsonl(path)?;
            let selected = result.selected.iter().map(|c| c.architecture(&space)).collect::<Result<Vec<Architecture>>>()?;
            Some(m.time("query", || query_ground_truth(&selected, &records, &space, args.label.into()))?)
        }
        None => None,
    };
    let out = SearchOutput { result, ground_truth };
    write_json(&args.output, &out)?;
    eprintln!(
        "best predicted {:.4} after {} evaluations",
        out.result.selected.first().map(|c| c.predicted).unwrap_or(f64::NAN),
        out.result.evaluations
    );
    m.output(&args.output);
    m.finish(&args.output)?;
    Ok(out)
}

pub fn cmd_gen_synthetic(args: &GenArgs) -> Result<()> {
    let mut m = RunManifest::new("gen-synthetic", args, Some(args.seed))?;
    m.start();
    let space = args.space.space()?;
    let records = m.time("generate", || gen_synthetic(&space, args.n, args.seed, args.noise))?;
    m.time("write", || write_jsonl(&args.output, &records))?;
    eprintln!("wrote {} records", records.len());
    m.output(&args.output);
    m.finish(&args.output)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
