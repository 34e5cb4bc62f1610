use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use hplatent::analysis::{
    embedded_features, error_ratio_table, estimation_curves, imagine_sweep, memory_features, pca_project, write_curve_csv, write_error_ratio_csv,
    write_features_csv, write_projection_csv, write_sweep_csv, CurveModels, FeatureKind, FeatureSet,
};
use hplatent::bisim::{build_anchor_set, pairwise_distance, sample_memories, train_embedding, write_distance_matrix, EmbeddingModel};
use hplatent::envs::{generate_dataset, read_jsonl, simulate, write_jsonl, EnvId, Trajectory};
use hplatent::rng::{derive_seed, rng_from};
use hplatent::worldmodel::{train, train_stateless, StatelessModel, TrainMode, WorldModel};

use crate::config::ExperimentConfig;
use crate::manifest::{config_hash, EmbeddingSummary, Manifest};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    GenData,
    /// `None` trains both modes.
    Train(Option<TrainMode>),
    Embed,
    Eval,
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Train(None) => "train",
            Command::Train(Some(TrainMode::Standard)) => "train-standard",
            Command::Train(Some(TrainMode::TimeInvariant)) => "train-time-invariant",
            Command::Embed => "embed",
            Command::Eval => "eval",
            Command::All => "all",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Complete,
    /// Some optional artifacts could not be produced.
    Partial,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Complete => 0,
            Status::Partial => 2,
        }
    }

    fn and(self, other: Status) -> Status {
        if self == Status::Complete && other == Status::Complete {
            Status::Complete
        } else {
            Status::Partial
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub threads: usize,
    pub force: bool,
}

/// File locations inside an output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    fn file(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn train_data(&self) -> PathBuf {
        self.file("data/train.jsonl")
    }

    pub fn eval_train_data(&self) -> PathBuf {
        self.file("data/eval_train.jsonl")
    }

    pub fn eval_test_data(&self) -> PathBuf {
        self.file("data/eval_test.jsonl")
    }

    pub fn model(&self, mode: TrainMode) -> PathBuf {
        self.file(&format!("models/{}.json", mode.as_str()))
    }

    pub fn stateless_model(&self) -> PathBuf {
        self.file("models/stateless.json")
    }

    pub fn embedding_model(&self) -> PathBuf {
        self.file("models/embedding.json")
    }

    pub fn loss_trace(&self, name: &str) -> PathBuf {
        self.file(&format!("train/loss_{name}.csv"))
    }

    pub fn anchors(&self) -> PathBuf {
        self.file("bisim/anchors.json")
    }

    pub fn memories(&self) -> PathBuf {
        self.file("bisim/memories.json")
    }

    pub fn distances(&self) -> PathBuf {
        self.file("bisim/distances.bin")
    }

    pub fn embedding_loss(&self) -> PathBuf {
        self.file("bisim/embedding_loss.csv")
    }

    pub fn curve(&self, kind: FeatureKind) -> PathBuf {
        self.file(&format!("eval/curve_{}.csv", kind.as_str()))
    }

    pub fn error_ratio(&self) -> PathBuf {
        self.file("eval/error_ratio.csv")
    }

    pub fn features(&self, kind: FeatureKind) -> PathBuf {
        self.file(&format!("eval/features_{}.csv", kind.as_str()))
    }

    pub fn projection(&self, kind: FeatureKind) -> PathBuf {
        self.file(&format!("eval/pca_{}.csv", kind.as_str()))
    }

    pub fn sweep(&self) -> PathBuf {
        self.file("eval/sweep.csv")
    }

    fn eval_outputs(&self) -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = FeatureKind::ALL.iter().flat_map(|&k| [self.curve(k), self.features(k), self.projection(k)]).collect();
        v.extend([self.error_ratio(), self.sweep()]);
        v
    }
}

/// A saved model tagged with what produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "M: Serialize", deserialize = "M: DeserializeOwned"))]
pub struct Checkpoint<M> {
    pub kind: String,
    pub mode: Option<TrainMode>,
    pub env: EnvId,
    pub model: M,
}

fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_string(value)?).with_context(|| format!("writing {}", path.display()))
}

fn read_json<V: DeserializeOwned>(path: &Path) -> Result<V> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Loads a checkpoint if present, checking its environment.
pub fn load_checkpoint<M: DeserializeOwned>(path: &Path, env: EnvId) -> Result<Option<Checkpoint<M>>> {
    if !path.exists() {
        return Ok(None);
    }
    let ck: Checkpoint<M> = read_json(path)?;
    if ck.env != env {
        bail!("{} was trained on {}, config asks for {}", path.display(), ck.env, env);
    }
    Ok(Some(ck))
}

fn ensure_fresh(paths: &[PathBuf], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    if let Some(p) = paths.iter().find(|p| p.exists()) {
        bail!("{} already exists; pass --force to overwrite", p.display());
    }
    Ok(())
}

fn prepare(paths: &[PathBuf]) -> Result<()> {
    for p in paths {
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

fn load_dataset(path: &Path, env: EnvId) -> Result<Vec<Trajectory<f64>>> {
    if !path.exists() {
        bail!("{} not found; run gen-data first", path.display());
    }
    let data: Vec<Trajectory<f64>> = read_jsonl(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(t) = data.iter().find(|t| t.env != env) {
        bail!("{} holds {} trajectories, config asks for {}", path.display(), t.env, env);
    }
    Ok(data)
}

fn write_loss_csv(path: &Path, trace: &[f64]) -> Result<()> {
    let mut text = String::from("epoch,loss\n");
    for (i, l) in trace.iter().enumerate() {
        text.push_str(&format!("{i},{l}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Runs a command against an output directory inside a dedicated thread pool.
pub fn run(cmd: Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Status> {
    cfg.validate()?;
    std::fs::create_dir_all(&opts.out_dir).with_context(|| format!("creating {}", opts.out_dir.display()))?;
    let hash = config_hash(cfg)?;
    let mut manifest = match Manifest::load(&opts.out_dir)? {
        Some(m) if m.input_hash == hash => m,
        Some(_) if !opts.force => bail!("{} holds outputs of a different config; pass --force to start over", opts.out_dir.display()),
        _ => Manifest::new(cfg)?,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.threads).build()?;
    let steps: Vec<Command> = match cmd {
        Command::All => vec![Command::GenData, Command::Train(None), Command::Embed, Command::Eval],
        other => vec![other],
    };
    let layout = Layout::new(&opts.out_dir);
    let mut status = Status::Complete;
    for step in steps {
        let start = Instant::now();
        log::info!("{} ...", step.name());
        let result = pool.install(|| match step {
            Command::GenData => gen_data(cfg, &layout, opts.force),
            Command::Train(mode) => train_models(cfg, &layout, mode, opts.force),
            Command::Embed => embed(cfg, &layout, opts.force, &mut manifest),
            Command::Eval => eval(cfg, &layout, opts.force, &mut manifest),
            Command::All => unreachable!(),
        });
        let step_status = match result {
            Ok(s) => s,
            Err(e) => {
                manifest.warnings.push(format!("{} failed: {e:#}", step.name()));
                manifest.save(&opts.out_dir)?;
                return Err(e);
            }
        };
        manifest.commands.insert(
            step.name().to_string(),
            crate::manifest::CommandRecord {
                seconds: start.elapsed().as_secs_f64(),
                complete: step_status == Status::Complete,
                threads: opts.threads,
            },
        );
        manifest.save(&opts.out_dir)?;
        log::info!("{} finished in {:.1}s", step.name(), start.elapsed().as_secs_f64());
        status = status.and(step_status);
    }
    Ok(status)
}

fn gen_data(cfg: &ExperimentConfig, layout: &Layout, force: bool) -> Result<Status> {
    let outputs = [layout.train_data(), layout.eval_train_data(), layout.eval_test_data()];
    ensure_fresh(&outputs, force)?;
    prepare(&outputs)?;
    let env = cfg.env_id()?;
    let (d, s) = (&cfg.data, &cfg.seeds);
    let splits = [
        (d.train_trajectories, s.train_data),
        (d.eval_train_trajectories, s.eval_train_data),
        (d.eval_test_trajectories, s.eval_test_data),
    ];
    let sets = splits
        .iter()
        .map(|&(n, seed)| generate_dataset::<f64>(env, n, d.length, seed))
        .collect::<hplatent::Result<Vec<_>>>()?;
    let mut seen = HashSet::new();
    for t in sets.iter().flatten() {
        if !seen.insert(t.seed) {
            bail!("trajectory seed {} occurs in more than one split; choose other dataset seeds", t.seed);
        }
    }
    for (path, set) in outputs.iter().zip(&sets) {
        write_jsonl(path, set)?;
    }
    Ok(Status::Complete)
}

fn train_models(cfg: &ExperimentConfig, layout: &Layout, mode: Option<TrainMode>, force: bool) -> Result<Status> {
    let modes = match mode {
        Some(m) => vec![m],
        None => vec![TrainMode::Standard, TrainMode::TimeInvariant],
    };
    let mut outputs = Vec::new();
    for &m in &modes {
        outputs.extend([layout.model(m), layout.loss_trace(m.as_str())]);
        if m == TrainMode::Standard {
            outputs.extend([layout.stateless_model(), layout.loss_trace("stateless")]);
        }
    }
    ensure_fresh(&outputs, force)?;
    prepare(&outputs)?;
    let env = cfg.env_id()?;
    let data = load_dataset(&layout.train_data(), env)?;
    for m in modes {
        let tc = cfg.train_config(m);
        let out = train(&data, tc).with_context(|| format!("training the {} model", m.as_str()))?;
        write_json(&layout.model(m), &Checkpoint { kind: "world-model".into(), mode: Some(m), env, model: out.model })?;
        write_loss_csv(&layout.loss_trace(m.as_str()), &out.loss_trace)?;
        if m == TrainMode::Standard {
            let out = train_stateless(&data, tc).context("training the stateless model")?;
            write_json(&layout.stateless_model(), &Checkpoint { kind: "stateless".into(), mode: None, env, model: out.model })?;
            write_loss_csv(&layout.loss_trace("stateless"), &out.loss_trace)?;
        }
    }
    Ok(Status::Complete)
}

fn embed(cfg: &ExperimentConfig, layout: &Layout, force: bool, manifest: &mut Manifest) -> Result<Status> {
    let outputs = [layout.anchors(), layout.memories(), layout.distances(), layout.embedding_model(), layout.embedding_loss()];
    ensure_fresh(&outputs, force)?;
    prepare(&outputs)?;
    let env = cfg.env_id()?;
    let model: WorldModel<f64> = load_checkpoint(&layout.model(TrainMode::TimeInvariant), env)?
        .ok_or_else(|| anyhow!("time-invariant checkpoint missing; run `train --mode time-invariant` first"))?
        .model;
    let data = load_dataset(&layout.train_data(), env)?;
    let b = &cfg.bisim;
    let anchors = build_anchor_set(&data, b.anchors, cfg.seeds.anchors)?;
    let memories = sample_memories(&model, &data, b.memories, b.min_step, cfg.seeds.memories)?;
    let dd = pairwise_distance(&model, &anchors, &memories)?;
    if !dd.excluded.is_empty() {
        manifest.warnings.push(format!("{} memories excluded for non-finite predictions", dd.excluded.len()));
    }
    write_json(&layout.anchors(), &anchors)?;
    write_json(&layout.memories(), &dd.memories)?;
    write_distance_matrix(&layout.distances(), dd.len(), dd.len(), &dd.distances)?;
    let out = train_embedding(&dd, &b.embedding)?;
    write_json(&layout.embedding_model(), &Checkpoint { kind: "embedding".into(), mode: None, env, model: out.model.clone() })?;
    write_loss_csv(&layout.embedding_loss(), &out.loss_trace)?;
    manifest.embedding = Some(EmbeddingSummary {
        heldout_stress: out.heldout_stress,
        heldout_mean_distance: out.heldout_mean_distance,
        relative_stress: out.relative_stress(),
        heldout_pairs: out.heldout_pairs,
        excluded_memories: dd.excluded,
    });
    Ok(Status::Complete)
}

fn eval(cfg: &ExperimentConfig, layout: &Layout, force: bool, manifest: &mut Manifest) -> Result<Status> {
    let outputs = layout.eval_outputs();
    ensure_fresh(&outputs, force)?;
    prepare(&outputs)?;
    for p in &outputs {
        // stale files from an earlier run must not pass for fresh output
        if p.exists() {
            std::fs::remove_file(p)?;
        }
    }
    let env = cfg.env_id()?;
    let eval_train = load_dataset(&layout.eval_train_data(), env)?;
    let eval_test = load_dataset(&layout.eval_test_data(), env)?;
    let mut missing = Vec::new();
    let mut optional = |path: PathBuf, what: &str| -> Result<Option<PathBuf>> {
        if path.exists() {
            Ok(Some(path))
        } else {
            missing.push(format!("{what} checkpoint missing"));
            Ok(None)
        }
    };
    let standard_path = optional(layout.model(TrainMode::Standard), "standard")?;
    let ti_path = optional(layout.model(TrainMode::TimeInvariant), "time-invariant")?;
    let stateless_path = optional(layout.stateless_model(), "stateless")?;
    let embedding_path = optional(layout.embedding_model(), "embedding")?;
    let load_wm = |p: &Option<PathBuf>| -> Result<Option<WorldModel<f64>>> {
        Ok(match p {
            Some(p) => load_checkpoint::<WorldModel<f64>>(p, env)?.map(|c| c.model),
            None => None,
        })
    };
    let standard = load_wm(&standard_path)?;
    let ti = load_wm(&ti_path)?;
    let stateless = match &stateless_path {
        Some(p) => load_checkpoint::<StatelessModel<f64>>(p, env)?.map(|c| c.model),
        None => None,
    };
    let embedding = match &embedding_path {
        Some(p) => load_checkpoint::<EmbeddingModel<f64>>(p, env)?.map(|c| c.model),
        None => None,
    };

    let spec = env.hidden_spec();
    let models = CurveModels { baseline: standard.as_ref(), time_invariant: ti.as_ref(), embedding: embedding.as_ref() };
    for curve in estimation_curves(models, &eval_train, &eval_test, cfg.eval.knn_k, &spec)? {
        write_curve_csv(&layout.curve(curve.kind), &curve)?;
    }

    let recurrent = match cfg.eval.error_ratio_model {
        TrainMode::Standard => standard.as_ref(),
        TrainMode::TimeInvariant => ti.as_ref(),
    };
    if let (Some(rnn), Some(mlp)) = (recurrent, stateless.as_ref()) {
        let table = error_ratio_table(&eval_test, rnn, mlp, env.feature_names())?;
        write_error_ratio_csv(&layout.error_ratio(), &table)?;
    }

    let all: Vec<Trajectory<f64>> = eval_train.iter().chain(&eval_test).cloned().collect();
    for kind in FeatureKind::ALL {
        let set: Option<FeatureSet<f64>> = match (kind, standard.as_ref(), ti.as_ref(), embedding.as_ref()) {
            (FeatureKind::BaselineMemory, Some(m), _, _) | (FeatureKind::TimeInvariantMemory, _, Some(m), _) => Some(memory_features(m, &all, kind)?),
            (FeatureKind::Embedded, _, Some(m), Some(e)) => Some(embedded_features(m, e, &all)?),
            _ => None,
        };
        if let Some(set) = set {
            write_features_csv(&layout.features(kind), &set)?;
            let last = set.at_step(set.steps() - 1)?;
            let projection = pca_project(&last)?;
            if projection.rank_deficient {
                manifest.warnings.push(format!("{} features have fewer than two principal components", kind.as_str()));
            }
            write_projection_csv(&layout.projection(kind), &projection, &set.labels)?;
        }
    }

    if let Some(model) = ti.as_ref() {
        let values = cfg.sweep_values()?;
        let (conditioning, simulated) = sweep_trajectories(env, &values, cfg.data.length, cfg.seeds.sweep)?;
        let start = &simulated[0].states[0];
        let series = imagine_sweep(model, start, &simulated[0].actions, &conditioning)?;
        write_sweep_csv(&layout.sweep(), &series, &simulated, env.feature_names())?;
    }

    let produced = outputs.iter().filter(|p| p.exists()).count();
    if produced < outputs.len() {
        for m in missing {
            log::warn!("{m}");
            manifest.warnings.push(m);
        }
        log::warn!("eval produced {produced} of {} artifacts", outputs.len());
        return Ok(Status::Partial);
    }
    Ok(Status::Complete)
}

/// For each hidden value: a conditioning trajectory and a ground-truth
/// trajectory, sharing start state and action sequences across values.
pub fn sweep_trajectories(env: EnvId, values: &[f64], length: usize, seed: u64) -> Result<(Vec<Trajectory<f64>>, Vec<Trajectory<f64>>)> {
    let mut rng = rng_from(seed, &[]);
    let cond_actions: Vec<Vec<f64>> = (0..length).map(|_| env.sample_action(&mut rng)).collect();
    let actions: Vec<Vec<f64>> = (0..length).map(|_| env.sample_action(&mut rng)).collect();
    let start: Vec<f64> = env.reference_start();
    let mut conditioning = Vec::new();
    let mut simulated = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        conditioning.push(simulate(env, v, start.clone(), &cond_actions, derive_seed(seed, &[0, i as u64]))?);
        simulated.push(simulate(env, v, start.clone(), &actions, derive_seed(seed, &[1, i as u64]))?);
    }
    Ok((conditioning, simulated))
}
