//! Experiment harness: run configuration with dotted-path overrides,
//! model persistence, the synthetic-expert classification experiment,
//! and artifact emission (results CSVs, model files, run manifest).

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calib::{verify_bound_grid, BoundCell, BoundGridConfig};
use crate::data::{
    generate_blob_dataset, split_specific, AnnotatorPool, BlobConfig, DeferDataset, SyntheticExpert,
};
use crate::defer::{evaluate, train_rejector_classifier, RejectorClassifier, SystemMetrics};
use crate::driving::{
    generate_driving_dataset, run_driving_experiment, train_driving_policy, DrivingConfig,
    DrivingExperimentConfig, DrivingReport, DRIVING_HIDDEN,
};
use crate::error::{Error, Result};
use crate::human_model::{self_train, train_baseline, train_finetuned, HumanModel, Regime};
use crate::nn::{grad_check, LossTarget, Network, TrainConfig, TrainExample};
use crate::stats::derive_seed;

const BLOB_SALT: u64 = 0x63_6c_62;
const SHUFFLE_SALT: u64 = 0x63_6c_73;
const POOL_SALT: u64 = 0x63_6c_70;
const EXPERT_SALT: u64 = 0x63_6c_65;
const SPLIT_SALT: u64 = 0x63_6c_74;
const HUMAN_MODEL_SALT: u64 = 0x63_6c_68;
const REJECTOR_SALT: u64 = 0x63_6c_72;

/// Which experiment a run executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Driving,
    Classification,
    Bound,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Driving => "driving",
            Experiment::Classification => "classification",
            Experiment::Bound => "bound",
        })
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "driving" => Ok(Experiment::Driving),
            "classification" => Ok(Experiment::Classification),
            "bound" => Ok(Experiment::Bound),
            other => Err(Error::Config(format!(
                "unknown experiment {other:?} (expected driving|classification|bound)"
            ))),
        }
    }
}

/// Which trained models to write to disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaveModels {
    None,
    /// One representative model pair per regime.
    Summary,
    /// Every trained cell (classification only; driving always saves
    /// the representative pair).
    All,
}

/// Sizes and model shape of the synthetic-expert classification
/// experiment on the blob dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassificationConfig {
    pub num_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub spread: f64,
    pub separation: f64,
    /// Points annotated by the simulated population.
    pub aggregate_size: usize,
    /// Points annotated by the one individual (split 50/50).
    pub specific_size: usize,
    pub num_annotators: usize,
    /// Beta distribution of per-class annotator accuracy.
    pub annotator_alpha: f64,
    pub annotator_beta: f64,
    pub expert_ks: Vec<usize>,
    pub hidden: Vec<usize>,
    pub self_train_rounds: usize,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        ClassificationConfig {
            num_classes: 10,
            dim: 16,
            per_class: 600,
            spread: 1.0,
            separation: 6.0,
            aggregate_size: 2000,
            specific_size: 500,
            num_annotators: 50,
            annotator_alpha: 18.0,
            annotator_beta: 2.0,
            expert_ks: (0..=10).collect(),
            hidden: vec![64, 64],
            self_train_rounds: 1,
        }
    }
}

impl ClassificationConfig {
    pub fn validate(&self) -> Result<()> {
        let total = self.num_classes * self.per_class;
        if self.aggregate_size + self.specific_size >= total {
            return Err(Error::Config(format!(
                "aggregate ({}) + specific ({}) must leave unlabeled points out of {total}",
                self.aggregate_size, self.specific_size
            )));
        }
        if self.aggregate_size == 0 || self.specific_size < 2 {
            return Err(Error::Config(
                "need a non-empty aggregate pool and at least 2 specific points".into(),
            ));
        }
        if self.expert_ks.is_empty() {
            return Err(Error::Config("expert_ks must not be empty".into()));
        }
        if let Some(&k) = self.expert_ks.iter().find(|&&k| k > self.num_classes) {
            return Err(Error::Config(format!(
                "expert k={k} exceeds num_classes {}",
                self.num_classes
            )));
        }
        if self.num_annotators == 0 {
            return Err(Error::Config("need at least one annotator".into()));
        }
        if self.self_train_rounds == 0 {
            return Err(Error::Config("self_train_rounds must be >= 1".into()));
        }
        self.blob_config(0).validate()
    }

    fn blob_config(&self, seed: u64) -> BlobConfig {
        BlobConfig {
            num_classes: self.num_classes,
            dim: self.dim,
            per_class: self.per_class,
            spread: self.spread,
            separation: self.separation,
            seed,
        }
    }
}

/// Builds one seed's dataset: a fresh blob world partitioned into the
/// aggregate pool (annotated by the simulated population), the expert's
/// specific points (split 50/50), and the truth-only remainder.
pub fn build_classification_dataset(
    cfg: &ClassificationConfig,
    expert_k: usize,
    seed: u64,
) -> Result<DeferDataset> {
    let points = generate_blob_dataset(&cfg.blob_config(derive_seed(seed, BLOB_SALT)))?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, SHUFFLE_SALT));
        order.shuffle(&mut rng);
    }
    let pick = |range: std::ops::Range<usize>| -> Vec<crate::data::LabeledPoint> {
        order[range].iter().map(|&i| points[i].clone()).collect()
    };
    let aggregate_points = pick(0..cfg.aggregate_size);
    let specific_points = pick(cfg.aggregate_size..cfg.aggregate_size + cfg.specific_size);
    let unlabeled = pick(cfg.aggregate_size + cfg.specific_size..points.len());

    let mut pool = AnnotatorPool::sample(
        cfg.num_annotators,
        cfg.num_classes,
        cfg.annotator_alpha,
        cfg.annotator_beta,
        derive_seed(seed, POOL_SALT),
    )?;
    let aggregate = pool.annotate(&aggregate_points);

    let mut expert = SyntheticExpert::new(
        expert_k,
        cfg.num_classes,
        derive_seed(seed, EXPERT_SALT ^ expert_k as u64),
    )?;
    let specific = expert.annotate(&specific_points);
    let (specific_finetune, specific_test) =
        split_specific(&specific, derive_seed(seed, SPLIT_SALT))?;

    Ok(DeferDataset {
        aggregate,
        specific_finetune,
        specific_test,
        unlabeled,
        num_classes: cfg.num_classes,
    })
}

/// Trains the human model for one regime on an assembled dataset.
pub fn train_human_model_for_regime(
    dataset: &DeferDataset,
    regime: Regime,
    hidden: &[usize],
    config: &TrainConfig,
    self_train_rounds: usize,
) -> Result<HumanModel> {
    match regime {
        Regime::NoFinetune => train_baseline(
            &dataset.aggregate,
            &dataset.specific_finetune,
            hidden,
            config,
        ),
        Regime::Finetune => train_finetuned(
            &dataset.aggregate,
            &dataset.specific_finetune,
            hidden,
            config,
        ),
        Regime::SelfTrain => Ok(self_train(
            &dataset.specific_finetune,
            &dataset.unlabeled,
            hidden,
            config,
            self_train_rounds,
        )?
        .0),
    }
}

/// One grid cell of the classification experiment.
#[derive(Clone, Debug, Serialize)]
pub struct ClassificationRow {
    pub run_id: String,
    pub regime: Regime,
    pub expert_k: usize,
    pub alpha: f64,
    pub seed: u64,
    pub metrics: SystemMetrics,
}

/// Trained artifacts of one cell, for optional persistence.
pub struct ClassificationCell {
    pub row: ClassificationRow,
    pub human_model: HumanModel,
    pub rejector: RejectorClassifier,
}

/// Runs one (expert k, regime, seed) cell: builds the dataset, trains
/// the regime's human model, imputes human answers onto the truth-only
/// points, trains the joint rejector-classifier on all three data
/// partitions, and evaluates on the specific test half.
pub fn run_classification_cell(
    cfg: &ClassificationConfig,
    train: &TrainConfig,
    expert_k: usize,
    regime: Regime,
    seed: u64,
) -> Result<ClassificationCell> {
    let dataset = build_classification_dataset(cfg, expert_k, seed)?;
    let cell_seed = derive_seed(derive_seed(seed, expert_k as u64), regime as u64);
    let hm_config = TrainConfig {
        seed: derive_seed(cell_seed, HUMAN_MODEL_SALT),
        ..*train
    };
    let human_model = train_human_model_for_regime(
        &dataset,
        regime,
        &cfg.hidden,
        &hm_config,
        cfg.self_train_rounds,
    )?;

    let imputed = crate::human_model::impute(&human_model, &dataset.unlabeled, cfg.num_classes)?;
    let mut all_points = dataset.aggregate.clone();
    all_points.extend_from_slice(&dataset.specific_finetune);
    all_points.extend(imputed);
    let rc_config = TrainConfig {
        seed: derive_seed(cell_seed, REJECTOR_SALT),
        ..*train
    };
    let rejector =
        train_rejector_classifier(&all_points, &cfg.hidden, cfg.num_classes, &rc_config)?;
    let metrics = evaluate(&rejector, &human_model, &dataset.specific_test)?;

    Ok(ClassificationCell {
        row: ClassificationRow {
            run_id: format!("cls-k{expert_k}-{regime}-s{seed}"),
            regime,
            expert_k,
            alpha: train.deferral_cost,
            seed,
            metrics,
        },
        human_model,
        rejector,
    })
}

/// The full grid: every seed x expert k x regime, in that order. Cells
/// run in parallel; the output order is fixed by the grid.
pub fn run_classification_experiment(
    cfg: &ClassificationConfig,
    train: &TrainConfig,
    regimes: &[Regime],
    seeds: &[u64],
) -> Result<Vec<ClassificationCell>> {
    let mut grid = Vec::new();
    for &seed in seeds {
        for &k in &cfg.expert_ks {
            for &regime in regimes {
                grid.push((k, regime, seed));
            }
        }
    }
    grid.into_par_iter()
        .map(|(k, regime, seed)| run_classification_cell(cfg, train, k, regime, seed))
        .collect()
}

// ─── Model persistence ──────────────────────────────────────────────────

const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    layer_dims: Vec<usize>,
    activation: String,
    /// Row-major weight matrix per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Writes a network as versioned JSON. Floats use shortest-round-trip
/// decimal form, so save/load reproduces parameters bit for bit.
pub fn save_model(net: &Network, path: &Path) -> Result<()> {
    let (weights, biases) = net.to_parts();
    let file = ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        layer_dims: net.layer_dims().to_vec(),
        activation: "relu".into(),
        weights,
        biases,
    };
    let json = serde_json::to_string_pretty(&file).expect("model serializes");
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Network> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Config(format!("{}: missing schema_version", path.display())))?;
    if found != u64::from(MODEL_SCHEMA_VERSION) {
        return Err(Error::SchemaVersion {
            expected: MODEL_SCHEMA_VERSION,
            found: found as u32,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    if file.activation != "relu" {
        return Err(Error::Config(format!(
            "{}: unsupported activation {:?}",
            path.display(),
            file.activation
        )));
    }
    Network::from_parts(&file.layer_dims, file.weights, file.biases)
}

// ─── Run configuration ──────────────────────────────────────────────────

/// Resolved configuration of one CLI run. Serialized as JSON; every
/// field has a default, and unknown keys are rejected.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub regimes: Vec<Regime>,
    pub seeds: Vec<u64>,
    /// Driving repetitions.
    pub repetitions: usize,
    pub save_models: SaveModels,
    pub out_dir: Option<PathBuf>,
    pub train: TrainConfig,
    pub driving: DrivingConfig,
    pub driving_hidden: Vec<usize>,
    /// Fixed target driver; absent rotates over drivers by repetition.
    pub target_driver: Option<usize>,
    pub classification: ClassificationConfig,
    pub bound: BoundGridConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::Bound,
            regimes: vec![Regime::NoFinetune, Regime::Finetune, Regime::SelfTrain],
            seeds: vec![0],
            repetitions: 200,
            save_models: SaveModels::Summary,
            out_dir: None,
            train: TrainConfig::default(),
            driving: DrivingConfig::default(),
            driving_hidden: DRIVING_HIDDEN.to_vec(),
            target_driver: None,
            classification: ClassificationConfig::default(),
            bound: BoundGridConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.regimes.is_empty() {
            return Err(Error::Config("regimes must not be empty".into()));
        }
        self.train.validate()?;
        match self.experiment {
            Experiment::Driving => {
                if self.repetitions < 2 {
                    return Err(Error::Config("driving needs repetitions >= 2".into()));
                }
                self.driving.validate()?;
                if let Some(t) = self.target_driver {
                    if t >= self.driving.num_drivers {
                        return Err(Error::Config(format!(
                            "target driver {t} out of range for {} drivers",
                            self.driving.num_drivers
                        )));
                    }
                }
            }
            Experiment::Classification => self.classification.validate()?,
            Experiment::Bound => {
                if self.bound.trials < 10_000 {
                    return Err(Error::Config("bound.trials must be >= 10^4".into()));
                }
                if self.bound.epsilons.is_empty() || self.bound.probs.is_empty() {
                    return Err(Error::Config("bound grid needs probs and epsilons".into()));
                }
            }
        }
        Ok(())
    }

    pub fn driving_experiment(&self) -> DrivingExperimentConfig {
        DrivingExperimentConfig {
            repetitions: self.repetitions,
            dataset: self.driving,
            train: self.train,
            regimes: self.regimes.clone(),
            hidden: self.driving_hidden.clone(),
            seed: self.seeds[0],
            target_driver: self.target_driver,
        }
    }
}

/// Loads the config file (or defaults), then applies `key.path=value`
/// overrides. Values parse as JSON first, falling back to strings.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut value = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Json {
                path: p.into(),
                source: e,
            })?
        }
        None => serde_json::json!({}),
    };
    for entry in overrides {
        apply_override(&mut value, entry)?;
    }
    let config: RunConfig =
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

fn apply_override(value: &mut serde_json::Value, entry: &str) -> Result<()> {
    let (key, raw) = entry
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {entry:?} is not KEY=VALUE")))?;
    let parsed =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = value;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(Error::Config(format!(
                "override {entry:?} has an empty key part"
            )));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?} descends into a non-object")))?;
        if parts.peek().is_none() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| serde_json::json!({}));
    }
    unreachable!("split produces at least one part")
}

// ─── Run orchestration and artifacts ────────────────────────────────────

/// What a run computed, for printing by the front end.
pub enum RunSummary {
    Driving(DrivingReport),
    Classification(Vec<ClassificationRow>),
    Bound(Vec<BoundCell>),
}

/// Artifact paths written by a run.
pub struct RunOutput {
    pub results_csv: PathBuf,
    pub manifest: PathBuf,
    pub models: Vec<PathBuf>,
    pub summary: RunSummary,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Executes the configured experiment and writes results CSV, model
/// files, the resolved config, and the run manifest under `out_dir`.
/// Byte-identical artifacts for identical (config, seed).
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunOutput> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let models_dir = out_dir.join("models");

    let mut models: Vec<PathBuf> = Vec::new();
    let mut save = |name: String, net: &Network| -> Result<()> {
        fs::create_dir_all(&models_dir).map_err(|e| Error::io(&models_dir, e))?;
        let path = models_dir.join(name);
        save_model(net, &path)?;
        models.push(path);
        Ok(())
    };

    let (results_csv, summary) = match config.experiment {
        Experiment::Driving => {
            let experiment = config.driving_experiment();
            let report = run_driving_experiment(&experiment)?;
            let mut csv =
                String::from("repetition,driver_index,regime,mean_duration_minutes,p_value\n");
            for row in &report.rows {
                for (name, mean) in &row.means {
                    let _ = writeln!(
                        csv,
                        "{},{},{name},{mean},",
                        row.repetition, row.driver_index
                    );
                }
            }
            for (name, mean) in &report.overall {
                let _ = writeln!(csv, "mean,,{name},{mean},");
            }
            if let Some(t) = &report.finetune_vs_none {
                let _ = writeln!(csv, "summary,,finetune_vs_none,,{}", t.p_value);
            }
            let path = out_dir.join("driving_results.csv");
            write_file(&path, &csv)?;

            if config.save_models != SaveModels::None {
                // Representative models: repetition 0's policy per regime.
                let rep_seed = derive_seed(experiment.seed, 0);
                let target = experiment.target_driver.unwrap_or(0);
                let dataset = generate_driving_dataset(&experiment.dataset, target, rep_seed)?;
                let train = TrainConfig {
                    seed: derive_seed(rep_seed, 0x64_72_73),
                    ..experiment.train
                };
                for &regime in &experiment.regimes {
                    let (policy, time_model) = train_driving_policy(
                        &dataset,
                        &experiment.dataset.params,
                        &experiment.hidden,
                        regime,
                        &train,
                    )?;
                    save(format!("driving_{regime}_policy.json"), &policy.net)?;
                    save(format!("driving_{regime}_time_model.json"), &time_model.net)?;
                }
            }
            (path, RunSummary::Driving(report))
        }
        Experiment::Classification => {
            let cells = run_classification_experiment(
                &config.classification,
                &config.train,
                &config.regimes,
                &config.seeds,
            )?;
            let mut csv = String::from(
                "run_id,regime,expert_k,alpha,seed,system_accuracy,deference_rate,deferred_accuracy,human_model_accuracy\n",
            );
            for cell in &cells {
                let r = &cell.row;
                let m = &r.metrics;
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{}",
                    r.run_id,
                    r.regime,
                    r.expert_k,
                    r.alpha,
                    r.seed,
                    m.system_accuracy,
                    m.deference_rate,
                    fmt_opt(m.deferred_accuracy),
                    m.human_model_accuracy
                );
            }
            let path = out_dir.join("classification_results.csv");
            write_file(&path, &csv)?;

            match config.save_models {
                SaveModels::None => {}
                SaveModels::Summary => {
                    // First cell of each regime.
                    for &regime in &config.regimes {
                        if let Some(cell) = cells.iter().find(|c| c.row.regime == regime) {
                            let id = &cell.row.run_id;
                            save(format!("{id}_human_model.json"), &cell.human_model.net)?;
                            save(format!("{id}_rejector.json"), &cell.rejector.net)?;
                        }
                    }
                }
                SaveModels::All => {
                    for cell in &cells {
                        let id = &cell.row.run_id;
                        save(format!("{id}_human_model.json"), &cell.human_model.net)?;
                        save(format!("{id}_rejector.json"), &cell.rejector.net)?;
                    }
                }
            }
            let rows = cells.iter().map(|c| c.row.clone()).collect();
            (path, RunSummary::Classification(rows))
        }
        Experiment::Bound => {
            let mut grid = config.bound.clone();
            grid.seed = config.seeds[0];
            let cells = verify_bound_grid(&grid)?;
            let mut csv =
                String::from("p_h,p_m,epsilon,noise_kind,bound,empirical,ci_halfwidth,pass\n");
            for c in &cells {
                let s = &c.scenario;
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    s.human_confidence,
                    s.machine_confidence,
                    s.epsilon,
                    s.noise,
                    c.bound,
                    c.empirical,
                    c.ci_halfwidth,
                    c.pass
                );
            }
            let path = out_dir.join("bound_results.csv");
            write_file(&path, &csv)?;
            (path, RunSummary::Bound(cells))
        }
    };

    let config_path = out_dir.join("resolved_config.json");
    write_file(
        &config_path,
        &serde_json::to_string_pretty(config).expect("config serializes"),
    )?;

    let manifest_path = out_dir.join("run_manifest.json");
    let manifest = serde_json::json!({
        "schema_version": 1,
        "experiment": config.experiment.to_string(),
        "git_describe": git_describe(),
        "seeds": config.seeds,
        "config": config,
        "artifacts": {
            "results_csv": results_csv.file_name().and_then(|n| n.to_str()),
            "resolved_config": "resolved_config.json",
            "models": models
                .iter()
                .filter_map(|p| p.file_name().and_then(|n| n.to_str()))
                .collect::<Vec<_>>(),
        },
    });
    write_file(
        &manifest_path,
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;

    Ok(RunOutput {
        results_csv,
        manifest: manifest_path,
        models,
        summary,
    })
}

fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

/// Writes the target driver's generated world as JSON (schema-versioned)
/// for offline inspection or external tooling.
pub fn generate_driving_artifact(config: &RunConfig, out_dir: &Path) -> Result<PathBuf> {
    config.driving.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let target = config.target_driver.unwrap_or(0);
    if config.driving.num_drivers == 1 {
        eprintln!("warning: single-driver world has an empty aggregate partition");
    }
    let dataset = generate_driving_dataset(&config.driving, target, config.seeds[0])?;
    let path = out_dir.join("driving_dataset.json");
    let body = serde_json::json!({
        "schema_version": 1,
        "seed": config.seeds[0],
        "dataset": dataset,
    });
    write_file(
        &path,
        &serde_json::to_string_pretty(&body).expect("dataset serializes"),
    )?;
    Ok(path)
}

// ─── Gradient-check sweep ───────────────────────────────────────────────

/// Max relative gradient error over random (network, example) pairs,
/// per loss kind.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub samples: usize,
    pub tolerance: f64,
    /// (loss name, max relative error)
    pub per_loss: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.per_loss.iter().all(|&(_, e)| e < self.tolerance)
    }
}

/// Checks analytic gradients of all three losses against central finite
/// differences over `samples` random networks and examples each.
pub fn run_grad_check(samples: usize, seed: u64) -> Result<GradCheckReport> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = vec![
        ("weighted_cross_entropy".to_string(), 0.0f64),
        ("defer_loss".to_string(), 0.0f64),
        ("squared_error".to_string(), 0.0f64),
    ];
    for i in 0..samples {
        let input_dim = rng.random_range(2..6);
        let hidden = rng.random_range(3..9);
        let classes = rng.random_range(2..6);
        let x = crate::data::FeatureVector::new(
            (0..input_dim)
                .map(|_| rng.random_range(-2.0..2.0))
                .collect(),
        );
        let weight = rng.random_range(0.2..2.0);
        let alpha = rng.random_range(0.0..2.0);

        let class_net = Network::new(&[input_dim, hidden, classes], derive_seed(seed, i as u64))?;
        let e = TrainExample {
            x: x.clone(),
            target: LossTarget::Class {
                label: rng.random_range(0..classes),
                weight,
            },
        };
        worst[0].1 = worst[0].1.max(grad_check(&class_net, &e, alpha, 1e-5)?);

        let defer_net = Network::new(
            &[input_dim, hidden, classes + 1],
            derive_seed(seed, 1000 + i as u64),
        )?;
        let e = TrainExample {
            x: x.clone(),
            target: LossTarget::Defer {
                label: rng.random_range(0..classes),
                human_correct: rng.random::<bool>(),
                weight,
            },
        };
        worst[1].1 = worst[1].1.max(grad_check(&defer_net, &e, alpha, 1e-5)?);

        let reg_net = Network::new(&[input_dim, hidden, 1], derive_seed(seed, 2000 + i as u64))?;
        let e = TrainExample {
            x,
            target: LossTarget::Scalar {
                value: rng.random_range(-3.0..3.0),
                weight,
            },
        };
        worst[2].1 = worst[2].1.max(grad_check(&reg_net, &e, alpha, 1e-5)?);
    }
    Ok(GradCheckReport {
        samples,
        tolerance: 1e-4,
        per_loss: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureVector;

    #[test]
    fn model_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let net = Network::new(&[5, 16, 3], 12).unwrap();
        save_model(&net, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(net, loaded);

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = FeatureVector::new((0..5).map(|_| rng.random_range(-4.0..4.0)).collect());
            assert_eq!(net.forward(&x).unwrap(), loaded.forward(&x).unwrap());
        }
    }

    #[test]
    fn model_load_rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let net = Network::new(&[2, 2], 0).unwrap();
        save_model(&net, &path).unwrap();

        // Truncated file fails cleanly.
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Json { .. })));

        // Version bump is an explicit incompatibility.
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["schema_version"] = serde_json::json!(2);
        fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(Error::SchemaVersion {
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn overrides_apply_dotted_paths() {
        let cfg = load_config(
            None,
            &[
                "experiment=driving".into(),
                "train.epochs=3".into(),
                "driving.num_drivers=4".into(),
                "driving.params.independent_mean=50.5".into(),
                "seeds=[1,2]".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::Driving);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.driving.num_drivers, 4);
        assert_eq!(cfg.driving.params.independent_mean, 50.5);
        assert_eq!(cfg.seeds, vec![1, 2]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(load_config(None, &["trian.epochs=3".into()]).is_err());
        assert!(load_config(None, &["bad".into()]).is_err());
    }

    #[test]
    fn missing_config_file_names_the_path() {
        let err = load_config(Some(Path::new("/nonexistent/cfg.json")), &[]).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/cfg.json"));
    }

    #[test]
    fn config_validation_catches_bad_values() {
        assert!(load_config(None, &["train.batch_size=0".into()]).is_err());
        assert!(load_config(None, &["seeds=[]".into()]).is_err());
        assert!(load_config(None, &["experiment=driving".into(), "repetitions=1".into()]).is_err());
        assert!(load_config(None, &["bound.trials=10".into()]).is_err());
        assert!(load_config(
            None,
            &[
                "experiment=classification".into(),
                "classification.expert_ks=[11]".into()
            ]
        )
        .is_err());
    }

    #[test]
    fn classification_dataset_partitions_are_disjoint_and_sized() {
        let cfg = ClassificationConfig {
            per_class: 60,
            aggregate_size: 200,
            specific_size: 100,
            ..ClassificationConfig::default()
        };
        let ds = build_classification_dataset(&cfg, 5, 9).unwrap();
        assert_eq!(ds.aggregate.len(), 200);
        assert_eq!(ds.specific_finetune.len(), 50);
        assert_eq!(ds.specific_test.len(), 50);
        assert_eq!(ds.unlabeled.len(), 600 - 300);
        // specific < aggregate < unlabeled, matching the partition order
        // of the deferral problem statement.
        assert!(ds.specific_len() < ds.aggregate.len());
        assert!(ds.aggregate.len() < ds.unlabeled.len());

        // Disjoint partitions: blob features are continuous draws, so
        // any repeated feature vector would mean a shared point.
        let mut seen: Vec<Vec<u64>> = Vec::new();
        let mut key = |x: &crate::data::FeatureVector| {
            let bits: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
            assert!(!seen.contains(&bits), "partitions share a point");
            seen.push(bits);
        };
        ds.aggregate.iter().for_each(|p| key(&p.x));
        ds.specific_finetune.iter().for_each(|p| key(&p.x));
        ds.specific_test.iter().for_each(|p| key(&p.x));
        ds.unlabeled.iter().for_each(|p| key(&p.x));

        let again = build_classification_dataset(&cfg, 5, 9).unwrap();
        assert_eq!(ds.aggregate, again.aggregate);
        assert_eq!(ds.specific_finetune, again.specific_finetune);
    }

    #[test]
    fn grad_check_sweep_is_tight() {
        let report = run_grad_check(10, 4).unwrap();
        assert!(report.pass(), "{:?}", report.per_loss);
    }
}
