//! Synthetic autonomous-vehicle deferral experiment: driver and trip
//! generators, a learned three-way policy (defer to the human, drive
//! independent of conditions, drive dependent on conditions), the ideal
//! and known-mean oracle baselines, and the repetition harness with a
//! paired significance test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureVector;
use crate::defer::argmax;
use crate::error::{Error, Result};
use crate::human_model::{HumanModel, Regime};
use crate::nn::{train, LossTarget, Network, TrainConfig, TrainExample};
use crate::stats::{derive_seed, mean, paired_t_test, PairedTTest};

/// Poisson means of the driver skill distribution.
pub const DRIVER_BASE_LAMBDA: f64 = 35.0;
pub const DRIVER_RAIN_LAMBDA: f64 = 5.0;
pub const DRIVER_DARK_LAMBDA: f64 = 5.0;

/// Hidden widths of the driving networks.
pub const DRIVING_HIDDEN: [usize; 2] = [32, 32];

const EVAL_SALT: u64 = 0x64_72_65;
const TIME_INIT_SALT: u64 = 0x64_72_69;
const TIME_FINETUNE_SALT: u64 = 0x64_72_66;
const TIME_RETRAIN_SALT: u64 = 0x64_72_72;
const POLICY_INIT_SALT: u64 = 0x64_72_70;
const POLICY_TRAIN_SALT: u64 = 0x64_72_74;
const REP_TRAIN_SALT: u64 = 0x64_72_73;

/// One driver's skill parameters: mean minutes on a clear daytime trip,
/// plus the mean extra minutes added by full rain and full darkness.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Driver {
    pub mean_minutes: f64,
    pub rain_minutes: f64,
    pub darkness_minutes: f64,
}

/// Trip conditions, each in [0, 1].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Conditions {
    pub rain: f64,
    pub darkness: f64,
}

impl Conditions {
    pub fn features(&self) -> FeatureVector {
        FeatureVector::new(vec![self.rain, self.darkness])
    }
}

/// A labeled trip: conditions plus the realized human driving time.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Trip {
    pub conditions: Conditions,
    pub human_minutes: f64,
}

/// Time-model constants of the two autonomous driving modes and the
/// human time noise. All standard deviations must be positive.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvParams {
    pub human_std: f64,
    pub human_rain_std: f64,
    pub human_dark_std: f64,
    pub independent_mean: f64,
    pub independent_std: f64,
    pub dependent_base_mean: f64,
    pub dependent_base_std: f64,
    pub dependent_rain_mean: f64,
    pub dependent_rain_std: f64,
    pub dependent_dark_mean: f64,
    pub dependent_dark_std: f64,
}

impl Default for AvParams {
    fn default() -> Self {
        AvParams {
            human_std: 5.0,
            human_rain_std: 2.0,
            human_dark_std: 2.0,
            independent_mean: 45.0,
            independent_std: 0.001,
            dependent_base_mean: 40.0,
            dependent_base_std: 5.0,
            dependent_rain_mean: 5.0,
            dependent_rain_std: 2.0,
            dependent_dark_mean: 5.0,
            dependent_dark_std: 2.0,
        }
    }
}

impl AvParams {
    pub fn validate(&self) -> Result<()> {
        let stds = [
            self.human_std,
            self.human_rain_std,
            self.human_dark_std,
            self.independent_std,
            self.dependent_base_std,
            self.dependent_rain_std,
            self.dependent_dark_std,
        ];
        if stds
            .iter()
            .any(|s| s.is_nan() || *s <= 0.0 || !s.is_finite())
        {
            return Err(Error::Config("all AV sigmas must be positive".into()));
        }
        Ok(())
    }
}

/// The three options of the vehicle, in index order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DrivingAction {
    Defer = 0,
    DriveIndependent = 1,
    DriveDependent = 2,
}

impl DrivingAction {
    pub const ALL: [DrivingAction; 3] = [
        DrivingAction::Defer,
        DrivingAction::DriveIndependent,
        DrivingAction::DriveDependent,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Draws one driver: base ~ Poisson(35), rain and darkness increments
/// ~ Poisson(5), independent.
pub fn sample_driver(rng: &mut impl Rng) -> Driver {
    let base = Poisson::new(DRIVER_BASE_LAMBDA).expect("positive lambda");
    let extra = Poisson::new(DRIVER_RAIN_LAMBDA).expect("positive lambda");
    Driver {
        mean_minutes: base.sample(rng),
        rain_minutes: extra.sample(rng),
        darkness_minutes: extra.sample(rng),
    }
}

/// Realized human trip time: `N(mu, s) + r N(mu_r, s_r) + d N(mu_d, s_d)`.
pub fn sample_human_time(
    driver: &Driver,
    cond: &Conditions,
    params: &AvParams,
    rng: &mut impl Rng,
) -> f64 {
    let base = Normal::new(driver.mean_minutes, params.human_std).expect("positive sigma");
    let rain = Normal::new(driver.rain_minutes, params.human_rain_std).expect("positive sigma");
    let dark = Normal::new(driver.darkness_minutes, params.human_dark_std).expect("positive sigma");
    base.sample(rng) + cond.rain * rain.sample(rng) + cond.darkness * dark.sample(rng)
}

/// Realized autonomous trip time for a driving action. Deferral has no
/// vehicle time; ask [`sample_human_time`] instead.
pub fn sample_av_time(
    action: DrivingAction,
    cond: &Conditions,
    params: &AvParams,
    rng: &mut impl Rng,
) -> Result<f64> {
    match action {
        DrivingAction::Defer => Err(Error::InvalidArgument(
            "deferred trips are driven by the human".into(),
        )),
        DrivingAction::DriveIndependent => {
            let t = Normal::new(params.independent_mean, params.independent_std)
                .expect("positive sigma");
            Ok(t.sample(rng))
        }
        DrivingAction::DriveDependent => {
            let base = Normal::new(params.dependent_base_mean, params.dependent_base_std)
                .expect("positive sigma");
            let rain = Normal::new(params.dependent_rain_mean, params.dependent_rain_std)
                .expect("positive sigma");
            let dark = Normal::new(params.dependent_dark_mean, params.dependent_dark_std)
                .expect("positive sigma");
            Ok(base.sample(rng) + cond.rain * rain.sample(rng) + cond.darkness * dark.sample(rng))
        }
    }
}

/// Expected human trip time under the true driver parameters.
pub fn expected_human_time(driver: &Driver, cond: &Conditions) -> f64 {
    driver.mean_minutes + cond.rain * driver.rain_minutes + cond.darkness * driver.darkness_minutes
}

/// Expected autonomous trip time for a driving action.
pub fn expected_av_time(
    action: DrivingAction,
    cond: &Conditions,
    params: &AvParams,
) -> Result<f64> {
    match action {
        DrivingAction::Defer => Err(Error::InvalidArgument(
            "deferred trips are driven by the human".into(),
        )),
        DrivingAction::DriveIndependent => Ok(params.independent_mean),
        DrivingAction::DriveDependent => Ok(params.dependent_base_mean
            + cond.rain * params.dependent_rain_mean
            + cond.darkness * params.dependent_dark_mean),
    }
}

/// World size of the driving dataset: `num_drivers` drivers with
/// `trips_per_driver` labeled trips each, plus `num_unlabeled` bare
/// condition pairs.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrivingConfig {
    pub num_drivers: usize,
    pub trips_per_driver: usize,
    pub num_unlabeled: usize,
    pub params: AvParams,
}

impl Default for DrivingConfig {
    fn default() -> Self {
        DrivingConfig {
            num_drivers: 10,
            trips_per_driver: 256,
            num_unlabeled: 1000,
            params: AvParams::default(),
        }
    }
}

impl DrivingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_drivers == 0 || self.trips_per_driver == 0 {
            return Err(Error::Config(
                "need at least one driver and one trip per driver".into(),
            ));
        }
        self.params.validate()
    }
}

/// The driving analogue of the three-partition deferral dataset: other
/// drivers' trips are the aggregate pool, the target driver's trips are
/// split in half for fine-tuning and testing, and the unlabeled pool is
/// bare condition pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DrivingDataset {
    pub drivers: Vec<Driver>,
    pub target: usize,
    pub aggregate: Vec<Trip>,
    pub finetune: Vec<Trip>,
    pub test: Vec<Trip>,
    pub unlabeled: Vec<Conditions>,
}

impl DrivingDataset {
    pub fn target_driver(&self) -> &Driver {
        &self.drivers[self.target]
    }
}

/// Generates one world: samples every driver, their trips under uniform
/// conditions, and the unlabeled condition pool. The target driver's
/// trips are split equally between fine-tuning and testing.
pub fn generate_driving_dataset(
    cfg: &DrivingConfig,
    target: usize,
    seed: u64,
) -> Result<DrivingDataset> {
    cfg.validate()?;
    if target >= cfg.num_drivers {
        return Err(Error::InvalidArgument(format!(
            "target driver {target} out of range for {} drivers",
            cfg.num_drivers
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drivers: Vec<Driver> = (0..cfg.num_drivers)
        .map(|_| sample_driver(&mut rng))
        .collect();

    let mut aggregate = Vec::new();
    let mut target_trips = Vec::new();
    for (j, driver) in drivers.iter().enumerate() {
        for _ in 0..cfg.trips_per_driver {
            let cond = Conditions {
                rain: rng.random::<f64>(),
                darkness: rng.random::<f64>(),
            };
            let trip = Trip {
                conditions: cond,
                human_minutes: sample_human_time(driver, &cond, &cfg.params, &mut rng),
            };
            if j == target {
                target_trips.push(trip);
            } else {
                aggregate.push(trip);
            }
        }
    }
    let cut = target_trips.len().div_ceil(2);
    let test = target_trips.split_off(cut);
    let unlabeled = (0..cfg.num_unlabeled)
        .map(|_| Conditions {
            rain: rng.random::<f64>(),
            darkness: rng.random::<f64>(),
        })
        .collect();
    Ok(DrivingDataset {
        drivers,
        target,
        aggregate,
        finetune: target_trips,
        test,
        unlabeled,
    })
}

/// Learned three-way policy over trip conditions.
#[derive(Clone, Debug)]
pub struct DrivingPolicy {
    pub net: Network,
}

impl DrivingPolicy {
    pub fn choose(&self, cond: &Conditions) -> Result<DrivingAction> {
        let logits = self.net.forward(&cond.features())?;
        Ok(DrivingAction::ALL[argmax(&logits)])
    }
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Expected durations of the three actions under a learned time model:
/// `[predicted human time, independent mean, dependent mean]`.
pub fn action_cost_vector(
    time_model: &HumanModel,
    cond: &Conditions,
    params: &AvParams,
) -> Result<[f64; 3]> {
    Ok([
        time_model.predict_time(&cond.features())?,
        expected_av_time(DrivingAction::DriveIndependent, cond, params)?,
        expected_av_time(DrivingAction::DriveDependent, cond, params)?,
    ])
}

/// Oracle that picks by true expected durations; ties go to the lowest
/// action index (defer first).
pub fn known_mean_choice(driver: &Driver, cond: &Conditions, params: &AvParams) -> DrivingAction {
    let costs = [
        expected_human_time(driver, cond),
        expected_av_time(DrivingAction::DriveIndependent, cond, params).expect("av action"),
        expected_av_time(DrivingAction::DriveDependent, cond, params).expect("av action"),
    ];
    DrivingAction::ALL[argmin(&costs)]
}

/// Oracle that knows all three realized durations in advance.
pub fn ideal_time(realized: &[f64; 3]) -> f64 {
    realized.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn scalar_examples(trips: &[(Conditions, f64)], shift: f64, scale: f64) -> Vec<TrainExample> {
    trips
        .iter()
        .map(|(cond, minutes)| TrainExample {
            x: cond.features(),
            target: LossTarget::Scalar {
                value: (minutes - shift) / scale,
                weight: 1.0,
            },
        })
        .collect()
}

fn fit_standardization(targets: &[f64]) -> (f64, f64) {
    let m = mean(targets);
    let var = targets.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / targets.len() as f64;
    (m, var.sqrt().max(1e-9))
}

fn train_time_regressor(
    trips: &[(Conditions, f64)],
    hidden: &[usize],
    config: &TrainConfig,
    init_salt: u64,
) -> Result<HumanModel> {
    if trips.is_empty() {
        return Err(Error::EmptyInput("time-regression trips"));
    }
    let targets: Vec<f64> = trips.iter().map(|&(_, t)| t).collect();
    let (shift, scale) = fit_standardization(&targets);
    let mut dims = vec![2];
    dims.extend_from_slice(hidden);
    dims.push(1);
    let mut net = Network::new(&dims, derive_seed(config.seed, init_salt))?;
    train(&mut net, &scalar_examples(trips, shift, scale), config)?;
    HumanModel::regressor(net, shift, scale)
}

/// Trains the human time model under the chosen regime, then trains the
/// three-way policy with cross-entropy toward the argmin of each point's
/// expected-duration cost vector. Returns the policy and the time model.
pub fn train_driving_policy(
    dataset: &DrivingDataset,
    params: &AvParams,
    hidden: &[usize],
    regime: Regime,
    config: &TrainConfig,
) -> Result<(DrivingPolicy, HumanModel)> {
    config.validate()?;
    let pairs = |trips: &[Trip]| -> Vec<(Conditions, f64)> {
        trips
            .iter()
            .map(|t| (t.conditions, t.human_minutes))
            .collect()
    };

    let time_model = match regime {
        Regime::NoFinetune => {
            train_time_regressor(&pairs(&dataset.aggregate), hidden, config, TIME_INIT_SALT)?
        }
        Regime::Finetune => {
            let mut model =
                train_time_regressor(&pairs(&dataset.aggregate), hidden, config, TIME_INIT_SALT)?;
            let finetune_epochs = config.finetune_epochs();
            if finetune_epochs > 0 && !dataset.finetune.is_empty() {
                let phase2 = TrainConfig {
                    epochs: finetune_epochs,
                    seed: derive_seed(config.seed, TIME_FINETUNE_SALT),
                    ..*config
                };
                // Keep the phase-1 target standardization: the model is
                // one function across both phases.
                let examples = scalar_examples(
                    &pairs(&dataset.finetune),
                    model.output_shift(),
                    model.output_scale(),
                );
                train(&mut model.net, &examples, &phase2)?;
            }
            model
        }
        Regime::SelfTrain => {
            let base =
                train_time_regressor(&pairs(&dataset.finetune), hidden, config, TIME_INIT_SALT)?;
            if dataset.unlabeled.is_empty() {
                base
            } else {
                // Impute times on the unlabeled conditions, then retrain
                // from scratch on the union.
                let mut union = pairs(&dataset.finetune);
                for cond in &dataset.unlabeled {
                    union.push((*cond, base.predict_time(&cond.features())?));
                }
                let retrain = TrainConfig {
                    seed: derive_seed(config.seed, TIME_RETRAIN_SALT),
                    ..*config
                };
                train_time_regressor(&union, hidden, &retrain, TIME_INIT_SALT)?
            }
        }
    };

    // Policy supervision: argmin of the cost vector at every labeled or
    // unlabeled condition pair.
    let mut conds: Vec<Conditions> = Vec::new();
    conds.extend(dataset.aggregate.iter().map(|t| t.conditions));
    conds.extend(dataset.finetune.iter().map(|t| t.conditions));
    conds.extend(dataset.unlabeled.iter().copied());
    if conds.is_empty() {
        return Err(Error::EmptyInput("policy training conditions"));
    }
    let examples: Vec<TrainExample> = conds
        .iter()
        .map(|cond| {
            let costs = action_cost_vector(&time_model, cond, params)?;
            Ok(TrainExample {
                x: cond.features(),
                target: LossTarget::Class {
                    label: argmin(&costs),
                    weight: 1.0,
                },
            })
        })
        .collect::<Result<_>>()?;
    let mut dims = vec![2];
    dims.extend_from_slice(hidden);
    dims.push(3);
    let mut net = Network::new(&dims, derive_seed(config.seed, POLICY_INIT_SALT))?;
    let policy_config = TrainConfig {
        seed: derive_seed(config.seed, POLICY_TRAIN_SALT),
        ..*config
    };
    train(&mut net, &examples, &policy_config)?;
    Ok((DrivingPolicy { net }, time_model))
}

/// Full experiment configuration: repetitions of fresh worlds, each
/// evaluated on the target driver's test trips.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrivingExperimentConfig {
    pub repetitions: usize,
    pub dataset: DrivingConfig,
    pub train: TrainConfig,
    pub regimes: Vec<Regime>,
    pub hidden: Vec<usize>,
    pub seed: u64,
    /// Fixed target driver index; `None` rotates over drivers by
    /// repetition.
    pub target_driver: Option<usize>,
}

impl Default for DrivingExperimentConfig {
    fn default() -> Self {
        DrivingExperimentConfig {
            repetitions: 200,
            dataset: DrivingConfig::default(),
            train: TrainConfig::default(),
            regimes: vec![Regime::NoFinetune, Regime::Finetune],
            hidden: DRIVING_HIDDEN.to_vec(),
            seed: 0,
            target_driver: None,
        }
    }
}

impl DrivingExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 2 {
            return Err(Error::Config("need at least 2 repetitions".into()));
        }
        if self.regimes.is_empty() {
            return Err(Error::Config("need at least one regime".into()));
        }
        if let Some(t) = self.target_driver {
            if t >= self.dataset.num_drivers {
                return Err(Error::Config(format!(
                    "target driver {t} out of range for {} drivers",
                    self.dataset.num_drivers
                )));
            }
        }
        self.dataset.validate()?;
        self.train.validate()
    }
}

/// Per-trip realized durations of every evaluated policy in one
/// repetition. All policies are scored against the same three realized
/// draws per trip (common random numbers), so `ideal` is a pointwise
/// lower bound by construction.
#[derive(Clone, Debug)]
pub struct RepetitionOutcome {
    pub repetition: usize,
    pub driver_index: usize,
    /// (policy name, per-trip minutes); regimes first, then
    /// `known_mean`, then `ideal`.
    pub per_trip: Vec<(String, Vec<f64>)>,
}

impl RepetitionOutcome {
    pub fn means(&self) -> Vec<(String, f64)> {
        self.per_trip
            .iter()
            .map(|(name, xs)| (name.clone(), mean(xs)))
            .collect()
    }
}

/// Runs one repetition: fresh world, one policy per regime, and the two
/// oracles, all evaluated on the target driver's test trips.
pub fn run_repetition(
    cfg: &DrivingExperimentConfig,
    repetition: usize,
) -> Result<RepetitionOutcome> {
    let rep_seed = derive_seed(cfg.seed, repetition as u64);
    let target = cfg
        .target_driver
        .unwrap_or(repetition % cfg.dataset.num_drivers);
    let dataset = generate_driving_dataset(&cfg.dataset, target, rep_seed)?;

    // Shared realized draws: the human time comes from the generated
    // trip; both vehicle times are drawn once per trip.
    let mut eval_rng = ChaCha8Rng::seed_from_u64(derive_seed(rep_seed, EVAL_SALT));
    let realized: Vec<[f64; 3]> = dataset
        .test
        .iter()
        .map(|trip| {
            Ok([
                trip.human_minutes,
                sample_av_time(
                    DrivingAction::DriveIndependent,
                    &trip.conditions,
                    &cfg.dataset.params,
                    &mut eval_rng,
                )?,
                sample_av_time(
                    DrivingAction::DriveDependent,
                    &trip.conditions,
                    &cfg.dataset.params,
                    &mut eval_rng,
                )?,
            ])
        })
        .collect::<Result<_>>()?;

    let train_config = TrainConfig {
        seed: derive_seed(rep_seed, REP_TRAIN_SALT),
        ..cfg.train
    };
    let mut per_trip = Vec::new();
    for &regime in &cfg.regimes {
        let (policy, _) = train_driving_policy(
            &dataset,
            &cfg.dataset.params,
            &cfg.hidden,
            regime,
            &train_config,
        )?;
        let durations = dataset
            .test
            .iter()
            .zip(&realized)
            .map(|(trip, draws)| Ok(draws[policy.choose(&trip.conditions)?.index()]))
            .collect::<Result<Vec<f64>>>()?;
        per_trip.push((regime.to_string(), durations));
    }

    let driver = dataset.target_driver();
    let known_mean: Vec<f64> = dataset
        .test
        .iter()
        .zip(&realized)
        .map(|(trip, draws)| {
            draws[known_mean_choice(driver, &trip.conditions, &cfg.dataset.params).index()]
        })
        .collect();
    per_trip.push(("known_mean".into(), known_mean));
    per_trip.push(("ideal".into(), realized.iter().map(ideal_time).collect()));

    Ok(RepetitionOutcome {
        repetition,
        driver_index: target,
        per_trip,
    })
}

/// One row of the results table: mean test-trip duration per policy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepetitionRow {
    pub repetition: usize,
    pub driver_index: usize,
    pub means: Vec<(String, f64)>,
}

/// Experiment summary across repetitions.
#[derive(Clone, Debug)]
pub struct DrivingReport {
    pub rows: Vec<RepetitionRow>,
    /// Mean duration per policy across all repetitions.
    pub overall: Vec<(String, f64)>,
    /// Paired two-sided t-test of no-fine-tuning minus fine-tuning
    /// repetition means; present when both regimes ran.
    pub finetune_vs_none: Option<PairedTTest>,
}

impl DrivingReport {
    pub fn overall_mean(&self, name: &str) -> Option<f64> {
        self.overall
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, m)| m)
    }
}

/// Runs the whole experiment; repetitions execute in parallel with
/// per-repetition seeds, so results are independent of scheduling.
pub fn run_driving_experiment(cfg: &DrivingExperimentConfig) -> Result<DrivingReport> {
    cfg.validate()?;
    let rows: Vec<RepetitionRow> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            run_repetition(cfg, rep).map(|outcome| RepetitionRow {
                repetition: outcome.repetition,
                driver_index: outcome.driver_index,
                means: outcome.means(),
            })
        })
        .collect::<Result<_>>()?;

    let names: Vec<String> = rows[0].means.iter().map(|(n, _)| n.clone()).collect();
    let overall = names
        .iter()
        .map(|name| {
            let xs: Vec<f64> = rows
                .iter()
                .map(|r| {
                    r.means
                        .iter()
                        .find(|(n, _)| n == name)
                        .map(|&(_, m)| m)
                        .expect("uniform policy set per repetition")
                })
                .collect();
            (name.clone(), mean(&xs))
        })
        .collect();

    let series = |regime: Regime| -> Option<Vec<f64>> {
        let name = regime.to_string();
        if !names.contains(&name) {
            return None;
        }
        Some(
            rows.iter()
                .map(|r| {
                    r.means
                        .iter()
                        .find(|(n, _)| *n == name)
                        .map(|&(_, m)| m)
                        .expect("checked name")
                })
                .collect(),
        )
    };
    let finetune_vs_none = match (series(Regime::NoFinetune), series(Regime::Finetune)) {
        (Some(none), Some(finetune)) => Some(paired_t_test(&none, &finetune)?),
        _ => None,
    };

    Ok(DrivingReport {
        rows,
        overall,
        finetune_vs_none,
    })
}
