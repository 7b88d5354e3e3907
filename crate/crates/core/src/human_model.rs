//! The human performance model: a correctness classifier (will this
//! human answer this point correctly?) or a trip-time regressor, trained
//! under three regimes — no fine-tuning, two-phase fine-tuning with
//! inverse-frequency class weights, and self-training on high-confidence
//! pseudo-labels — plus imputation of human labels onto truth-only points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{inverse_frequency_weights, FeatureVector, HumanAnnotatedPoint, LabeledPoint};
use crate::error::{Error, Result};
use crate::nn::{softmax, train, LossTarget, Network, TrainConfig, TrainExample};
use crate::stats::derive_seed;

/// Output index coding of the correctness classifier.
pub const OUTPUT_CORRECT: usize = 0;
pub const OUTPUT_INCORRECT: usize = 1;

const INIT_SALT: u64 = 0x68_6d_69; // model init stream
const FINETUNE_SALT: u64 = 0x68_6d_66; // fine-tune phase stream
const SELF_TRAIN_SALT: u64 = 0x68_6d_73; // per-round self-training stream

/// Which training regime produced a model. Serialized as
/// `none` / `finetune` / `selftrain` in configs and result CSVs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    #[serde(rename = "none")]
    NoFinetune,
    Finetune,
    SelfTrain,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::NoFinetune => "none",
            Regime::Finetune => "finetune",
            Regime::SelfTrain => "selftrain",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Regime::NoFinetune),
            "finetune" => Ok(Regime::Finetune),
            "selftrain" => Ok(Regime::SelfTrain),
            other => Err(Error::InvalidArgument(format!(
                "unknown regime {other:?} (expected none|finetune|selftrain)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// Two outputs: index 0 = "human correct", index 1 = "human incorrect".
    CorrectnessClassifier,
    /// One output: predicted minutes (de-standardized via shift/scale).
    TimeRegressor,
}

/// A trained human performance model.
#[derive(Clone, Debug)]
pub struct HumanModel {
    pub net: Network,
    pub kind: ModelKind,
    /// Regression targets are standardized during training; predictions
    /// are mapped back as `net(x) * scale + shift`. Classifier: (0, 1).
    output_shift: f64,
    output_scale: f64,
}

impl HumanModel {
    pub fn classifier(net: Network) -> Result<Self> {
        if net.output_dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: net.output_dim(),
            });
        }
        Ok(HumanModel {
            net,
            kind: ModelKind::CorrectnessClassifier,
            output_shift: 0.0,
            output_scale: 1.0,
        })
    }

    pub fn regressor(net: Network, output_shift: f64, output_scale: f64) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: net.output_dim(),
            });
        }
        Ok(HumanModel {
            net,
            kind: ModelKind::TimeRegressor,
            output_shift,
            output_scale,
        })
    }

    fn require_classifier(&self) -> Result<()> {
        if self.kind != ModelKind::CorrectnessClassifier {
            return Err(Error::InvalidArgument(
                "expected a correctness classifier, got a time regressor".into(),
            ));
        }
        Ok(())
    }

    /// Predicted binary correctness target (0 = correct) and the
    /// confidence of that prediction (max softmax over the two outputs).
    pub fn correctness_confidence(&self, x: &FeatureVector) -> Result<(usize, f64)> {
        self.require_classifier()?;
        let probs = softmax(&self.net.forward(x)?);
        if probs[OUTPUT_CORRECT] >= probs[OUTPUT_INCORRECT] {
            Ok((OUTPUT_CORRECT, probs[OUTPUT_CORRECT]))
        } else {
            Ok((OUTPUT_INCORRECT, probs[OUTPUT_INCORRECT]))
        }
    }

    /// Whether the model predicts the human answers `x` correctly.
    pub fn predict_correct(&self, x: &FeatureVector) -> Result<bool> {
        Ok(self.correctness_confidence(x)?.0 == OUTPUT_CORRECT)
    }

    pub fn output_shift(&self) -> f64 {
        self.output_shift
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    /// Predicted human minutes for a regression model.
    pub fn predict_time(&self, x: &FeatureVector) -> Result<f64> {
        if self.kind != ModelKind::TimeRegressor {
            return Err(Error::InvalidArgument(
                "expected a time regressor, got a correctness classifier".into(),
            ));
        }
        Ok(self.net.forward(x)?[0] * self.output_scale + self.output_shift)
    }
}

/// Binary correctness targets: 0 iff the human's answer matches truth.
pub fn correctness_targets(points: &[HumanAnnotatedPoint]) -> Vec<(FeatureVector, usize)> {
    points
        .iter()
        .map(|p| {
            let target = if p.human_correct() {
                OUTPUT_CORRECT
            } else {
                OUTPUT_INCORRECT
            };
            (p.x.clone(), target)
        })
        .collect()
}

fn correctness_examples(
    points: &[HumanAnnotatedPoint],
    class_weights: Option<&[f64]>,
) -> Vec<TrainExample> {
    correctness_targets(points)
        .into_iter()
        .map(|(x, label)| TrainExample {
            x,
            target: LossTarget::Class {
                label,
                weight: class_weights.map_or(1.0, |w| w[label]),
            },
        })
        .collect()
}

/// One training phase of a correctness classifier on `points`, from a
/// fresh seeded initialization. The building block of every regime.
pub fn train_correctness_model(
    points: &[HumanAnnotatedPoint],
    hidden: &[usize],
    config: &TrainConfig,
) -> Result<HumanModel> {
    if points.is_empty() {
        return Err(Error::EmptyInput("human performance data"));
    }
    let mut dims = vec![points[0].x.dim()];
    dims.extend_from_slice(hidden);
    dims.push(2);
    let mut net = Network::new(&dims, derive_seed(config.seed, INIT_SALT))?;
    train(&mut net, &correctness_examples(points, None), config)?;
    HumanModel::classifier(net)
}

/// Non-fine-tuning baseline: one phase of `config.epochs` on the pooled
/// aggregate and specific fine-tune data.
pub fn train_baseline(
    aggregate: &[HumanAnnotatedPoint],
    specific_finetune: &[HumanAnnotatedPoint],
    hidden: &[usize],
    config: &TrainConfig,
) -> Result<HumanModel> {
    if aggregate.is_empty() {
        return Err(Error::EmptyInput("aggregate human data"));
    }
    let mut pooled = aggregate.to_vec();
    pooled.extend_from_slice(specific_finetune);
    train_correctness_model(&pooled, hidden, config)
}

/// Baseline fine-tuning: `config.epochs` on aggregate data, then
/// `round(epochs * finetune_multiplier)` on the individual's fine-tune
/// half, weighting each example by the inverse frequency of its binary
/// correctness class within the fine-tune set.
pub fn train_finetuned(
    aggregate: &[HumanAnnotatedPoint],
    specific_finetune: &[HumanAnnotatedPoint],
    hidden: &[usize],
    config: &TrainConfig,
) -> Result<HumanModel> {
    if aggregate.is_empty() {
        return Err(Error::EmptyInput("aggregate human data"));
    }
    if specific_finetune.is_empty() {
        return Err(Error::EmptyInput("specific fine-tune data"));
    }
    let mut model = train_correctness_model(aggregate, hidden, config)?;
    let finetune_epochs = config.finetune_epochs();
    if finetune_epochs == 0 {
        return Ok(model);
    }
    let targets: Vec<usize> = correctness_targets(specific_finetune)
        .iter()
        .map(|&(_, t)| t)
        .collect();
    let weights = inverse_frequency_weights(&targets, 2)?;
    let examples = correctness_examples(specific_finetune, Some(&weights));
    let phase2 = TrainConfig {
        epochs: finetune_epochs,
        seed: derive_seed(config.seed, FINETUNE_SALT),
        ..*config
    };
    train(&mut model.net, &examples, &phase2)?;
    Ok(model)
}

/// Unlabeled points whose correctness prediction clears the confidence
/// threshold, as (features, predicted binary target) pairs. A threshold
/// of 1.0 is an exclusive bound: nothing qualifies.
pub fn high_confidence_pseudo_labels(
    model: &HumanModel,
    unlabeled: &[LabeledPoint],
    threshold: f64,
) -> Result<Vec<(FeatureVector, usize)>> {
    if threshold >= 1.0 {
        return Ok(Vec::new());
    }
    let mut selected = Vec::new();
    for point in unlabeled {
        let (label, confidence) = model.correctness_confidence(&point.x)?;
        if confidence >= threshold {
            selected.push((point.x.clone(), label));
        }
    }
    Ok(selected)
}

/// Self-training: fit on the individual's fine-tune half, then for each
/// round pseudo-label the unlabeled points the model is confident about
/// and retrain from a fresh initialization on the enlarged set. Rounds
/// that select nothing keep the current model. Returns the final model
/// and the pseudo-label count per round.
pub fn self_train(
    specific_finetune: &[HumanAnnotatedPoint],
    unlabeled: &[LabeledPoint],
    hidden: &[usize],
    config: &TrainConfig,
    rounds: usize,
) -> Result<(HumanModel, Vec<usize>)> {
    if specific_finetune.is_empty() {
        return Err(Error::EmptyInput("specific fine-tune data"));
    }
    if rounds == 0 {
        return Err(Error::InvalidArgument(
            "self-training needs rounds >= 1".into(),
        ));
    }
    let mut model = train_correctness_model(specific_finetune, hidden, config)?;
    let base_examples = correctness_examples(specific_finetune, None);
    let mut counts = Vec::with_capacity(rounds);
    for round in 1..=rounds {
        let pseudo = high_confidence_pseudo_labels(&model, unlabeled, config.confidence_threshold)?;
        counts.push(pseudo.len());
        if pseudo.is_empty() {
            continue;
        }
        let mut examples = base_examples.clone();
        examples.extend(pseudo.into_iter().map(|(x, label)| TrainExample {
            x,
            target: LossTarget::Class { label, weight: 1.0 },
        }));
        let round_config = TrainConfig {
            seed: derive_seed(config.seed, SELF_TRAIN_SALT + round as u64),
            ..*config
        };
        let mut dims = vec![specific_finetune[0].x.dim()];
        dims.extend_from_slice(hidden);
        dims.push(2);
        let mut net = Network::new(&dims, derive_seed(round_config.seed, INIT_SALT))?;
        train(&mut net, &examples, &round_config)?;
        model = HumanModel::classifier(net)?;
    }
    Ok((model, counts))
}

/// Imputes a human answer onto every truth-only point: predicted-correct
/// points get `h = y`; predicted-incorrect points get the deterministic
/// wrong label `(y + 1) mod K`. Only the correctness bit feeds the
/// deferral loss downstream, so the concrete wrong label is immaterial.
pub fn impute(
    model: &HumanModel,
    unlabeled: &[LabeledPoint],
    num_classes: usize,
) -> Result<Vec<HumanAnnotatedPoint>> {
    model.require_classifier()?;
    unlabeled
        .iter()
        .map(|p| {
            let h = if model.predict_correct(&p.x)? {
                p.y
            } else {
                (p.y + 1) % num_classes
            };
            Ok(HumanAnnotatedPoint {
                x: p.x.clone(),
                y: p.y,
                h,
            })
        })
        .collect()
}
