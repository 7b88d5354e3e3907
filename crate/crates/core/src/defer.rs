//! Joint rejector-classifier: a K+1-output network trained with the
//! deferral surrogate loss (outputs 0..K-1 predict a class, output K
//! defers to the human), system prediction, and evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::data::{FeatureVector, HumanAnnotatedPoint};
use crate::error::{Error, Result};
use crate::human_model::HumanModel;
use crate::nn::{train, LossTarget, Network, TrainConfig, TrainExample};
use crate::stats::derive_seed;

const INIT_SALT: u64 = 0x72_63_69; // rejector init stream

/// Argmax with ties broken toward the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// A K+1-way network: outputs 0..K-1 are class predictions, output K
/// means "defer to the human".
#[derive(Clone, Debug)]
pub struct RejectorClassifier {
    pub net: Network,
    pub num_classes: usize,
}

impl RejectorClassifier {
    pub fn new(net: Network, num_classes: usize) -> Result<Self> {
        if net.output_dim() != num_classes + 1 {
            return Err(Error::DimensionMismatch {
                expected: num_classes + 1,
                actual: net.output_dim(),
            });
        }
        Ok(RejectorClassifier { net, num_classes })
    }
}

/// Evaluation summary of a rejector-classifier over one test set.
///
/// The integer counts are the source of truth; the fractions are derived
/// from them, so the decomposition
/// `system_accuracy = deference_rate * deferred_accuracy
///                  + (1 - deference_rate) * machine_accuracy_on_kept`
/// is exact over the counts (see [`SystemMetrics::decomposition_residual`]).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SystemMetrics {
    pub total: usize,
    pub deferred: usize,
    pub deferred_correct: usize,
    pub kept_correct: usize,
    pub human_model_agree: usize,
    /// Fraction of test points the system resolved correctly.
    pub system_accuracy: f64,
    /// Fraction of test points handed to the human.
    pub deference_rate: f64,
    /// Human accuracy on exactly the deferred points; absent when the
    /// system never deferred.
    pub deferred_accuracy: Option<f64>,
    /// Machine accuracy on the points it kept (0 when it kept none).
    pub machine_accuracy_on_kept: f64,
    /// Fraction of points where the human model's correctness prediction
    /// matches whether the human actually was correct.
    pub human_model_accuracy: f64,
}

impl SystemMetrics {
    pub fn from_counts(
        total: usize,
        deferred: usize,
        deferred_correct: usize,
        kept_correct: usize,
        human_model_agree: usize,
    ) -> Result<Self> {
        if total == 0 {
            return Err(Error::EmptyInput("evaluation set"));
        }
        let kept = total - deferred;
        let n = total as f64;
        Ok(SystemMetrics {
            total,
            deferred,
            deferred_correct,
            kept_correct,
            human_model_agree,
            system_accuracy: (deferred_correct + kept_correct) as f64 / n,
            deference_rate: deferred as f64 / n,
            deferred_accuracy: (deferred > 0).then(|| deferred_correct as f64 / deferred as f64),
            machine_accuracy_on_kept: if kept > 0 {
                kept_correct as f64 / kept as f64
            } else {
                0.0
            },
            human_model_accuracy: human_model_agree as f64 / n,
        })
    }

    /// Floating-point residual of the decomposition identity; zero in
    /// exact arithmetic, a few ulps at most in f64.
    pub fn decomposition_residual(&self) -> f64 {
        let rhs = self.deference_rate * self.deferred_accuracy.unwrap_or(0.0)
            + (1.0 - self.deference_rate) * self.machine_accuracy_on_kept;
        (self.system_accuracy - rhs).abs()
    }
}

/// Trains the K+1 rejector-classifier on points that all carry a human
/// answer (real or imputed): each example contributes
/// `-ln p_y - alpha * [h == y] * ln p_defer`.
pub fn train_rejector_classifier(
    points: &[HumanAnnotatedPoint],
    hidden: &[usize],
    num_classes: usize,
    config: &TrainConfig,
) -> Result<RejectorClassifier> {
    if points.is_empty() {
        return Err(Error::EmptyInput("rejector training data"));
    }
    if num_classes < 2 {
        return Err(Error::InvalidArgument("need at least 2 classes".into()));
    }
    let examples: Vec<TrainExample> = points
        .iter()
        .map(|p| {
            if p.y >= num_classes || p.h >= num_classes {
                return Err(Error::InvalidArgument(format!(
                    "label out of range for {num_classes} classes: y={}, h={}",
                    p.y, p.h
                )));
            }
            Ok(TrainExample {
                x: p.x.clone(),
                target: LossTarget::Defer {
                    label: p.y,
                    human_correct: p.human_correct(),
                    weight: 1.0,
                },
            })
        })
        .collect::<Result<_>>()?;
    let mut dims = vec![points[0].x.dim()];
    dims.extend_from_slice(hidden);
    dims.push(num_classes + 1);
    let mut net = Network::new(&dims, derive_seed(config.seed, INIT_SALT))?;
    train(&mut net, &examples, config)?;
    RejectorClassifier::new(net, num_classes)
}

/// Runs the system on one point: argmax over the K+1 outputs (ties to
/// the lowest index); the defer output substitutes the human's answer.
/// Never returns the defer index itself as a label.
pub fn system_predict(
    rc: &RejectorClassifier,
    x: &FeatureVector,
    human_label: usize,
) -> Result<(usize, bool)> {
    if human_label >= rc.num_classes {
        return Err(Error::InvalidArgument(format!(
            "human label {human_label} out of range for {} classes",
            rc.num_classes
        )));
    }
    let logits = rc.net.forward(x)?;
    let choice = argmax(&logits);
    if choice == rc.num_classes {
        Ok((human_label, true))
    } else {
        Ok((choice, false))
    }
}

/// Evaluates the system over a test set, using each point's real human
/// answer for deferred predictions.
pub fn evaluate(
    rc: &RejectorClassifier,
    human_model: &HumanModel,
    test: &[HumanAnnotatedPoint],
) -> Result<SystemMetrics> {
    if test.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    let mut deferred = 0;
    let mut deferred_correct = 0;
    let mut kept_correct = 0;
    let mut agree = 0;
    for point in test {
        let (label, was_deferred) = system_predict(rc, &point.x, point.h)?;
        if was_deferred {
            deferred += 1;
            if label == point.y {
                deferred_correct += 1;
            }
        } else if label == point.y {
            kept_correct += 1;
        }
        if human_model.predict_correct(&point.x)? == point.human_correct() {
            agree += 1;
        }
    }
    SystemMetrics::from_counts(test.len(), deferred, deferred_correct, kept_correct, agree)
}
