//! Dataset representations and generators: labeled/annotated points, the
//! three-partition deferral dataset, synthetic experts, a Gaussian-blob
//! classification dataset, splits, class weights, and CSV ingestion of
//! per-annotator data.

use std::fmt::Write as _;
use std::fs;
use std::ops::Deref;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::derive_seed;

/// A fixed-dimension real feature vector. Entries are finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        FeatureVector(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(values: Vec<f64>) -> Self {
        FeatureVector::new(values)
    }
}

/// A point with its ground-truth class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: FeatureVector,
    pub y: usize,
}

/// A point with ground truth and one human's answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanAnnotatedPoint {
    pub x: FeatureVector,
    pub y: usize,
    /// The human's class answer (may differ from `y`).
    pub h: usize,
}

impl HumanAnnotatedPoint {
    /// Whether the human answered this point correctly.
    pub fn human_correct(&self) -> bool {
        self.h == self.y
    }
}

/// The three data partitions used by the deferral training regimes:
/// pooled multi-human annotations, one individual's annotations (split
/// into a fine-tune and a test half), and truth-only points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeferDataset {
    pub aggregate: Vec<HumanAnnotatedPoint>,
    pub specific_finetune: Vec<HumanAnnotatedPoint>,
    pub specific_test: Vec<HumanAnnotatedPoint>,
    pub unlabeled: Vec<LabeledPoint>,
    pub num_classes: usize,
}

impl DeferDataset {
    /// Size of the specific-human partition (both halves).
    pub fn specific_len(&self) -> usize {
        self.specific_finetune.len() + self.specific_test.len()
    }
}

/// Simulated annotator that is perfect on the first `k` classes and
/// guesses uniformly over all classes elsewhere (a guess may happen to
/// be right). Draws are deterministic given seed and call order.
#[derive(Clone, Debug)]
pub struct SyntheticExpert {
    k: usize,
    num_classes: usize,
    rng: ChaCha8Rng,
}

impl SyntheticExpert {
    pub fn new(k: usize, num_classes: usize, seed: u64) -> Result<Self> {
        if k > num_classes {
            return Err(Error::InvalidArgument(format!(
                "expert strength k={k} exceeds class count {num_classes}"
            )));
        }
        Ok(SyntheticExpert {
            k,
            num_classes,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The expert's answer for one point.
    pub fn label(&mut self, point: &LabeledPoint) -> usize {
        debug_assert!(point.y < self.num_classes);
        if point.y < self.k {
            point.y
        } else {
            self.rng.random_range(0..self.num_classes)
        }
    }

    /// Annotates a whole set, preserving point order.
    pub fn annotate(&mut self, points: &[LabeledPoint]) -> Vec<HumanAnnotatedPoint> {
        points
            .iter()
            .map(|p| HumanAnnotatedPoint {
                x: p.x.clone(),
                y: p.y,
                h: self.label(p),
            })
            .collect()
    }
}

/// A pool of simulated annotators with per-class accuracies drawn from a
/// Beta distribution. Used to build the pooled "aggregate" partition.
#[derive(Clone, Debug)]
pub struct AnnotatorPool {
    /// `accuracies[annotator][class]`
    accuracies: Vec<Vec<f64>>,
    num_classes: usize,
    rng: ChaCha8Rng,
}

impl AnnotatorPool {
    /// Samples `num_annotators` annotators whose per-class accuracy is
    /// Beta(alpha, beta)-distributed.
    pub fn sample(
        num_annotators: usize,
        num_classes: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
    ) -> Result<Self> {
        if num_annotators == 0 {
            return Err(Error::EmptyInput("annotator pool"));
        }
        let dist = Beta::new(alpha, beta)
            .map_err(|e| Error::InvalidArgument(format!("beta({alpha},{beta}): {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let accuracies = (0..num_annotators)
            .map(|_| (0..num_classes).map(|_| dist.sample(&mut rng)).collect())
            .collect();
        Ok(AnnotatorPool {
            accuracies,
            num_classes,
            rng,
        })
    }

    /// Annotates points round-robin across the pool. A wrong answer is
    /// uniform over the other classes, so each annotator's accuracy on
    /// class `c` is exactly `accuracies[annotator][c]`.
    pub fn annotate(&mut self, points: &[LabeledPoint]) -> Vec<HumanAnnotatedPoint> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let acc = self.accuracies[i % self.accuracies.len()][p.y];
                let h = if self.rng.random::<f64>() < acc {
                    p.y
                } else {
                    let mut wrong = self.rng.random_range(0..self.num_classes - 1);
                    if wrong >= p.y {
                        wrong += 1;
                    }
                    wrong
                };
                HumanAnnotatedPoint {
                    x: p.x.clone(),
                    y: p.y,
                    h,
                }
            })
            .collect()
    }
}

/// Geometry and size of the Gaussian-blob classification dataset.
///
/// Class `c`'s cluster mean sits at `separation * e_c` (basis vector),
/// so any two means are `separation * sqrt(2)` apart and the nearest-mean
/// rule is the Bayes classifier. Requires `dim >= num_classes`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobConfig {
    pub num_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    /// Isotropic standard deviation of each cluster.
    pub spread: f64,
    /// Distance of each cluster mean from the origin along its own axis.
    pub separation: f64,
    pub seed: u64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        BlobConfig {
            num_classes: 10,
            dim: 16,
            per_class: 600,
            spread: 1.0,
            separation: 6.0,
            seed: 0,
        }
    }
}

impl BlobConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::InvalidArgument("need at least 2 classes".into()));
        }
        if self.dim < 2 {
            return Err(Error::InvalidArgument("need dimension >= 2".into()));
        }
        if self.dim < self.num_classes {
            return Err(Error::InvalidArgument(format!(
                "axis placement needs dim >= num_classes ({} < {})",
                self.dim, self.num_classes
            )));
        }
        if self.per_class == 0 {
            return Err(Error::InvalidArgument("need per_class >= 1".into()));
        }
        if self.spread.is_nan() || self.spread <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "spread must be positive, got {}",
                self.spread
            )));
        }
        if !self.separation.is_finite() || self.separation < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "separation must be finite and non-negative, got {}",
                self.separation
            )));
        }
        Ok(())
    }

    /// The true cluster means, one per class.
    pub fn class_means(&self) -> Vec<FeatureVector> {
        (0..self.num_classes)
            .map(|c| {
                let mut m = vec![0.0; self.dim];
                m[c] = self.separation;
                FeatureVector::new(m)
            })
            .collect()
    }
}

/// Generates the blob dataset: `num_classes` isotropic Gaussian clusters,
/// `per_class` points each, labels = cluster index, in class order.
/// Bit-identical across runs for the same config.
pub fn generate_blob_dataset(cfg: &BlobConfig) -> Result<Vec<LabeledPoint>> {
    cfg.validate()?;
    let normal = Normal::new(0.0, cfg.spread)
        .map_err(|e| Error::InvalidArgument(format!("spread {}: {e}", cfg.spread)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let means = cfg.class_means();
    let mut points = Vec::with_capacity(cfg.num_classes * cfg.per_class);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..cfg.per_class {
            let values = mean
                .iter()
                .map(|m| m + normal.sample(&mut rng))
                .collect::<Vec<_>>();
            points.push(LabeledPoint {
                x: FeatureVector::new(values),
                y: c,
            });
        }
    }
    Ok(points)
}

/// Shuffled 50/50 split of one individual's annotations into fine-tune
/// and test halves. Odd sizes give the extra point to the fine-tune half.
pub fn split_specific(
    points: &[HumanAnnotatedPoint],
    seed: u64,
) -> Result<(Vec<HumanAnnotatedPoint>, Vec<HumanAnnotatedPoint>)> {
    if points.is_empty() {
        return Err(Error::EmptyInput("specific-human annotations"));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5911)));
    let cut = points.len().div_ceil(2);
    let finetune = order[..cut].iter().map(|&i| points[i].clone()).collect();
    let test = order[cut..].iter().map(|&i| points[i].clone()).collect();
    Ok((finetune, test))
}

/// Per-class weights proportional to inverse class frequency, normalized
/// so the weighted mean over the sample is 1 (weighting never rescales
/// the effective learning rate). Absent classes get weight 0.
pub fn inverse_frequency_weights(labels: &[usize], num_classes: usize) -> Result<Vec<f64>> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("label list"));
    }
    let mut counts = vec![0usize; num_classes];
    for &l in labels {
        if l >= num_classes {
            return Err(Error::InvalidArgument(format!(
                "label {l} out of range for {num_classes} classes"
            )));
        }
        counts[l] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    let n = labels.len() as f64;
    Ok(counts
        .iter()
        .map(|&c| {
            if c == 0 {
                0.0
            } else {
                n / (present as f64 * c as f64)
            }
        })
        .collect())
}

const TRUE_LABEL_COL: &str = "true_label";
const HUMAN_LABEL_COL: &str = "human_label";
const IMPUTED_COL: &str = "imputed";

/// Loads per-annotator data from the annotation CSV schema
/// `feat_0,...,feat_{d-1},true_label,human_label[,imputed]`.
/// Feature dimension is inferred from the header; a header-only file
/// yields an empty list.
pub fn load_annotations(path: &Path, num_classes: usize) -> Result<Vec<HumanAnnotatedPoint>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::MalformedRecord {
        path: path.into(),
        line: 1,
        message: "missing header".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    let has_imputed = cols.last() == Some(&IMPUTED_COL);
    let label_cols = if has_imputed { 3 } else { 2 };
    if cols.len() < label_cols + 1 {
        return Err(Error::MalformedRecord {
            path: path.into(),
            line: 1,
            message: format!("header has too few columns: {header:?}"),
        });
    }
    let dim = cols.len() - label_cols;
    for (i, col) in cols[..dim].iter().enumerate() {
        if *col != format!("feat_{i}") {
            return Err(Error::MalformedRecord {
                path: path.into(),
                line: 1,
                message: format!("expected column feat_{i}, found {col:?}"),
            });
        }
    }
    if cols[dim] != TRUE_LABEL_COL || cols[dim + 1] != HUMAN_LABEL_COL {
        return Err(Error::MalformedRecord {
            path: path.into(),
            line: 1,
            message: format!("expected {TRUE_LABEL_COL},{HUMAN_LABEL_COL} after features"),
        });
    }

    let malformed = |line: usize, message: String| Error::MalformedRecord {
        path: path.into(),
        line,
        message,
    };
    let mut points = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1; // 1-based, matching editors
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != cols.len() {
            return Err(malformed(
                line,
                format!("expected {} fields, found {}", cols.len(), fields.len()),
            ));
        }
        let mut values = Vec::with_capacity(dim);
        for (i, f) in fields[..dim].iter().enumerate() {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|e| malformed(line, format!("feat_{i}: {e}")))?;
            if !v.is_finite() {
                return Err(malformed(line, format!("feat_{i} is not finite: {f}")));
            }
            values.push(v);
        }
        let parse_label = |name: &str, f: &str| -> Result<usize> {
            let l: usize = f
                .trim()
                .parse()
                .map_err(|e| malformed(line, format!("{name}: {e}")))?;
            if l >= num_classes {
                return Err(malformed(
                    line,
                    format!("{name} {l} out of range for {num_classes} classes"),
                ));
            }
            Ok(l)
        };
        let y = parse_label(TRUE_LABEL_COL, fields[dim])?;
        let h = parse_label(HUMAN_LABEL_COL, fields[dim + 1])?;
        points.push(HumanAnnotatedPoint {
            x: FeatureVector::new(values),
            y,
            h,
        });
    }
    Ok(points)
}

/// Writes annotations in the CSV schema read by [`load_annotations`].
/// Floats use shortest-round-trip formatting, so a save/load cycle is
/// lossless. `imputed`, when given, must be one flag per point and adds
/// the trailing `imputed` column.
pub fn save_annotations(
    path: &Path,
    points: &[HumanAnnotatedPoint],
    imputed: Option<&[bool]>,
) -> Result<()> {
    if let Some(flags) = imputed {
        if flags.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                actual: flags.len(),
            });
        }
    }
    let dim = points.first().map_or(0, |p| p.x.dim());
    if points.iter().any(|p| p.x.dim() != dim) {
        return Err(Error::InvalidArgument(
            "inconsistent feature dimensions".into(),
        ));
    }
    let mut out = String::new();
    for i in 0..dim {
        let _ = write!(out, "feat_{i},");
    }
    out.push_str(TRUE_LABEL_COL);
    out.push(',');
    out.push_str(HUMAN_LABEL_COL);
    if imputed.is_some() {
        out.push(',');
        out.push_str(IMPUTED_COL);
    }
    out.push('\n');
    for (i, p) in points.iter().enumerate() {
        for v in p.x.iter() {
            let _ = write!(out, "{v},");
        }
        let _ = write!(out, "{},{}", p.y, p.h);
        if let Some(flags) = imputed {
            let _ = write!(out, ",{}", u8::from(flags[i]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform_label_points(n: usize, num_classes: usize, seed: u64) -> Vec<LabeledPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| LabeledPoint {
                x: FeatureVector::new(vec![0.0]),
                y: rng.random_range(0..num_classes),
            })
            .collect()
    }

    #[test]
    fn perfect_expert_is_identity() {
        let points = uniform_label_points(1000, 10, 1);
        let mut expert = SyntheticExpert::new(10, 10, 2).unwrap();
        assert!(points.iter().all(|p| {
            let h = expert.label(p);
            h == p.y
        }));
    }

    #[test]
    fn expert_accuracy_tracks_analytic_curve() {
        // Analytic accuracy over uniform classes: k/K + (1-k/K)/K,
        // which is 0.1 + 0.09k for K = 10. Checked within 3 binomial sigma.
        let n = 100_000;
        let points = uniform_label_points(n, 10, 3);
        for k in [0usize, 5, 10] {
            let mut expert = SyntheticExpert::new(k, 10, 4).unwrap();
            let correct = points.iter().filter(|p| expert.label(p) == p.y).count();
            let acc = correct as f64 / n as f64;
            let expected = 0.1 + 0.09 * k as f64;
            let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
            assert!(
                (acc - expected).abs() <= 3.0 * sigma.max(1e-12),
                "k={k}: acc {acc} vs expected {expected}"
            );
        }
    }

    #[test]
    fn expert_is_deterministic_per_seed() {
        let points = uniform_label_points(200, 10, 5);
        let mut a = SyntheticExpert::new(4, 10, 9).unwrap();
        let mut b = SyntheticExpert::new(4, 10, 9).unwrap();
        assert_eq!(a.annotate(&points), b.annotate(&points));
    }

    #[test]
    fn blob_dataset_is_deterministic_and_labeled_by_cluster() {
        let cfg = BlobConfig {
            num_classes: 3,
            dim: 4,
            per_class: 5,
            ..BlobConfig::default()
        };
        let a = generate_blob_dataset(&cfg).unwrap();
        let b = generate_blob_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
        assert!(a.iter().all(|p| p.y < 3 && p.x.dim() == 4));
    }

    #[test]
    fn blob_zero_spread_is_nearest_mean_separable() {
        let cfg = BlobConfig {
            num_classes: 2,
            dim: 2,
            per_class: 20,
            spread: 1e-9,
            separation: 1.0,
            seed: 7,
        };
        let points = generate_blob_dataset(&cfg).unwrap();
        let means = cfg.class_means();
        let correct = points
            .iter()
            .filter(|p| nearest_mean(&p.x, &means) == p.y)
            .count();
        assert_eq!(correct, points.len());
    }

    #[test]
    fn blob_rejects_bad_config() {
        let bad = [
            BlobConfig {
                spread: 0.0,
                ..BlobConfig::default()
            },
            BlobConfig {
                per_class: 0,
                ..BlobConfig::default()
            },
            BlobConfig {
                dim: 4,
                ..BlobConfig::default()
            }, // < num_classes
        ];
        for cfg in bad {
            assert!(generate_blob_dataset(&cfg).is_err());
        }
    }

    /// Nearest-true-mean classification; with equal isotropic clusters
    /// this is the Bayes rule for the blob generative model.
    pub(crate) fn nearest_mean(x: &FeatureVector, means: &[FeatureVector]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, m) in means.iter().enumerate() {
            let d: f64 = x.iter().zip(m.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }

    #[test]
    fn blob_default_geometry_bayes_accuracy_above_99() {
        let cfg = BlobConfig {
            per_class: 600,
            seed: 11,
            ..BlobConfig::default()
        };
        let points = generate_blob_dataset(&cfg).unwrap();
        let means = cfg.class_means();
        let correct = points
            .iter()
            .filter(|p| nearest_mean(&p.x, &means) == p.y)
            .count();
        let acc = correct as f64 / points.len() as f64;
        assert!(acc > 0.99, "Bayes-rule accuracy {acc}");
    }

    #[test]
    fn split_sizes() {
        let points: Vec<HumanAnnotatedPoint> = (0..500)
            .map(|i| HumanAnnotatedPoint {
                x: FeatureVector::new(vec![i as f64]),
                y: 0,
                h: 0,
            })
            .collect();
        let (ft, test) = split_specific(&points, 3).unwrap();
        assert_eq!((ft.len(), test.len()), (250, 250));
        let (ft, test) = split_specific(&points[..200], 3).unwrap();
        assert_eq!((ft.len(), test.len()), (100, 100));
        let (ft, test) = split_specific(&points[..3], 3).unwrap();
        assert_eq!((ft.len(), test.len()), (2, 1));
        assert!(split_specific(&[], 3).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 1usize..80, seed in 0u64..500) {
            let points: Vec<HumanAnnotatedPoint> = (0..n)
                .map(|i| HumanAnnotatedPoint {
                    x: FeatureVector::new(vec![i as f64]),
                    y: 0,
                    h: 0,
                })
                .collect();
            let (ft, test) = split_specific(&points, seed).unwrap();
            prop_assert_eq!(ft.len() + test.len(), n);
            prop_assert!(ft.len() == test.len() || ft.len() == test.len() + 1);
            let mut seen: Vec<f64> = ft.iter().chain(&test).map(|p| p.x[0]).collect();
            seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let expected: Vec<f64> = (0..n).map(|i| i as f64).collect();
            prop_assert_eq!(seen, expected);
        }

        #[test]
        fn weights_reweight_to_sample_size(labels in proptest::collection::vec(0usize..5, 1..200)) {
            let w = inverse_frequency_weights(&labels, 5).unwrap();
            let total: f64 = labels.iter().map(|&l| w[l]).sum();
            prop_assert!((total - labels.len() as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn weights_match_direct_formula() {
        let w = inverse_frequency_weights(&[0, 0, 0, 1], 2).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 2.0).abs() < 1e-15);

        let w = inverse_frequency_weights(&[0, 0, 1, 1, 1, 1, 2, 2], 3).unwrap();
        assert!((w[0] - 8.0 / 6.0).abs() < 1e-15);
        assert!((w[1] - 8.0 / 12.0).abs() < 1e-15);
        assert!((w[2] - 8.0 / 6.0).abs() < 1e-15);

        let w = inverse_frequency_weights(&[0, 1, 2, 0, 1, 2], 3).unwrap();
        assert!(w.iter().all(|&x| (x - 1.0).abs() < 1e-15));

        // Absent class gets weight zero.
        let w = inverse_frequency_weights(&[0, 0], 3).unwrap();
        assert_eq!(w[1], 0.0);
        assert_eq!(w[2], 0.0);

        assert!(inverse_frequency_weights(&[], 3).is_err());
        assert!(inverse_frequency_weights(&[3], 3).is_err());
    }

    #[test]
    fn annotation_csv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.csv");
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let points: Vec<HumanAnnotatedPoint> = (0..50)
            .map(|_| HumanAnnotatedPoint {
                x: FeatureVector::new((0..5).map(|_| rng.random::<f64>() * 13.7 - 5.0).collect()),
                y: rng.random_range(0..10),
                h: rng.random_range(0..10),
            })
            .collect();
        save_annotations(&path, &points, None).unwrap();
        let loaded = load_annotations(&path, 10).unwrap();
        assert_eq!(points, loaded);

        // With the imputed column the points still round-trip.
        let flags: Vec<bool> = (0..points.len()).map(|i| i % 2 == 0).collect();
        save_annotations(&path, &points, Some(&flags)).unwrap();
        let loaded = load_annotations(&path, 10).unwrap();
        assert_eq!(points, loaded);
    }

    #[test]
    fn annotation_csv_errors() {
        let dir = tempfile::tempdir().unwrap();

        let missing = dir.path().join("nope.csv");
        let err = load_annotations(&missing, 10).unwrap_err();
        assert!(err.to_string().contains("nope.csv"));

        let path = dir.path().join("bad.csv");
        fs::write(
            &path,
            "feat_0,feat_1,true_label,human_label\n1.0,2.0,3,1\n-0.5,4.25,0,9\n",
        )
        .unwrap();
        assert_eq!(load_annotations(&path, 10).unwrap().len(), 2);

        // Label out of range is reported with its line number.
        fs::write(
            &path,
            "feat_0,feat_1,true_label,human_label\n1.0,2.0,3,1\n0.0,0.0,12,1\n",
        )
        .unwrap();
        let err = load_annotations(&path, 10).unwrap_err().to_string();
        assert!(err.contains(":3:"), "{err}");
        assert!(err.contains("true_label"), "{err}");

        // Wrong field count.
        fs::write(&path, "feat_0,feat_1,true_label,human_label\n1.0,2.0,3\n").unwrap();
        let err = load_annotations(&path, 10).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");

        // Header-only file is an empty dataset, not an error.
        fs::write(&path, "feat_0,feat_1,true_label,human_label\n").unwrap();
        assert!(load_annotations(&path, 10).unwrap().is_empty());

        // Non-finite feature rejected.
        fs::write(&path, "feat_0,feat_1,true_label,human_label\nNaN,2.0,3,1\n").unwrap();
        let err = load_annotations(&path, 10).unwrap_err().to_string();
        assert!(err.contains("finite"), "{err}");
    }

    #[test]
    fn annotator_pool_accuracy_matches_beta_mean() {
        let points = uniform_label_points(40_000, 10, 21);
        let mut pool = AnnotatorPool::sample(50, 10, 18.0, 2.0, 22).unwrap();
        let annotated = pool.annotate(&points);
        let acc =
            annotated.iter().filter(|p| p.human_correct()).count() as f64 / annotated.len() as f64;
        // Beta(18,2) has mean 0.9; pool-average accuracy should sit close.
        assert!((acc - 0.9).abs() < 0.03, "pool accuracy {acc}");
    }
}
