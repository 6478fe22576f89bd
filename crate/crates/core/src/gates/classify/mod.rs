//! From-scratch classifier families used as safety gates: logistic
//! regression, k-NN, random forest, linear SVM, Gaussian Bayes, and MLPs.
//! All training is deterministic given the dataset and an [`RngStream`].
//!
//! Prediction uses each family's natural operating threshold: 0.5
//! probability, sign of the margin, or majority vote with ties resolved
//! to reject.

mod bayes;
mod forest;
mod knn;
mod logistic;
mod mlp;
mod svm;

pub use bayes::BayesModel;
pub use forest::ForestModel;
pub use knn::KnnModel;
pub use logistic::LogisticModel;
pub use mlp::MlpModel;
pub use svm::SvmModel;

use serde::{Deserialize, Serialize};

use super::features::LabeledDataset;
use crate::rng::RngStream;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logistic,
    Knn5,
    RandomForest,
    LinearSvm,
    GaussianBayes,
    Mlp32,
    DeepMlp,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 7] = [
        ClassifierKind::Logistic,
        ClassifierKind::Knn5,
        ClassifierKind::RandomForest,
        ClassifierKind::LinearSvm,
        ClassifierKind::GaussianBayes,
        ClassifierKind::Mlp32,
        ClassifierKind::DeepMlp,
    ];

    /// The five classical families of the baseline table.
    pub const CLASSICAL: [ClassifierKind; 5] = [
        ClassifierKind::Logistic,
        ClassifierKind::Knn5,
        ClassifierKind::RandomForest,
        ClassifierKind::LinearSvm,
        ClassifierKind::GaussianBayes,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::Logistic => "logistic_regression",
            ClassifierKind::Knn5 => "knn5",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::LinearSvm => "linear_svm",
            ClassifierKind::GaussianBayes => "gaussian_bayes",
            ClassifierKind::Mlp32 => "mlp32",
            ClassifierKind::DeepMlp => "deep_mlp",
        }
    }
}

/// Z-score standardizer fitted on training features. Distance- and
/// gradient-based families need it; trees are scale-invariant and skip it.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &[Vec<f64>]) -> Self {
        let k = features.first().map(|f| f.len()).unwrap_or(0);
        let n = features.len() as f64;
        let mut mean = vec![0.0; k];
        for row in features {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut std = vec![0.0; k];
        for row in features {
            for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt().max(1e-12);
        }
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    /// Degenerate single-class training data: refuse everything.
    ConstantReject,
    Logistic(LogisticModel),
    Knn(KnnModel),
    Forest(ForestModel),
    Svm(SvmModel),
    Bayes(BayesModel),
    Mlp(MlpModel),
}

/// A trained classifier with its training diagnostics.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub kind: ClassifierKind,
    pub train_accuracy: f64,
    /// Set when the Bayes covariance needed a ridge to factor.
    pub ridge_warned: bool,
    model: Model,
}

impl Classifier {
    /// True means accept (predicted safe).
    pub fn predict(&self, x: &[f64]) -> bool {
        match &self.model {
            Model::ConstantReject => false,
            Model::Logistic(m) => m.predict(x),
            Model::Knn(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
            Model::Svm(m) => m.predict(x),
            Model::Bayes(m) => m.predict(x),
            Model::Mlp(m) => m.predict(x),
        }
    }
}

/// Train one classifier family on the dataset. Single-class data yields
/// the constant-reject model.
pub fn train(
    kind: ClassifierKind,
    dataset: &LabeledDataset,
    rng: &mut RngStream,
) -> Result<Classifier> {
    if !dataset.has_both_classes() {
        return Ok(Classifier {
            kind,
            train_accuracy: 0.0,
            ridge_warned: false,
            model: Model::ConstantReject,
        });
    }
    let mut ridge_warned = false;
    let model = match kind {
        ClassifierKind::Logistic => Model::Logistic(LogisticModel::fit(dataset)),
        ClassifierKind::Knn5 => Model::Knn(KnnModel::fit(dataset, 5)),
        ClassifierKind::RandomForest => Model::Forest(ForestModel::fit(dataset, 50, 5, rng)),
        ClassifierKind::LinearSvm => Model::Svm(SvmModel::fit(dataset, 1.0, 200)),
        ClassifierKind::GaussianBayes => {
            let m = BayesModel::fit(dataset)?;
            ridge_warned = m.ridge_applied();
            Model::Bayes(m)
        }
        ClassifierKind::Mlp32 => Model::Mlp(MlpModel::fit(dataset, &[32], 50, 0.01, 0.0, rng)),
        ClassifierKind::DeepMlp => {
            Model::Mlp(MlpModel::fit(dataset, &[128, 64, 32], 300, 0.01, 0.9, rng))
        }
    };
    let mut classifier = Classifier {
        kind,
        train_accuracy: 0.0,
        ridge_warned,
        model,
    };
    let correct = dataset
        .features
        .iter()
        .zip(&dataset.labels)
        .filter(|(x, &y)| classifier.predict(x) == y)
        .count();
    classifier.train_accuracy = correct as f64 / dataset.len() as f64;
    Ok(classifier)
}

/// Test-set error decomposition at the natural threshold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TestRates {
    /// Accepted fraction of unsafe samples (false-accept rate).
    pub delta: f64,
    /// Accepted fraction of safe samples.
    pub tpr: f64,
    pub accuracy: f64,
    pub n_safe: usize,
    pub n_unsafe: usize,
}

pub fn measure_rates(classifier: &Classifier, dataset: &LabeledDataset) -> TestRates {
    let mut fa = 0usize;
    let mut ta = 0usize;
    let mut correct = 0usize;
    let (n_safe, n_unsafe) = dataset.class_counts();
    for (x, &y) in dataset.features.iter().zip(&dataset.labels) {
        let accept = classifier.predict(x);
        if accept && !y {
            fa += 1;
        }
        if accept && y {
            ta += 1;
        }
        if accept == y {
            correct += 1;
        }
    }
    TestRates {
        delta: if n_unsafe == 0 {
            0.0
        } else {
            fa as f64 / n_unsafe as f64
        },
        tpr: if n_safe == 0 {
            0.0
        } else {
            ta as f64 / n_safe as f64
        },
        accuracy: correct as f64 / dataset.len().max(1) as f64,
        n_safe,
        n_unsafe,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::features::FeatureKind;

    fn two_point_dataset() -> LabeledDataset {
        LabeledDataset {
            features: vec![vec![1.0, 1.0], vec![-1.0, -1.0]],
            labels: vec![true, false],
            feature_map: FeatureKind::RawParams,
        }
    }

    /// Blobs at +-mu along every axis, linearly separable.
    fn blob_dataset(n: usize, dim: usize, shift: f64, seed: u64) -> LabeledDataset {
        let mut rng = RngStream::new(seed);
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let safe = i % 2 == 0;
            let offset = if safe { shift } else { -shift };
            let row: Vec<f64> = (0..dim).map(|_| offset + 0.3 * rng.normal()).collect();
            features.push(row);
            labels.push(safe);
        }
        LabeledDataset {
            features,
            labels,
            feature_map: FeatureKind::RawParams,
        }
    }

    #[test]
    fn every_kind_separates_two_points() {
        let ds = two_point_dataset();
        for kind in ClassifierKind::ALL {
            let mut rng = RngStream::new(42).child(kind.name());
            let c = train(kind, &ds, &mut rng).unwrap();
            assert_eq!(
                c.train_accuracy,
                1.0,
                "{} failed on two points",
                kind.name()
            );
        }
    }

    #[test]
    fn every_kind_learns_separable_blobs() {
        let ds = blob_dataset(200, 6, 1.0, 7);
        for kind in ClassifierKind::ALL {
            let mut rng = RngStream::new(1).child(kind.name());
            let c = train(kind, &ds, &mut rng).unwrap();
            assert!(
                c.train_accuracy >= 0.97,
                "{}: accuracy {}",
                kind.name(),
                c.train_accuracy
            );
        }
    }

    #[test]
    fn single_class_collapses_to_reject() {
        let ds = LabeledDataset {
            features: vec![vec![0.0], vec![1.0]],
            labels: vec![true, true],
            feature_map: FeatureKind::RawParams,
        };
        for kind in ClassifierKind::ALL {
            let mut rng = RngStream::new(2).child(kind.name());
            let c = train(kind, &ds, &mut rng).unwrap();
            assert!(!c.predict(&[0.5]), "{} should reject", kind.name());
        }
    }

    #[test]
    fn knn1_memorizes_training_set() {
        let ds = blob_dataset(60, 3, 0.2, 9);
        let knn = KnnModel::fit(&ds, 1);
        let correct = ds
            .features
            .iter()
            .zip(&ds.labels)
            .filter(|(x, &y)| knn.predict(x) == y)
            .count();
        assert_eq!(correct, ds.len());
    }

    #[test]
    fn training_is_deterministic() {
        let ds = blob_dataset(120, 5, 0.5, 3);
        for kind in [
            ClassifierKind::RandomForest,
            ClassifierKind::Mlp32,
            ClassifierKind::DeepMlp,
        ] {
            let mut r1 = RngStream::new(5).child(kind.name());
            let mut r2 = RngStream::new(5).child(kind.name());
            let a = train(kind, &ds, &mut r1).unwrap();
            let b = train(kind, &ds, &mut r2).unwrap();
            let probe = vec![0.1; 5];
            assert_eq!(a.predict(&probe), b.predict(&probe));
            assert_eq!(a.train_accuracy, b.train_accuracy);
        }
    }

    #[test]
    fn measure_rates_on_perfect_classifier() {
        let ds = blob_dataset(100, 4, 1.5, 11);
        let mut rng = RngStream::new(6);
        let c = train(ClassifierKind::Logistic, &ds, &mut rng).unwrap();
        let rates = measure_rates(&c, &ds);
        assert!(rates.accuracy >= 0.99);
        assert!(rates.delta <= 0.01);
        assert!(rates.tpr >= 0.99);
    }

    #[test]
    fn bayes_accuracy_matches_gaussian_closed_form() {
        // Equal-covariance pair at separation 1: the Bayes-optimal
        // accuracy is Phi(separation/2) ~ 0.6915; the estimated
        // full-covariance classifier lands within 0.03 of it.
        use crate::theory::GaussianPair;
        let pair = GaussianPair::new(50, 1.0).unwrap();
        let sample = |label: &str, n: usize| {
            let rng = RngStream::new(42).child(label);
            let mut features = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let mut child = rng.child_indexed("row", i as u64);
                let safe = child.uniform() < 0.5;
                features.push(pair.sample(safe, &mut child));
                labels.push(safe);
            }
            LabeledDataset {
                features,
                labels,
                feature_map: FeatureKind::RawParams,
            }
        };
        let train_set = sample("bayes-train", 1000);
        let test_set = sample("bayes-test", 5000);
        let mut rng = RngStream::new(1);
        let model = train(ClassifierKind::GaussianBayes, &train_set, &mut rng).unwrap();
        let rates = measure_rates(&model, &test_set);
        let expected = crate::theory::normal_cdf(0.5);
        assert!(
            (rates.accuracy - expected).abs() < 0.03,
            "accuracy {} vs closed form {expected}",
            rates.accuracy
        );
    }

    #[test]
    fn standardizer_centers_and_scales() {
        let rows = vec![vec![1.0, 100.0], vec![3.0, 300.0]];
        let s = Standardizer::fit(&rows);
        let z = s.apply_all(&rows);
        assert!((z[0][0] + 1.0).abs() < 1e-12);
        assert!((z[1][0] - 1.0).abs() < 1e-12);
        assert!((z[0][1] + 1.0).abs() < 1e-12);
    }
}
