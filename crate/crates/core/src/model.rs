//! Binary logistic-regression classifiers and their evaluation.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::Dimension;
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Real};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn record(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Metrics<T = f64> {
    pub accuracy: T,
    pub precision: T,
    pub recall: T,
    pub f1: T,
    /// Set when `tp + fp = 0`; precision is then reported as 0.
    pub precision_undefined: bool,
    /// Set when `tp + fn = 0`; recall is then reported as 0.
    pub recall_undefined: bool,
}

/// Accuracy, precision, recall and F1 on the positive class.
pub fn metrics<T: Real>(c: &Confusion) -> Metrics<T> {
    let f = |v: u64| T::of_usize(v as usize);
    let total = c.total();
    let accuracy = if total == 0 {
        T::zero()
    } else {
        f(c.tp + c.tn) / f(total)
    };
    let precision_undefined = c.tp + c.fp == 0;
    let recall_undefined = c.tp + c.fn_ == 0;
    let precision = if precision_undefined {
        T::zero()
    } else {
        f(c.tp) / f(c.tp + c.fp)
    };
    let recall = if recall_undefined {
        T::zero()
    } else {
        f(c.tp) / f(c.tp + c.fn_)
    };
    let two = T::one() + T::one();
    let f1 = if precision + recall > T::zero() {
        two * precision * recall / (precision + recall)
    } else {
        T::zero()
    };
    Metrics {
        accuracy,
        precision,
        recall,
        f1,
        precision_undefined,
        recall_undefined,
    }
}

/// Fold-averaged metrics plus pooled confusion counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EvalReport<T = f64> {
    pub n: usize,
    pub accuracy: T,
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub per_fold: Vec<Metrics<T>>,
    pub confusion: Confusion,
}

impl<T: Real> EvalReport<T> {
    pub fn from_folds(folds: &[Confusion]) -> Self {
        let per_fold: Vec<Metrics<T>> = folds.iter().map(metrics).collect();
        let k = T::of_usize(per_fold.len().max(1));
        let mean = |f: fn(&Metrics<T>) -> T| per_fold.iter().map(f).sum::<T>() / k;
        let mut confusion = Confusion::default();
        for c in folds {
            confusion.add(c);
        }
        Self {
            n: confusion.total() as usize,
            accuracy: mean(|m| m.accuracy),
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
            per_fold,
            confusion,
        }
    }
}

/// Assigns each example a fold in `0..folds`, stratified by class: every
/// fold receives the same number of each class, ±1.
pub fn stratified_folds(labels: &[bool], folds: usize, rng_seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut assignment = vec![0; labels.len()];
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < folds {
            return Err(Error::Insufficient(format!(
                "class {} has {} examples, fewer than {folds} folds",
                if class { "positive" } else { "negative" },
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            assignment[i] = j % folds;
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Bow,
    Lda,
    Embed,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [FeatureKind::Bow, FeatureKind::Lda, FeatureKind::Embed];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Bow => "bow",
            FeatureKind::Lda => "lda",
            FeatureKind::Embed => "embed",
        }
    }

    /// Dense features are z-scored before training; TF-IDF is left as is.
    pub fn standardized(self) -> bool {
        !matches!(self, FeatureKind::Bow)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bow" => Ok(FeatureKind::Bow),
            "lda" => Ok(FeatureKind::Lda),
            "embed" => Ok(FeatureKind::Embed),
            other => Err(Error::invalid(format!("unknown feature kind {other:?}"))),
        }
    }
}

/// Per-feature z-scoring fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Standardizer<T = f64> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Real> Standardizer<T> {
    pub fn fit(x: &[Vec<T>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = T::of_usize(x.len().max(1));
        let mut mean = vec![T::zero(); d];
        for row in x {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![T::zero(); d];
        for row in x {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s = *s + (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > T::epsilon() {
                    sd
                } else {
                    T::one()
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    pub rng_seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            lr: 0.1,
            l2: 1e-4,
            epochs: 200,
            rng_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrainingLog<T = f64> {
    pub params: TrainParams,
    /// Regularized loss before the first update and after every epoch.
    pub loss: Vec<T>,
    /// Learning rates below this value are guaranteed not to increase the loss.
    pub stability_bound: T,
    /// Hash of the feature artifact the model was trained on, if any.
    pub feature_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LogRegModel<T = f64> {
    pub dimension: Dimension,
    pub feature_kind: FeatureKind,
    pub weights: Vec<T>,
    pub bias: T,
    pub standardizer: Option<Standardizer<T>>,
    pub log: TrainingLog<T>,
}

/// Mean log-loss plus `l2/2 · ‖w‖²`, and its gradient `(∂w, ∂b)`.
/// The bias is not regularized.
pub fn loss_and_grad<T: Real>(x: &[Vec<T>], y: &[bool], w: &[T], b: T, l2: T) -> (T, Vec<T>, T) {
    let n = T::of_usize(x.len());
    let mut loss = T::zero();
    let mut gw = vec![T::zero(); w.len()];
    let mut gb = T::zero();
    for (row, &label) in x.iter().zip(y) {
        let z = dot(w, row) + b;
        let target = if label { T::one() } else { T::zero() };
        // log(1 + e^z) - y z, computed stably
        let softplus = if z > T::zero() {
            z + (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p()
        };
        loss = loss + softplus - target * z;
        let r = sigmoid(z) - target;
        for (g, &v) in gw.iter_mut().zip(row) {
            *g = *g + r * v;
        }
        gb = gb + r;
    }
    let half = T::of_f64(0.5);
    let reg: T = w.iter().map(|&v| v * v).sum::<T>() * l2 * half;
    for (g, &v) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * v;
    }
    (loss / n + reg, gw, gb / n)
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `1/L` for the smoothness constant `L ≤ ¼·mean‖[x,1]‖² + l2` of the loss.
pub fn stability_bound<T: Real>(x: &[Vec<T>], l2: T) -> T {
    let n = T::of_usize(x.len().max(1));
    let mean_sq = x.iter().map(|r| dot(r, r) + T::one()).sum::<T>() / n;
    T::one() / (T::of_f64(0.25) * mean_sq + l2)
}

fn check_shape<T: Real>(x: &[Vec<T>], y: &[bool]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let d = x.first().map_or(0, Vec::len);
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: row.len(),
        });
    }
    Ok(d)
}

/// Full-batch gradient descent on the L2-regularized log-loss.
pub fn train_logreg<T: Real>(
    x: &[Vec<T>],
    y: &[bool],
    dimension: Dimension,
    feature_kind: FeatureKind,
    params: &TrainParams,
) -> Result<LogRegModel<T>> {
    let d = check_shape(x, y)?;
    if !y.iter().any(|&v| v) || y.iter().all(|&v| v) {
        return Err(Error::Insufficient("training data holds a single class".into()));
    }
    let standardizer = feature_kind.standardized().then(|| Standardizer::fit(x));
    let scaled: Vec<Vec<T>>;
    let x = match &standardizer {
        Some(s) => {
            scaled = x.iter().map(|r| s.transform(r)).collect();
            &scaled[..]
        }
        None => x,
    };

    let lr = T::of_f64(params.lr);
    let l2 = T::of_f64(params.l2);
    let mut w = vec![T::zero(); d];
    let mut b = T::zero();
    let mut losses = Vec::with_capacity(params.epochs + 1);
    let (mut loss, mut gw, mut gb) = loss_and_grad(x, y, &w, b, l2);
    losses.push(loss);
    for _ in 0..params.epochs {
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi = *wi - lr * *g;
        }
        b = b - lr * gb;
        (loss, gw, gb) = loss_and_grad(x, y, &w, b, l2);
        losses.push(loss);
    }
    if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
        return Err(Error::invalid("training diverged; lower the learning rate"));
    }
    Ok(LogRegModel {
        dimension,
        feature_kind,
        weights: w,
        bias: b,
        standardizer,
        log: TrainingLog {
            params: *params,
            loss: losses,
            stability_bound: stability_bound(x, l2),
            feature_hash: None,
        },
    })
}

impl<T: Real> LogRegModel<T> {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Positive-class probability.
    pub fn predict_proba(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let z = match &self.standardizer {
            Some(s) => dot(&self.weights, &s.transform(x)),
            None => dot(&self.weights, x),
        };
        Ok(sigmoid(z + self.bias))
    }

    /// Probability and label at the 0.5 threshold.
    pub fn predict(&self, x: &[T]) -> Result<(T, bool)> {
        let p = self.predict_proba(x)?;
        Ok((p, p >= T::of_f64(0.5)))
    }
}

/// Stratified k-fold cross-validation of [`train_logreg`].
pub fn kfold_cv<T: Real>(
    x: &[Vec<T>],
    y: &[bool],
    folds: usize,
    feature_kind: FeatureKind,
    params: &TrainParams,
) -> Result<EvalReport<T>> {
    check_shape(x, y)?;
    let assignment = stratified_folds(y, folds, params.rng_seed)?;
    use rayon::prelude::*;
    let confusions = (0..folds)
        .into_par_iter()
        .map(|fold| {
            let (mut tx, mut ty) = (Vec::new(), Vec::new());
            for (i, row) in x.iter().enumerate() {
                if assignment[i] != fold {
                    tx.push(row.clone());
                    ty.push(y[i]);
                }
            }
            // the dimension tag is irrelevant to cross-validation
            let model = train_logreg(&tx, &ty, Dimension::Science, feature_kind, params)?;
            let mut c = Confusion::default();
            for (i, row) in x.iter().enumerate() {
                if assignment[i] == fold {
                    c.record(y[i], model.predict(row)?.1);
                }
            }
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_folds(&confusions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn params(epochs: usize) -> TrainParams {
        TrainParams {
            epochs,
            ..TrainParams::default()
        }
    }

    #[test]
    fn metrics_match_reference_row() {
        let m: Metrics = metrics(&Confusion { tp: 8, fp: 0, tn: 9, fn_: 2 });
        assert_relative_eq!(m.accuracy, 17.0 / 19.0);
        assert_eq!(m.precision, 1.0);
        assert_relative_eq!(m.recall, 0.8);
        assert_relative_eq!(m.f1, 8.0 / 9.0, epsilon = 1e-15);
        assert!((m.f1 - 0.889).abs() < 5e-4);
    }

    #[test]
    fn degenerate_metrics_are_flagged() {
        let m: Metrics = metrics(&Confusion { tp: 0, fp: 0, tn: 5, fn_: 0 });
        assert_eq!(m.accuracy, 1.0);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(m.precision_undefined && m.recall_undefined);

        let m: Metrics = metrics(&Confusion { tp: 3, fp: 3, tn: 3, fn_: 3 });
        assert_eq!(m.accuracy, 0.5);
    }

    #[test]
    fn separable_pair_is_learned() {
        let x = vec![vec![-1.0], vec![1.0]];
        let y = vec![false, true];
        let m = train_logreg(&x, &y, Dimension::Science, FeatureKind::Bow, &TrainParams { l2: 0.0, ..params(500) }).unwrap();
        assert!(!m.predict(&[-1.0]).unwrap().1);
        assert!(m.predict(&[1.0]).unwrap().1);
    }

    #[test]
    fn zero_epochs_predicts_one_half() {
        let x = vec![vec![-1.0, 2.0], vec![1.0, 0.5]];
        let m = train_logreg(&x, &[false, true], Dimension::Science, FeatureKind::Bow, &params(0)).unwrap();
        assert!(m.weights.iter().all(|&w| w == 0.0));
        assert_eq!(m.bias, 0.0);
        assert_eq!(m.predict_proba(&[3.0, -7.0]).unwrap(), 0.5);
    }

    #[test]
    fn contradictory_points_converge_to_one_half() {
        let x = vec![vec![1.0], vec![1.0]];
        let m = train_logreg(&x, &[true, false], Dimension::Science, FeatureKind::Bow, &params(300)).unwrap();
        assert_relative_eq!(m.predict_proba(&[1.0]).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn one_class_and_shape_errors() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(train_logreg(&x, &[true, true], Dimension::Science, FeatureKind::Bow, &params(5)).is_err());
        let m = train_logreg(&x, &[true, false], Dimension::Science, FeatureKind::Bow, &params(5)).unwrap();
        assert!(matches!(m.predict(&[1.0, 2.0]), Err(Error::DimensionMismatch { expected: 1, got: 2 })));
    }

    #[test]
    fn hand_set_model_matches_scalar_sigmoid() {
        let m = LogRegModel {
            dimension: Dimension::Political,
            feature_kind: FeatureKind::Bow,
            weights: vec![0.5, -2.0],
            bias: 0.25,
            standardizer: None,
            log: TrainingLog { params: params(0), loss: vec![], stability_bound: 1.0, feature_hash: None },
        };
        // z = 0.5*2 - 2*0.3 + 0.25 = 0.65
        let expected = 1.0 / (1.0 + (-0.65f64).exp());
        assert_relative_eq!(m.predict_proba(&[2.0, 0.3]).unwrap(), expected, epsilon = 1e-15);
        let big = m.predict_proba(&[1e6, -1e6]).unwrap();
        assert_eq!(big, 1.0);
    }

    #[test]
    fn folds_are_stratified_partitions() {
        let y: Vec<bool> = (0..53).map(|i| i % 3 == 0).collect();
        let a = stratified_folds(&y, 5, 3).unwrap();
        for f in 0..5 {
            let pos = (0..y.len()).filter(|&i| a[i] == f && y[i]).count();
            let neg = (0..y.len()).filter(|&i| a[i] == f && !y[i]).count();
            assert!((3..=4).contains(&pos), "{pos}");
            assert!((7..=8).contains(&neg), "{neg}");
        }
        assert!(stratified_folds(&[true, true, false], 2, 0).is_err());
    }

    #[test]
    fn single_precision_training() {
        let x: Vec<Vec<f32>> = vec![vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]];
        let m = train_logreg(&x, &[false, false, true, true], Dimension::Science, FeatureKind::Embed, &params(100)).unwrap();
        assert!(m.predict(&[1.5f32]).unwrap().1);
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, d) = (rng.gen_range(2..8), rng.gen_range(1..5));
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            let y: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b = rng.gen_range(-1.0..1.0);
            let l2 = 0.1;
            let (_, gw, gb) = loss_and_grad(&x, &y, &w, b, l2);
            let h = 1e-6;
            for j in 0..d {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[j] += h;
                wm[j] -= h;
                let num = (loss_and_grad(&x, &y, &wp, b, l2).0 - loss_and_grad(&x, &y, &wm, b, l2).0) / (2.0 * h);
                prop_assert!((num - gw[j]).abs() <= 1e-5 * gw[j].abs().max(1e-3), "{} vs {}", num, gw[j]);
            }
            let num = (loss_and_grad(&x, &y, &w, b + h, l2).0 - loss_and_grad(&x, &y, &w, b - h, l2).0) / (2.0 * h);
            prop_assert!((num - gb).abs() <= 1e-5 * gb.abs().max(1e-3));
        }

        #[test]
        fn loss_never_increases_below_stability_bound(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
            let mut y: Vec<bool> = (0..20).map(|_| rng.gen()).collect();
            y[0] = true;
            y[1] = false;
            let bound = stability_bound(&x, 1e-4);
            let p = TrainParams { lr: 0.9 * bound, l2: 1e-4, epochs: 50, rng_seed: 0 };
            let m = train_logreg(&x, &y, Dimension::Science, FeatureKind::Bow, &p).unwrap();
            for pair in m.log.loss.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-12);
            }
        }
    }
}
