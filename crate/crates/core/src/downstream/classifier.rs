use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{LabelVector, Standardization};
use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, softmax_rows, Activation, Adam, DenseNet, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    /// Multinomial logistic regression.
    Logistic,
    /// Two relu hidden layers of width 32.
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub epochs: usize,
    pub lr: f64,
    /// L2 penalty on weights (not biases).
    pub l2: f64,
    pub batch_size: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { kind: ClassifierKind::Logistic, epochs: 100, lr: 0.01, l2: 1e-3, batch_size: 64 }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let rates_ok = self.lr > 0.0 && self.l2 >= 0.0;
        if self.epochs == 0 || self.batch_size == 0 || !rates_ok {
            return Err(Error::Config(
                "classifier.epochs, batch_size and lr must be positive and l2 non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// A trained classifier. Inputs are standardized with statistics of the
/// training rows before reaching the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub kind: ClassifierKind,
    pub scaler: Standardization,
    pub net: DenseNet,
    pub num_classes: usize,
}

impl Classifier {
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        Ok(softmax_rows(&self.net.predict(&self.scaler.apply(x)?)?))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok((0..p.rows())
            .map(|i| {
                let row = p.row(i);
                // first maximum wins ties
                (0..row.len()).fold(0, |best, j| if row[j] > row[best] { j } else { best })
            })
            .collect())
    }
}

pub fn train_classifier(x: &Matrix, y: &LabelVector, cfg: &ClassifierConfig, seed: u64) -> Result<Classifier> {
    cfg.validate()?;
    if x.rows() != y.len() {
        return Err(Error::Shape(format!("{} feature rows, {} labels", x.rows(), y.len())));
    }
    let present = y.class_counts().iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::InvalidArgument("training labels contain a single class".into()));
    }
    let k = y.num_classes();
    let scaler = Standardization::fit(x)?;
    let xs = scaler.apply(x)?;
    let mut rng = seeded_rng(seed);
    let mut net = match cfg.kind {
        ClassifierKind::Logistic => DenseNet::new(&[x.cols(), k], &[Activation::Linear], &mut rng)?,
        ClassifierKind::Mlp => {
            DenseNet::new(&[x.cols(), 32, 32, k], &[Activation::Relu, Activation::Relu, Activation::Linear], &mut rng)?
        }
    };
    let mut opt = Adam::new(cfg.lr);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(cfg.batch_size) {
            let xb = xs.select_rows(idx);
            let (logits, cache) = net.forward(&xb)?;
            let mut grad = softmax_rows(&logits);
            let b = idx.len() as f64;
            for (r, &i) in idx.iter().enumerate() {
                grad.row_mut(r)[y.labels()[i]] -= 1.0;
            }
            grad.scale_in_place(1.0 / b);
            let (mut g, _) = net.backward(&cache, &grad)?;
            for (gw, layer) in g.weights.iter_mut().zip(&net.layers) {
                gw.add_assign(&layer.weight.scale(cfg.l2))?;
            }
            net.adam_step(&g, &mut opt)?;
        }
        if net.layers.iter().any(|l| !l.weight.is_finite()) {
            return Err(Error::Divergence { seed, epoch });
        }
    }
    Ok(Classifier { kind: cfg.kind, scaler, net, num_classes: k })
}

/// Fraction of matching labels.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set".into()));
    }
    if predicted.len() != truth.len() {
        return Err(Error::Shape("prediction and label counts differ".into()));
    }
    let correct = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(correct as f64 / truth.len() as f64)
}

pub fn evaluate(c: &Classifier, x: &Matrix, y: &LabelVector) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    if x.rows() != y.len() {
        return Err(Error::Shape(format!("{} feature rows, {} labels", x.rows(), y.len())));
    }
    accuracy(&c.predict(x)?, y.labels())
}
