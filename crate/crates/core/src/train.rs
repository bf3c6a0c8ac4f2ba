//! Full-batch gradient descent for single-hidden-layer networks.
//!
//! Weights start uniform in `±init_scale` from a seeded xoshiro256++
//! generator and biases start at zero, so a configuration and a dataset
//! determine the trained model bit for bit.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::interval::logistic;
use crate::mlp::{Activation, Layer, MlpModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    /// Mean over patterns and outputs of the squared error.
    Mse,
    /// Mean over patterns of `-ln y_c` for the true class `c`.
    CrossEntropy,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::Mse => "mse",
            Loss::CrossEntropy => "cross-entropy",
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(Loss::Mse),
            "cross-entropy" | "crossentropy" | "ce" => Ok(Loss::CrossEntropy),
            other => Err(Error::InvalidConfig(format!("unknown loss {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hidden_units: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub loss: Loss,
    pub learning_rate: f64,
    /// Heavy-ball momentum coefficient; 0 gives plain gradient descent.
    pub momentum: f64,
    pub max_epochs: usize,
    pub goal_loss: f64,
    pub seed: u64,
    pub init_scale: f64,
}

impl TrainConfig {
    /// Tanh hidden layer, logistic outputs, mean squared error.
    pub fn mse(hidden_units: usize, seed: u64) -> Self {
        TrainConfig {
            hidden_units,
            hidden_activation: Activation::Tanh,
            output_activation: Activation::Logistic,
            loss: Loss::Mse,
            learning_rate: 0.5,
            momentum: 0.0,
            max_epochs: 10_000,
            goal_loss: 1e-3,
            seed,
            init_scale: 0.5,
        }
    }

    /// Tanh hidden layer, softmax outputs, cross-entropy.
    pub fn cross_entropy(hidden_units: usize, seed: u64) -> Self {
        TrainConfig {
            output_activation: Activation::Softmax,
            loss: Loss::CrossEntropy,
            goal_loss: 0.0,
            ..Self::mse(hidden_units, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        match (self.loss, self.output_activation) {
            (Loss::CrossEntropy, Activation::Softmax) | (Loss::Mse, Activation::Logistic) => {}
            (Loss::CrossEntropy, _) => return bad("cross-entropy requires softmax outputs"),
            (Loss::Mse, _) => return bad("mse requires logistic outputs"),
        }
        if self.hidden_activation == Activation::Softmax {
            return bad("softmax is not a hidden activation");
        }
        if self.hidden_units == 0 {
            return bad("hidden_units must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return bad("init_scale must be finite and non-negative");
        }
        if self.goal_loss.is_nan() {
            return bad("goal_loss is NaN");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub final_loss: f64,
    pub epochs: usize,
    /// Loss before each update, then the final loss: `epochs + 1` entries.
    pub history: Vec<f64>,
}

impl TrainOutcome {
    /// Training log as CSV with header `epoch,loss`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (e, l) in self.history.iter().enumerate() {
            out.push_str(&format!("{e},{}\n", crate::sivia::fmt_real(*l)));
        }
        out
    }
}

/// Parameters of a two-layer network as dense matrices.
#[derive(Clone, Debug)]
struct Net {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
    hidden: Activation,
    output: Activation,
}

struct Grads {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

fn activate(act: Activation, z: &mut Array2<f64>) {
    match act {
        Activation::Tanh => z.mapv_inplace(f64::tanh),
        Activation::Logistic => z.mapv_inplace(logistic),
        Activation::Identity => {}
        Activation::Softmax => {
            for mut row in z.rows_mut() {
                let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                row.mapv_inplace(|v| (v - max).exp());
                let sum = row.sum();
                row /= sum;
            }
        }
    }
}

/// Derivative of an elementwise activation expressed through its output.
fn derivative_from_output(act: Activation, a: f64) -> f64 {
    match act {
        Activation::Tanh => 1.0 - a * a,
        Activation::Logistic => a * (1.0 - a),
        Activation::Identity => 1.0,
        Activation::Softmax => unreachable!("softmax is handled with its loss"),
    }
}

impl Net {
    fn init(inputs: usize, outputs: usize, cfg: &TrainConfig) -> Self {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
        let s = cfg.init_scale;
        let mut draw = |r, c| {
            Array2::from_shape_simple_fn((r, c), || {
                if s == 0.0 {
                    0.0
                } else {
                    rng.random_range(-s..=s)
                }
            })
        };
        let w1 = draw(cfg.hidden_units, inputs);
        let w2 = draw(outputs, cfg.hidden_units);
        Net {
            w1,
            b1: Array1::zeros(cfg.hidden_units),
            w2,
            b2: Array1::zeros(outputs),
            hidden: cfg.hidden_activation,
            output: cfg.output_activation,
        }
    }

    fn from_model(model: &MlpModel) -> Result<Self> {
        let [l1, l2] = model.layers() else {
            return Err(Error::InvalidConfig(format!(
                "expected a network with one hidden layer, found {} layers",
                model.layers().len()
            )));
        };
        let mat = |l: &Layer| {
            Array2::from_shape_vec((l.rows(), l.cols()), l.weights().to_vec()).expect("layer shape")
        };
        Ok(Net {
            w1: mat(l1),
            b1: Array1::from(l1.biases().to_vec()),
            w2: mat(l2),
            b2: Array1::from(l2.biases().to_vec()),
            hidden: l1.activation(),
            output: l2.activation(),
        })
    }

    fn to_model(&self, class_labels: Vec<String>) -> Result<MlpModel> {
        let layer = |w: &Array2<f64>, b: &Array1<f64>, act| {
            Layer::new(w.nrows(), w.ncols(), w.iter().copied().collect(), b.to_vec(), act)
        };
        MlpModel::new(
            vec![
                layer(&self.w1, &self.b1, self.hidden)?,
                layer(&self.w2, &self.b2, self.output)?,
            ],
            class_labels,
        )
    }

    /// Hidden and output activations for every pattern (one row each).
    /// Hidden activations, output pre-activations and outputs for every
    /// pattern (one row each).
    fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let mut h = x.dot(&self.w1.t()) + &self.b1;
        activate(self.hidden, &mut h);
        let z = h.dot(&self.w2.t()) + &self.b2;
        let mut o = z.clone();
        activate(self.output, &mut o);
        (h, z, o)
    }

    fn loss(&self, loss: Loss, x: &Array2<f64>, t: &Array2<f64>) -> f64 {
        let (_, z, o) = self.forward(x);
        loss_value(loss, &z, &o, t)
    }

    fn is_finite(&self) -> bool {
        [&self.w1, &self.w2].iter().all(|w| w.iter().all(|v| v.is_finite()))
            && [&self.b1, &self.b2].iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn gradients(&self, loss: Loss, x: &Array2<f64>, t: &Array2<f64>) -> (f64, Grads) {
        let (h, z, o) = self.forward(x);
        let value = loss_value(loss, &z, &o, t);
        let n = x.nrows() as f64;
        let dz2 = match loss {
            Loss::Mse => {
                let scale = 2.0 / (n * o.ncols() as f64);
                let mut d = (&o - t) * scale;
                Zip::from(&mut d)
                    .and(&o)
                    .for_each(|d, &a| *d *= derivative_from_output(self.output, a));
                d
            }
            Loss::CrossEntropy => (&o - t) / n,
        };
        let mut dz1 = dz2.dot(&self.w2);
        Zip::from(&mut dz1)
            .and(&h)
            .for_each(|d, &a| *d *= derivative_from_output(self.hidden, a));
        let grads = Grads {
            w2: dz2.t().dot(&h),
            b2: dz2.sum_axis(Axis(0)),
            w1: dz1.t().dot(x),
            b1: dz1.sum_axis(Axis(0)),
        };
        (value, grads)
    }

    fn params_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
        ]
    }
}

impl Grads {
    fn as_slices(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
        ]
    }
}

/// Loss from output pre-activations `z` and outputs `o`; cross-entropy uses
/// `ln y_c = z_c - ln sum_i exp z_i` so that saturated outputs stay exact.
fn loss_value(loss: Loss, z: &Array2<f64>, o: &Array2<f64>, t: &Array2<f64>) -> f64 {
    match loss {
        Loss::Mse => (o - t).mapv(|d| d * d).mean().unwrap_or(0.0),
        Loss::CrossEntropy => {
            let mut total = 0.0;
            for (z, t) in z.rows().into_iter().zip(t.rows()) {
                let max = z.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let lse = max + z.mapv(|v| (v - max).exp()).sum().ln();
                total += Zip::from(&z).and(&t).fold(0.0, |acc, &z, &t| acc + t * (lse - z));
            }
            total / z.nrows() as f64
        }
    }
}

fn design(ds: &Dataset) -> (Array2<f64>, Array2<f64>) {
    let n = ds.len();
    let x = Array2::from_shape_fn((n, ds.feature_count()), |(i, j)| ds.patterns[i][j]);
    let mut t = Array2::zeros((n, ds.class_count()));
    for (i, &l) in ds.labels.iter().enumerate() {
        t[[i, l]] = 1.0;
    }
    (x, t)
}

pub fn train(config: &TrainConfig, ds: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    if ds.class_count() < 2 {
        return Err(Error::InvalidConfig("training needs at least two classes".into()));
    }
    let (x, t) = design(ds);
    let mut net = Net::init(ds.feature_count(), ds.class_count(), config);
    let mut velocity = Grads {
        w1: Array2::zeros(net.w1.raw_dim()),
        b1: Array1::zeros(net.b1.raw_dim()),
        w2: Array2::zeros(net.w2.raw_dim()),
        b2: Array1::zeros(net.b2.raw_dim()),
    };
    let mut history = Vec::new();
    let mut epochs = 0;
    loop {
        let (loss, grads) = net.gradients(config.loss, &x, &t);
        if !(loss.is_finite() && net.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch: epochs });
        }
        history.push(loss);
        if loss <= config.goal_loss || epochs == config.max_epochs {
            break;
        }
        let lr = config.learning_rate;
        let mu = config.momentum;
        let update = |v: &mut [f64], g: &[f64], p: &mut [f64]| {
            for ((v, g), p) in v.iter_mut().zip(g).zip(p) {
                *v = mu * *v - lr * g;
                *p += *v;
            }
        };
        let [vw1, vb1, vw2, vb2] = [
            velocity.w1.as_slice_mut().expect("standard layout"),
            velocity.b1.as_slice_mut().expect("standard layout"),
            velocity.w2.as_slice_mut().expect("standard layout"),
            velocity.b2.as_slice_mut().expect("standard layout"),
        ];
        let [gw1, gb1, gw2, gb2] = grads.as_slices();
        let [pw1, pb1, pw2, pb2] = net.params_mut();
        update(vw1, gw1, pw1);
        update(vb1, gb1, pb1);
        update(vw2, gw2, pw2);
        update(vb2, gb2, pb2);
        epochs += 1;
    }
    let final_loss = *history.last().expect("at least one epoch evaluated");
    let model = net.to_model(ds.class_names.clone())?;
    Ok(TrainOutcome {
        model,
        final_loss,
        epochs,
        history,
    })
}

/// Loss of `model` on `ds`.
pub fn dataset_loss(model: &MlpModel, ds: &Dataset, loss: Loss) -> Result<f64> {
    check_dims(model, ds)?;
    let net = Net::from_model(model)?;
    let (x, t) = design(ds);
    Ok(net.loss(loss, &x, &t))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub predictions: Vec<usize>,
}

impl Evaluation {
    pub fn misclassified(&self, ds: &Dataset) -> Vec<usize> {
        (0..ds.len())
            .filter(|&i| self.predictions[i] != ds.labels[i])
            .collect()
    }
}

fn check_dims(model: &MlpModel, ds: &Dataset) -> Result<()> {
    if model.input_dim() != ds.feature_count() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: ds.feature_count(),
        });
    }
    if model.output_dim() != ds.class_count() {
        return Err(Error::DimensionMismatch {
            expected: model.output_dim(),
            found: ds.class_count(),
        });
    }
    Ok(())
}

pub fn evaluate(model: &MlpModel, ds: &Dataset) -> Result<Evaluation> {
    check_dims(model, ds)?;
    let predictions = ds
        .patterns
        .iter()
        .map(|x| model.predict(x))
        .collect::<Result<Vec<_>>>()?;
    let correct = predictions.iter().zip(&ds.labels).filter(|(p, l)| p == l).count();
    let accuracy = if ds.is_empty() {
        0.0
    } else {
        correct as f64 / ds.len() as f64
    };
    Ok(Evaluation {
        accuracy,
        predictions,
    })
}

/// Largest deviation between the analytic gradient and central finite
/// differences (step `1e-5`) over all parameters, each measured relative to
/// `max(|analytic|, |numeric|, 1e-6)`.
pub fn gradient_check(model: &MlpModel, ds: &Dataset, loss: Loss) -> Result<f64> {
    check_dims(model, ds)?;
    const STEP: f64 = 1e-5;
    let (x, t) = design(ds);
    let net = Net::from_model(model)?;
    let (_, grads) = net.gradients(loss, &x, &t);
    let analytic: Vec<f64> = grads.as_slices().concat();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    let mut index = 0;
    for block in 0..4 {
        let len = probe.params_mut()[block].len();
        for i in 0..len {
            let orig = probe.params_mut()[block][i];
            probe.params_mut()[block][i] = orig + STEP;
            let up = probe.loss(loss, &x, &t);
            probe.params_mut()[block][i] = orig - STEP;
            let down = probe.loss(loss, &x, &t);
            probe.params_mut()[block][i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic[index];
            let scale = a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((a - numeric).abs() / scale);
            index += 1;
        }
    }
    Ok(worst)
}
