//! Feed-forward networks evaluated on points and on boxes.
//!
//! [`MlpModel::forward_box`] is the natural inclusion function of
//! [`MlpModel::forward`]: every affine term and activation is replaced by its
//! interval counterpart, so the output box encloses the image of the input
//! box.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::interval::{Interval, IvBox, Monotone};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Logistic,
    Softmax,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Logistic => "logistic",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        }
    }

    /// Range of the activation, `None` when unbounded.
    pub fn range(self) -> Option<Interval> {
        match self {
            Activation::Tanh => Some(Interval::SYMMETRIC_UNIT),
            Activation::Logistic | Activation::Softmax => Some(Interval::UNIT),
            Activation::Identity => None,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "logistic" | "sigmoid" => Ok(Activation::Logistic),
            "softmax" => Ok(Activation::Softmax),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::InvalidModel(format!("unknown activation {other:?}"))),
        }
    }
}

/// Dense layer computing `activation(W x + b)`; `W` is `rows x cols`,
/// row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(
        rows: usize,
        cols: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidModel("layer with zero size".into()));
        }
        if weights.len() != rows * cols {
            return Err(Error::InvalidModel(format!(
                "layer is {rows}x{cols} but has {} weights",
                weights.len()
            )));
        }
        if biases.len() != rows {
            return Err(Error::InvalidModel(format!(
                "layer has {rows} rows but {} biases",
                biases.len()
            )));
        }
        if !weights.iter().chain(&biases).all(|v| v.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        Ok(Layer {
            rows,
            cols,
            weights,
            biases,
            activation,
        })
    }

    /// Layer with all-zero parameters.
    pub fn zeros(rows: usize, cols: usize, activation: Activation) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols], vec![0.0; rows], activation)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.weights[row * self.cols..(row + 1) * self.cols]
    }

    fn preactivate(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(self.biases[i], |acc, (w, v)| acc + w * v)
            })
            .collect()
    }

    fn preactivate_row_box(&self, row: usize, x: &[Interval]) -> Interval {
        self.row(row)
            .iter()
            .zip(x)
            .fold(point(self.biases[row]), |acc, (&w, v)| acc + v.scale(w))
    }

    fn preactivate_box(&self, x: &[Interval]) -> Vec<Interval> {
        (0..self.rows)
            .map(|i| self.preactivate_row_box(i, x))
            .collect()
    }
}

#[inline]
fn point(v: f64) -> Interval {
    Interval::point(v).expect("finite parameter")
}

fn apply_activation(activation: Activation, z: &mut [f64]) {
    match activation {
        Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
        Activation::Logistic => z
            .iter_mut()
            .for_each(|v| *v = crate::interval::logistic(*v)),
        Activation::Identity => {}
        Activation::Softmax => softmax_in_place(z),
    }
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn apply_activation_box(activation: Activation, z: Vec<Interval>) -> Vec<Interval> {
    match activation {
        Activation::Tanh => z.iter().map(|v| v.monotone(Monotone::Tanh)).collect(),
        Activation::Logistic => z.iter().map(|v| v.monotone(Monotone::Logistic)).collect(),
        Activation::Identity => z,
        Activation::Softmax => {
            let pre = IvBox::from_vec_unchecked(z);
            (0..pre.dim()).map(|i| softmax_box(&pre, i)).collect()
        }
    }
}

/// Enclosure of softmax output `node` over the pre-activation box, in the
/// difference form `1 / (1 + sum_{j != node} exp(z_j - z_node))`, intersected
/// with `[0, 1]`.
///
/// # Panics
/// If `node >= preacts.dim()`.
pub fn softmax_box(preacts: &IvBox, node: usize) -> Interval {
    assert!(node < preacts.dim(), "softmax node {node} out of range");
    // exp overflows past ~709.78; capping the exponent keeps the lower sum
    // bound valid, and the output's lower bound then falls back to 0.
    const EXP_CAP: f64 = 700.0;
    let zi = preacts[node];
    let mut sum = Interval::point(1.0).expect("finite");
    let mut capped = false;
    for (j, zj) in preacts.components().iter().enumerate() {
        if j == node {
            continue;
        }
        let d = *zj - zi;
        let d = if d.hi() > EXP_CAP {
            capped = true;
            Interval::new(d.lo().min(EXP_CAP), EXP_CAP).expect("ordered")
        } else {
            d
        };
        sum = sum + d.exp();
    }
    let r = sum.recip().expect("sum >= 1");
    let lo = if capped { 0.0 } else { r.lo().max(0.0) };
    Interval::new(lo, r.hi().min(1.0)).expect("within [0, 1]")
}

/// Layered feed-forward classifier with 1-of-M output coding: output `i`
/// scores class `class_labels[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
    class_labels: Vec<String>,
}

impl MlpModel {
    pub fn new(layers: Vec<Layer>, class_labels: Vec<String>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::InvalidModel("model has no layers".into()));
        };
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].cols != pair[0].rows {
                return Err(Error::InvalidModel(format!(
                    "layer {} expects {} inputs but layer {i} produces {}",
                    i + 1,
                    pair[1].cols,
                    pair[0].rows
                )));
            }
        }
        if let Some(i) = layers[..layers.len() - 1]
            .iter()
            .position(|l| l.activation == Activation::Softmax)
        {
            return Err(Error::InvalidModel(format!(
                "softmax is only allowed on the output layer (found on layer {i})"
            )));
        }
        if class_labels.len() != last.rows {
            return Err(Error::InvalidModel(format!(
                "{} class labels for {} outputs",
                class_labels.len(),
                last.rows
            )));
        }
        Ok(MlpModel {
            layers,
            class_labels,
        })
    }

    /// Model whose classes are labelled `"1"..="m"`.
    pub fn with_numbered_classes(layers: Vec<Layer>) -> Result<Self> {
        let m = layers.last().map_or(0, Layer::rows);
        Self::new(layers, (1..=m).map(|c| c.to_string()).collect())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    fn check_input(&self, n: usize) -> Result<()> {
        if n == self.input_dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: n,
            })
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        let mut a = x.to_vec();
        for layer in &self.layers {
            let mut z = layer.preactivate(&a);
            apply_activation(layer.activation, &mut z);
            a = z;
        }
        Ok(a)
    }

    /// Index of the largest output; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// Natural inclusion function of [`MlpModel::forward`].
    pub fn forward_box(&self, bx: &IvBox) -> Result<IvBox> {
        self.check_input(bx.dim())?;
        let mut a = bx.components().to_vec();
        for layer in &self.layers {
            a = apply_activation_box(layer.activation, layer.preactivate_box(&a));
        }
        Ok(IvBox::from_vec_unchecked(a))
    }

    /// Inclusion function for the one-dimensional slice through `x` along
    /// feature `k` (see [`SliceInclusion`]).
    pub fn slice(&self, x: &[f64], k: usize) -> Result<SliceInclusion<'_>> {
        SliceInclusion::new(self, x, k)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Enclosure of the network's outputs as feature `k` ranges over an
/// interval while all other features stay fixed at a pattern's values.
///
/// The first-layer contribution of the fixed features is enclosed once at
/// construction, so each evaluation costs one column of the first layer
/// plus the remaining layers.
#[derive(Clone, Debug)]
pub struct SliceInclusion<'a> {
    model: &'a MlpModel,
    feature: usize,
    pattern: Vec<f64>,
    fixed_part: Vec<Interval>,
}

impl<'a> SliceInclusion<'a> {
    fn new(model: &'a MlpModel, x: &[f64], k: usize) -> Result<Self> {
        model.check_input(x.len())?;
        if k >= x.len() {
            return Err(Error::IndexOutOfRange {
                what: "feature",
                index: k,
                limit: x.len(),
            });
        }
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite feature value {bad}")));
        }
        let first = &model.layers[0];
        let fixed_part = (0..first.rows)
            .map(|i| {
                first
                    .row(i)
                    .iter()
                    .zip(x)
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .fold(point(first.biases[i]), |acc, (_, (&w, &v))| {
                        acc + point(v).scale(w)
                    })
            })
            .collect();
        Ok(SliceInclusion {
            model,
            feature: k,
            pattern: x.to_vec(),
            fixed_part,
        })
    }

    pub fn feature(&self) -> usize {
        self.feature
    }

    pub fn pattern(&self) -> &[f64] {
        &self.pattern
    }

    /// Point evaluation of output `node` with feature `k` set to `t`.
    pub fn eval_point(&self, t: f64, node: usize) -> f64 {
        let mut x = self.pattern.clone();
        x[self.feature] = t;
        self.model.forward(&x).expect("dimension checked")[node]
    }

    /// Enclosure of all outputs for feature `k` in `t`.
    pub fn eval_all(&self, t: Interval) -> Vec<Interval> {
        let layers = &self.model.layers;
        let first = &layers[0];
        let z: Vec<Interval> = self
            .fixed_part
            .iter()
            .enumerate()
            .map(|(i, p)| *p + t.scale(first.weight(i, self.feature)))
            .collect();
        let mut a = apply_activation_box(first.activation, z);
        for layer in &layers[1..] {
            a = apply_activation_box(layer.activation, layer.preactivate_box(&a));
        }
        a
    }

    /// Enclosure of output `node` for feature `k` in `t`. Only the needed
    /// output row is computed unless the output layer is softmax.
    pub fn eval(&self, t: Interval, node: usize) -> Interval {
        let layers = &self.model.layers;
        if layers.len() == 1 || layers[layers.len() - 1].activation == Activation::Softmax {
            return self.eval_all(t)[node];
        }
        let first = &layers[0];
        let z: Vec<Interval> = self
            .fixed_part
            .iter()
            .enumerate()
            .map(|(i, p)| *p + t.scale(first.weight(i, self.feature)))
            .collect();
        let mut a = apply_activation_box(first.activation, z);
        for layer in &layers[1..layers.len() - 1] {
            a = apply_activation_box(layer.activation, layer.preactivate_box(&a));
        }
        let last = &layers[layers.len() - 1];
        let z = last.preactivate_row_box(node, &a);
        apply_activation_box(last.activation, vec![z])[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    pub(crate) fn random_model(sizes: &[usize], out: Activation, seed: u64) -> MlpModel {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 2 == sizes.len() { out } else { Activation::Tanh };
                let weights = (0..w[0] * w[1]).map(|_| rng.random_range(-1.5..1.5)).collect();
                let biases = (0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect();
                Layer::new(w[1], w[0], weights, biases, act).unwrap()
            })
            .collect();
        MlpModel::with_numbered_classes(layers).unwrap()
    }

    fn random_box(rng: &mut Xoshiro256PlusPlus, n: usize) -> IvBox {
        let bounds: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                (a.min(b), a.max(b))
            })
            .collect();
        IvBox::from_bounds(&bounds).unwrap()
    }

    fn sample(rng: &mut Xoshiro256PlusPlus, bx: &IvBox) -> Vec<f64> {
        bx.components()
            .iter()
            .map(|c| {
                if c.is_degenerate() {
                    c.lo()
                } else {
                    rng.random_range(c.lo()..=c.hi())
                }
            })
            .collect()
    }

    #[test]
    fn zero_logistic_net_outputs_half() {
        let layers = vec![
            Layer::zeros(3, 4, Activation::Tanh).unwrap(),
            Layer::zeros(2, 3, Activation::Logistic).unwrap(),
        ];
        let m = MlpModel::with_numbered_classes(layers).unwrap();
        assert_eq!(m.forward(&[0.3, -0.2, 1.0, 0.9]).unwrap(), vec![0.5, 0.5]);
        let out = m
            .forward_box(&IvBox::from_bounds(&[(-1.0, 1.0); 4]).unwrap())
            .unwrap();
        for c in out.components() {
            assert!(c.contains(0.5));
            assert!(c.width() <= 2.0 * f64::EPSILON * 0.5);
        }
    }

    #[test]
    fn zero_softmax_net_is_uniform() {
        let layers = vec![
            Layer::zeros(5, 4, Activation::Tanh).unwrap(),
            Layer::zeros(10, 5, Activation::Softmax).unwrap(),
        ];
        let m = MlpModel::with_numbered_classes(layers).unwrap();
        for v in m.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap() {
            assert!((v - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_network_returns_input() {
        let w = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let l = Layer::new(3, 3, w, vec![0.0; 3], Activation::Identity).unwrap();
        let m = MlpModel::with_numbered_classes(vec![l]).unwrap();
        assert_eq!(m.forward(&[0.25, -3.0, 7.5]).unwrap(), vec![0.25, -3.0, 7.5]);
        assert!(matches!(
            m.forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, found: 1 })
        ));
    }

    #[test]
    fn model_validation() {
        let hidden_softmax = vec![
            Layer::zeros(3, 4, Activation::Softmax).unwrap(),
            Layer::zeros(2, 3, Activation::Logistic).unwrap(),
        ];
        assert!(MlpModel::with_numbered_classes(hidden_softmax).is_err());
        let broken_chain = vec![
            Layer::zeros(3, 4, Activation::Tanh).unwrap(),
            Layer::zeros(2, 5, Activation::Logistic).unwrap(),
        ];
        assert!(MlpModel::with_numbered_classes(broken_chain).is_err());
        assert!(Layer::new(2, 2, vec![0.0; 3], vec![0.0; 2], Activation::Tanh).is_err());
        assert!(Layer::new(1, 1, vec![f64::NAN], vec![0.0], Activation::Tanh).is_err());
    }

    #[test]
    fn softmax_box_examples() {
        let zeros = IvBox::from_point(&[0.0, 0.0, 0.0]).unwrap();
        let s = softmax_box(&zeros, 0);
        assert!(s.contains(1.0 / 3.0));
        assert!(s.width() <= 4.0 * (1.0f64 / 3.0).next_up() - 4.0 / 3.0 + 1e-30);

        let peaked = IvBox::from_point(&[10.0, 0.0]).unwrap();
        let s = softmax_box(&peaked, 0);
        let oracle = 1.0 / (1.0 + (-10.0f64).exp());
        assert!(s.contains(oracle));
        assert!(s.lo() >= 0.9999 && s.hi() <= 1.0);

        let z = [0.3, -1.2, 2.5, 0.0];
        let mut scalar = z.to_vec();
        softmax_in_place(&mut scalar);
        let bx = IvBox::from_point(&z).unwrap();
        for (i, v) in scalar.iter().enumerate() {
            assert!(softmax_box(&bx, i).contains(*v));
        }
    }

    #[test]
    fn softmax_box_survives_huge_gaps() {
        let bx = IvBox::from_bounds(&[(-900.0, -800.0), (0.0, 1.0)]).unwrap();
        let s = softmax_box(&bx, 0);
        assert_eq!(s.lo(), 0.0);
        assert!(s.hi() < 1e-300);
    }

    #[test]
    fn thin_box_gives_thin_output() {
        let m = random_model(&[16, 10, 5], Activation::Softmax, 3);
        let x: Vec<f64> = (0..16).map(|i| (i as f64 / 8.0) - 1.0).collect();
        let out = m.forward_box(&IvBox::from_point(&x).unwrap()).unwrap();
        let f = m.forward(&x).unwrap();
        for (c, v) in out.components().iter().zip(&f) {
            assert!(c.contains(*v));
            assert!(c.width() <= 1e-10);
        }
    }

    #[test]
    fn forward_box_contains_sampled_outputs() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(17);
        let m = random_model(&[4, 2, 3], Activation::Logistic, 1);
        let bx = IvBox::from_bounds(&[(-1.0, 1.0); 4]).unwrap();
        let out = m.forward_box(&bx).unwrap();
        for _ in 0..10_000 {
            let x = sample(&mut rng, &bx);
            assert!(out.contains_point(&m.forward(&x).unwrap()));
        }
    }

    #[test]
    fn forward_box_is_inclusion_monotone() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        let m = random_model(&[4, 8, 3], Activation::Softmax, 2);
        for _ in 0..200 {
            let outer = random_box(&mut rng, 4);
            let inner_bounds: Vec<(f64, f64)> = outer
                .components()
                .iter()
                .map(|c| {
                    let a = rng.random_range(c.lo()..=c.hi());
                    let b = rng.random_range(c.lo()..=c.hi());
                    (a.min(b), a.max(b))
                })
                .collect();
            let inner = IvBox::from_bounds(&inner_bounds).unwrap();
            let fo = m.forward_box(&outer).unwrap();
            let fi = m.forward_box(&inner).unwrap();
            assert!(fi.is_subset(&fo).unwrap());
        }
    }

    #[test]
    fn softmax_points_form_distribution() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(8);
        let m = random_model(&[16, 10, 5], Activation::Softmax, 4);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = m.forward(&x).unwrap();
            assert!(y.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn slice_inclusion_agrees_with_forward_box() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
        for (sizes, out) in [
            (&[4usize, 2, 3][..], Activation::Logistic),
            (&[4, 8, 3][..], Activation::Softmax),
            (&[6, 5, 4, 3][..], Activation::Logistic),
        ] {
            let m = random_model(sizes, out, 11);
            for _ in 0..100 {
                let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
                let k = rng.random_range(0..sizes[0]);
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                let t = Interval::new(a.min(b), a.max(b)).unwrap();
                let slice = m.slice(&x, k).unwrap();
                let mut comps: Vec<Interval> =
                    x.iter().map(|&v| Interval::point(v).unwrap()).collect();
                comps[k] = t;
                let full = m.forward_box(&IvBox::new(comps).unwrap()).unwrap();
                let all = slice.eval_all(t);
                for node in 0..m.output_dim() {
                    let s = slice.eval(t, node);
                    assert_eq!(s, all[node]);
                    assert!((s.lo() - full[node].lo()).abs() < 1e-12);
                    assert!((s.hi() - full[node].hi()).abs() < 1e-12);
                    for _ in 0..10 {
                        let tt = rng.random_range(t.lo()..=t.hi());
                        assert!(s.contains(slice.eval_point(tt, node)));
                    }
                }
            }
        }
    }

    #[test]
    fn slice_rejects_bad_feature() {
        let m = random_model(&[4, 2, 3], Activation::Logistic, 1);
        assert!(matches!(
            m.slice(&[0.0; 4], 4),
            Err(Error::IndexOutOfRange { index: 4, .. })
        ));
    }

    #[test]
    fn argmax_ties_pick_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[0.1, 0.1, 0.1]), 0);
    }
}
