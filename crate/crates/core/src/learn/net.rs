use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense layer `a ↦ W a + b` with `W` of shape `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Layer {
    pub fn n_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.w.nrows()
    }
}

/// MLP lift `F_θ: ℝ^{n_y} → ℝ^{n_z}`: ReLU on every hidden layer, linear
/// output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformNet {
    layers: Vec<Layer>,
}

/// Activations kept for the backward pass; rows are samples.
pub struct ForwardCache {
    /// Input to each layer (`inputs[0]` is the batch itself).
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    /// Sign pattern of every hidden pre-activation; finite differences are
    /// only meaningful while this stays fixed.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.pre.iter().flat_map(|p| p.iter().map(|v| *v > 0.0)).collect()
    }
}

impl TransformNet {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.b.len() != l.n_out() {
                return Err(Error::Shape(format!("layer {i}: bias length {} for {} outputs", l.b.len(), l.n_out())));
            }
            if i > 0 && layers[i - 1].n_out() != l.n_in() {
                return Err(Error::Shape(format!(
                    "layer {i} expects {} inputs but layer {} produces {}",
                    l.n_in(),
                    i - 1,
                    layers[i - 1].n_out()
                )));
            }
            if l.w.iter().chain(l.b.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("parameters of layer {i}")));
            }
        }
        Ok(Self { layers })
    }

    /// Fan-in uniform initialization `U(−1/√fan_in, 1/√fan_in)` for every
    /// weight and bias.
    pub fn random<R: Rng>(n_y: usize, hidden: &[usize], n_z: usize, rng: &mut R) -> Self {
        let mut dims = vec![n_y];
        dims.extend_from_slice(hidden);
        dims.push(n_z);
        let layers = dims
            .windows(2)
            .map(|d| {
                let bound = 1.0 / (d[0] as f64).sqrt();
                Layer {
                    w: DMatrix::from_fn(d[1], d[0], |_, _| rng.random_range(-bound..bound)),
                    b: DVector::from_fn(d[1], |_, _| rng.random_range(-bound..bound)),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(n_y: usize, hidden: &[usize], n_z: usize) -> Self {
        let mut dims = vec![n_y];
        dims.extend_from_slice(hidden);
        dims.push(n_z);
        let layers = dims
            .windows(2)
            .map(|d| Layer {
                w: DMatrix::zeros(d[1], d[0]),
                b: DVector::zeros(d[1]),
            })
            .collect();
        Self { layers }
    }

    /// Single linear layer `z = M y`.
    pub fn linear(m: DMatrix<f64>) -> Self {
        let b = DVector::zeros(m.nrows());
        Self { layers: vec![Layer { w: m, b }] }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn n_y(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_z(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out()
    }

    pub fn hidden(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(Layer::n_out).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn lift(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let z = self.lift_batch(&DMatrix::from_row_slice(1, y.len(), y.as_slice()))?;
        Ok(z.row(0).transpose())
    }

    /// Lifts every row of `y`.
    pub fn lift_batch(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.forward(y)?.0)
    }

    pub fn forward(&self, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, ForwardCache)> {
        if y.ncols() != self.n_y() {
            return Err(Error::Dimension(format!("lift expects {} output channels, got {}", self.n_y(), y.ncols())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lift input".into()));
        }
        let last = self.layers.len() - 1;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(last),
        };
        let mut a = y.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut pre = &a * l.w.transpose();
            for mut row in pre.row_iter_mut() {
                row += l.b.transpose();
            }
            if pre.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("pre-activation of layer {i}")));
            }
            cache.inputs.push(a);
            if i == last {
                return Ok((pre, cache));
            }
            a = pre.map(|v| v.max(0.0));
            cache.pre.push(pre);
        }
        unreachable!("network has at least one layer")
    }

    /// Parameter gradients given `∂ℒ/∂Z` for the rows of a cached forward
    /// pass.
    pub fn backward(&self, cache: &ForwardCache, dz: &DMatrix<f64>) -> Vec<Layer> {
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut delta = dz.clone();
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let gw = delta.transpose() * &cache.inputs[i];
            let gb = DVector::from_fn(l.n_out(), |r, _| delta.column(r).sum());
            grads.push(Layer { w: gw, b: gb });
            if i > 0 {
                let mut d = &delta * &l.w;
                d.zip_apply(&cache.pre[i - 1], |g, p| {
                    if p <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = d;
            }
        }
        grads.reverse();
        grads
    }
}
