use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::tape::{Tape, Var};
use crate::error::{CutsError, Result};
use crate::scalar::Scalar;

pub const DEFAULT_NEGATIVE_SLOPE: f64 = 0.05;

/// Fully connected stack `input -> hidden -> ... -> 1` with leaky-rectifier
/// activations between affine layers.
///
/// Parameters are stored flat as `[w0, b0, w1, b1, ...]` with `w_l: in×out`
/// and `b_l: 1×out`, which is also the order the optimizer sees them in.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    params: Vec<Array2<T>>,
    negative_slope: T,
}

impl<T: Scalar> Mlp<T> {
    /// `layers` counts affine maps, so `layers = 3` gives two hidden layers.
    /// Weights and biases start uniform on `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(
        input_width: usize,
        hidden_width: usize,
        layers: usize,
        negative_slope: T,
        rng: &mut R,
    ) -> Result<Self> {
        if input_width == 0 || layers == 0 || (layers > 1 && hidden_width == 0) {
            return Err(CutsError::Config(format!(
                "mlp needs positive widths and depth (input {input_width}, hidden {hidden_width}, layers {layers})"
            )));
        }
        let mut params = Vec::with_capacity(2 * layers);
        let mut fan_in = input_width;
        for l in 0..layers {
            let fan_out = if l + 1 == layers { 1 } else { hidden_width };
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            params.push(Array2::from_shape_simple_fn((fan_in, fan_out), || T::of(dist.sample(rng))));
            params.push(Array2::from_shape_simple_fn((1, fan_out), || T::of(dist.sample(rng))));
            fan_in = fan_out;
        }
        Ok(Mlp { params, negative_slope })
    }

    /// Builds from explicit `(weight, bias)` pairs.
    pub fn from_layers(layers: Vec<(Array2<T>, Array2<T>)>, negative_slope: T) -> Result<Self> {
        if layers.is_empty() {
            return Err(CutsError::Config("mlp needs at least one layer".into()));
        }
        let mut params = Vec::with_capacity(2 * layers.len());
        let mut prev: Option<usize> = None;
        for (i, (w, b)) in layers.into_iter().enumerate() {
            if prev.is_some_and(|p| p != w.nrows()) || b.dim() != (1, w.ncols()) {
                return Err(CutsError::Shape(format!("layer {i}: weight {:?}, bias {:?}", w.dim(), b.dim())));
            }
            prev = Some(w.ncols());
            params.push(w);
            params.push(b);
        }
        if prev != Some(1) {
            return Err(CutsError::Shape("final layer must have one output".into()));
        }
        Ok(Mlp { params, negative_slope })
    }

    pub fn layer_count(&self) -> usize {
        self.params.len() / 2
    }

    pub fn input_width(&self) -> usize {
        self.params[0].nrows()
    }

    pub fn hidden_width(&self) -> usize {
        if self.layer_count() > 1 {
            self.params[0].ncols()
        } else {
            0
        }
    }

    pub fn negative_slope(&self) -> T {
        self.negative_slope
    }

    pub fn weight(&self, layer: usize) -> &Array2<T> {
        &self.params[2 * layer]
    }

    pub fn bias(&self, layer: usize) -> &Array2<T> {
        &self.params[2 * layer + 1]
    }

    pub fn params(&self) -> &[Array2<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Array2<T>] {
        &mut self.params
    }

    /// Records the network on `tape` applied to `x` (rows are samples).
    /// Returns the output node and the parameter leaves in storage order.
    pub fn record(&self, tape: &mut Tape<T>, x: Var, trainable: bool) -> (Var, Vec<Var>) {
        let mut leaves = Vec::with_capacity(self.params.len());
        let mut h = x;
        let last = self.layer_count() - 1;
        for l in 0..=last {
            let (w, b) = if trainable {
                (tape.parameter(self.weight(l).clone()), tape.parameter(self.bias(l).clone()))
            } else {
                (tape.constant(self.weight(l).clone()), tape.constant(self.bias(l).clone()))
            };
            leaves.push(w);
            leaves.push(b);
            h = tape.affine(h, w, b);
            if l < last {
                h = tape.leaky_relu(h, self.negative_slope);
            }
        }
        (h, leaves)
    }

    /// Tape-free evaluation on a batch; returns a column of predictions.
    pub fn forward(&self, x: &Array2<T>) -> Result<Array2<T>> {
        if x.ncols() != self.input_width() {
            return Err(CutsError::Shape(format!(
                "mlp expects {} inputs, got {}",
                self.input_width(),
                x.ncols()
            )));
        }
        let slope = self.negative_slope;
        let last = self.layer_count() - 1;
        let mut h = x.dot(self.weight(0)) + self.bias(0);
        for l in 1..=last {
            h.mapv_inplace(|v| if v > T::zero() { v } else { v * slope });
            h = h.dot(self.weight(l)) + self.bias(l);
        }
        Ok(h)
    }
}
