use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::rng::{self, Rng};

/// Elementwise nonlinearity applied after every dense layer of an [`Mlp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `tanh(z)`, derivative `1 - tanh(z)^2`.
    Tanh,
    /// `ln(1 + e^z)`, derivative `1 / (1 + e^-z)`.
    Softplus,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Softplus => z.mapv_inplace(|v| if v > 30.0 { v } else { v.exp().ln_1p() }),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            // sigmoid(z) = 1 - e^{-softplus(z)}
            Activation::Softplus => -(-a).exp_m1(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `inputs x outputs`
    pub weight: Array2<f64>,
    /// `1 x outputs`
    pub bias: Array2<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense { weight: Array2::zeros((inputs, outputs)), bias: Array2::zeros((1, outputs)) }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let a = (6.0 / (inputs + outputs) as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((inputs, outputs), || rng::uniform(rng, -a, a));
        Dense { weight, bias: Array2::zeros((1, outputs)) }
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Values recorded during [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpTape {
    inputs: Vec<Array2<f64>>,
    outputs: Vec<Array2<f64>>,
}

impl MlpTape {
    pub fn rows(&self) -> usize {
        self.inputs.first().map_or(0, |x| x.nrows())
    }
}

impl Mlp {
    /// Layer widths `dims[0] -> dims[1] -> ... -> dims[last]`.
    pub fn glorot(dims: &[usize], rng: &mut Rng) -> Self {
        Mlp { layers: dims.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect() }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp { layers: self.layers.iter().map(|d| Dense::zeros(d.weight.nrows(), d.weight.ncols())).collect() }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn forward(&self, x: Array2<f64>, act: Activation) -> (Array2<f64>, MlpTape) {
        let mut tape = MlpTape { inputs: Vec::with_capacity(self.layers.len()), outputs: Vec::with_capacity(self.layers.len()) };
        let mut h = x;
        for layer in &self.layers {
            let mut z = layer.forward(&h);
            act.apply(&mut z);
            tape.inputs.push(h);
            tape.outputs.push(z.clone());
            h = z;
        }
        (h, tape)
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the MLP input.
    pub fn backward(&self, tape: &MlpTape, d_out: Array2<f64>, act: Activation, grad: &mut Mlp) -> Array2<f64> {
        let mut d = d_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let out = &tape.outputs[i];
            ndarray::Zip::from(&mut d).and(out).for_each(|g, &a| *g *= act.derivative_from_output(a));
            grad.layers[i].weight += &tape.inputs[i].t().dot(&d);
            grad.layers[i].bias += &d.sum_axis(Axis(0)).insert_axis(Axis(0));
            d = d.dot(&layer.weight.t());
        }
        d
    }
}
