//! Multi-layer perceptron with tanh hidden layers and a linear output.

use super::rng::RngStream;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use super::Scalar;
use crate::{Error, Result};

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Linear,
}

/// Fully connected network: `dims[0] -> dims[1] -> ... -> dims.last()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    weights: Vec<Tensor<F>>, // each [out, in]
    biases: Vec<Tensor<F>>,  // each [out]
    activation: Activation,
}

/// Tape handles for one registration of an [`Mlp`]'s parameters.
pub struct MlpVars {
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
}

impl<F: Scalar> Mlp<F> {
    /// Scaled-uniform initialization: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
    pub fn new(dims: &[usize], activation: Activation, rng: &mut RngStream) -> Self {
        assert!(dims.len() >= 2, "Mlp needs at least input and output dims");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let values: Vec<F> = (0..fan_in * fan_out)
                .map(|_| F::from_f64_c(rng.uniform_in(-a, a)))
                .collect();
            weights.push(Tensor::new(vec![fan_out, fan_in], values).unwrap());
            biases.push(Tensor::zeros(vec![fan_out]));
        }
        Mlp {
            weights,
            biases,
            activation,
        }
    }

    pub fn zeros(dims: &[usize], activation: Activation) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in dims.windows(2) {
            weights.push(Tensor::zeros(vec![pair[1], pair[0]]));
            biases.push(Tensor::zeros(vec![pair[1]]));
        }
        Mlp {
            weights,
            biases,
            activation,
        }
    }

    /// Single linear layer with explicit weights (used by tests and the head).
    pub fn from_layers(
        weights: Vec<Tensor<F>>,
        biases: Vec<Tensor<F>>,
        activation: Activation,
    ) -> Self {
        assert_eq!(weights.len(), biases.len());
        Mlp {
            weights,
            biases,
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().unwrap().rows()
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight(&self, layer: usize) -> &Tensor<F> {
        &self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &Tensor<F> {
        &self.biases[layer]
    }

    /// Parameter tensors in a fixed order (w0, b0, w1, b1, ...).
    pub fn params(&self) -> Vec<&Tensor<F>> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<F>> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w as &mut Tensor<F>, b as &mut Tensor<F>])
            .collect()
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::shape(
                "mlp_forward input dimension",
                self.input_dim(),
                len,
            ));
        }
        Ok(())
    }

    /// Plain forward pass on values.
    pub fn forward(&self, input: &[F]) -> Result<Vec<F>> {
        self.check_input(input.len())?;
        let mut h = input.to_vec();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let (m, n) = (w.rows(), w.cols());
            let mut next = vec![F::zero(); m];
            for i in 0..m {
                let mut acc = b.values()[i];
                for j in 0..n {
                    acc += w.values()[i * n + j] * h[j];
                }
                next[i] = acc;
            }
            if l < last && self.activation == Activation::Tanh {
                for v in next.iter_mut() {
                    *v = v.tanh();
                }
            }
            h = next;
        }
        Ok(h)
    }

    /// Register all parameters as trainable leaves on `tape`.
    pub fn register(&self, tape: &mut Tape<F>) -> MlpVars {
        MlpVars {
            weights: self.weights.iter().map(|w| tape.param(w)).collect(),
            biases: self.biases.iter().map(|b| tape.param(b)).collect(),
        }
    }

    /// Differentiable forward pass through previously registered parameters.
    pub fn forward_on(&self, tape: &mut Tape<F>, vars: &MlpVars, input: Var) -> Result<Var> {
        self.check_input(tape.values(input).len())?;
        let mut h = input;
        let last = self.weights.len() - 1;
        for l in 0..self.weights.len() {
            let wx = tape.matvec(vars.weights[l], h);
            h = tape.add(wx, vars.biases[l]);
            if l < last && self.activation == Activation::Tanh {
                h = tape.tanh(h);
            }
        }
        Ok(h)
    }

    /// Accumulate tape gradients back into caller-owned gradient tensors.
    pub fn accumulate_grads(
        &self,
        grads: &super::tape::Gradients<F>,
        vars: &MlpVars,
        out: &mut [Tensor<F>],
    ) {
        let mut slot = 0;
        for l in 0..self.weights.len() {
            for (dst, src) in out[slot]
                .values_mut()
                .iter_mut()
                .zip(grads.wrt(vars.weights[l]))
            {
                *dst += *src;
            }
            slot += 1;
            for (dst, src) in out[slot]
                .values_mut()
                .iter_mut()
                .zip(grads.wrt(vars.biases[l]))
            {
                *dst += *src;
            }
            slot += 1;
        }
    }
}
