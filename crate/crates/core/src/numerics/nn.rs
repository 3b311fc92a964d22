//! Fully connected networks with manual backprop and an Adam optimizer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `in × out`
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
}

/// Activations recorded by [`DenseNet::forward`], consumed by backward.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Matrix>,
    outputs: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| Matrix::zeros(l.weight.rows(), l.weight.cols())).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.add_assign(b).expect("matching gradient shapes");
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            w.scale_in_place(s);
        }
        for b in &mut self.biases {
            for x in b.iter_mut() {
                *x *= s;
            }
        }
    }

    /// Flat views in parameter order (w0, b0, w1, b1, ...).
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| *x == 0.0))
    }
}

impl DenseNet {
    /// Glorot-uniform weights and zero biases. `widths` lists every layer
    /// width including input and output; `activations` has one entry per
    /// weight layer.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 || activations.len() != widths.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "{} widths need {} activations, got {}",
                widths.len(),
                widths.len().saturating_sub(1),
                activations.len()
            )));
        }
        if widths.contains(&0) {
            return Err(Error::InvalidArgument("layer widths must be positive".into()));
        }
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    weight: Matrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-limit..limit)),
                    bias: vec![0.0; fan_out],
                    activation,
                }
            })
            .collect();
        Ok(DenseNet { layers })
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.rows())
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.cols())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.rows() * l.weight.cols() + l.bias.len()).sum()
    }

    /// Check that consecutive layers chain and every parameter is finite.
    pub fn validate(&self) -> Result<()> {
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].weight.cols() != pair[1].weight.rows() {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].weight.cols(),
                    i + 1,
                    pair[1].weight.rows()
                )));
            }
        }
        for l in &self.layers {
            if l.bias.len() != l.weight.cols() {
                return Err(Error::Shape("bias length differs from layer width".into()));
            }
            if !l.weight.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidArgument("non-finite network parameter".into()));
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.input_width() {
            return Err(Error::Shape(format!("network expects {} inputs, got {}", self.input_width(), x.cols())));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let mut z = cur.matmul(&layer.weight)?;
            for i in 0..z.rows() {
                for (v, b) in z.row_mut(i).iter_mut().zip(&layer.bias) {
                    *v = layer.activation.apply(*v + b);
                }
            }
            inputs.push(cur);
            cur = z.clone();
            outputs.push(z);
        }
        Ok((cur, ForwardCache { inputs, outputs }))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x)?.0)
    }

    /// Parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Matrix) -> Result<(Gradients, Matrix)> {
        let last = cache.outputs.last().ok_or_else(|| Error::InvalidArgument("empty cache".into()))?;
        if last.shape() != grad_output.shape() {
            return Err(Error::Shape(format!(
                "grad_output {}x{} vs output {}x{}",
                grad_output.rows(),
                grad_output.cols(),
                last.rows(),
                last.cols()
            )));
        }
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut biases = Vec::with_capacity(self.layers.len());
        let mut g = grad_output.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.outputs[idx];
            if layer.activation != Activation::Linear {
                for (gv, yv) in g.as_mut_slice().iter_mut().zip(y.as_slice()) {
                    *gv *= layer.activation.derivative_from_output(*yv);
                }
            }
            weights.push(cache.inputs[idx].t_matmul(&g)?);
            biases.push(g.col_sums());
            g = g.matmul_t(&layer.weight)?;
        }
        weights.reverse();
        biases.reverse();
        Ok((Gradients { weights, biases }, g))
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.weight.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    /// One Adam update of every parameter (descent direction).
    pub fn adam_step(&mut self, grads: &Gradients, opt: &mut Adam) -> Result<()> {
        if grads.weights.len() != self.layers.len() {
            return Err(Error::Shape("gradient layer count differs from network".into()));
        }
        let g = grads.slices();
        let mut p = self.params_mut();
        opt.step(&mut p, &g)
    }
}

/// Adam optimizer state for a fixed, ordered list of parameter tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam { lr, beta1, beta2, eps, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!("{} parameter tensors, {} gradients", params.len(), grads.len())));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::Shape("optimizer state was built for a different parameter list".into()));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if p.len() != g.len() || m.len() != p.len() {
                return Err(Error::Shape("parameter and gradient lengths differ".into()));
            }
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_layer_matches_analytic_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DenseNet::new(&[3, 2], &[Activation::Linear], &mut rng).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 0.5]]).unwrap();
        let t = Matrix::from_rows(&[vec![0.3, -0.1]]).unwrap();
        let (y, cache) = net.forward(&x).unwrap();
        // loss = ½‖y − t‖² ⇒ dL/dy = y − t, dL/dW = xᵀ(y − t)
        let dy = y.sub(&t).unwrap();
        let (g, _) = net.backward(&cache, &dy).unwrap();
        let expected = x.t_matmul(&dy).unwrap();
        assert!(g.weights[0].sub(&expected).unwrap().frobenius_norm() < 1e-15);
        assert_eq!(g.biases[0], dy.row(0).to_vec());
    }

    #[test]
    fn adam_with_zero_gradient_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = DenseNet::new(&[2, 3, 1], &[Activation::Sigmoid, Activation::Linear], &mut rng).unwrap();
        let before = net.clone();
        let mut opt = Adam::new(0.01);
        let zero = Gradients::zeros_like(&net);
        for _ in 0..5 {
            net.adam_step(&zero, &mut opt).unwrap();
        }
        assert_eq!(net, before);
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(DenseNet::new(&[2, 3], &[], &mut rng).is_err());
        let net = DenseNet::new(&[2, 3], &[Activation::Relu], &mut rng).unwrap();
        assert!(net.forward(&Matrix::zeros(1, 4)).is_err());
        let (_, cache) = net.forward(&Matrix::zeros(1, 2)).unwrap();
        assert!(net.backward(&cache, &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut opt = Adam::new(0.1);
        for _ in 0..500 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            opt.step(&mut [x.as_mut_slice()], &[g.as_slice()]).unwrap();
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2), "{x:?}");
    }
}
