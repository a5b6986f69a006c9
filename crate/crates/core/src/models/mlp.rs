//! Two-layer perceptron: `Linear(d, h) -> ReLU -> [Dropout] -> Linear(h, K)`,
//! trained with Adam on cross-entropy and a step learning-rate schedule.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::boosting::softmax;
use super::spec::{DefenseMode, ModelSpec};
use crate::data::EncodedMatrix;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub step_size: usize,
    pub step_gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
}

impl MlpParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let p = spec.params();
        let defended = spec.defense_mode == DefenseMode::Defended;
        let out = Self {
            hidden: p.usize("hidden_units", 128)?,
            learning_rate: p.f64("learning_rate", if defended { 1e-4 } else { 1e-3 })?,
            weight_decay: p.f64("weight_decay", 1e-7)?,
            step_size: p.usize("step_size", 50)?.max(1),
            step_gamma: p.f64("step_gamma", 0.1)?,
            epochs: p.usize("epochs", 200)?,
            batch_size: p.usize("batch_size", 200)?.max(1),
            dropout: p.f64("dropout", if defended { 0.5 } else { 0.0 })?,
        };
        if out.hidden == 0 || !(0.0..1.0).contains(&out.dropout) || out.learning_rate <= 0.0 {
            return Err(Error::ModelSpec(
                "mlp needs hidden_units >= 1, dropout in [0, 1) and a positive learning rate"
                    .into(),
            ));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    n_inputs: usize,
    n_hidden: usize,
    n_classes: usize,
    /// `w1 (h x d) | b1 (h) | w2 (K x h) | b2 (K)`, row-major.
    params: Vec<f64>,
}

struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    len: usize,
}

impl Mlp {
    fn layout(&self) -> Layout {
        let (d, h, k) = (self.n_inputs, self.n_hidden, self.n_classes);
        Layout {
            w1: 0,
            b1: h * d,
            w2: h * d + h,
            b2: h * d + h + k * h,
            len: h * d + h + k * h + k,
        }
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization for weights
    /// and biases.
    pub fn init(n_inputs: usize, n_hidden: usize, n_classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut m = Self {
            n_inputs,
            n_hidden,
            n_classes,
            params: Vec::new(),
        };
        let l = m.layout();
        m.params = vec![0.0; l.len];
        let b1 = 1.0 / (n_inputs.max(1) as f64).sqrt();
        let b2 = 1.0 / (n_hidden as f64).sqrt();
        for (i, p) in m.params.iter_mut().enumerate() {
            let bound = if i < l.w2 { b1 } else { b2 };
            *p = rng.gen_range(-bound..bound);
        }
        m
    }

    pub(crate) fn fit(spec: &ModelSpec, data: &EncodedMatrix) -> Result<Self> {
        let params = MlpParams::from_spec(spec)?;
        let mut rng = seed::rng(seed::derive_seed(spec.seed, &[0]));
        let mut model = Self::init(data.n_features(), params.hidden, data.n_classes, &mut rng);
        model.train_epochs(data, &params, 0..params.epochs, &mut rng);
        Ok(model)
    }

    /// Run the given epochs (indices drive the step schedule) with a fresh
    /// optimizer state.
    pub(crate) fn train_epochs(
        &mut self,
        data: &EncodedMatrix,
        params: &MlpParams,
        epochs: std::ops::Range<usize>,
        rng: &mut ChaCha8Rng,
    ) {
        let mut adam = Adam::new(self.params.len());
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut grad = vec![0.0; self.params.len()];
        let mut scratch = Scratch::new(self.n_hidden, self.n_classes);
        for epoch in epochs {
            let lr = params.learning_rate
                * params.step_gamma.powi((epoch / params.step_size) as i32);
            order.shuffle(rng);
            for batch in order.chunks(params.batch_size) {
                grad.fill(0.0);
                for &i in batch {
                    self.accumulate(
                        data.x.row(i),
                        data.labels[i],
                        1.0 / batch.len() as f64,
                        params.dropout,
                        rng,
                        &mut grad,
                        &mut scratch,
                    );
                }
                for (g, p) in grad.iter_mut().zip(&self.params) {
                    *g += params.weight_decay * p;
                }
                adam.step(&mut self.params, &grad, lr);
            }
        }
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    /// Add `scale * dL/dparams` for one example to `grad`; returns the loss.
    #[allow(clippy::too_many_arguments)]
    fn accumulate(
        &self,
        x: &[f64],
        y: usize,
        scale: f64,
        dropout: f64,
        rng: &mut ChaCha8Rng,
        grad: &mut [f64],
        s: &mut Scratch,
    ) -> f64 {
        let (d, h, k) = (self.n_inputs, self.n_hidden, self.n_classes);
        let l = self.layout();
        let keep = 1.0 - dropout;
        for j in 0..h {
            let w = &self.params[l.w1 + j * d..l.w1 + (j + 1) * d];
            let pre: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.params[l.b1 + j];
            let mask = if dropout > 0.0 {
                if rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            } else {
                1.0
            };
            s.mask[j] = mask;
            s.hidden[j] = pre.max(0.0) * mask;
            s.active[j] = pre > 0.0;
        }
        for c in 0..k {
            let w = &self.params[l.w2 + c * h..l.w2 + (c + 1) * h];
            s.logits[c] = w.iter().zip(&s.hidden).map(|(a, b)| a * b).sum::<f64>()
                + self.params[l.b2 + c];
        }
        softmax(&s.logits, &mut s.proba);
        let loss = -s.proba[y].max(1e-300).ln();
        s.dhidden.fill(0.0);
        for c in 0..k {
            let r = scale * (s.proba[c] - f64::from(u8::from(c == y)));
            grad[l.b2 + c] += r;
            let w = &self.params[l.w2 + c * h..l.w2 + (c + 1) * h];
            let g = &mut grad[l.w2 + c * h..l.w2 + (c + 1) * h];
            for j in 0..h {
                g[j] += r * s.hidden[j];
                s.dhidden[j] += r * w[j];
            }
        }
        for j in 0..h {
            if !s.active[j] || s.mask[j] == 0.0 {
                continue;
            }
            let r = s.dhidden[j] * s.mask[j];
            grad[l.b1 + j] += r;
            let g = &mut grad[l.w1 + j * d..l.w1 + (j + 1) * d];
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += r * xi;
            }
        }
        loss
    }

    /// Mean loss and gradient over `data` without dropout.
    pub fn loss_and_grad(&self, data: &EncodedMatrix) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut s = Scratch::new(self.n_hidden, self.n_classes);
        let mut rng = seed::rng(0);
        let scale = 1.0 / data.len() as f64;
        let mut loss = 0.0;
        for i in 0..data.len() {
            loss += scale
                * self.accumulate(data.x.row(i), data.labels[i], scale, 0.0, &mut rng, &mut grad, &mut s);
        }
        (loss, grad)
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        let (d, h, k) = (self.n_inputs, self.n_hidden, self.n_classes);
        let l = self.layout();
        let hidden: Vec<f64> = (0..h)
            .map(|j| {
                let w = &self.params[l.w1 + j * d..l.w1 + (j + 1) * d];
                (w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.params[l.b1 + j]).max(0.0)
            })
            .collect();
        let logits: Vec<f64> = (0..k)
            .map(|c| {
                let w = &self.params[l.w2 + c * h..l.w2 + (c + 1) * h];
                w.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>() + self.params[l.b2 + c]
            })
            .collect();
        softmax(&logits, out);
    }
}

struct Scratch {
    hidden: Vec<f64>,
    mask: Vec<f64>,
    active: Vec<bool>,
    dhidden: Vec<f64>,
    logits: Vec<f64>,
    proba: Vec<f64>,
}

impl Scratch {
    fn new(h: usize, k: usize) -> Self {
        Self {
            hidden: vec![0.0; h],
            mask: vec![1.0; h],
            active: vec![false; h],
            dhidden: vec![0.0; h],
            logits: vec![0.0; k],
            proba: vec![0.0; k],
        }
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= lr * mhat / (vhat.sqrt() + Self::EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::models::ModelKind;

    fn toy() -> EncodedMatrix {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 0.3).cos(), 0.1 * i as f64])
            .collect();
        let labels = (0..12).map(|i| i % 3).collect();
        EncodedMatrix::from_parts(Matrix::from_rows(&rows), labels, 3)
    }

    #[test]
    fn backprop_matches_central_differences() {
        let data = toy();
        let mut rng = seed::rng(3);
        let mut m = Mlp::init(3, 5, 3, &mut rng);
        let (_, grad) = m.loss_and_grad(&data);
        let h = 1e-6;
        for j in 0..grad.len() {
            let orig = m.params[j];
            m.parameters_mut()[j] = orig + h;
            let up = m.loss_and_grad(&data).0;
            m.parameters_mut()[j] = orig - h;
            let dn = m.loss_and_grad(&data).0;
            m.parameters_mut()[j] = orig;
            let fd = (up - dn) / (2.0 * h);
            let denom = fd.abs().max(grad[j].abs()).max(1e-8);
            assert!(
                (fd - grad[j]).abs() / denom < 1e-4 || (fd - grad[j]).abs() < 1e-9,
                "param {j}: {fd} vs {}",
                grad[j]
            );
        }
    }

    #[test]
    fn training_reduces_loss() {
        let data = toy();
        let spec = ModelSpec::new(ModelKind::Mlp)
            .with("hidden_units", 16usize)
            .with("epochs", 300usize)
            .with("learning_rate", 0.01)
            .with("step_size", 1000usize);
        let mut rng = seed::rng(seed::derive_seed(0, &[0]));
        let start = Mlp::init(3, 16, 3, &mut rng).loss_and_grad(&data).0;
        let m = Mlp::fit(&spec, &data).unwrap();
        assert!(m.loss_and_grad(&data).0 < 0.5 * start);
    }
}
